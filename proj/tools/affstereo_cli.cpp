// affstereo: command-line front end for the stereo-microscope pipeline.
//
// Every command exits 0 on success, 2 on input errors, 3 on numerical failures
// and 4 when bundle adjustment stops without converging. Failures print one
// JSON object on stderr.

#include "affstereo/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace affstereo;
using nlohmann::json;

namespace {

constexpr int kNotConverged = 4;

void report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Root seed for every random choice");
  cmd->add_option("--config", c.config, "Pipeline configuration JSON")->check(CLI::ExistingFile);
}

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config.empty()) cfg = pipeline_config_from_json(read_json(c.config));
  cfg.ransac.seed = RngSeed{c.seed.value_or(0)};
  return cfg;
}

SimScene load_scene(const std::string& path, const Common& c) {
  SimScene scene = path.empty() ? SimScene{} : scene_from_json(read_json(path));
  if (c.seed) scene.seed = RngSeed{*c.seed};
  return scene;
}

int not_converged(const char* what) {
  report_error("NotConverged", std::string(what) + ": bundle adjustment did not converge", kNotConverged);
  return kNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affine stereo microscope calibration, reconstruction and registration"};
  app.require_subcommand(1);
  int status = 0;

  // simulate
  Common sim_common;
  std::string sim_scene, sim_out = "sim";
  auto* sim = app.add_subcommand("simulate", "Write a synthetic scene and its ground truth");
  add_common(sim, sim_common);
  sim->add_option("--scene", sim_scene, "Scene JSON (defaults when omitted)")->check(CLI::ExistingFile);
  sim->add_option("-o,--out", sim_out, "Output directory");
  sim->callback([&] {
    const PipelineConfig cfg = load_config(sim_common);
    const SimScene scene = load_scene(sim_scene, sim_common);
    write_simulation(scene, run_simulation(scene, cfg), sim_out);
  });

  // detect
  std::vector<std::string> heatmaps;
  std::string detect_out = "detections.csv";
  auto* detect = app.add_subcommand("detect", "Sub-pixel keypoints from per-keypoint heatmaps");
  detect->add_option("--heatmap", heatmaps, "Heatmap file, one per keypoint channel")
      ->required()
      ->check(CLI::ExistingFile);
  detect->add_option("-o,--out", detect_out, "Detections CSV");
  detect->callback([&] {
    std::vector<KeypointDetection> found;
    for (std::size_t k = 0; k < heatmaps.size(); ++k)
      found.push_back(extract_keypoint(read_heatmap(heatmaps[k]), static_cast<int>(k) + 1));
    write_file_atomic(detect_out, detections_csv(found));
  });

  // calibrate
  Common cal_common;
  std::string cal_in, cal_out = files::calibration, cal_refined;
  auto* cal = app.add_subcommand("calibrate", "RANSAC-DLT and bundle adjustment of both cameras");
  add_common(cal, cal_common);
  cal->add_option("--correspondences", cal_in, "Correspondence CSV")->required()->check(CLI::ExistingFile);
  cal->add_option("-o,--out", cal_out, "Calibration JSON");
  cal->add_option("--refined", cal_refined, "Also write the refined correspondences CSV");
  cal->callback([&] {
    const PipelineConfig cfg = load_config(cal_common);
    CorrespondenceSet used;
    const CalibrationReport r = run_calibration(read_correspondences(cal_in), cfg, &used);
    write_file_atomic(cal_out, dump_json(calibration_json(r)));
    if (!cal_refined.empty())
      write_file_atomic(cal_refined, correspondences_csv(refined_correspondences(used, r.calibration)));
    if (!r.calibration.converged) status = not_converged("calibrate");
  });

  // triangulate
  Common tri_common;
  std::string tri_cal, tri_matches, tri_out = files::reconstruction, tri_pixels;
  std::optional<double> tri_threshold;
  std::optional<std::string> tri_stage;
  auto* tri = app.add_subcommand("triangulate", "Epipolar filtering and triangulation of matches");
  add_common(tri, tri_common);
  tri->add_option("--calibration", tri_cal, "Calibration JSON")->required()->check(CLI::ExistingFile);
  tri->add_option("--matches", tri_matches, "Match CSV")->required()->check(CLI::ExistingFile);
  tri->add_option("-o,--out", tri_out, "Point cloud PLY");
  tri->add_option("--pixels-out", tri_pixels, "Left pixels of the triangulated points (CSV)");
  tri->add_option("--threshold-px", tri_threshold, "Epipolar distance threshold")->check(CLI::PositiveNumber);
  tri->add_option("--fundamental-stage", tri_stage, "Cameras used for filtering: ba or dlt")
      ->check(CLI::IsMember({"ba", "dlt"}));
  tri->callback([&] {
    PipelineConfig cfg = load_config(tri_common);
    if (tri_threshold) cfg.threshold_px = *tri_threshold;
    if (tri_stage) cfg.fundamental_stage = *tri_stage;
    const StereoRig rig = rig_from_calibration_json(read_json(tri_cal), cfg.fundamental_stage);
    const Reconstruction r = run_triangulation(rig, read_matches(tri_matches), cfg.threshold_px);
    write_file_atomic(tri_out, to_ply(reconstruction_ply(r, cfg.fundamental_stage)));
    std::filesystem::path pix = tri_pixels;
    if (pix.empty()) pix = std::filesystem::path(tri_out).replace_extension("").string() + "_pixels.csv";
    write_file_atomic(pix, pixels_csv(r.left_pixels));
  });

  // fit-surface
  Common fit_common;
  std::string fit_points, fit_pixels, fit_out = files::surface, fit_mesh;
  std::optional<int> fit_mesh_res;
  std::optional<double> fit_mu, fit_eps;
  auto* fit = app.add_subcommand("fit-surface", "Robust B-spline surface over the image domain");
  add_common(fit, fit_common);
  fit->add_option("--points", fit_points, "Point cloud PLY")->required()->check(CLI::ExistingFile);
  fit->add_option("--pixels", fit_pixels, "Left pixel of every point (CSV)")->required()->check(CLI::ExistingFile);
  fit->add_option("-o,--out", fit_out, "Surface JSON");
  fit->add_option("--emit-mesh", fit_mesh, "Write a sampled mesh PLY");
  fit->add_option("--mesh-res", fit_mesh_res, "Mesh samples per side")->check(CLI::Range(2, 100000));
  fit->add_option("--mu", fit_mu, "Bending weight")->check(CLI::NonNegativeNumber);
  fit->add_option("--epsilon-um", fit_eps, "Rejection threshold")->check(CLI::PositiveNumber);
  fit->callback([&] {
    PipelineConfig cfg = load_config(fit_common);
    if (fit_mesh_res) cfg.mesh_resolution = *fit_mesh_res;
    if (fit_mu) cfg.spline.mu = *fit_mu;
    if (fit_eps) cfg.spline.epsilon = *fit_eps;
    const PlyMesh cloud = read_ply(fit_points);
    const auto pixels = read_pixels(fit_pixels);
    if (pixels.size() != cloud.vertices.size())
      fail(ErrorKind::CountMismatch, "fit-surface: point and pixel counts differ");
    const SurfaceFit f = fit_surface(pixels, cloud.vertices, cfg.spline);
    write_file_atomic(fit_out, dump_json(surface_json(f, cfg.spline)));
    if (!fit_mesh.empty()) write_file_atomic(fit_mesh, to_ply(surface_mesh(f.surface, cfg.mesh_resolution)));
  });

  // register
  Common reg_common;
  std::string reg_rec, reg_mea, reg_pairs, reg_ref, reg_out = files::transform, reg_curve;
  std::optional<int> reg_window;
  bool reg_robust = false;
  auto* reg = app.add_subcommand("register", "Rigid camera-to-robot registration");
  add_common(reg, reg_common);
  auto* o_rec = reg->add_option("--reconstructed", reg_rec, "Reconstructed points CSV (x,y,z[,frame])")
                    ->check(CLI::ExistingFile);
  auto* o_mea = reg->add_option("--measured", reg_mea, "Robot points CSV (x,y,z[,frame])")->check(CLI::ExistingFile);
  auto* o_pairs = reg->add_option("--pairs", reg_pairs, "Combined CSV with a frame column")->check(CLI::ExistingFile);
  o_rec->needs(o_mea);
  o_mea->needs(o_rec);
  o_pairs->excludes(o_rec)->excludes(o_mea);
  reg->add_option("--window", reg_window, "Number of most recent frames to use")->check(CLI::PositiveNumber);
  reg->add_flag("--robust", reg_robust, "Refine with the sum-of-norms objective");
  reg->add_option("--reference", reg_ref, "Reference transform JSON for the error curve")->check(CLI::ExistingFile);
  reg->add_option("-o,--out", reg_out, "Transform JSON");
  reg->add_option("--curve", reg_curve, "Error curve CSV");
  reg->callback([&] {
    PipelineConfig cfg = load_config(reg_common);
    if (reg_window) cfg.window = *reg_window;
    if (reg_robust) cfg.robust = true;
    std::vector<RegistrationFrame> frames;
    if (!reg_pairs.empty())
      frames = read_registration_pairs(reg_pairs);
    else if (!reg_rec.empty())
      frames = group_by_frame(read_points(reg_rec), read_points(reg_mea));
    else
      fail(ErrorKind::InvalidArgument, "register: give --pairs or --reconstructed with --measured");
    std::optional<RigidTransform> reference;
    if (!reg_ref.empty()) {
      const json j = read_json(reg_ref);
      reference = transform_from_json(j.contains("motion") ? j.at("motion") : j);
    }
    RegistrationOptions opt;
    opt.robust = cfg.robust;
    const AccumulatedRegistration r = register_accumulated(frames, cfg.window, opt, reference);
    write_file_atomic(reg_out, dump_json(transform_json(r)));
    if (!reg_curve.empty()) write_file_atomic(reg_curve, error_curve_csv(r));
  });

  // pipeline
  Common pipe_common;
  std::string pipe_scene, pipe_out = "run";
  bool pipe_mesh = false;
  std::optional<double> pipe_threshold;
  std::optional<int> pipe_window, pipe_mesh_res;
  bool pipe_robust = false;
  auto* pipe = app.add_subcommand("pipeline", "Simulate a scene and run every stage on it");
  add_common(pipe, pipe_common);
  pipe->add_option("--scene", pipe_scene, "Scene JSON (defaults when omitted)")->check(CLI::ExistingFile);
  pipe->add_option("-o,--out", pipe_out, "Output directory");
  pipe->add_flag("--emit-mesh", pipe_mesh, "Also write surface_mesh.ply");
  pipe->add_option("--mesh-res", pipe_mesh_res, "Mesh samples per side")->check(CLI::Range(2, 100000));
  pipe->add_option("--threshold-px", pipe_threshold, "Epipolar distance threshold")->check(CLI::PositiveNumber);
  pipe->add_option("--window", pipe_window, "Registration window")->check(CLI::PositiveNumber);
  pipe->add_flag("--robust", pipe_robust, "Robust registration refinement");
  pipe->callback([&] {
    PipelineConfig cfg = load_config(pipe_common);
    const SimScene scene = load_scene(pipe_scene, pipe_common);
    cfg.ransac.seed = scene.seed;
    if (pipe_threshold) cfg.threshold_px = *pipe_threshold;
    if (pipe_window) cfg.window = *pipe_window;
    if (pipe_mesh_res) cfg.mesh_resolution = *pipe_mesh_res;
    if (pipe_robust) cfg.robust = true;
    const PipelineSummary s = run_pipeline(scene, cfg, pipe_out, pipe_mesh);
    if (!s.bundle_converged) status = not_converged("pipeline");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("UsageError", e.what(), 2);
    return 2;
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    report_error(to_string(e.kind()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error("InternalError", e.what(), 3);
    return 3;
  }
  return status;
}
