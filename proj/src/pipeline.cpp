#include "affstereo/pipeline.hpp"

#include <cmath>
#include <set>

namespace affstereo {

using nlohmann::json;

RngSeed stage_seed(RngSeed root, std::uint64_t stage) { return RngSeed{Rng(root).fork(stage).next()}; }

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  const std::set<std::string> names(known.begin(), known.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!names.count(it.key())) fail(ErrorKind::ParseError, where + ": unknown key '" + it.key() + "'");
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  try {
    if (!j.is_object()) fail(ErrorKind::ParseError, "config: expected an object");
    reject_unknown(j,
                   {"ransac", "bundle", "spline", "threshold_px", "fundamental_stage", "window", "robust",
                    "mesh_resolution", "surface_points", "matcher_noise_px", "surface_outlier_fraction",
                    "registration_noise_um"},
                   "config");
    if (j.contains("ransac")) {
      const auto& r = j.at("ransac");
      reject_unknown(r, {"iterations", "inlier_threshold_px", "min_sample_size"}, "config.ransac");
      take(r, "iterations", c.ransac.iterations);
      take(r, "inlier_threshold_px", c.ransac.inlier_threshold);
      take(r, "min_sample_size", c.ransac.min_sample_size);
    }
    if (j.contains("bundle")) {
      const auto& b = j.at("bundle");
      reject_unknown(b, {"sigma_u_px", "sigma_x_um", "max_iterations", "gradient_tolerance", "objective_tolerance"},
                     "config.bundle");
      take(b, "sigma_u_px", c.bundle.sigma_u);
      take(b, "sigma_x_um", c.bundle.sigma_x);
      take(b, "max_iterations", c.bundle.max_iterations);
      take(b, "gradient_tolerance", c.bundle.gradient_tolerance);
      take(b, "objective_tolerance", c.bundle.objective_tolerance);
    }
    if (j.contains("spline")) {
      const auto& s = j.at("spline");
      reject_unknown(s, {"mu", "epsilon_um", "grid", "irls_iterations", "irls_delta_um"}, "config.spline");
      take(s, "mu", c.spline.mu);
      take(s, "epsilon_um", c.spline.epsilon);
      if (s.contains("grid")) {
        c.spline.grid_u = s.at("grid").at(0).get<int>();
        c.spline.grid_v = s.at("grid").at(1).get<int>();
      }
      take(s, "irls_iterations", c.spline.irls_iterations);
      take(s, "irls_delta_um", c.spline.irls_delta);
    }
    take(j, "threshold_px", c.threshold_px);
    take(j, "fundamental_stage", c.fundamental_stage);
    take(j, "window", c.window);
    take(j, "robust", c.robust);
    take(j, "mesh_resolution", c.mesh_resolution);
    take(j, "surface_points", c.surface_points);
    take(j, "matcher_noise_px", c.matcher_noise_px);
    take(j, "surface_outlier_fraction", c.surface_outlier_fraction);
    take(j, "registration_noise_um", c.registration_noise_um);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("config: ") + e.what());
  }
  if (c.ransac.iterations < 1 || !(c.ransac.inlier_threshold > 0.0) || c.ransac.min_sample_size < 4)
    fail(ErrorKind::InvalidArgument, "config: invalid ransac settings");
  if (!(c.bundle.sigma_u > 0.0) || !(c.bundle.sigma_x > 0.0) || c.bundle.max_iterations < 0)
    fail(ErrorKind::InvalidArgument, "config: invalid bundle settings");
  if (!(c.spline.mu >= 0.0) || !(c.spline.epsilon > 0.0) || c.spline.grid_u < 4 || c.spline.grid_v < 4)
    fail(ErrorKind::InvalidArgument, "config: invalid spline settings");
  if (!(c.threshold_px > 0.0)) fail(ErrorKind::InvalidArgument, "config: threshold_px must be > 0");
  if (c.fundamental_stage != "ba" && c.fundamental_stage != "dlt")
    fail(ErrorKind::InvalidArgument, "config: fundamental_stage must be 'ba' or 'dlt'");
  if (c.window < 1) fail(ErrorKind::InvalidArgument, "config: window must be >= 1");
  if (c.mesh_resolution < 2) fail(ErrorKind::InvalidArgument, "config: mesh_resolution must be >= 2");
  return c;
}

json pipeline_config_json(const PipelineConfig& c) {
  return json{{"ransac",
               {{"iterations", c.ransac.iterations},
                {"inlier_threshold_px", c.ransac.inlier_threshold},
                {"min_sample_size", c.ransac.min_sample_size}}},
              {"bundle",
               {{"sigma_u_px", c.bundle.sigma_u},
                {"sigma_x_um", c.bundle.sigma_x},
                {"max_iterations", c.bundle.max_iterations},
                {"gradient_tolerance", c.bundle.gradient_tolerance},
                {"objective_tolerance", c.bundle.objective_tolerance}}},
              {"spline",
               {{"mu", c.spline.mu},
                {"epsilon_um", c.spline.epsilon},
                {"grid", {c.spline.grid_u, c.spline.grid_v}},
                {"irls_iterations", c.spline.irls_iterations},
                {"irls_delta_um", c.spline.irls_delta}}},
              {"threshold_px", c.threshold_px},
              {"fundamental_stage", c.fundamental_stage},
              {"window", c.window},
              {"robust", c.robust},
              {"mesh_resolution", c.mesh_resolution},
              {"surface_points", c.surface_points},
              {"matcher_noise_px", c.matcher_noise_px},
              {"surface_outlier_fraction", c.surface_outlier_fraction},
              {"registration_noise_um", c.registration_noise_um}};
}

json transform_to_json(const RigidTransform& t) {
  json r = json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(t.rotation(i, k));
  return json{{"rotation", r}, {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

RigidTransform transform_from_json(const json& j) {
  try {
    RigidTransform t;
    const auto& r = j.at("rotation");
    const auto& p = j.at("translation");
    if (r.size() != 9 || p.size() != 3) fail(ErrorKind::ParseError, "transform json: wrong sizes");
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) t.rotation(i, k) = r.at(static_cast<std::size_t>(3 * i + k)).get<double>();
      t.translation(i) = p.at(static_cast<std::size_t>(i)).get<double>();
    }
    return t;
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("transform json: ") + e.what());
  }
}

// -------------------------------------------------------------------- simulate

SimulationOutput run_simulation(const SimScene& scene, const PipelineConfig& cfg) {
  SimulationOutput out;
  auto [c, truth] = generate_correspondences(scene);
  out.correspondences = std::move(c);
  out.truth = std::move(truth);
  out.surface = sample_surface(scene, out.truth.rig, cfg.surface_points, cfg.matcher_noise_px,
                               cfg.surface_outlier_fraction, stage_seed(scene.seed, 3));
  out.motion = camera_motion(scene);
  out.registration = registration_frames_with_noise(scene, out.motion, scene.registration_frames,
                                                    cfg.registration_noise_um, stage_seed(scene.seed, 4));
  return out;
}

void write_simulation(const SimScene& scene, const SimulationOutput& sim, const std::filesystem::path& dir) {
  write_file_atomic(dir / files::scene, dump_json(scene_json(scene)));
  write_file_atomic(dir / files::correspondences, correspondences_csv(sim.correspondences));
  write_file_atomic(dir / files::surface_matches, matches_csv(sim.surface.matches));
  write_file_atomic(dir / files::surface_truth, points_csv(sim.surface.truth));
  write_file_atomic(dir / files::registration_pairs, registration_pairs_csv(sim.registration));

  std::size_t corr_outliers = 0, surf_outliers = 0;
  for (bool b : sim.truth.outlier) corr_outliers += b;
  for (bool b : sim.surface.outlier) surf_outliers += b;
  json truth{{"left", to_json(sim.truth.rig.left)},
             {"right", to_json(sim.truth.rig.right)},
             {"fundamental", {sim.truth.rig.fundamental.a(), sim.truth.rig.fundamental.b(),
                              sim.truth.rig.fundamental.c(), sim.truth.rig.fundamental.d(),
                              sim.truth.rig.fundamental.e()}},
             {"motion", transform_to_json(sim.motion)},
             {"correspondence_outliers", corr_outliers},
             {"surface_outliers", surf_outliers}};
  write_file_atomic(dir / files::truth, dump_json(truth));
}

// ------------------------------------------------------------------- calibrate

CorrespondenceSet refined_correspondences(const CorrespondenceSet& used, const StereoCalibration& cal) {
  CorrespondenceSet out = used;
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    out.items[i].x = cal.refined_points[i];
    out.items[i].u_left = cal.refined_left[i];
    out.items[i].u_right = cal.refined_right[i];
  }
  return out;
}

CalibrationReport run_calibration(const CorrespondenceSet& c, const PipelineConfig& cfg, CorrespondenceSet* used) {
  const auto pts = c.points();
  const auto left = c.left_pixels();
  const auto right = c.right_pixels();

  RansacConfig rl = cfg.ransac, rr = cfg.ransac;
  rl.seed = stage_seed(cfg.ransac.seed, 1);
  rr.seed = stage_seed(cfg.ransac.seed, 2);
  const RansacResult fl = dlt_affine_ransac(pts, left, rl);
  const RansacResult fr = dlt_affine_ransac(pts, right, rr);

  CorrespondenceSet inliers;
  inliers.n_t = c.n_t;
  inliers.n_k = c.n_k;
  for (std::size_t i = 0; i < c.items.size(); ++i)
    if (fl.inliers[i] && fr.inliers[i]) inliers.items.push_back(c.items[i]);
  if (inliers.items.size() < 4)
    fail(ErrorKind::NoConsensus, "calibrate: fewer than 4 correspondences are inliers in both views");

  CalibrationReport report;
  report.calibration = bundle_adjust(inliers, fl.model, fr.model, cfg.bundle);
  report.dlt_left = fl.model;
  report.dlt_right = fr.model;
  report.ransac_inliers_left = fl.inlier_count;
  report.ransac_inliers_right = fr.inlier_count;
  report.correspondences = inliers.items.size();
  if (used) *used = std::move(inliers);
  return report;
}

double reprojection_rmse(const CorrespondenceSet& c, const AffineProjection& left, const AffineProjection& right) {
  if (c.items.empty()) return 0.0;
  double sq = 0.0;
  for (const auto& i : c.items) {
    sq += (reproject(left, i.x).vec() - i.u_left.vec()).squaredNorm();
    sq += (reproject(right, i.x).vec() - i.u_right.vec()).squaredNorm();
  }
  return std::sqrt(sq / (2.0 * static_cast<double>(c.items.size())));
}

// ----------------------------------------------------------------- triangulate

Reconstruction run_triangulation(const StereoRig& rig, std::span<const StereoMatch> matches, double threshold_px) {
  const auto keep = filter_epipolar(matches, rig.fundamental, threshold_px);
  std::vector<StereoMatch> kept;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < matches.size(); ++i)
    if (keep[i]) {
      kept.push_back(matches[i]);
      index.push_back(i);
    }
  const TriangulatedSet t = triangulate_set(rig, kept);
  Reconstruction r;
  r.rejected_epipolar = matches.size() - kept.size();
  r.failed = t.failed;
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    r.points.push_back(t.points[i]);
    r.left_pixels.push_back(kept[t.source_index[i]].left);
    r.source_index.push_back(index[t.source_index[i]]);
  }
  return r;
}

PlyMesh reconstruction_ply(const Reconstruction& r, const std::string& stage) {
  PlyMesh m;
  m.vertices = r.points;
  m.comments = {"units um", "frame robot", "source affine triangulation, " + stage + "-stage cameras",
                "epipolar_rejected " + std::to_string(r.rejected_epipolar),
                "triangulation_failed " + std::to_string(r.failed)};
  return m;
}

// -------------------------------------------------------------------- pipeline

json summary_json(const PipelineSummary& s) {
  json out{{"reprojection_rmse_px", s.reprojection_rmse_px},
           {"calibration_correspondences", s.calibration_correspondences},
           {"bundle_converged", s.bundle_converged},
           {"reconstructed_points", s.reconstructed_points},
           {"surface_rejected", s.surface_rejected}};
  if (s.triangulation_rmse_um) out["triangulation_rmse_um"] = *s.triangulation_rmse_um;
  if (s.surface_rms_um) out["surface_rms_um"] = *s.surface_rms_um;
  out["registration"] = transform_json(s.registration);
  return out;
}

std::string error_curve_csv(const AccumulatedRegistration& r) {
  std::vector<std::vector<double>> rows;
  const bool ref = !r.error_curve.empty() && r.error_curve.front().rotation_error_rad.has_value();
  for (const auto& p : r.error_curve) {
    std::vector<double> row{double(p.frames_used), p.rmse};
    if (ref) {
      row.push_back(*p.rotation_error_rad);
      row.push_back(*p.translation_error_um);
      row.push_back(*p.alignment_error_um);
    }
    rows.push_back(std::move(row));
  }
  if (ref)
    return to_csv({"frames", "rmse_um", "rotation_error_rad", "translation_error_um", "alignment_error_um"}, rows);
  return to_csv({"frames", "rmse_um"}, rows);
}

PipelineSummary run_pipeline(const SimScene& scene, const PipelineConfig& cfg, const std::filesystem::path& dir,
                             bool emit_mesh) {
  write_simulation(scene, run_simulation(scene, cfg), dir);
  PipelineSummary s;

  // Calibration, from the written correspondences.
  const CorrespondenceSet corr = read_correspondences(dir / files::correspondences);
  CorrespondenceSet used;
  const CalibrationReport cal = run_calibration(corr, cfg, &used);
  const json cal_doc = calibration_json(cal);
  write_file_atomic(dir / files::calibration, dump_json(cal_doc));
  write_file_atomic(dir / files::refined, correspondences_csv(refined_correspondences(used, cal.calibration)));
  s.reprojection_rmse_px =
      reprojection_rmse(used, cal.calibration.left.projection, cal.calibration.right.projection);
  s.calibration_correspondences = cal.correspondences;
  s.bundle_converged = cal.calibration.converged;

  // Reconstruction.
  const StereoRig rig = rig_from_calibration_json(cal_doc, cfg.fundamental_stage);
  const auto matches = read_matches(dir / files::surface_matches);
  const Reconstruction rec = run_triangulation(rig, matches, cfg.threshold_px);
  write_file_atomic(dir / files::reconstruction, to_ply(reconstruction_ply(rec, cfg.fundamental_stage)));
  write_file_atomic(dir / files::reconstruction_pixels, pixels_csv(rec.left_pixels));
  s.reconstructed_points = rec.points.size();

  const auto truth = read_points(dir / files::surface_truth).points;
  if (!rec.points.empty()) {
    double sq = 0.0;
    for (std::size_t i = 0; i < rec.points.size(); ++i)
      sq += (rec.points[i].vec() - truth[rec.source_index[i]].vec()).squaredNorm();
    s.triangulation_rmse_um = std::sqrt(sq / static_cast<double>(rec.points.size()));
  }

  // Surface.
  const SurfaceFit fit = fit_surface(rec.left_pixels, rec.points, cfg.spline);
  write_file_atomic(dir / files::surface, dump_json(surface_json(fit, cfg.spline)));
  if (emit_mesh) write_file_atomic(dir / files::surface_mesh, to_ply(surface_mesh(fit.surface, cfg.mesh_resolution)));
  double sq = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < rec.points.size(); ++i) {
    if (fit.rejected[i]) {
      ++s.surface_rejected;
      continue;
    }
    const Point3 p = evaluate_surface(fit.surface, rec.left_pixels[i]);
    const double dz = p.z - scene.surface.height(p.x, p.y);
    sq += dz * dz;
    ++kept;
  }
  if (kept) s.surface_rms_um = std::sqrt(sq / static_cast<double>(kept));

  // Registration.
  const auto frames = read_registration_pairs(dir / files::registration_pairs);
  const RigidTransform reference = transform_from_json(read_json(dir / files::truth).at("motion"));
  RegistrationOptions opt;
  opt.robust = cfg.robust;
  s.registration = register_accumulated(frames, cfg.window, opt, reference);
  write_file_atomic(dir / files::transform, dump_json(transform_json(s.registration)));
  write_file_atomic(dir / files::error_curve, error_curve_csv(s.registration));

  write_file_atomic(dir / files::summary, dump_json(summary_json(s)));
  return s;
}

}  // namespace affstereo
