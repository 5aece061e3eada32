#pragma once

// Stage drivers shared by the command-line tool. Each stage reads and writes the
// same file formats, so running `pipeline` is equivalent to running the stages
// one after another on the files `simulate` produces.

#include "affstereo/io.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace affstereo {

struct PipelineConfig {
  RansacConfig ransac{500, 6.0, 4, {}};
  BundleConfig bundle;
  SplineFitConfig spline;
  double threshold_px = 2.0;     // epipolar filter
  std::string fundamental_stage = "ba";
  int window = 3;                // registration frames
  bool robust = false;
  int mesh_resolution = 64;

  // Simulation-only knobs.
  int surface_points = 2000;
  double matcher_noise_px = 0.25;
  double surface_outlier_fraction = 0.05;
  double registration_noise_um = 20.0;
};

// Overrides the fields present in `j`. Unknown keys are a ParseError so typos do
// not silently fall back to defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});
nlohmann::json pipeline_config_json(const PipelineConfig& cfg);

nlohmann::json transform_to_json(const RigidTransform& t);
// Reads {"rotation": [9 row-major], "translation": [3]}.
RigidTransform transform_from_json(const nlohmann::json& j);

// Deterministic per-stage seed.
RngSeed stage_seed(RngSeed root, std::uint64_t stage);

// File names used inside an output directory.
namespace files {
inline constexpr const char* scene = "scene.json";
inline constexpr const char* truth = "truth.json";
inline constexpr const char* correspondences = "correspondences.csv";
inline constexpr const char* surface_matches = "surface_matches.csv";
inline constexpr const char* surface_truth = "surface_truth.csv";
inline constexpr const char* registration_pairs = "registration_pairs.csv";
inline constexpr const char* calibration = "calibration.json";
inline constexpr const char* refined = "refined_correspondences.csv";
inline constexpr const char* reconstruction = "reconstruction.ply";
inline constexpr const char* reconstruction_pixels = "reconstruction_pixels.csv";
inline constexpr const char* surface = "surface.json";
inline constexpr const char* surface_mesh = "surface_mesh.ply";
inline constexpr const char* transform = "transform.json";
inline constexpr const char* error_curve = "registration_curve.csv";
inline constexpr const char* summary = "summary.json";
}  // namespace files

struct SimulationOutput {
  CorrespondenceSet correspondences;
  CorrespondenceTruth truth;
  SurfaceSample surface;
  RigidTransform motion;
  std::vector<RegistrationFrame> registration;
};

SimulationOutput run_simulation(const SimScene& scene, const PipelineConfig& cfg);
void write_simulation(const SimScene& scene, const SimulationOutput& sim, const std::filesystem::path& dir);

// RANSAC-DLT per camera, then bundle adjustment on the correspondences that are
// inliers in both views.
CalibrationReport run_calibration(const CorrespondenceSet& c, const PipelineConfig& cfg,
                                  CorrespondenceSet* used = nullptr);

// `used` with points and pixels replaced by their bundle-adjusted values.
CorrespondenceSet refined_correspondences(const CorrespondenceSet& used, const StereoCalibration& cal);

struct Reconstruction {
  std::vector<Point3> points;
  std::vector<Point2> left_pixels;
  std::vector<std::size_t> source_index;  // into the match list
  std::size_t rejected_epipolar = 0;
  std::size_t failed = 0;
};

Reconstruction run_triangulation(const StereoRig& rig, std::span<const StereoMatch> matches,
                                 double threshold_px);
PlyMesh reconstruction_ply(const Reconstruction& r, const std::string& stage);

// Reprojection RMSE (px) of the correspondences through two cameras.
double reprojection_rmse(const CorrespondenceSet& c, const AffineProjection& left,
                         const AffineProjection& right);

struct PipelineSummary {
  double reprojection_rmse_px = 0.0;
  std::size_t calibration_correspondences = 0;
  bool bundle_converged = false;
  std::size_t reconstructed_points = 0;
  std::optional<double> triangulation_rmse_um;
  std::size_t surface_rejected = 0;
  std::optional<double> surface_rms_um;  // vs. the analytic surface
  AccumulatedRegistration registration;
};

nlohmann::json summary_json(const PipelineSummary& s);
std::string error_curve_csv(const AccumulatedRegistration& r);

// Simulates `scene` into `dir` and runs every stage on the written files.
PipelineSummary run_pipeline(const SimScene& scene, const PipelineConfig& cfg,
                             const std::filesystem::path& dir, bool emit_mesh);

}  // namespace affstereo
