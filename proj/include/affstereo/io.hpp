#pragma once

// File formats. Every writer goes through write_file_atomic (temp file + rename)
// and formats doubles with the shortest round-trip representation, so equal
// values always produce identical bytes.

#include "affstereo/calibration.hpp"
#include "affstereo/core.hpp"
#include "affstereo/keypoints.hpp"
#include "affstereo/registration.hpp"
#include "affstereo/sim.hpp"
#include "affstereo/stereo.hpp"
#include "affstereo/surface.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace affstereo {

std::string format_double(double v);

void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Index of a column or -1.
  int column(const std::string& name) const;
  int require(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text, const std::string& source = "csv");
CsvTable read_csv(const std::filesystem::path& path);
std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

// t,k,x_um,y_um,z_um,ul_px,vl_px,ur_px,vr_px
CorrespondenceSet read_correspondences(const std::filesystem::path& path);
std::string correspondences_csv(const CorrespondenceSet& c);

// ul_px,vl_px,ur_px,vr_px
std::vector<StereoMatch> read_matches(const std::filesystem::path& path);
std::string matches_csv(std::span<const StereoMatch> matches);

// u_px,v_px
std::vector<Point2> read_pixels(const std::filesystem::path& path);
std::string pixels_csv(std::span<const Point2> pixels);

// x,y,z (um), optionally with a leading frame column.
struct FramedPoints {
  std::vector<Point3> points;
  std::vector<int> frame;  // empty when the file has no frame column
};
FramedPoints read_points(const std::filesystem::path& path);
std::string points_csv(std::span<const Point3> points, std::span<const int> frames = {});

// Registration input in one file: frame,rx_um,ry_um,rz_um,mx_um,my_um,mz_um
std::vector<RegistrationFrame> read_registration_pairs(const std::filesystem::path& path);
std::string registration_pairs_csv(std::span<const RegistrationFrame> frames);
std::vector<RegistrationFrame> group_by_frame(const FramedPoints& reconstructed,
                                              const FramedPoints& measured);

// key,value CSV of keypoint detections: k,u_px,v_px,peak
std::string detections_csv(std::span<const KeypointDetection> detections);

// ASCII PLY. Comments are written verbatim as "comment <line>".
struct PlyMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::string> comments;
};
std::string to_ply(const PlyMesh& mesh);
PlyMesh read_ply(const std::filesystem::path& path);

// Dense (res x res) grid over the surface domain, two triangles per cell.
PlyMesh surface_mesh(const BBSurface& s, int resolution);

nlohmann::json to_json(const AffineProjection& m);
AffineProjection projection_from_json(const nlohmann::json& j);

struct CalibrationReport {
  StereoCalibration calibration;
  AffineProjection dlt_left;
  AffineProjection dlt_right;
  std::size_t ransac_inliers_left = 0;
  std::size_t ransac_inliers_right = 0;
  std::size_t correspondences = 0;
};
nlohmann::json calibration_json(const CalibrationReport& r);

// Cameras read back from a calibration document; stage is "ba" or "dlt".
StereoRig rig_from_calibration_json(const nlohmann::json& j, const std::string& stage = "ba");

nlohmann::json surface_json(const SurfaceFit& fit, const SplineFitConfig& cfg);
BBSurface surface_from_json(const nlohmann::json& j);

nlohmann::json transform_json(const AccumulatedRegistration& r);

nlohmann::json scene_json(const SimScene& scene);
SimScene scene_from_json(const nlohmann::json& j);

std::string dump_json(const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace affstereo
