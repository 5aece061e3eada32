#pragma once

#include "affstereo/core.hpp"
#include "affstereo/kernels.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace affstereo {

using Matrix24 = Eigen::Matrix<double, 2, 4>;
using Matrix23 = Eigen::Matrix<double, 2, 3>;

// One robot-frame landmark x with its detections in the left and right images.
// Frame and keypoint indices are 1-based.
struct Correspondence {
  Point3 x;
  Point2 u_left;
  Point2 u_right;
  int frame_index = 1;
  int keypoint_index = 1;
};

struct CorrespondenceSet {
  std::vector<Correspondence> items;
  int n_t = 0;
  int n_k = 0;

  bool complete() const { return items.size() == static_cast<std::size_t>(n_t) * n_k; }
  // Throws InvalidArgument when indices fall outside [1, n_t] x [1, n_k].
  void validate() const;

  std::vector<Point3> points() const;
  std::vector<Point2> left_pixels() const;
  std::vector<Point2> right_pixels() const;
};

// u = M [x^T 1]^T
struct AffineProjection {
  Matrix24 m = Matrix24::Zero();

  Matrix23 linear() const { return m.leftCols<3>(); }
  Eigen::Vector2d offset() const { return m.col(3); }
};

Point2 reproject(const AffineProjection& cam, const Point3& x);

struct AffineIntrinsics {
  double alpha_x = 1.0;
  double alpha_y = 1.0;
  double s = 0.0;

  Eigen::Matrix2d k() const {
    Eigen::Matrix2d out;
    out << alpha_x, s, 0.0, alpha_y;
    return out;
  }
};

// rotation rows 0 and 1 are r1^T, r2^T; row 2 = r1 x r2.
struct AffinePose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double t1 = 0.0;
  double t2 = 0.0;
};

struct AffineCamera {
  AffineProjection projection;
  AffineIntrinsics intrinsics;
  AffinePose pose;
};

// M = K [r1^T t1; r2^T t2]
AffineProjection compose(const AffineIntrinsics& k, const AffinePose& pose);

// RQ split of the left 2x3 block into upper-triangular K (positive diagonal)
// and two orthonormal rotation rows; translations from the fourth column.
std::pair<AffineIntrinsics, AffinePose> resect(const AffineProjection& cam);

// Linear affine DLT, two independent 4-unknown rows. Needs >= 4 non-coplanar points.
AffineProjection dlt_affine(std::span<const Point3> points, std::span<const Point2> pixels);

// Coplanarity test used by the DLT: smallest / largest singular value of the
// centred point matrix below 1e-8.
bool points_are_coplanar(std::span<const Point3> points);

struct RansacConfig {
  int iterations = 500;
  double inlier_threshold = 2.0;  // pixels
  int min_sample_size = 4;
  RngSeed seed{};
};

struct RansacResult {
  AffineProjection model;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
  int best_iteration = -1;
};

RansacResult dlt_affine_ransac(std::span<const Point3> points, std::span<const Point2> pixels,
                               const RansacConfig& cfg,
                               ExecutionPolicy policy = ExecutionPolicy::Parallel);

struct BundleConfig {
  double sigma_u = 1.0;   // pixels
  double sigma_x = 10.0;  // um
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;
  double objective_tolerance = 1e-12;  // relative decrease
};

struct BundleEnergies {
  double reprojection = 0.0;   // E_Pi
  double pixel_prior = 0.0;    // E_Theta
  double point_prior = 0.0;    // E_Phi
  double total = 0.0;          // E_Pi + E_Theta / sigma_u + E_Phi / sigma_x
};

struct StereoCalibration {
  AffineCamera left;
  AffineCamera right;
  std::vector<Point3> refined_points;
  std::vector<Point2> refined_left;
  std::vector<Point2> refined_right;
  BundleEnergies initial;
  BundleEnergies final;
  bool converged = false;
  int iterations = 0;
  double final_gradient_norm = 0.0;

  double final_objective() const { return final.total; }
};

BundleEnergies bundle_energies(const CorrespondenceSet& c, const AffineProjection& left,
                               const AffineProjection& right, std::span<const Point3> refined_points,
                               std::span<const Point2> refined_left,
                               std::span<const Point2> refined_right, const BundleConfig& cfg);

// Joint refinement of both cameras (alpha_x, alpha_y, rotation, t1, t2 with zero
// skew), the 3D points and the 2D detections. Non-convergence is reported via
// StereoCalibration::converged; InvalidInit is thrown for unresectable input.
StereoCalibration bundle_adjust(const CorrespondenceSet& c, const AffineProjection& init_left,
                                const AffineProjection& init_right, const BundleConfig& cfg);

}  // namespace affstereo
