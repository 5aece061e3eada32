#pragma once

#include "affstereo/core.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace affstereo {

// x_robot = rotation * x_camera + translation
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation * x + translation; }
  Point3 apply(const Point3& x) const { return Point3::from(apply(x.vec())); }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;
};

struct ResidualStats {
  std::vector<double> norms;
  double rmse = 0.0;
  double max = 0.0;
  double sum = 0.0;  // sum of unsquared norms
};

struct RegistrationResult {
  RigidTransform transform;
  ResidualStats residuals;
};

struct RegistrationOptions {
  // IRLS refinement of the literal sum-of-norms objective after the closed form.
  bool robust = false;
  int robust_iterations = 50;
  double robust_delta = 1e-6;  // um, floor on residual norms in the weights
};

ResidualStats residual_stats(const RigidTransform& t, std::span<const Point3> reconstructed,
                             std::span<const Point3> measured);

// Closed-form least-squares rigid alignment (centroids + SVD of the
// cross-covariance with determinant correction). Needs >= 3 non-collinear pairs.
RegistrationResult register_rigid(std::span<const Point3> reconstructed,
                                  std::span<const Point3> measured,
                                  const RegistrationOptions& options = {});

// Same, with per-pair weights.
RigidTransform weighted_procrustes(std::span<const Point3> reconstructed,
                                   std::span<const Point3> measured, std::span<const double> weights);

struct RegistrationFrame {
  std::vector<Point3> reconstructed;
  std::vector<Point3> measured;
};

struct ErrorCurvePoint {
  int frames_used = 0;
  double rmse = 0.0;  // fit residual RMSE over the pairs used
  // Only filled when a reference transform is supplied.
  std::optional<double> rotation_error_rad;
  std::optional<double> translation_error_um;
  std::optional<double> alignment_error_um;  // mean |T x - T_ref x| over the window's points
};

struct AccumulatedRegistration {
  RigidTransform transform;
  ResidualStats residuals;
  std::vector<ErrorCurvePoint> error_curve;
  int frames_used = 0;
};

// Registers the pairs of the last `window` frames (clamped to the number of
// frames available). error_curve[w-1] reports the registration using the last w
// frames, for w = 1..window.
AccumulatedRegistration register_accumulated(std::span<const RegistrationFrame> frames, int window,
                                             const RegistrationOptions& options = {},
                                             const std::optional<RigidTransform>& reference = std::nullopt);

}  // namespace affstereo
