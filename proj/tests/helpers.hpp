#pragma once

#include "affstereo/calibration.hpp"
#include "affstereo/core.hpp"

#include <Eigen/Geometry>

#include <vector>

namespace testing_helpers {

using namespace affstereo;

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
  return q.normalized().toRotationMatrix();
}

inline Point3 random_point(Rng& rng, double half = 1000.0) {
  return {rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half)};
}

inline std::vector<Point3> random_points(Rng& rng, std::size_t n, double half = 1000.0) {
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_point(rng, half));
  return out;
}

// Full-rank affine camera with a random K (including skew), rotation and offset.
inline AffineProjection random_camera(Rng& rng, bool with_skew = true) {
  AffineIntrinsics k{rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0), with_skew ? rng.uniform(-0.5, 0.5) : 0.0};
  AffinePose p;
  p.rotation = random_rotation(rng);
  p.t1 = rng.uniform(-500, 500);
  p.t2 = rng.uniform(-500, 500);
  return compose(k, p);
}

inline std::vector<Point2> project(const AffineProjection& m, const std::vector<Point3>& xs) {
  std::vector<Point2> out;
  for (const auto& x : xs) out.push_back(reproject(m, x));
  return out;
}

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace testing_helpers
