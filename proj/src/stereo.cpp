#include "affstereo/stereo.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace affstereo {

double AffineFundamental::residual(const Point2& left, const Point2& right) const {
  return a() * right.u + b() * right.v + c() * left.u + d() * left.v + e();
}

double AffineFundamental::symmetric_distance(const Point2& left, const Point2& right) const {
  const double r = std::abs(residual(left, right));
  const double norm_right = std::hypot(a(), b());
  const double norm_left = std::hypot(c(), d());
  const double d_right = norm_right > 0.0 ? r / norm_right : std::numeric_limits<double>::infinity();
  const double d_left = norm_left > 0.0 ? r / norm_left : std::numeric_limits<double>::infinity();
  return 0.5 * (d_right + d_left);
}

AffineFundamental fundamental_from_cameras(const AffineProjection& left,
                                           const AffineProjection& right) {
  if (!left.m.allFinite() || !right.m.allFinite())
    fail(ErrorKind::InvalidArgument, "fundamental: non-finite camera");

  // Probe points: unit-cube corners and centre, scaled so that they span
  // roughly a thousand pixels in the left image.
  const double gain = std::max(left.linear().norm(), right.linear().norm());
  if (!(gain > 0.0)) fail(ErrorKind::DegeneratePair, "fundamental: zero camera");
  const double scale = 1000.0 / gain;
  std::vector<Eigen::Vector3d> probes;
  for (int i = 0; i < 8; ++i)
    probes.emplace_back(scale * (i & 1), scale * ((i >> 1) & 1), scale * ((i >> 2) & 1));
  probes.emplace_back(0.5 * scale, 0.5 * scale, 0.5 * scale);

  Eigen::Matrix<double, Eigen::Dynamic, 5> design(probes.size(), 5);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Eigen::Vector2d ul = left.linear() * probes[i] + left.offset();
    const Eigen::Vector2d ur = right.linear() * probes[i] + right.offset();
    design.row(i) << ur(0), ur(1), ul(0), ul(1), 1.0;
  }
  Eigen::Matrix<double, 5, 1> col_scale;
  for (int j = 0; j < 5; ++j) {
    col_scale(j) = design.col(j).norm();
    if (col_scale(j) == 0.0) col_scale(j) = 1.0;
    design.col(j) /= col_scale(j);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  const double tol = 1e-10 * sv(0);
  // A consistent pair leaves exactly one null direction; two or more mean the
  // views carry no epipolar (depth) information.
  if (sv(3) <= tol) fail(ErrorKind::DegeneratePair, "fundamental: cameras related by an image-plane affinity");

  Eigen::Matrix<double, 5, 1> coef = svd.matrixV().col(4).cwiseQuotient(col_scale);
  coef /= coef.norm();
  // sign convention: first significant coefficient positive
  for (int j = 0; j < 5; ++j) {
    if (std::abs(coef(j)) > 1e-12) {
      if (coef(j) < 0.0) coef = -coef;
      break;
    }
  }

  AffineFundamental out;
  out.f(0, 2) = coef(0);
  out.f(1, 2) = coef(1);
  out.f(2, 0) = coef(2);
  out.f(2, 1) = coef(3);
  out.f(2, 2) = coef(4);
  return out;
}

StereoRig make_stereo_rig(const AffineProjection& left, const AffineProjection& right) {
  return StereoRig{left, right, fundamental_from_cameras(left, right)};
}

std::vector<bool> filter_epipolar(std::span<const StereoMatch> matches, const AffineFundamental& f,
                                  double threshold_px, ExecutionPolicy policy) {
  if (!(threshold_px > 0.0)) fail(ErrorKind::InvalidArgument, "filter_epipolar: threshold must be > 0");
  std::vector<char> keep(matches.size(), 0);
  parallel_for(matches.size(), policy, [&](std::size_t i) {
    keep[i] = f.symmetric_distance(matches[i].left, matches[i].right) <= threshold_px;
  });
  return {keep.begin(), keep.end()};
}

Point3 triangulate(const StereoRig& rig, const Point2& u_left, const Point2& u_right) {
  Eigen::MatrixXd a(4, 3);
  a.topRows<2>() = rig.left.linear();
  a.bottomRows<2>() = rig.right.linear();
  Eigen::VectorXd b(4);
  b.head<2>() = u_left.vec() - rig.left.offset();
  b.tail<2>() = u_right.vec() - rig.right.offset();
  return Point3::from(solve_linear_least_squares(a, b).x);
}

TriangulatedSet triangulate_set(const StereoRig& rig, std::span<const StereoMatch> matches,
                                ExecutionPolicy policy) {
  std::vector<Point3> pts(matches.size());
  std::vector<char> ok(matches.size(), 0);
  parallel_for(matches.size(), policy, [&](std::size_t i) {
    try {
      pts[i] = triangulate(rig, matches[i].left, matches[i].right);
      ok[i] = 1;
    } catch (const Error&) {
    }
  });
  TriangulatedSet out;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (ok[i]) {
      out.points.push_back(pts[i]);
      out.source_index.push_back(i);
    } else {
      ++out.failed;
    }
  }
  return out;
}

}  // namespace affstereo
