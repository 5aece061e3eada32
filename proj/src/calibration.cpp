#include "affstereo/calibration.hpp"

#include <Eigen/Geometry>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <optional>

namespace affstereo {

void CorrespondenceSet::validate() const {
  if (n_t < 1 || n_k < 1) fail(ErrorKind::InvalidArgument, "correspondence set: n_t, n_k must be >= 1");
  for (const auto& c : items) {
    if (c.frame_index < 1 || c.frame_index > n_t || c.keypoint_index < 1 || c.keypoint_index > n_k)
      fail(ErrorKind::InvalidArgument, "correspondence set: index outside [1,n_t] x [1,n_k]");
    if (!is_finite(c.x) || !is_finite(c.u_left) || !is_finite(c.u_right))
      fail(ErrorKind::InvalidArgument, "correspondence set: non-finite value");
  }
}

std::vector<Point3> CorrespondenceSet::points() const {
  std::vector<Point3> out;
  out.reserve(items.size());
  for (const auto& c : items) out.push_back(c.x);
  return out;
}

std::vector<Point2> CorrespondenceSet::left_pixels() const {
  std::vector<Point2> out;
  out.reserve(items.size());
  for (const auto& c : items) out.push_back(c.u_left);
  return out;
}

std::vector<Point2> CorrespondenceSet::right_pixels() const {
  std::vector<Point2> out;
  out.reserve(items.size());
  for (const auto& c : items) out.push_back(c.u_right);
  return out;
}

Point2 reproject(const AffineProjection& cam, const Point3& x) {
  return Point2::from(cam.linear() * x.vec() + cam.offset());
}

AffineProjection compose(const AffineIntrinsics& k, const AffinePose& pose) {
  Matrix24 rt;
  rt.block<2, 3>(0, 0) = pose.rotation.topRows<2>();
  rt(0, 3) = pose.t1;
  rt(1, 3) = pose.t2;
  return AffineProjection{k.k() * rt};
}

std::pair<AffineIntrinsics, AffinePose> resect(const AffineProjection& cam) {
  const Matrix23 a = cam.linear();
  if (!cam.m.allFinite()) fail(ErrorKind::InvalidArgument, "resect: non-finite matrix");
  Eigen::JacobiSVD<Matrix23> svd(a);
  const auto sv = svd.singularValues();
  const double tol = global_numeric_config().rank_tolerance * sv(0);
  if (!(sv(0) > 0.0)) throw RankDeficientError(0, 2, "resect");
  if (sv(1) <= tol) throw RankDeficientError(1, 2, "resect");

  // RQ of the 2x3 block through a QR of the row-reversed transpose.
  Eigen::Matrix2d flip;
  flip << 0.0, 1.0, 1.0, 0.0;
  const Eigen::Matrix<double, 3, 2> bt = (flip * a).transpose();
  Eigen::HouseholderQR<Eigen::Matrix<double, 3, 2>> qr(bt);
  const Eigen::Matrix<double, 3, 2> q = qr.householderQ() * Eigen::Matrix<double, 3, 2>::Identity();
  const Eigen::Matrix2d r = qr.matrixQR().topRows<2>().triangularView<Eigen::Upper>();

  Eigen::Matrix2d k = flip * r.transpose() * flip;
  Matrix23 rows = flip * q.transpose();

  // Positive focal terms: flip K columns together with the matching rotation rows.
  for (int i = 0; i < 2; ++i) {
    if (k(i, i) < 0.0) {
      k.col(i) *= -1.0;
      rows.row(i) *= -1.0;
    }
  }
  k(1, 0) = 0.0;

  AffineIntrinsics intr{k(0, 0), k(1, 1), k(0, 1)};
  AffinePose pose;
  pose.rotation.row(0) = rows.row(0);
  pose.rotation.row(1) = rows.row(1);
  pose.rotation.row(2) = rows.row(0).cross(rows.row(1));
  const Eigen::Vector2d t = k.triangularView<Eigen::Upper>().solve(cam.offset());
  pose.t1 = t(0);
  pose.t2 = t(1);
  return {intr, pose};
}

bool points_are_coplanar(std::span<const Point3> points) {
  if (points.size() < 4) return true;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p.vec();
  mean /= static_cast<double>(points.size());
  Eigen::MatrixXd centred(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) centred.row(i) = (points[i].vec() - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred);
  const auto sv = svd.singularValues();
  return !(sv(0) > 0.0) || sv(2) < 1e-8 * sv(0);
}

AffineProjection dlt_affine(std::span<const Point3> points, std::span<const Point2> pixels) {
  if (points.size() != pixels.size())
    fail(ErrorKind::CountMismatch, "dlt_affine: point and pixel counts differ");
  if (points.size() < 4)
    fail(ErrorKind::DegenerateConfiguration, "dlt_affine: needs at least 4 correspondences");
  if (points_are_coplanar(points))
    fail(ErrorKind::DegenerateConfiguration, "dlt_affine: 3D points are coplanar");

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p.vec();
  mean /= static_cast<double>(n);

  Eigen::MatrixXd design(n, 4);
  Eigen::VectorXd us(n), vs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design.row(i).head<3>() = (points[i].vec() - mean).transpose();
    design(i, 3) = 1.0;
    us(i) = pixels[i].u;
    vs(i) = pixels[i].v;
  }
  const Eigen::VectorXd row_u = solve_linear_least_squares(design, us).x;
  const Eigen::VectorXd row_v = solve_linear_least_squares(design, vs).x;

  AffineProjection cam;
  cam.m.row(0) = row_u.transpose();
  cam.m.row(1) = row_v.transpose();
  // undo the centring: M x + t = A (x - mean) + t'  =>  t = t' - A mean
  cam.m.col(3) -= cam.m.leftCols<3>() * mean;
  return cam;
}

namespace {

std::size_t count_inliers(const AffineProjection& cam, std::span<const Point3> points,
                          std::span<const Point2> pixels, double threshold,
                          std::vector<bool>* mask) {
  std::size_t count = 0;
  const Matrix23 a = cam.linear();
  const Eigen::Vector2d t = cam.offset();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (a * points[i].vec() + t - pixels[i].vec()).norm();
    const bool in = d < threshold;
    if (mask) (*mask)[i] = in;
    count += in ? 1 : 0;
  }
  return count;
}

}  // namespace

RansacResult dlt_affine_ransac(std::span<const Point3> points, std::span<const Point2> pixels,
                               const RansacConfig& cfg, ExecutionPolicy policy) {
  if (points.size() != pixels.size())
    fail(ErrorKind::CountMismatch, "ransac: point and pixel counts differ");
  if (cfg.iterations < 1) fail(ErrorKind::InvalidArgument, "ransac: iterations must be >= 1");
  if (!(cfg.inlier_threshold > 0.0)) fail(ErrorKind::InvalidArgument, "ransac: threshold must be > 0");
  if (cfg.min_sample_size < 4) fail(ErrorKind::InvalidArgument, "ransac: min_sample_size must be >= 4");
  const auto sample_size = static_cast<std::size_t>(cfg.min_sample_size);
  if (points.size() < sample_size)
    fail(ErrorKind::NoConsensus, "ransac: fewer correspondences than the minimal sample");

  // Samples are drawn up front so hypothesis evaluation can run in any order.
  Rng rng(cfg.seed);
  const auto iterations = static_cast<std::size_t>(cfg.iterations);
  std::vector<std::vector<std::size_t>> samples(iterations);
  for (auto& s : samples) {
    while (s.size() < sample_size) {
      const std::size_t idx = rng.index(points.size());
      if (std::find(s.begin(), s.end(), idx) == s.end()) s.push_back(idx);
    }
  }

  std::vector<std::size_t> counts(iterations, 0);
  std::vector<char> valid(iterations, 0);
  parallel_for(iterations, policy, [&](std::size_t it) {
    std::vector<Point3> sp;
    std::vector<Point2> su;
    for (std::size_t idx : samples[it]) {
      sp.push_back(points[idx]);
      su.push_back(pixels[idx]);
    }
    try {
      const AffineProjection hyp = dlt_affine(sp, su);
      counts[it] = count_inliers(hyp, points, pixels, cfg.inlier_threshold, nullptr);
      valid[it] = 1;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateConfiguration && e.kind() != ErrorKind::RankDeficient)
        throw;
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t it = 0; it < iterations; ++it) {
    if (!valid[it]) continue;
    if (!best || counts[it] > counts[*best]) best = it;  // ties keep the lower index
  }
  if (!best) fail(ErrorKind::DegenerateConfiguration, "ransac: every sampled model was degenerate");
  if (counts[*best] < sample_size)
    fail(ErrorKind::NoConsensus, "ransac: best consensus set smaller than the minimal sample");

  // Refit on the consensus set of the winning hypothesis.
  std::vector<Point3> sp;
  std::vector<Point2> su;
  for (std::size_t idx : samples[*best]) {
    sp.push_back(points[idx]);
    su.push_back(pixels[idx]);
  }
  std::vector<bool> mask(points.size(), false);
  count_inliers(dlt_affine(sp, su), points, pixels, cfg.inlier_threshold, &mask);
  std::vector<Point3> cp;
  std::vector<Point2> cu;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!mask[i]) continue;
    cp.push_back(points[i]);
    cu.push_back(pixels[i]);
  }

  RansacResult out;
  out.model = dlt_affine(cp, cu);
  out.inliers.assign(points.size(), false);
  out.inlier_count = count_inliers(out.model, points, pixels, cfg.inlier_threshold, &out.inliers);
  out.best_iteration = static_cast<int>(*best);
  return out;
}

}  // namespace affstereo
