#include "affstereo/registration.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>

namespace affstereo {

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

ResidualStats residual_stats(const RigidTransform& t, std::span<const Point3> reconstructed,
                             std::span<const Point3> measured) {
  if (reconstructed.size() != measured.size())
    fail(ErrorKind::CountMismatch, "registration: point counts differ");
  ResidualStats s;
  s.norms.reserve(reconstructed.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < reconstructed.size(); ++i) {
    const double d = (t.apply(reconstructed[i].vec()) - measured[i].vec()).norm();
    s.norms.push_back(d);
    sq += d * d;
    s.sum += d;
    s.max = std::max(s.max, d);
  }
  if (!reconstructed.empty()) s.rmse = std::sqrt(sq / static_cast<double>(reconstructed.size()));
  return s;
}

namespace {

bool collinear(std::span<const Point3> pts) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p.vec();
  mean /= static_cast<double>(pts.size());
  Eigen::MatrixXd c(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) c.row(i) = (pts[i].vec() - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
  const auto sv = svd.singularValues();
  return !(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0);
}

void check_inputs(std::span<const Point3> reconstructed, std::span<const Point3> measured) {
  if (reconstructed.size() != measured.size())
    fail(ErrorKind::CountMismatch, "registration: reconstructed and measured counts differ");
  if (reconstructed.size() < 3) fail(ErrorKind::CollinearPoints, "registration: needs at least 3 pairs");
  for (std::size_t i = 0; i < reconstructed.size(); ++i)
    if (!is_finite(reconstructed[i]) || !is_finite(measured[i]))
      fail(ErrorKind::InvalidArgument, "registration: non-finite point");
  if (collinear(reconstructed) || collinear(measured))
    fail(ErrorKind::CollinearPoints, "registration: points are collinear");
}

}  // namespace

RigidTransform weighted_procrustes(std::span<const Point3> reconstructed,
                                   std::span<const Point3> measured, std::span<const double> weights) {
  double wsum = 0.0;
  Eigen::Vector3d cr = Eigen::Vector3d::Zero(), cm = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < reconstructed.size(); ++i) {
    wsum += weights[i];
    cr += weights[i] * reconstructed[i].vec();
    cm += weights[i] * measured[i].vec();
  }
  cr /= wsum;
  cm /= wsum;
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < reconstructed.size(); ++i)
    h += weights[i] * (reconstructed[i].vec() - cr) * (measured[i].vec() - cm).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  RigidTransform t;
  t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  t.translation = cm - t.rotation * cr;
  return t;
}

RegistrationResult register_rigid(std::span<const Point3> reconstructed,
                                  std::span<const Point3> measured,
                                  const RegistrationOptions& options) {
  check_inputs(reconstructed, measured);
  std::vector<double> weights(reconstructed.size(), 1.0);
  RigidTransform t = weighted_procrustes(reconstructed, measured, weights);

  if (options.robust) {
    // Sum of unsquared norms: reweight by 1 / |r_i| and re-solve.
    double previous = residual_stats(t, reconstructed, measured).sum;
    for (int it = 0; it < options.robust_iterations; ++it) {
      const auto stats = residual_stats(t, reconstructed, measured);
      for (std::size_t i = 0; i < weights.size(); ++i)
        weights[i] = 1.0 / std::max(stats.norms[i], options.robust_delta);
      const RigidTransform next = weighted_procrustes(reconstructed, measured, weights);
      const double obj = residual_stats(next, reconstructed, measured).sum;
      if (obj > previous) break;
      t = next;
      if (previous - obj <= 1e-12 * previous) break;
      previous = obj;
    }
  }
  return RegistrationResult{t, residual_stats(t, reconstructed, measured)};
}

AccumulatedRegistration register_accumulated(std::span<const RegistrationFrame> frames, int window,
                                             const RegistrationOptions& options,
                                             const std::optional<RigidTransform>& reference) {
  if (window < 1) fail(ErrorKind::InvalidArgument, "registration: window must be >= 1");
  if (frames.empty()) fail(ErrorKind::InvalidArgument, "registration: no frames");
  for (const auto& f : frames)
    if (f.reconstructed.size() != f.measured.size())
      fail(ErrorKind::CountMismatch, "registration: frame with mismatched counts");

  const int used = std::min<int>(window, static_cast<int>(frames.size()));
  const std::size_t first = frames.size() - static_cast<std::size_t>(used);

  // Evaluation points for the alignment error: everything in the full window.
  std::vector<Point3> eval_points;
  for (std::size_t f = first; f < frames.size(); ++f)
    eval_points.insert(eval_points.end(), frames[f].reconstructed.begin(), frames[f].reconstructed.end());

  AccumulatedRegistration out;
  out.frames_used = used;
  for (int w = 1; w <= used; ++w) {
    std::vector<Point3> rec, mea;
    for (std::size_t f = frames.size() - static_cast<std::size_t>(w); f < frames.size(); ++f) {
      rec.insert(rec.end(), frames[f].reconstructed.begin(), frames[f].reconstructed.end());
      mea.insert(mea.end(), frames[f].measured.begin(), frames[f].measured.end());
    }
    const RegistrationResult r = register_rigid(rec, mea, options);
    ErrorCurvePoint p;
    p.frames_used = w;
    p.rmse = r.residuals.rmse;
    if (reference) {
      p.rotation_error_rad = rotation_angle_between(r.transform.rotation, reference->rotation);
      p.translation_error_um = (r.transform.translation - reference->translation).norm();
      double sum = 0.0;
      for (const auto& x : eval_points) sum += (r.transform.apply(x.vec()) - reference->apply(x.vec())).norm();
      p.alignment_error_um = sum / static_cast<double>(eval_points.size());
    }
    out.error_curve.push_back(p);
    if (w == used) {
      out.transform = r.transform;
      out.residuals = r.residuals;
    }
  }
  return out;
}

}  // namespace affstereo
