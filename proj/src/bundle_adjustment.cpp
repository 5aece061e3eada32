// Affine stereo bundle adjustment.
//
// Unknowns: per camera (alpha_x, alpha_y, rotation, t1, t2) with zero skew, and
// per correspondence the refined 3D point and the refined left/right pixels.
// Energy:
//   E = 1/2 sum_c sum_i |u~_i^c - M^c [x~_i; 1]|^2
//     + 1/sigma_u * 1/2 sum_c sum_i |u~_i^c - u_i^c|^2
//     + 1/sigma_x * 1/2 sum_i |x~_i - x_i|^2
// minimised with Levenberg-Marquardt on the Schur-reduced camera system. Point
// blocks are independent given the cameras, which is what the parallel kernels
// exploit.

#include "affstereo/calibration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

#include <cmath>

namespace affstereo {

namespace {

constexpr int kCamParams = 7;
constexpr int kPointParams = 7;
using CamVec = Eigen::Matrix<double, kCamParams, 1>;
using PointVec = Eigen::Matrix<double, kPointParams, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat14 = Eigen::Matrix<double, 14, 14>;
using Vec14 = Eigen::Matrix<double, 14, 1>;
using Mat14x7 = Eigen::Matrix<double, 14, 7>;

struct CameraState {
  double alpha_x = 1.0;
  double alpha_y = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double t1 = 0.0;
  double t2 = 0.0;

  AffineProjection projection() const {
    return compose(AffineIntrinsics{alpha_x, alpha_y, 0.0}, AffinePose{rotation, t1, t2});
  }

  CameraState updated(const CamVec& d) const {
    CameraState out = *this;
    out.alpha_x += d(0);
    out.alpha_y += d(1);
    out.rotation = rotation_from_axis_angle(d.segment<3>(2)) * rotation;
    out.t1 += d(5);
    out.t2 += d(6);
    return out;
  }
};

struct State {
  CameraState cams[2];
  std::vector<Point3> points;
  std::vector<Point2> pixels[2];
};

CameraState camera_from_projection(const AffineProjection& m) {
  std::pair<AffineIntrinsics, AffinePose> kr;
  try {
    kr = resect(m);
  } catch (const Error& e) {
    fail(ErrorKind::InvalidInit, std::string("bundle_adjust: initial camera not resectable: ") + e.what());
  }
  CameraState cam;
  cam.alpha_x = kr.first.alpha_x;
  cam.alpha_y = kr.first.alpha_y;
  cam.rotation = kr.second.rotation;
  // Skew is dropped; the translation is re-expressed for the zero-skew K so the
  // principal offset M(:,3) is preserved.
  cam.t1 = m.m(0, 3) / cam.alpha_x;
  cam.t2 = m.m(1, 3) / cam.alpha_y;
  return cam;
}

struct Linearization {
  Mat14 h_cc = Mat14::Zero();
  Vec14 g_c = Vec14::Zero();
  std::vector<Mat7> h_pp;
  std::vector<Mat14x7> h_cp;
  std::vector<PointVec> g_p;
};

struct CameraTerm {
  Eigen::Vector2d residual;
  Eigen::Matrix<double, 2, kCamParams> jc;
  Eigen::Matrix<double, 2, kPointParams> jp;
};

// Residual u~ - M x~ of camera `cam` and its Jacobians w.r.t. the camera update
// and the point block [x~, u~_left, u~_right].
CameraTerm camera_term(const CameraState& k, int cam, const Eigen::Vector3d& x,
                       const Eigen::Vector2d& pixel) {
  CameraTerm t;
  const Eigen::Vector3d rx = k.rotation * x;
  t.residual = pixel - Eigen::Vector2d(k.alpha_x * (rx(0) + k.t1), k.alpha_y * (rx(1) + k.t2));

  t.jc.setZero();
  t.jc(0, 0) = -(rx(0) + k.t1);
  t.jc(1, 1) = -(rx(1) + k.t2);
  // d(R x)/d(omega) = -[R x]_x for the left-multiplied update
  Eigen::Matrix3d skew;
  skew << 0.0, -rx(2), rx(1), rx(2), 0.0, -rx(0), -rx(1), rx(0), 0.0;
  t.jc.block<1, 3>(0, 2) = k.alpha_x * skew.row(0);
  t.jc.block<1, 3>(1, 2) = k.alpha_y * skew.row(1);
  t.jc(0, 5) = -k.alpha_x;
  t.jc(1, 6) = -k.alpha_y;

  t.jp.setZero();
  t.jp.block<1, 3>(0, 0) = -k.alpha_x * k.rotation.row(0);
  t.jp.block<1, 3>(1, 0) = -k.alpha_y * k.rotation.row(1);
  t.jp.block<2, 2>(0, 3 + 2 * cam) = Eigen::Matrix2d::Identity();
  return t;
}

Linearization linearize(const CorrespondenceSet& c, const State& s, const BundleConfig& cfg,
                        ExecutionPolicy policy) {
  const std::size_t n = c.items.size();
  const double wu = 1.0 / cfg.sigma_u;
  const double wx = 1.0 / cfg.sigma_x;

  Linearization lin;
  lin.h_pp.resize(n);
  lin.h_cp.resize(n);
  lin.g_p.resize(n);

  // Point blocks, in parallel; each writes only to its own slot.
  parallel_for(n, policy, [&](std::size_t i) {
    Mat7 hpp = Mat7::Zero();
    Mat14x7 hcp = Mat14x7::Zero();
    PointVec gp = PointVec::Zero();
    const Eigen::Vector3d x = s.points[i].vec();
    for (int cam = 0; cam < 2; ++cam) {
      const CameraTerm t = camera_term(s.cams[cam], cam, x, s.pixels[cam][i].vec());
      hpp += t.jp.transpose() * t.jp;
      hcp.block<kCamParams, kPointParams>(kCamParams * cam, 0) += t.jc.transpose() * t.jp;
      gp += t.jp.transpose() * t.residual;

      const Point2& measured = cam == 0 ? c.items[i].u_left : c.items[i].u_right;
      hpp.block<2, 2>(3 + 2 * cam, 3 + 2 * cam) += wu * Eigen::Matrix2d::Identity();
      gp.segment<2>(3 + 2 * cam) += wu * (s.pixels[cam][i].vec() - measured.vec());
    }
    hpp.block<3, 3>(0, 0) += wx * Eigen::Matrix3d::Identity();
    gp.head<3>() += wx * (x - c.items[i].x.vec());
    lin.h_pp[i] = hpp;
    lin.h_cp[i] = hcp;
    lin.g_p[i] = gp;
  });

  // Camera block: sum over points in fixed chunk order.
  const Eigen::MatrixXd cam_sum = chunked_accumulate(
      n, 256, 14, 15, policy, [&](std::size_t b, std::size_t e, Eigen::MatrixXd& acc) {
        for (std::size_t i = b; i < e; ++i) {
          const Eigen::Vector3d x = s.points[i].vec();
          for (int cam = 0; cam < 2; ++cam) {
            const CameraTerm t = camera_term(s.cams[cam], cam, x, s.pixels[cam][i].vec());
            const int o = kCamParams * cam;
            acc.block<kCamParams, kCamParams>(o, o) += t.jc.transpose() * t.jc;
            acc.block<kCamParams, 1>(o, 14) += t.jc.transpose() * t.residual;
          }
        }
      });
  lin.h_cc = cam_sum.leftCols<14>();
  lin.g_c = cam_sum.col(14);
  return lin;
}

double gradient_inf_norm(const Linearization& lin) {
  double g = lin.g_c.cwiseAbs().maxCoeff();
  for (const auto& gp : lin.g_p) g = std::max(g, gp.cwiseAbs().maxCoeff());
  return g;
}

struct Step {
  CamVec d_cam[2];
  std::vector<PointVec> d_point;
  bool ok = false;
};

Step solve_damped(const Linearization& lin, double lambda, ExecutionPolicy policy) {
  const std::size_t n = lin.h_pp.size();
  Step step;
  step.d_point.resize(n);

  std::vector<Mat7> inv_pp(n);
  std::vector<char> pd(n, 1);
  parallel_for(n, policy, [&](std::size_t i) {
    Mat7 h = lin.h_pp[i];
    h.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
    Eigen::LDLT<Mat7> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      pd[i] = 0;
      return;
    }
    inv_pp[i] = ldlt.solve(Mat7::Identity());
  });
  for (char ok : pd)
    if (!ok) return step;

  const Eigen::MatrixXd reduced = chunked_accumulate(
      n, 256, 14, 15, policy, [&](std::size_t b, std::size_t e, Eigen::MatrixXd& acc) {
        for (std::size_t i = b; i < e; ++i) {
          const Mat14x7 w = lin.h_cp[i] * inv_pp[i];
          acc.leftCols<14>().noalias() += w * lin.h_cp[i].transpose();
          acc.col(14).noalias() += w * lin.g_p[i];
        }
      });

  Mat14 s = lin.h_cc;
  s.diagonal() += lambda * lin.h_cc.diagonal().cwiseMax(1e-12);
  s -= reduced.leftCols<14>();
  const Vec14 rhs = -lin.g_c + reduced.col(14);
  Eigen::LDLT<Mat14> ldlt(s);
  if (ldlt.info() != Eigen::Success) return step;
  const Vec14 dc = ldlt.solve(rhs);
  if (!dc.allFinite()) return step;
  step.d_cam[0] = dc.head<7>();
  step.d_cam[1] = dc.tail<7>();

  parallel_for(n, policy, [&](std::size_t i) {
    step.d_point[i] = inv_pp[i] * (-lin.g_p[i] - lin.h_cp[i].transpose() * dc);
  });
  step.ok = true;
  return step;
}

State apply(const State& s, const Step& step) {
  State out;
  for (int c = 0; c < 2; ++c) out.cams[c] = s.cams[c].updated(step.d_cam[c]);
  const std::size_t n = s.points.size();
  out.points.resize(n);
  out.pixels[0].resize(n);
  out.pixels[1].resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PointVec& d = step.d_point[i];
    out.points[i] = Point3::from(s.points[i].vec() + d.head<3>());
    out.pixels[0][i] = Point2::from(s.pixels[0][i].vec() + d.segment<2>(3));
    out.pixels[1][i] = Point2::from(s.pixels[1][i].vec() + d.segment<2>(5));
  }
  return out;
}

BundleEnergies energies_of(const CorrespondenceSet& c, const State& s, const BundleConfig& cfg) {
  return bundle_energies(c, s.cams[0].projection(), s.cams[1].projection(), s.points, s.pixels[0],
                         s.pixels[1], cfg);
}

AffineCamera finish_camera(const CameraState& k) {
  AffineCamera cam;
  cam.intrinsics = AffineIntrinsics{k.alpha_x, k.alpha_y, 0.0};
  cam.pose.rotation = k.rotation;
  cam.pose.rotation.row(2) = cam.pose.rotation.row(0).cross(cam.pose.rotation.row(1));
  cam.pose.t1 = k.t1;
  cam.pose.t2 = k.t2;
  cam.projection = compose(cam.intrinsics, cam.pose);
  return cam;
}

}  // namespace

BundleEnergies bundle_energies(const CorrespondenceSet& c, const AffineProjection& left,
                               const AffineProjection& right, std::span<const Point3> refined_points,
                               std::span<const Point2> refined_left,
                               std::span<const Point2> refined_right, const BundleConfig& cfg) {
  const std::size_t n = c.items.size();
  if (refined_points.size() != n || refined_left.size() != n || refined_right.size() != n)
    fail(ErrorKind::CountMismatch, "bundle_energies: refined arrays must match the correspondence set");
  BundleEnergies e;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& item = c.items[i];
    e.reprojection += 0.5 * ((refined_left[i].vec() - reproject(left, refined_points[i]).vec()).squaredNorm() +
                             (refined_right[i].vec() - reproject(right, refined_points[i]).vec()).squaredNorm());
    e.pixel_prior += 0.5 * ((refined_left[i].vec() - item.u_left.vec()).squaredNorm() +
                            (refined_right[i].vec() - item.u_right.vec()).squaredNorm());
    e.point_prior += 0.5 * (refined_points[i].vec() - item.x.vec()).squaredNorm();
  }
  e.total = e.reprojection + e.pixel_prior / cfg.sigma_u + e.point_prior / cfg.sigma_x;
  return e;
}

StereoCalibration bundle_adjust(const CorrespondenceSet& c, const AffineProjection& init_left,
                                const AffineProjection& init_right, const BundleConfig& cfg) {
  if (!(cfg.sigma_u > 0.0) || !(cfg.sigma_x > 0.0))
    fail(ErrorKind::InvalidArgument, "bundle_adjust: sigma_u and sigma_x must be > 0");
  if (cfg.max_iterations < 0) fail(ErrorKind::InvalidArgument, "bundle_adjust: max_iterations < 0");
  c.validate();
  const auto points = c.points();
  if (points.size() < 4 || points_are_coplanar(points))
    fail(ErrorKind::InvalidInit, "bundle_adjust: needs >= 4 non-coplanar correspondences");

  State s;
  s.cams[0] = camera_from_projection(init_left);
  s.cams[1] = camera_from_projection(init_right);
  s.points = points;
  s.pixels[0] = c.left_pixels();
  s.pixels[1] = c.right_pixels();

  StereoCalibration out;
  if (cfg.max_iterations == 0) {
    // Zero budget: the initial cameras are returned untouched.
    auto [kl, pl] = resect(init_left);
    auto [kr, pr] = resect(init_right);
    out.left = AffineCamera{init_left, kl, pl};
    out.right = AffineCamera{init_right, kr, pr};
    out.refined_points = s.points;
    out.refined_left = s.pixels[0];
    out.refined_right = s.pixels[1];
    out.initial = bundle_energies(c, init_left, init_right, s.points, s.pixels[0], s.pixels[1], cfg);
    out.final = out.initial;
    out.converged = false;
    out.iterations = 0;
    out.final_gradient_norm = gradient_inf_norm(linearize(c, s, cfg, ExecutionPolicy::Parallel));
    return out;
  }

  const ExecutionPolicy policy = ExecutionPolicy::Parallel;
  BundleEnergies energy = energies_of(c, s, cfg);
  out.initial = energy;

  double lambda = 1e-4;
  int iter = 0;
  bool converged = false;
  double gnorm = 0.0;
  for (; iter < cfg.max_iterations; ++iter) {
    const Linearization lin = linearize(c, s, cfg, policy);
    gnorm = gradient_inf_norm(lin);
    if (gnorm <= cfg.gradient_tolerance || energy.total == 0.0) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (lambda < 1e16) {
      const Step step = solve_damped(lin, lambda, policy);
      if (step.ok) {
        State trial = apply(s, step);
        const BundleEnergies te = energies_of(c, trial, cfg);
        if (std::isfinite(te.total) && te.total < energy.total) {
          const double decrease = energy.total - te.total;
          s = std::move(trial);
          const double previous = energy.total;
          energy = te;
          lambda = std::max(lambda / 3.0, 1e-12);
          accepted = true;
          if (decrease <= cfg.objective_tolerance * previous) converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No damped step reduces the energy: stationary at working precision.
      converged = true;
      break;
    }
    if (converged) {
      ++iter;
      gnorm = gradient_inf_norm(linearize(c, s, cfg, policy));
      break;
    }
  }
  if (!converged) gnorm = gradient_inf_norm(linearize(c, s, cfg, policy));

  out.left = finish_camera(s.cams[0]);
  out.right = finish_camera(s.cams[1]);
  out.refined_points = std::move(s.points);
  out.refined_left = std::move(s.pixels[0]);
  out.refined_right = std::move(s.pixels[1]);
  out.final = bundle_energies(c, out.left.projection, out.right.projection, out.refined_points,
                              out.refined_left, out.refined_right, cfg);
  out.converged = converged;
  out.iterations = iter;
  out.final_gradient_norm = gnorm;
  return out;
}

}  // namespace affstereo
