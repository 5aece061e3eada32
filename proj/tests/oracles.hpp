#pragma once

// Independent reference implementations. None of these call into the library's
// numerical code; they take a different route to the same answer so that the
// tests catch mistakes shared by a formula and its own implementation.

#include "affstereo/core.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <vector>

namespace oracle {

using affstereo::Point2;
using affstereo::Point3;

// Least squares through the normal equations (A^T A) x = A^T b.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::MatrixXd n = a.transpose() * a;
  return n.llt().solve(a.transpose() * b);
}

// Affine DLT as one normal-equation solve per image row.
inline Eigen::Matrix<double, 2, 4> dlt(const std::vector<Point3>& x, const std::vector<Point2>& u) {
  Eigen::MatrixXd a(x.size(), 4);
  Eigen::VectorXd bu(x.size()), bv(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    a.row(i) << x[i].x, x[i].y, x[i].z, 1.0;
    bu(i) = u[i].u;
    bv(i) = u[i].v;
  }
  Eigen::Matrix<double, 2, 4> m;
  m.row(0) = normal_equations(a, bu).transpose();
  m.row(1) = normal_equations(a, bv).transpose();
  return m;
}

// Upper-triangular K with positive diagonal such that K K^T = A A^T, where A is
// the left 2x3 block of an affine camera.
inline Eigen::Matrix2d intrinsics_by_cholesky(const Eigen::Matrix<double, 2, 3>& a) {
  const Eigen::Matrix2d s = a * a.transpose();
  const double b = std::sqrt(s(1, 1));
  const double skew = s(0, 1) / b;
  const double alpha = std::sqrt(s(0, 0) - skew * skew);
  Eigen::Matrix2d k;
  k << alpha, skew, 0.0, b;
  return k;
}

// Cox-de Boor recursion for B-spline basis function i of degree p.
inline double cox_de_boor(const std::vector<double>& knots, int i, int p, double t) {
  if (p == 0) return (knots[i] <= t && t < knots[i + 1]) ? 1.0 : 0.0;
  double out = 0.0;
  const double d1 = knots[i + p] - knots[i];
  const double d2 = knots[i + p + 1] - knots[i + 1];
  if (d1 > 0.0) out += (t - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, t);
  if (d2 > 0.0) out += (knots[i + p + 1] - t) / d2 * cox_de_boor(knots, i + 1, p - 1, t);
  return out;
}

// de Boor's algorithm for a degree-3 curve with control values c (one scalar
// channel) at parameter t.
inline double de_boor(const std::vector<double>& knots, const std::vector<double>& c, double t) {
  const int p = 3;
  int k = p;
  while (k + 1 < static_cast<int>(c.size()) && !(t < knots[k + 1])) ++k;
  std::vector<double> d(p + 1);
  for (int j = 0; j <= p; ++j) d[j] = c[j + k - p];
  for (int r = 1; r <= p; ++r)
    for (int j = p; j >= r; --j) {
      const double alpha = (t - knots[j + k - p]) / (knots[j + 1 + k - r] - knots[j + k - p]);
      d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
    }
  return d[p];
}

inline std::vector<double> uniform_knots(double lo, double hi, int count) {
  const double h = (hi - lo) / (count - 3);
  std::vector<double> k(count + 4);
  for (int j = 0; j < count + 4; ++j) k[j] = lo + (j - 3) * h;
  return k;
}

// Tensor-product surface value via de Boor: first along v for every u-row of
// control points, then along u. coef is (gu*gv) x 3 with row iu*gv+iv.
inline Eigen::Vector3d de_boor_surface(const Eigen::MatrixXd& coef, int gu, int gv, double u_lo, double u_hi,
                                       double v_lo, double v_hi, double u, double v) {
  const auto ku = uniform_knots(u_lo, u_hi, gu);
  const auto kv = uniform_knots(v_lo, v_hi, gv);
  Eigen::Vector3d out;
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> row(gu);
    for (int iu = 0; iu < gu; ++iu) {
      std::vector<double> col(gv);
      for (int iv = 0; iv < gv; ++iv) col[iv] = coef(iu * gv + iv, ch);
      row[iu] = de_boor(kv, col, v);
    }
    out(ch) = de_boor(ku, row, u);
  }
  return out;
}

// Uniform cubic pieces in matrix form: local parameter s in [0, 1) of a span,
// derivative order 0..2 with respect to s.
inline std::array<double, 4> cubic_pieces(double s, int order) {
  switch (order) {
    case 0:
      return {(1 - s) * (1 - s) * (1 - s) / 6.0, (3 * s * s * s - 6 * s * s + 4) / 6.0,
              (-3 * s * s * s + 3 * s * s + 3 * s + 1) / 6.0, s * s * s / 6.0};
    case 1:
      return {-(1 - s) * (1 - s) / 2.0, (3 * s * s - 4 * s) / 2.0, (-3 * s * s + 2 * s + 1) / 2.0, s * s / 2.0};
    default:
      return {1 - s, 3 * s - 2, -3 * s + 1, s};
  }
}

// Thin-plate energy by an n x n midpoint rule using the matrix-form pieces.
inline double bending_by_midpoint(const Eigen::MatrixXd& coef, int gu, int gv, double u_lo, double u_hi,
                                  double v_lo, double v_hi, int n) {
  const double hu = (u_hi - u_lo) / (gu - 3), hv = (v_hi - v_lo) / (gv - 3);
  const double du = (u_hi - u_lo) / n, dv = (v_hi - v_lo) / n;
  double total = 0.0;
  for (int a = 0; a < n; ++a) {
    const double u = u_lo + (a + 0.5) * du;
    const int su = std::min(static_cast<int>((u - u_lo) / hu), gu - 4);
    const double lu = (u - u_lo) / hu - su;
    const auto bu0 = cubic_pieces(lu, 0), bu1 = cubic_pieces(lu, 1), bu2 = cubic_pieces(lu, 2);
    for (int b = 0; b < n; ++b) {
      const double v = v_lo + (b + 0.5) * dv;
      const int sv = std::min(static_cast<int>((v - v_lo) / hv), gv - 4);
      const double lv = (v - v_lo) / hv - sv;
      const auto bv0 = cubic_pieces(lv, 0), bv1 = cubic_pieces(lv, 1), bv2 = cubic_pieces(lv, 2);
      Eigen::Vector3d puu = Eigen::Vector3d::Zero(), puv = Eigen::Vector3d::Zero(), pvv = Eigen::Vector3d::Zero();
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          const Eigen::Vector3d c = coef.row((su + i) * gv + sv + j).transpose();
          puu += bu2[i] * bv0[j] / (hu * hu) * c;
          puv += bu1[i] * bv1[j] / (hu * hv) * c;
          pvv += bu0[i] * bv2[j] / (hv * hv) * c;
        }
      total += (puu.squaredNorm() + 2.0 * puv.squaredNorm() + pvv.squaredNorm()) * du * dv;
    }
  }
  return total;
}

// Triangulation through an explicit SVD pseudoinverse of the stacked 4x3 block.
inline Point3 triangulate_pinv(const Eigen::Matrix<double, 2, 4>& ml, const Eigen::Matrix<double, 2, 4>& mr,
                               const Point2& ul, const Point2& ur) {
  Eigen::Matrix<double, 4, 3> a;
  a.topRows<2>() = ml.leftCols<3>();
  a.bottomRows<2>() = mr.leftCols<3>();
  Eigen::Vector4d b(ul.u - ml(0, 3), ul.v - ml(1, 3), ur.u - mr(0, 3), ur.v - mr(1, 3));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::Vector3d inv = svd.singularValues().cwiseInverse();
  const Eigen::Vector3d x = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * b;
  return {x(0), x(1), x(2)};
}

// Distance of a point to the line l0 u + l1 v + l2 = 0.
inline double line_distance(const Eigen::Vector3d& l, const Point2& p) {
  return std::abs(l(0) * p.u + l(1) * p.v + l(2)) / std::hypot(l(0), l(1));
}

// Mean of the two point-to-epipolar-line distances for F in the convention
// [u_r 1] F [u_l 1]^T = 0.
inline double symmetric_epipolar_distance(const Eigen::Matrix3d& f, const Point2& ul, const Point2& ur) {
  const Eigen::Vector3d line_right = f * Eigen::Vector3d(ul.u, ul.v, 1.0);
  const Eigen::Vector3d line_left = f.transpose() * Eigen::Vector3d(ur.u, ur.v, 1.0);
  return 0.5 * (line_distance(line_right, ur) + line_distance(line_left, ul));
}

// Weighted mean of pixel centres within radius r of (cu, cv).
inline Point2 disc_centroid(const std::vector<float>& values, int w, int h, int cu, int cv, double r) {
  double su = 0.0, sv = 0.0, sw = 0.0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double du = u - cu, dv = v - cv;
      if (du * du + dv * dv > r * r) continue;
      const double a = values[static_cast<std::size_t>(v) * w + u];
      su += a * u;
      sv += a * v;
      sw += a;
    }
  return {su / sw, sv / sw};
}

// Horn's closed-form absolute orientation via unit quaternions.
inline std::pair<Eigen::Matrix3d, Eigen::Vector3d> horn(const std::vector<Point3>& src, const std::vector<Point3>& dst) {
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i].vec();
    cd += dst[i].vec();
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(src.size());
  Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) s += (src[i].vec() - cs) * (dst[i].vec() - cd).transpose();
  Eigen::Matrix4d n;
  n << s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
      s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
      s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), -s(0, 0) + s(1, 1) - s(2, 2), s(1, 2) + s(2, 1),
      s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), -s(0, 0) - s(1, 1) + s(2, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(n);
  const Eigen::Vector4d q = es.eigenvectors().col(3);
  const Eigen::Quaterniond quat(q(0), q(1), q(2), q(3));
  const Eigen::Matrix3d r = quat.normalized().toRotationMatrix();
  return {r, cd - r * cs};
}

}  // namespace oracle
