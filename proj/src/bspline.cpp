#include "affstereo/bspline.hpp"

#include "affstereo/core.hpp"

#include <algorithm>
#include <cmath>

namespace affstereo {

namespace {

// Uniform cubic segment polynomials on tau in [0, 1].
std::array<double, 4> segment(double tau, int order) {
  const double s = 1.0 - tau;
  switch (order) {
    case 0:
      return {s * s * s / 6.0, (3.0 * tau * tau * tau - 6.0 * tau * tau + 4.0) / 6.0,
              (-3.0 * tau * tau * tau + 3.0 * tau * tau + 3.0 * tau + 1.0) / 6.0,
              tau * tau * tau / 6.0};
    case 1:
      return {-0.5 * s * s, 0.5 * (3.0 * tau * tau - 4.0 * tau),
              0.5 * (-3.0 * tau * tau + 2.0 * tau + 1.0), 0.5 * tau * tau};
    case 2:
      return {s, 3.0 * tau - 2.0, 1.0 - 3.0 * tau, tau};
    default:
      fail(ErrorKind::InvalidArgument, "bspline: derivative order must be 0, 1 or 2");
  }
}

}  // namespace

UniformCubicBasis::UniformCubicBasis(double lo, double hi, int count)
    : lo_(lo), hi_(hi), count_(count), h_(0.0) {
  if (count < 4) fail(ErrorKind::InvalidArgument, "bspline: need at least 4 control points");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    fail(ErrorKind::InvalidArgument, "bspline: empty parameter interval");
  h_ = (hi - lo) / (count - 3);
}

UniformCubicBasis::Local UniformCubicBasis::evaluate(double t, int order) const {
  const double s = (std::clamp(t, lo_, hi_) - lo_) / h_;
  int span = static_cast<int>(std::floor(s));
  span = std::clamp(span, 0, spans() - 1);
  const double tau = s - span;
  Local out;
  out.first = span;
  out.value = segment(tau, order);
  const double scale = std::pow(h_, -order);
  for (double& v : out.value) v *= scale;
  return out;
}

Eigen::MatrixXd UniformCubicBasis::gram(int order) const {
  // 4-point Gauss-Legendre is exact for the degree <= 6 products.
  static constexpr std::array<double, 4> nodes = {-0.8611363115940526, -0.3399810435848563,
                                                   0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 4> weights = {0.3478548451374538, 0.6521451548625461,
                                                     0.6521451548625461, 0.3478548451374538};
  std::array<std::array<double, 4>, 4> local{};
  for (int q = 0; q < 4; ++q) {
    const auto b = segment(0.5 * (nodes[q] + 1.0), order);
    for (int a = 0; a < 4; ++a)
      for (int c = 0; c < 4; ++c) local[a][c] += 0.5 * weights[q] * b[a] * b[c];
  }
  const double scale = std::pow(h_, 1 - 2 * order);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(count_, count_);
  for (int span = 0; span < spans(); ++span)
    for (int a = 0; a < 4; ++a)
      for (int c = 0; c < 4; ++c) g(span + a, span + c) += scale * local[a][c];
  return g;
}

}  // namespace affstereo
