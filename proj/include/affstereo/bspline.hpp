#pragma once

#include <Eigen/Core>

#include <array>

namespace affstereo {

// Uniform cubic B-spline basis over [lo, hi] with `count` >= 4 functions. The
// knot vector is uniform with spacing h = (hi - lo) / (count - 3) and extends
// three knots beyond each end, so the basis is a partition of unity on [lo, hi].
class UniformCubicBasis {
public:
  UniformCubicBasis(double lo, double hi, int count);

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  int count() const noexcept { return count_; }
  int spans() const noexcept { return count_ - 3; }
  double spacing() const noexcept { return h_; }

  // Knot j (0 <= j < count + 4).
  double knot(int j) const noexcept { return lo_ + (j - 3) * h_; }

  struct Local {
    int first = 0;                    // index of the first of the 4 active functions
    std::array<double, 4> value{};    // derivative of order `order` w.r.t. t
  };

  // Active functions at t (clamped into [lo, hi]) and their derivative of the
  // given order (0, 1 or 2).
  Local evaluate(double t, int order = 0) const;

  // G(i, j) = integral over [lo, hi] of B_i^(order) * B_j^(order).
  Eigen::MatrixXd gram(int order) const;

private:
  double lo_;
  double hi_;
  int count_;
  double h_;
};

}  // namespace affstereo
