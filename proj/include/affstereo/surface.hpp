#pragma once

#include "affstereo/bspline.hpp"
#include "affstereo/core.hpp"
#include "affstereo/kernels.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace affstereo {

// Axis-aligned rectangle in pixel coordinates.
struct Domain {
  double u_min = 0.0;
  double u_max = 1.0;
  double v_min = 0.0;
  double v_max = 1.0;

  bool contains(const Point2& p) const {
    return p.u >= u_min && p.u <= u_max && p.v >= v_min && p.v <= v_max;
  }
};

// Bicubic tensor-product B-spline Psi: image point -> 3D point. Coefficient row
// iu * grid_v + iv holds the (x, y, z) control value of basis pair (iu, iv).
class BBSurface {
public:
  BBSurface(Domain domain, int grid_u, int grid_v);
  BBSurface(Domain domain, int grid_u, int grid_v, Eigen::MatrixXd coefficients);

  const Domain& domain() const noexcept { return domain_; }
  int grid_u() const noexcept { return basis_u_.count(); }
  int grid_v() const noexcept { return basis_v_.count(); }
  int control_count() const noexcept { return grid_u() * grid_v(); }
  const UniformCubicBasis& basis_u() const noexcept { return basis_u_; }
  const UniformCubicBasis& basis_v() const noexcept { return basis_v_; }

  const Eigen::MatrixXd& coefficients() const noexcept { return coefficients_; }
  Eigen::MatrixXd& coefficients() noexcept { return coefficients_; }

  int index(int iu, int iv) const noexcept { return iu * grid_v() + iv; }

private:
  Domain domain_;
  UniformCubicBasis basis_u_;
  UniformCubicBasis basis_v_;
  Eigen::MatrixXd coefficients_;  // control_count x 3
};

// Throws OutOfDomain for points outside the closed domain rectangle.
Point3 evaluate_surface(const BBSurface& s, const Point2& u);

// Partial derivative of order (du, dv), du + dv <= 2 and each <= 2.
Eigen::Vector3d evaluate_surface_derivative(const BBSurface& s, const Point2& u, int du, int dv);

std::vector<Point3> evaluate_surface_batch(const BBSurface& s, std::span<const Point2> us,
                                           ExecutionPolicy policy = ExecutionPolicy::Parallel);

// Closed-form thin-plate energy over the domain:
//   integral |Psi_uu|^2 + 2 |Psi_uv|^2 + |Psi_vv|^2 = sum over channels c^T B c.
double bending_energy(const BBSurface& s);

// The matrix B above (control_count x control_count).
Eigen::MatrixXd bending_matrix(const BBSurface& s);

struct SplineFitConfig {
  double mu = 1e-2;
  double epsilon = 30.0;  // um, l1 rejection threshold
  int grid_u = 16;
  int grid_v = 16;
  int irls_iterations = 10;
  double irls_delta = 1e-3;  // um
};

struct SurfaceFit {
  BBSurface surface;
  std::vector<bool> rejected;
  std::vector<double> first_pass_l1;  // l1 residual of every input point before rejection
  std::vector<double> final_l1;       // l1 residual of every input point against the final surface
};

// Domain used by fit_surface: bounding rectangle of the samples, grown by 1% per side.
Domain fit_domain(std::span<const Point2> us);

// Robust fit: IRLS on the smoothed l1 data term plus mu * bending energy, one
// rejection pass at epsilon, one re-fit on the survivors.
SurfaceFit fit_surface(std::span<const Point2> us, std::span<const Point3> xs,
                       const SplineFitConfig& cfg,
                       ExecutionPolicy policy = ExecutionPolicy::Parallel);

// Single IRLS solve with an explicit domain, no rejection. Exposed for tests and
// for the mu sweep.
BBSurface fit_surface_irls(std::span<const Point2> us, std::span<const Point3> xs,
                           const Domain& domain, const SplineFitConfig& cfg,
                           ExecutionPolicy policy = ExecutionPolicy::Parallel);

}  // namespace affstereo
