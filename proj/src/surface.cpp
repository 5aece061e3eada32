#include "affstereo/surface.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>

namespace affstereo {

BBSurface::BBSurface(Domain domain, int grid_u, int grid_v)
    : BBSurface(domain, grid_u, grid_v,
                Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(std::max(grid_u, 0)) *
                                          std::max(grid_v, 0),
                                      3)) {}

BBSurface::BBSurface(Domain domain, int grid_u, int grid_v, Eigen::MatrixXd coefficients)
    : domain_(domain),
      basis_u_(domain.u_min, domain.u_max, grid_u),
      basis_v_(domain.v_min, domain.v_max, grid_v),
      coefficients_(std::move(coefficients)) {
  if (coefficients_.rows() != static_cast<Eigen::Index>(grid_u) * grid_v || coefficients_.cols() != 3)
    fail(ErrorKind::InvalidArgument, "surface: coefficient matrix must be (grid_u*grid_v) x 3");
}

Eigen::Vector3d evaluate_surface_derivative(const BBSurface& s, const Point2& u, int du, int dv) {
  if (!s.domain().contains(u)) fail(ErrorKind::OutOfDomain, "surface: parameter outside the domain");
  const auto bu = s.basis_u().evaluate(u.u, du);
  const auto bv = s.basis_v().evaluate(u.v, dv);
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      out += bu.value[a] * bv.value[b] *
             s.coefficients().row(s.index(bu.first + a, bv.first + b)).transpose();
  return out;
}

Point3 evaluate_surface(const BBSurface& s, const Point2& u) {
  return Point3::from(evaluate_surface_derivative(s, u, 0, 0));
}

std::vector<Point3> evaluate_surface_batch(const BBSurface& s, std::span<const Point2> us,
                                           ExecutionPolicy policy) {
  std::vector<Point3> out(us.size());
  parallel_for(us.size(), policy, [&](std::size_t i) { out[i] = evaluate_surface(s, us[i]); });
  return out;
}

Eigen::MatrixXd bending_matrix(const BBSurface& s) {
  const Eigen::MatrixXd g0u = s.basis_u().gram(0), g1u = s.basis_u().gram(1), g2u = s.basis_u().gram(2);
  const Eigen::MatrixXd g0v = s.basis_v().gram(0), g1v = s.basis_v().gram(1), g2v = s.basis_v().gram(2);
  const int gu = s.grid_u(), gv = s.grid_v();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(s.control_count(), s.control_count());
  for (int iu = 0; iu < gu; ++iu)
    for (int ju = std::max(0, iu - 3); ju <= std::min(gu - 1, iu + 3); ++ju)
      for (int iv = 0; iv < gv; ++iv)
        for (int jv = std::max(0, iv - 3); jv <= std::min(gv - 1, iv + 3); ++jv)
          b(s.index(iu, iv), s.index(ju, jv)) =
              g2u(iu, ju) * g0v(iv, jv) + 2.0 * g1u(iu, ju) * g1v(iv, jv) + g0u(iu, ju) * g2v(iv, jv);
  return b;
}

namespace {

// Forward difference operator of the given order, (count - order) x count.
Eigen::MatrixXd difference(int count, int order) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(count, count);
  for (int k = 0; k < order; ++k) {
    const Eigen::Index r = d.rows() - 1;
    d = (d.bottomRows(r) - d.topRows(r)).eval();
  }
  return d;
}

// The order-th derivative of a uniform cubic spline with coefficients c is a
// spline of degree 3 - order with coefficients (D^order c) / h^order. This is
// the Gram matrix of those lower-degree B-splines over [lo, hi], with the
// 1 / h^(2 order) factor folded in.
Eigen::MatrixXd difference_gram(const UniformCubicBasis& b, int order) {
  if (order == 0) return b.gram(0);
  static constexpr std::array<double, 4> nodes = {-0.8611363115940526, -0.3399810435848563,
                                                   0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 4> weights = {0.3478548451374538, 0.6521451548625461,
                                                     0.6521451548625461, 0.3478548451374538};
  const int width = 4 - order;  // active pieces per span
  std::array<std::array<double, 3>, 3> local{};
  for (int q = 0; q < 4; ++q) {
    const double t = 0.5 * (nodes[q] + 1.0);
    std::array<double, 3> p{};
    if (order == 1)
      p = {0.5 * (1 - t) * (1 - t), 0.5 * (-2 * t * t + 2 * t + 1), 0.5 * t * t};
    else
      p = {1 - t, t, 0.0};
    for (int a = 0; a < width; ++a)
      for (int c = 0; c < width; ++c) local[a][c] += 0.5 * weights[q] * p[a] * p[c];
  }
  const double scale = std::pow(b.spacing(), 1 - 2 * order);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(b.count() - order, b.count() - order);
  for (int span = 0; span < b.spans(); ++span)
    for (int a = 0; a < width; ++a)
      for (int c = 0; c < width; ++c) g(span + a, span + c) += scale * local[a][c];
  return g;
}

}  // namespace

// Evaluated in difference form so every term is a nonnegative quadratic form of
// coefficient differences: affine coefficient fields give zero up to rounding of
// the differences themselves, with no cancellation against large coefficients.
double bending_energy(const BBSurface& s) {
  const int gu = s.grid_u(), gv = s.grid_v();
  const Eigen::MatrixXd d1u = difference(gu, 1), d2u = difference(gu, 2);
  const Eigen::MatrixXd d1v = difference(gv, 1), d2v = difference(gv, 2);
  const Eigen::MatrixXd g0u = difference_gram(s.basis_u(), 0), g1u = difference_gram(s.basis_u(), 1),
                        g2u = difference_gram(s.basis_u(), 2);
  const Eigen::MatrixXd g0v = difference_gram(s.basis_v(), 0), g1v = difference_gram(s.basis_v(), 1),
                        g2v = difference_gram(s.basis_v(), 2);
  double e = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    // Coefficient grid, row iu, column iv.
    const Eigen::MatrixXd c =
        Eigen::Map<const Eigen::VectorXd>(s.coefficients().col(ch).data(), s.control_count())
            .reshaped<Eigen::RowMajor>(gu, gv);
    const Eigen::MatrixXd uu = d2u * c, uv = d1u * c * d1v.transpose(), vv = c * d2v.transpose();
    e += (g2u * uu * g0v).cwiseProduct(uu).sum() + 2.0 * (g1u * uv * g1v).cwiseProduct(uv).sum() +
         (g0u * vv * g2v).cwiseProduct(vv).sum();
  }
  return e;
}

Domain fit_domain(std::span<const Point2> us) {
  if (us.empty()) fail(ErrorKind::InvalidArgument, "surface: no samples");
  Domain d{us[0].u, us[0].u, us[0].v, us[0].v};
  for (const auto& p : us) {
    d.u_min = std::min(d.u_min, p.u);
    d.u_max = std::max(d.u_max, p.u);
    d.v_min = std::min(d.v_min, p.v);
    d.v_max = std::max(d.v_max, p.v);
  }
  const double mu = 0.01 * (d.u_max - d.u_min);
  const double mv = 0.01 * (d.v_max - d.v_min);
  d.u_min -= mu;
  d.u_max += mu;
  d.v_min -= mv;
  d.v_max += mv;
  return d;
}

namespace {

struct BasisRow {
  std::array<int, 16> index{};
  std::array<double, 16> value{};
};

std::vector<BasisRow> basis_rows(const BBSurface& s, std::span<const Point2> us, ExecutionPolicy policy) {
  std::vector<BasisRow> rows(us.size());
  parallel_for(us.size(), policy, [&](std::size_t i) {
    const auto bu = s.basis_u().evaluate(us[i].u);
    const auto bv = s.basis_v().evaluate(us[i].v);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        rows[i].index[4 * a + b] = s.index(bu.first + a, bv.first + b);
        rows[i].value[4 * a + b] = bu.value[a] * bv.value[b];
      }
  });
  return rows;
}

double predict(const BasisRow& row, const Eigen::MatrixXd& coef, int ch) {
  double v = 0.0;
  for (int j = 0; j < 16; ++j) v += row.value[j] * coef(row.index[j], ch);
  return v;
}

// Weighted normal equations (sum_i w_i b_i b_i^T | sum_i w_i b_i x_i) for one channel.
Eigen::MatrixXd normal_equations(std::span<const BasisRow> rows, std::span<const double> weights,
                                 std::span<const Point3> xs, int ch, Eigen::Index nc,
                                 ExecutionPolicy policy) {
  const std::size_t chunk = std::max<std::size_t>(256, (rows.size() + 15) / 16);
  return chunked_accumulate(rows.size(), chunk, nc, nc + 1, policy,
                            [&](std::size_t b, std::size_t e, Eigen::MatrixXd& acc) {
                              for (std::size_t i = b; i < e; ++i) {
                                const auto& r = rows[i];
                                const double w = weights[i];
                                const double target = xs[i].vec()(ch);
                                for (int p = 0; p < 16; ++p) {
                                  const double wp = w * r.value[p];
                                  for (int q = 0; q < 16; ++q) acc(r.index[p], r.index[q]) += wp * r.value[q];
                                  acc(r.index[p], nc) += wp * target;
                                }
                              }
                            });
}

Eigen::VectorXd solve_regularised(const Eigen::MatrixXd& normal, const Eigen::MatrixXd& bend, double mu) {
  const Eigen::Index nc = bend.rows();
  Eigen::MatrixXd lhs = normal.leftCols(nc) + 2.0 * mu * bend;
  // With mu > 0 only affine coefficient fields escape the bending term, and the
  // non-collinear data pins those. At mu = 0 a tiny ridge keeps control points
  // without data support solvable; it would bias planes if always applied.
  if (mu == 0.0) lhs.diagonal().array() += 1e-12 * std::max(lhs.diagonal().maxCoeff(), 1e-300);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
  Eigen::VectorXd c = ldlt.solve(normal.col(nc));
  if (ldlt.info() != Eigen::Success || !c.allFinite())
    fail(ErrorKind::DegenerateDomain, "surface: normal equations are singular");
  return c;
}

void check_not_collinear(std::span<const Point2> us) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : us) mean += p.vec();
  mean /= static_cast<double>(us.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& p : us) scatter += (p.vec() - mean) * (p.vec() - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(scatter);
  const auto ev = es.eigenvalues();
  if (!(ev(1) > 0.0) || ev(0) <= 1e-18 * ev(1))
    fail(ErrorKind::DegenerateDomain, "surface: image samples are collinear");
}

}  // namespace

BBSurface fit_surface_irls(std::span<const Point2> us, std::span<const Point3> xs,
                           const Domain& domain, const SplineFitConfig& cfg, ExecutionPolicy policy) {
  if (us.size() != xs.size()) fail(ErrorKind::CountMismatch, "surface: pixel and point counts differ");
  if (!(cfg.mu >= 0.0)) fail(ErrorKind::InvalidArgument, "surface: mu must be >= 0");
  if (!(cfg.irls_delta > 0.0)) fail(ErrorKind::InvalidArgument, "surface: irls_delta must be > 0");
  if (cfg.irls_iterations < 0) fail(ErrorKind::InvalidArgument, "surface: irls_iterations must be >= 0");

  BBSurface s(domain, cfg.grid_u, cfg.grid_v);
  const Eigen::Index nc = s.control_count();
  const auto rows = basis_rows(s, us, policy);
  const Eigen::MatrixXd bend = bending_matrix(s);
  const std::size_t n = us.size();

  // l2 start (unit weights), shared by the three channels
  std::vector<double> weights(n, 1.0);
  for (int ch = 0; ch < 3; ++ch)
    s.coefficients().col(ch) = solve_regularised(normal_equations(rows, weights, xs, ch, nc, policy), bend, cfg.mu);

  // IRLS on sum sqrt(r^2 + delta^2): weights 1 / sqrt(r^2 + delta^2), per channel.
  const double d2 = cfg.irls_delta * cfg.irls_delta;
  for (int it = 0; it < cfg.irls_iterations; ++it) {
    Eigen::MatrixXd next(nc, 3);
    for (int ch = 0; ch < 3; ++ch) {
      parallel_for(n, policy, [&](std::size_t i) {
        const double r = predict(rows[i], s.coefficients(), ch) - xs[i].vec()(ch);
        weights[i] = 1.0 / std::sqrt(r * r + d2);
      });
      next.col(ch) = solve_regularised(normal_equations(rows, weights, xs, ch, nc, policy), bend, cfg.mu);
    }
    s.coefficients() = next;
  }
  return s;
}

SurfaceFit fit_surface(std::span<const Point2> us, std::span<const Point3> xs,
                       const SplineFitConfig& cfg, ExecutionPolicy policy) {
  if (us.size() != xs.size()) fail(ErrorKind::CountMismatch, "surface: pixel and point counts differ");
  if (us.size() < 4) fail(ErrorKind::InvalidArgument, "surface: need at least 4 samples");
  if (!(cfg.epsilon > 0.0)) fail(ErrorKind::InvalidArgument, "surface: epsilon must be > 0");
  for (const auto& p : us)
    if (!is_finite(p)) fail(ErrorKind::InvalidArgument, "surface: non-finite pixel");
  for (const auto& x : xs)
    if (!is_finite(x)) fail(ErrorKind::InvalidArgument, "surface: non-finite point");
  check_not_collinear(us);

  const Domain domain = fit_domain(us);
  const BBSurface first = fit_surface_irls(us, xs, domain, cfg, policy);
  const auto first_pred = evaluate_surface_batch(first, us, policy);

  std::vector<double> first_l1(us.size());
  std::vector<bool> rejected(us.size());
  std::vector<Point2> keep_u;
  std::vector<Point3> keep_x;
  for (std::size_t i = 0; i < us.size(); ++i) {
    first_l1[i] = (first_pred[i].vec() - xs[i].vec()).lpNorm<1>();
    rejected[i] = first_l1[i] > cfg.epsilon;
    if (!rejected[i]) {
      keep_u.push_back(us[i]);
      keep_x.push_back(xs[i]);
    }
  }
  if (keep_u.empty()) fail(ErrorKind::EmptyAfterRejection, "surface: every point exceeded epsilon");

  // Survivors are refit over the original domain so the surface still covers every input pixel.
  BBSurface final_surface = fit_surface_irls(keep_u, keep_x, domain, cfg, policy);
  const auto final_pred = evaluate_surface_batch(final_surface, us, policy);
  std::vector<double> final_l1(us.size());
  for (std::size_t i = 0; i < us.size(); ++i) final_l1[i] = (final_pred[i].vec() - xs[i].vec()).lpNorm<1>();

  return SurfaceFit{std::move(final_surface), std::move(rejected), std::move(first_l1), std::move(final_l1)};
}

}  // namespace affstereo
