#include "affstereo/calibration.hpp"
#include "affstereo/sim.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace affstereo;
using namespace testing_helpers;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no exception");
  return ErrorKind::InvalidArgument;
}

SimScene noiseless_scene() {
  SimScene s;
  s.noise = NoiseSpec{0.0, 0.0, 0.0};
  return s;
}

}  // namespace

TEST_CASE("reproject: hand-computed cases and matrix-multiply oracle") {
  AffineProjection m;
  m.m << 1, 0, 0, 0, 0, 1, 0, 0;
  const Point2 a = reproject(m, {3, 4, 99});
  CHECK(a.u == 3.0);
  CHECK(a.v == 4.0);
  m.m << 0, 0, 1, 5, 1, 0, 0, 0;
  const Point2 b = reproject(m, {2, 0, 3});
  CHECK(b.u == 8.0);
  CHECK(b.v == 2.0);

  Rng rng(RngSeed{1});
  for (int i = 0; i < 100; ++i) {
    const AffineProjection cam = random_camera(rng);
    const Point3 x = random_point(rng);
    const Eigen::Vector2d ref = cam.m * Eigen::Vector4d(x.x, x.y, x.z, 1.0);
    const Point2 p = reproject(cam, x);
    CHECK(std::abs(p.u - ref(0)) <= 1e-12 * (1 + std::abs(ref(0))));
    CHECK(std::abs(p.v - ref(1)) <= 1e-12 * (1 + std::abs(ref(1))));
  }
}

TEST_CASE("dlt: orthographic identity from 6 points") {
  Rng rng(RngSeed{2});
  AffineProjection truth;
  truth.m << 1, 0, 0, 0, 0, 1, 0, 0;
  const auto xs = random_points(rng, 6);
  const AffineProjection m = dlt_affine(xs, project(truth, xs));
  CHECK((m.m - truth.m).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("dlt: random cameras recovered and equal to the normal-equation oracle") {
  Rng rng(RngSeed{3});
  for (int trial = 0; trial < 50; ++trial) {
    const AffineProjection truth = random_camera(rng);
    const auto xs = random_points(rng, 20);
    const auto us = project(truth, xs);
    const AffineProjection m = dlt_affine(xs, us);
    const Eigen::Matrix<double, 2, 4> ref = oracle::dlt(xs, us);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 4; ++c) {
        const double scale = std::max(std::abs(truth.m(r, c)), truth.m.cwiseAbs().maxCoeff() * 1e-3);
        CHECK(std::abs(m.m(r, c) - truth.m(r, c)) <= 1e-9 * scale);
        CHECK(std::abs(ref(r, c) - truth.m(r, c)) <= 1e-6 * scale);
      }
  }
}

TEST_CASE("dlt: coplanar and too-small inputs are degenerate") {
  std::vector<Point3> plane{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {2, 3, 0}};
  std::vector<Point2> px(plane.size(), Point2{0, 0});
  CHECK(kind_of([&] { dlt_affine(std::span(plane).first(4), std::span(px).first(4)); }) ==
        ErrorKind::DegenerateConfiguration);
  CHECK(kind_of([&] { dlt_affine(plane, px); }) == ErrorKind::DegenerateConfiguration);
  std::vector<Point3> three{{0, 0, 0}, {1, 0, 0}, {0, 1, 3}};
  CHECK(kind_of([&] { dlt_affine(three, std::span(px).first(3)); }) == ErrorKind::DegenerateConfiguration);
  CHECK(points_are_coplanar(plane));
  CHECK_FALSE(points_are_coplanar(std::vector<Point3>{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
}

TEST_CASE("ransac: clean data keeps every point and matches plain DLT") {
  Rng rng(RngSeed{4});
  const AffineProjection truth = random_camera(rng);
  const auto xs = random_points(rng, 50);
  const auto us = project(truth, xs);
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    RansacConfig cfg;
    cfg.seed = RngSeed{seed};
    cfg.iterations = 50;
    const RansacResult r = dlt_affine_ransac(xs, us, cfg);
    CHECK(r.inlier_count == 50);
    for (bool b : r.inliers) CHECK(b);
    CHECK((r.model.m - dlt_affine(xs, us).m).norm() <= 1e-12 * truth.m.norm());
  }
}

TEST_CASE("ransac: 30 gross outliers are excluded") {
  Rng rng(RngSeed{5});
  const AffineProjection truth = random_camera(rng);
  const auto xs = random_points(rng, 100);
  auto us = project(truth, xs);
  for (std::size_t i = 70; i < 100; ++i) us[i].u += 500.0;
  RansacConfig cfg;
  cfg.seed = RngSeed{17};
  const RansacResult r = dlt_affine_ransac(xs, us, cfg);
  for (std::size_t i = 0; i < 100; ++i) CHECK(r.inliers[i] == (i < 70));
  CHECK(relative_error(r.model.m, truth.m) <= 1e-6);
}

TEST_CASE("ransac: minimum sample and configuration errors") {
  std::vector<Point3> xs{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  std::vector<Point2> us{{0, 0}, {1, 0}, {0, 1}};
  CHECK(kind_of([&] { dlt_affine_ransac(xs, us, RansacConfig{}); }) == ErrorKind::NoConsensus);
  RansacConfig bad;
  bad.iterations = 0;
  CHECK(kind_of([&] { dlt_affine_ransac(xs, us, bad); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("ransac: a threshold below rounding leaves every hypothesis without consensus") {
  Rng rng(RngSeed{6});
  const AffineProjection truth = random_camera(rng);
  const auto xs = random_points(rng, 30);
  auto us = project(truth, xs);
  for (auto& u : us) {
    u.u += rng.normal(0, 50);
    u.v += rng.normal(0, 50);
  }
  RansacConfig cfg;
  cfg.inlier_threshold = 1e-300;
  cfg.iterations = 20;
  CHECK(kind_of([&] { dlt_affine_ransac(xs, us, cfg); }) == ErrorKind::NoConsensus);
}

TEST_CASE("ransac: deterministic and identical in serial and parallel") {
  Rng rng(RngSeed{7});
  const AffineProjection truth = random_camera(rng);
  const auto xs = random_points(rng, 200);
  auto us = project(truth, xs);
  for (std::size_t i = 0; i < 200; i += 3) us[i] = {rng.uniform(-2000, 2000), rng.uniform(-2000, 2000)};
  for (auto& u : us) u.u += rng.normal(0, 0.3);
  RansacConfig cfg;
  cfg.seed = RngSeed{1234};
  const RansacResult a = dlt_affine_ransac(xs, us, cfg, ExecutionPolicy::Serial);
  const RansacResult b = dlt_affine_ransac(xs, us, cfg, ExecutionPolicy::Parallel);
  const RansacResult c = dlt_affine_ransac(xs, us, cfg, ExecutionPolicy::Parallel);
  CHECK(a.model.m == b.model.m);
  CHECK(b.model.m == c.model.m);
  CHECK(a.inliers == b.inliers);
  CHECK(a.best_iteration == b.best_iteration);
}

TEST_CASE("resect: constructed round trip recovers K, R and t exactly") {
  AffineProjection m;
  m.m << 2, 0, 0, 10, 0, 3, 0, 21;
  const auto [k, p] = resect(m);
  CHECK(k.alpha_x == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(k.alpha_y == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::abs(k.s) < 1e-15);
  CHECK((p.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-15);
  CHECK(p.t1 == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(p.t2 == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("resect: random cameras round trip and agree with the Cholesky oracle") {
  Rng rng(RngSeed{8});
  for (int i = 0; i < 500; ++i) {
    const AffineProjection m = random_camera(rng);
    const auto [k, p] = resect(m);
    CHECK(k.alpha_x > 0.0);
    CHECK(k.alpha_y > 0.0);
    CHECK((compose(k, p).m - m.m).norm() <= 1e-9 * m.m.norm());
    CHECK(orthonormality_error(p.rotation) <= 1e-9);
    CHECK(p.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    const Eigen::Matrix2d ref = oracle::intrinsics_by_cholesky(m.linear());
    CHECK((k.k() - ref).norm() <= 1e-9 * ref.norm());
  }
}

TEST_CASE("resect: rank-deficient block") {
  AffineProjection m;
  m.m << 1, 2, 3, 0, 1, 2, 3, 5;
  CHECK(kind_of([&] { resect(m); }) == ErrorKind::RankDeficient);
  CHECK(kind_of([&] { resect(AffineProjection{}); }) == ErrorKind::RankDeficient);
}

TEST_CASE("bundle adjustment: noiseless data is already optimal") {
  const SimScene scene = noiseless_scene();
  const auto [c, truth] = generate_correspondences(scene);
  const auto dl = dlt_affine(c.points(), c.left_pixels());
  const auto dr = dlt_affine(c.points(), c.right_pixels());
  const StereoCalibration cal = bundle_adjust(c, dl, dr, BundleConfig{});
  CHECK(cal.converged);
  CHECK(cal.final_objective() <= 1e-12);
  CHECK(relative_error(cal.left.projection.m, truth.rig.left.m) <= 1e-6);
  CHECK(relative_error(cal.right.projection.m, truth.rig.right.m) <= 1e-6);
  CHECK(cal.left.intrinsics.s == 0.0);
  CHECK(cal.right.intrinsics.s == 0.0);
}

TEST_CASE("bundle adjustment: pixel noise lowers the reprojection energy and never raises the objective") {
  SimScene scene;
  scene.noise = NoiseSpec{1.0, 0.0, 0.0};
  scene.n_t = 40;
  const auto [c, truth] = generate_correspondences(scene);
  const auto dl = dlt_affine(c.points(), c.left_pixels());
  const auto dr = dlt_affine(c.points(), c.right_pixels());
  const BundleConfig cfg;
  const BundleEnergies at_dlt =
      bundle_energies(c, dl, dr, c.points(), c.left_pixels(), c.right_pixels(), cfg);
  const StereoCalibration cal = bundle_adjust(c, dl, dr, cfg);
  CHECK(cal.final.reprojection < at_dlt.reprojection);
  CHECK(cal.final.total <= cal.initial.total);
  CHECK(cal.final.total <= at_dlt.total);
  CHECK(cal.left.intrinsics.s == 0.0);
  CHECK(cal.right.intrinsics.s == 0.0);
  CHECK(orthonormality_error(cal.left.pose.rotation) <= 1e-9);
  CHECK(orthonormality_error(cal.right.pose.rotation) <= 1e-9);
  // The reported cameras are the composed parametrisation.
  CHECK((compose(cal.left.intrinsics, cal.left.pose).m - cal.left.projection.m).norm() <= 1e-9);
  CHECK(cal.converged);
}

TEST_CASE("bundle adjustment: zero iteration budget returns the initial cameras") {
  SimScene scene;
  scene.n_t = 20;
  const auto [c, truth] = generate_correspondences(scene);
  const auto dl = dlt_affine(c.points(), c.left_pixels());
  const auto dr = dlt_affine(c.points(), c.right_pixels());
  BundleConfig cfg;
  cfg.max_iterations = 0;
  const StereoCalibration cal = bundle_adjust(c, dl, dr, cfg);
  CHECK_FALSE(cal.converged);
  CHECK(cal.iterations == 0);
  CHECK(cal.left.projection.m == dl.m);
  CHECK(cal.right.projection.m == dr.m);
  CHECK(cal.final.total == cal.initial.total);
}

TEST_CASE("bundle adjustment: a tight kinematics prior pins the 3D points") {
  SimScene scene;
  scene.noise = NoiseSpec{0.0, 5.0, 0.0};
  scene.n_t = 30;
  const auto [c, truth] = generate_correspondences(scene);
  // Noiseless pixels: project the noisy points through the true cameras.
  CorrespondenceSet clean = c;
  for (auto& i : clean.items) {
    i.u_left = reproject(truth.rig.left, i.x);
    i.u_right = reproject(truth.rig.right, i.x);
  }
  const auto dl = dlt_affine(clean.points(), clean.left_pixels());
  const auto dr = dlt_affine(clean.points(), clean.right_pixels());
  BundleConfig cfg;
  cfg.sigma_x = 1e-6;
  const StereoCalibration cal = bundle_adjust(clean, dl, dr, cfg);
  double worst = 0.0;
  for (std::size_t i = 0; i < clean.items.size(); ++i)
    worst = std::max(worst, (cal.refined_points[i].vec() - clean.items[i].x.vec()).norm());
  CHECK(worst <= 1e-3);
}

TEST_CASE("bundle adjustment: input validation") {
  const SimScene scene = noiseless_scene();
  const auto [c, truth] = generate_correspondences(scene);
  BundleConfig cfg;
  cfg.sigma_u = 0.0;
  CHECK(kind_of([&] { bundle_adjust(c, truth.rig.left, truth.rig.right, cfg); }) == ErrorKind::InvalidArgument);
  AffineProjection flat;
  flat.m << 1, 1, 1, 0, 2, 2, 2, 0;
  CHECK(kind_of([&] { bundle_adjust(c, flat, truth.rig.right, BundleConfig{}); }) == ErrorKind::InvalidInit);
  CorrespondenceSet tiny;
  tiny.n_t = 1;
  tiny.n_k = 3;
  tiny.items.assign(c.items.begin(), c.items.begin() + 3);
  CHECK(kind_of([&] { bundle_adjust(tiny, truth.rig.left, truth.rig.right, BundleConfig{}); }) ==
        ErrorKind::InvalidInit);
}

TEST_CASE("correspondence set: validation") {
  CorrespondenceSet s;
  s.n_t = 2;
  s.n_k = 1;
  s.items.push_back(Correspondence{{0, 0, 0}, {0, 0}, {0, 0}, 1, 1});
  CHECK_FALSE(s.complete());
  s.items.push_back(Correspondence{{0, 0, 0}, {0, 0}, {0, 0}, 2, 1});
  CHECK(s.complete());
  CHECK_NOTHROW(s.validate());
  s.items.push_back(Correspondence{{0, 0, 0}, {0, 0}, {0, 0}, 3, 1});
  CHECK(kind_of([&] { s.validate(); }) == ErrorKind::InvalidArgument);
}
