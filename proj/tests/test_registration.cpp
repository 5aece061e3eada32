#include "affstereo/registration.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace affstereo;
using namespace testing_helpers;

namespace {

RigidTransform random_transform(Rng& rng) {
  RigidTransform t;
  t.rotation = random_rotation(rng);
  t.translation = random_point(rng, 5000).vec();
  return t;
}

std::vector<Point3> apply_all(const RigidTransform& t, const std::vector<Point3>& xs) {
  std::vector<Point3> out;
  for (const auto& x : xs) out.push_back(t.apply(x));
  return out;
}

double objective(const RigidTransform& t, const std::vector<Point3>& a, const std::vector<Point3>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (t.apply(a[i]).vec() - b[i].vec()).squaredNorm();
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no exception");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("register: identical point sets give the identity") {
  Rng rng(RngSeed{1});
  const auto xs = random_points(rng, 12);
  const RegistrationResult r = register_rigid(xs, xs);
  CHECK((r.transform.rotation - Eigen::Matrix3d::Identity()).norm() <= 1e-12);
  CHECK(r.transform.translation.norm() <= 1e-9);
  CHECK(r.residuals.max <= 1e-9);
  CHECK(r.residuals.norms.size() == 12);
}

TEST_CASE("register: constructed motions are recovered and agree with Horn's quaternion method") {
  Rng rng(RngSeed{2});
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform truth = random_transform(rng);
    const auto xs = random_points(rng, 9);
    const auto ys = apply_all(truth, xs);
    const RegistrationResult r = register_rigid(xs, ys);
    CHECK(rotation_angle_between(r.transform.rotation, truth.rotation) <= 1e-9);
    CHECK((r.transform.translation - truth.translation).norm() <= 1e-9 * (1.0 + truth.translation.norm()));
    CHECK(r.transform.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((r.transform.rotation.transpose() * r.transform.rotation - Eigen::Matrix3d::Identity()).norm() <= 1e-9);

    // Noisy case: two independent closed forms of the same least-squares problem.
    auto noisy = ys;
    for (auto& y : noisy) y = Point3::from(y.vec() + random_point(rng, 30).vec());
    const RegistrationResult rn = register_rigid(xs, noisy);
    const auto [hr, ht] = oracle::horn(xs, noisy);
    CHECK(rotation_angle_between(rn.transform.rotation, hr) <= 1e-9);
    CHECK((rn.transform.translation - ht).norm() <= 1e-7);
  }
}

TEST_CASE("register: degenerate inputs") {
  const std::vector<Point3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
  CHECK(kind_of([&] { register_rigid(line, line); }) == ErrorKind::CollinearPoints);
  const std::vector<Point3> two{{0, 0, 0}, {1, 0, 0}};
  CHECK(kind_of([&] { register_rigid(two, two); }) == ErrorKind::CollinearPoints);
  const std::vector<Point3> tri{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  CHECK(kind_of([&] { register_rigid(tri, line); }) == ErrorKind::CollinearPoints);
  CHECK(kind_of([&] { register_rigid(tri, two); }) == ErrorKind::CountMismatch);
  CHECK_NOTHROW(register_rigid(tri, tri));
}

TEST_CASE("register: left-invariance under a common rigid motion") {
  Rng rng(RngSeed{3});
  const auto xs = random_points(rng, 15);
  auto ys = apply_all(random_transform(rng), xs);
  for (auto& y : ys) y = Point3::from(y.vec() + random_point(rng, 50).vec());
  const RigidTransform t = register_rigid(xs, ys).transform;
  const RigidTransform g = random_transform(rng);
  const RigidTransform tg = register_rigid(apply_all(g, xs), apply_all(g, ys)).transform;
  const RigidTransform conj = g * t * g.inverse();
  CHECK(rotation_angle_between(tg.rotation, conj.rotation) <= 1e-9);
  CHECK((tg.translation - conj.translation).norm() <= 1e-7);
}

TEST_CASE("register: the solution beats identity and random perturbations") {
  Rng rng(RngSeed{4});
  const auto xs = random_points(rng, 20);
  auto ys = apply_all(random_transform(rng), xs);
  for (auto& y : ys) y = Point3::from(y.vec() + random_point(rng, 100).vec());
  const RigidTransform t = register_rigid(xs, ys).transform;
  const double best = objective(t, xs, ys);
  CHECK(best <= objective(RigidTransform{}, xs, ys));
  for (int k = 0; k < 100; ++k) {
    RigidTransform p;
    p.rotation = rotation_from_axis_angle(Eigen::Vector3d(rng.normal(0, 1e-3), rng.normal(0, 1e-3), rng.normal(0, 1e-3)));
    p.translation = Eigen::Vector3d(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
    CHECK(best <= objective(p * t, xs, ys));
  }
}

TEST_CASE("register: mirrored data still yields a proper rotation") {
  Rng rng(RngSeed{5});
  const auto xs = random_points(rng, 10);
  std::vector<Point3> mirrored;
  for (const auto& x : xs) mirrored.push_back({-x.x, x.y, x.z});
  const RegistrationResult r = register_rigid(xs, mirrored);
  CHECK(r.transform.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((r.transform.rotation.transpose() * r.transform.rotation - Eigen::Matrix3d::Identity()).norm() <= 1e-9);
}

TEST_CASE("register: robust refinement never worsens the sum of norms") {
  Rng rng(RngSeed{6});
  const auto xs = random_points(rng, 30);
  auto ys = apply_all(random_transform(rng), xs);
  for (auto& y : ys) y = Point3::from(y.vec() + random_point(rng, 20).vec());
  for (std::size_t i = 0; i < 30; i += 7) ys[i] = Point3::from(ys[i].vec() + random_point(rng, 2000).vec());
  const RegistrationResult closed = register_rigid(xs, ys);
  RegistrationOptions opt;
  opt.robust = true;
  const RegistrationResult robust = register_rigid(xs, ys, opt);
  CHECK(robust.residuals.sum <= closed.residuals.sum);
  CHECK(robust.transform.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weighted_procrustes: unit weights reproduce the closed form, zero weights drop pairs") {
  Rng rng(RngSeed{7});
  const auto xs = random_points(rng, 10);
  auto ys = apply_all(random_transform(rng), xs);
  for (auto& y : ys) y = Point3::from(y.vec() + random_point(rng, 20).vec());
  const RigidTransform a = register_rigid(xs, ys).transform;
  const RigidTransform b = weighted_procrustes(xs, ys, std::vector<double>(10, 1.0));
  CHECK(rotation_angle_between(a.rotation, b.rotation) <= 1e-12);

  std::vector<double> w(10, 1.0);
  w[3] = 0.0;
  auto xs9 = xs, ys9 = ys;
  xs9.erase(xs9.begin() + 3);
  ys9.erase(ys9.begin() + 3);
  const RigidTransform c = weighted_procrustes(xs, ys, w);
  const RigidTransform d = register_rigid(xs9, ys9).transform;
  CHECK(rotation_angle_between(c.rotation, d.rotation) <= 1e-12);
  CHECK((c.translation - d.translation).norm() <= 1e-9);
}

TEST_CASE("register_accumulated: identical noiseless frames, window clamp and curve layout") {
  Rng rng(RngSeed{8});
  const auto xs = random_points(rng, 3);
  std::vector<RegistrationFrame> frames(5, RegistrationFrame{xs, xs});
  const AccumulatedRegistration a = register_accumulated(frames, 5, {}, RigidTransform{});
  REQUIRE(a.error_curve.size() == 5);
  for (std::size_t w = 0; w < 5; ++w) {
    CHECK(a.error_curve[w].frames_used == static_cast<int>(w) + 1);
    CHECK(a.error_curve[w].rmse <= 1e-9);
    CHECK(*a.error_curve[w].rotation_error_rad <= 1e-9);
    CHECK(*a.error_curve[w].translation_error_um <= 1e-9);
  }
  CHECK((a.transform.rotation - Eigen::Matrix3d::Identity()).norm() <= 1e-12);

  const AccumulatedRegistration clamped = register_accumulated(frames, 40);
  CHECK(clamped.frames_used == 5);
  CHECK(clamped.error_curve.size() == 5);
  CHECK_FALSE(clamped.error_curve[0].rotation_error_rad.has_value());

  CHECK(kind_of([&] { register_accumulated(frames, 0); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { register_accumulated({}, 3); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("register_accumulated: uses the most recent frames") {
  Rng rng(RngSeed{9});
  const RigidTransform old_motion = random_transform(rng), new_motion = random_transform(rng);
  std::vector<RegistrationFrame> frames;
  for (int f = 0; f < 6; ++f) {
    const auto xs = random_points(rng, 3);
    frames.push_back({xs, apply_all(f < 3 ? old_motion : new_motion, xs)});
  }
  const AccumulatedRegistration a = register_accumulated(frames, 3);
  CHECK(rotation_angle_between(a.transform.rotation, new_motion.rotation) <= 1e-9);
  CHECK(a.residuals.norms.size() == 9);
}
