#include "affstereo/sim.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace affstereo {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d r;
  r << 1.0, 0.0, 0.0, 0.0, std::cos(a), -std::sin(a), 0.0, std::sin(a), std::cos(a);
  return r;
}

Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d r;
  r << std::cos(a), 0.0, std::sin(a), 0.0, 1.0, 0.0, -std::sin(a), 0.0, std::cos(a);
  return r;
}

double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double result = 0.0;
  double f = 1.0 / static_cast<double>(base);
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= static_cast<double>(base);
  }
  return result;
}

AffineProjection camera(const RigSpec& spec, double vergence_sign, double roll_deg) {
  const Eigen::Matrix3d r = rot_x(deg_to_rad(roll_deg)) * rot_y(vergence_sign * 0.5 * deg_to_rad(spec.vergence_deg));
  AffinePose pose;
  pose.rotation = r;
  const Eigen::Vector3d target = spec.target.vec();
  pose.t1 = 0.5 * spec.image_width / spec.magnification - r.row(0).dot(target);
  pose.t2 = 0.5 * spec.image_height / spec.magnification - r.row(1).dot(target);
  return compose(AffineIntrinsics{spec.magnification, spec.magnification, 0.0}, pose);
}

// Indices of exactly `count` distinct items out of n, by partial Fisher-Yates.
std::vector<bool> pick_subset(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  std::vector<bool> mask(n, false);
  for (std::size_t i = 0; i < count; ++i) mask[idx[i]] = true;
  return mask;
}

Point2 gross_pixel(const RigSpec& spec, const Point2& truth, Rng& rng) {
  for (;;) {
    const Point2 p{rng.uniform(0.0, spec.image_width), rng.uniform(0.0, spec.image_height)};
    if ((p.vec() - truth.vec()).norm() >= 50.0) return p;
  }
}

}  // namespace

StereoRig make_rig(const RigSpec& spec) {
  if (!(spec.magnification > 0.0)) fail(ErrorKind::InvalidArgument, "make_rig: magnification must be > 0");
  const AffineProjection left = camera(spec, -1.0, spec.roll_left_deg);
  const AffineProjection right = camera(spec, +1.0, spec.roll_right_deg);
  return make_stereo_rig(left, right);
}

StereoRig make_rig(double magnification_px_per_um, double vergence_deg, double roll_left_deg,
                   double roll_right_deg) {
  RigSpec spec;
  spec.magnification = magnification_px_per_um;
  spec.vergence_deg = vergence_deg;
  spec.roll_left_deg = roll_left_deg;
  spec.roll_right_deg = roll_right_deg;
  return make_rig(spec);
}

const char* to_string(SurfaceKind kind) {
  switch (kind) {
    case SurfaceKind::Plane: return "plane";
    case SurfaceKind::SphereCap: return "sphere-cap";
    case SurfaceKind::HeightField: return "height-field";
  }
  return "unknown";
}

SurfaceKind surface_kind_from_string(const std::string& name) {
  if (name == "plane") return SurfaceKind::Plane;
  if (name == "sphere-cap") return SurfaceKind::SphereCap;
  if (name == "height-field") return SurfaceKind::HeightField;
  fail(ErrorKind::ParseError, "unknown surface kind '" + name + "'");
}

double SurfaceSpec::height(double x, double y) const {
  const double dx = x - centre.x, dy = y - centre.y;
  switch (kind) {
    case SurfaceKind::Plane:
      return centre.z + slope_x * dx + slope_y * dy;
    case SurfaceKind::SphereCap:
      return centre.z + std::sqrt(radius * radius - dx * dx - dy * dy) - radius;
    case SurfaceKind::HeightField:
      return centre.z + amplitude * std::sin(2.0 * kPi * dx / wavelength) * std::cos(2.0 * kPi * dy / wavelength);
  }
  return centre.z;
}

std::vector<std::vector<Point3>> tool_trajectory(const SimScene& scene, int frames, int halton_offset) {
  std::vector<std::vector<Point3>> out;
  out.reserve(static_cast<std::size_t>(std::max(frames, 0)));
  for (int f = 0; f < frames; ++f) {
    const auto index = static_cast<std::uint64_t>(f + 1 + halton_offset);
    const Eigen::Vector3d base =
        scene.volume_centre.vec() +
        Eigen::Vector3d((2.0 * radical_inverse(index, 2) - 1.0) * scene.volume_half_x,
                        (2.0 * radical_inverse(index, 3) - 1.0) * scene.volume_half_y,
                        (radical_inverse(index, 5) - 0.5) * scene.depth_span);
    const double azimuth = 2.0 * kPi * radical_inverse(index, 7);
    const double elevation = deg_to_rad(60.0) * (radical_inverse(index, 11) - 0.5);
    const Eigen::Vector3d shaft(std::cos(elevation) * std::cos(azimuth),
                                std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
    Eigen::Vector3d side = shaft.cross(Eigen::Vector3d::UnitZ());
    if (side.norm() < 1e-6) side = Eigen::Vector3d::UnitX();
    side.normalize();

    std::vector<Point3> keypoints;
    for (int k = 0; k < scene.n_k; ++k) {
      Eigen::Vector3d p = base;
      if (k == 1 || k == 2) {
        p += scene.tool.length * shaft + (k == 1 ? 0.5 : -0.5) * scene.tool.tip_gap * side;
      } else if (k >= 3) {
        const double frac = static_cast<double>(k - 2) / static_cast<double>(scene.n_k - 1);
        p += frac * scene.tool.length * shaft + ((k % 2) ? 0.25 : -0.25) * scene.tool.tip_gap * side;
      }
      keypoints.push_back(Point3::from(p));
    }
    out.push_back(std::move(keypoints));
  }
  return out;
}

std::pair<CorrespondenceSet, CorrespondenceTruth> generate_correspondences(const SimScene& scene) {
  if (scene.n_t < 1 || scene.n_k < 1) fail(ErrorKind::InvalidArgument, "sim: n_t and n_k must be >= 1");
  if (!(scene.noise.outlier_fraction >= 0.0 && scene.noise.outlier_fraction < 1.0))
    fail(ErrorKind::InvalidArgument, "sim: outlier_fraction must be in [0, 1)");
  if (!(scene.depth_span > 0.0)) fail(ErrorKind::InvalidArgument, "sim: depth_span must be > 0");

  Rng root(scene.seed);
  Rng noise_rng = root.fork(1);
  Rng outlier_rng = root.fork(2);

  CorrespondenceTruth truth;
  truth.rig = make_rig(scene.rig);
  CorrespondenceSet set;
  set.n_t = scene.n_t;
  set.n_k = scene.n_k;

  const auto traj = tool_trajectory(scene, scene.n_t);
  for (int t = 0; t < scene.n_t; ++t) {
    for (int k = 0; k < scene.n_k; ++k) {
      const Point3 x = traj[t][k];
      const Point2 ul = reproject(truth.rig.left, x);
      const Point2 ur = reproject(truth.rig.right, x);
      truth.points.push_back(x);
      truth.left.push_back(ul);
      truth.right.push_back(ur);

      Correspondence c;
      c.frame_index = t + 1;
      c.keypoint_index = k + 1;
      c.x = x;
      c.u_left = ul;
      c.u_right = ur;
      if (scene.noise.sigma_x > 0.0) {
        c.x.x += noise_rng.normal(0.0, scene.noise.sigma_x);
        c.x.y += noise_rng.normal(0.0, scene.noise.sigma_x);
        c.x.z += noise_rng.normal(0.0, scene.noise.sigma_x);
      }
      if (scene.noise.sigma_u > 0.0) {
        c.u_left.u += noise_rng.normal(0.0, scene.noise.sigma_u);
        c.u_left.v += noise_rng.normal(0.0, scene.noise.sigma_u);
        c.u_right.u += noise_rng.normal(0.0, scene.noise.sigma_u);
        c.u_right.v += noise_rng.normal(0.0, scene.noise.sigma_u);
      }
      set.items.push_back(c);
    }
  }

  const std::size_t n = set.items.size();
  const auto count = static_cast<std::size_t>(std::floor(scene.noise.outlier_fraction * static_cast<double>(n)));
  truth.outlier = pick_subset(n, count, outlier_rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (!truth.outlier[i]) continue;
    set.items[i].u_left = gross_pixel(scene.rig, truth.left[i], outlier_rng);
    set.items[i].u_right = gross_pixel(scene.rig, truth.right[i], outlier_rng);
  }
  return {std::move(set), std::move(truth)};
}

SurfaceSample sample_surface(const SimScene& scene, const StereoRig& rig, int n_points,
                             double matcher_noise_px, double outlier_fraction, RngSeed seed) {
  if (n_points < 1) fail(ErrorKind::InvalidArgument, "sim: n_points must be >= 1");
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0))
    fail(ErrorKind::InvalidArgument, "sim: outlier_fraction must be in [0, 1)");
  Rng root(seed);
  Rng place_rng = root.fork(11);
  Rng noise_rng = root.fork(12);
  Rng outlier_rng = root.fork(13);

  const SurfaceSpec& s = scene.surface;
  // Direction along which points keep their left pixel: the left camera's viewing ray.
  const Matrix23 al = rig.left.linear();
  const Eigen::Vector3d ray = al.row(0).transpose().cross(al.row(1).transpose()).normalized();

  const auto n = static_cast<std::size_t>(n_points);
  const auto outliers = pick_subset(n, static_cast<std::size_t>(std::floor(outlier_fraction * n_points)), outlier_rng);

  SurfaceSample out;
  out.outlier = outliers;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = s.centre.x + place_rng.uniform(-s.half_extent, s.half_extent);
    const double y = s.centre.y + place_rng.uniform(-s.half_extent, s.half_extent);
    const Point3 truth{x, y, s.height(x, y)};
    Point3 observed = truth;
    if (outliers[i]) {
      const double mag = outlier_rng.uniform(150.0, 500.0);
      const double sign = outlier_rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      observed = Point3::from(truth.vec() + sign * mag * ray);
    }
    StereoMatch m{reproject(rig.left, observed), reproject(rig.right, observed)};
    if (matcher_noise_px > 0.0) {
      m.left.u += noise_rng.normal(0.0, matcher_noise_px);
      m.left.v += noise_rng.normal(0.0, matcher_noise_px);
      m.right.u += noise_rng.normal(0.0, matcher_noise_px);
      m.right.v += noise_rng.normal(0.0, matcher_noise_px);
    }
    out.matches.push_back(m);
    out.truth.push_back(truth);
    out.observed.push_back(observed);
  }
  return out;
}

RigidTransform camera_motion(const SimScene& scene) {
  RigidTransform t;
  t.rotation = rotation_from_axis_angle(Eigen::Vector3d(1.0, 2.0, 3.0).normalized() *
                                        deg_to_rad(scene.motion_rotation_deg));
  t.translation = Eigen::Vector3d(1.0, -1.0, 0.5).normalized() * scene.motion_translation_um;
  return t;
}

std::vector<RegistrationFrame> registration_frames_with_noise(const SimScene& scene,
                                                              const RigidTransform& truth,
                                                              int frames, double noise_um,
                                                              RngSeed seed) {
  Rng rng(seed);
  const RigidTransform to_camera = truth.inverse();
  const auto traj = tool_trajectory(scene, frames, 1000);
  std::vector<RegistrationFrame> out;
  for (const auto& keypoints : traj) {
    RegistrationFrame f;
    for (const auto& x : keypoints) {
      Eigen::Vector3d rec = to_camera.apply(x.vec());
      Eigen::Vector3d mea = x.vec();
      for (int j = 0; j < 3; ++j) rec(j) += rng.normal(0.0, noise_um);
      if (scene.noise.sigma_x > 0.0)
        for (int j = 0; j < 3; ++j) mea(j) += rng.normal(0.0, scene.noise.sigma_x);
      f.reconstructed.push_back(Point3::from(rec));
      f.measured.push_back(Point3::from(mea));
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<RegistrationFrame> registration_frames_from_images(const SimScene& scene,
                                                               const StereoRig& calibrated,
                                                               const RigidTransform& truth, int frames,
                                                               RngSeed seed) {
  Rng rng(seed);
  const StereoRig true_rig = make_rig(scene.rig);
  const RigidTransform to_camera = truth.inverse();
  const auto traj = tool_trajectory(scene, frames, 1000);
  std::vector<RegistrationFrame> out;
  for (const auto& keypoints : traj) {
    RegistrationFrame f;
    for (const auto& x : keypoints) {
      const Point3 moved = to_camera.apply(x);
      Point2 ul = reproject(true_rig.left, moved);
      Point2 ur = reproject(true_rig.right, moved);
      if (scene.noise.sigma_u > 0.0) {
        ul.u += rng.normal(0.0, scene.noise.sigma_u);
        ul.v += rng.normal(0.0, scene.noise.sigma_u);
        ur.u += rng.normal(0.0, scene.noise.sigma_u);
        ur.v += rng.normal(0.0, scene.noise.sigma_u);
      }
      Eigen::Vector3d mea = x.vec();
      if (scene.noise.sigma_x > 0.0)
        for (int j = 0; j < 3; ++j) mea(j) += rng.normal(0.0, scene.noise.sigma_x);
      f.reconstructed.push_back(triangulate(calibrated, ul, ur));
      f.measured.push_back(Point3::from(mea));
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace affstereo
