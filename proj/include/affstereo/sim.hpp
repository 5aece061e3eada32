#pragma once

// Synthetic robot + stereo microscope. Everything here is deterministic given
// the scene seed and serves as ground truth for the rest of the library.

#include "affstereo/calibration.hpp"
#include "affstereo/core.hpp"
#include "affstereo/registration.hpp"
#include "affstereo/stereo.hpp"

#include <string>
#include <vector>

namespace affstereo {

struct RigSpec {
  double magnification = 0.15;  // px / um
  double vergence_deg = 10.0;
  // Per-camera tilt about the horizontal image axis, applied after vergence.
  double roll_left_deg = 0.0;
  double roll_right_deg = 0.0;
  Point3 target{0.0, 0.0, 0.0};  // robot-frame point imaged at the image centre
  double image_width = 1920.0;
  double image_height = 1080.0;
};

// Two zero-skew affine cameras looking at `target`, rotated by -/+ vergence/2
// about the vertical axis and by their own tilt about the horizontal axis.
// Throws DegeneratePair when the views coincide (vergence 0, equal tilts).
StereoRig make_rig(const RigSpec& spec);
StereoRig make_rig(double magnification_px_per_um, double vergence_deg, double roll_left_deg,
                   double roll_right_deg);

enum class SurfaceKind { Plane, SphereCap, HeightField };

const char* to_string(SurfaceKind kind);
SurfaceKind surface_kind_from_string(const std::string& name);

struct SurfaceSpec {
  SurfaceKind kind = SurfaceKind::SphereCap;
  Point3 centre{0.0, 0.0, 0.0};  // apex / reference point
  double half_extent = 1000.0;   // um, square patch half width in x and y
  // plane: z = centre.z + slope_x (x - cx) + slope_y (y - cy)
  double slope_x = 0.1;
  double slope_y = -0.05;
  // sphere cap: radius of the sphere, apex at centre, bulging towards +z
  double radius = 12000.0;
  // height field: z = centre.z + amplitude sin(2 pi (x-cx)/wavelength) cos(2 pi (y-cy)/wavelength)
  double amplitude = 40.0;
  double wavelength = 1500.0;

  // Analytic height at (x, y).
  double height(double x, double y) const;
};

struct NoiseSpec {
  double sigma_u = 0.5;           // px, detection noise
  double sigma_x = 10.0;          // um, kinematics noise
  double outlier_fraction = 0.0;  // fraction of correspondences with gross pixel errors
};

struct ToolSpec {
  double length = 3000.0;   // um, base to tips
  double tip_gap = 400.0;   // um, distance between the two tips
};

struct SimScene {
  RigSpec rig;
  int n_t = 100;
  int n_k = 3;
  // Tool base positions span centre +/- half sizes.
  Point3 volume_centre{0.0, 0.0, 0.0};
  double volume_half_x = 3000.0;
  double volume_half_y = 2000.0;
  double depth_span = 2000.0;  // um, full z range
  ToolSpec tool;
  SurfaceSpec surface;
  NoiseSpec noise;
  RngSeed seed{7};

  // Registration study
  int registration_frames = 10;
  double motion_rotation_deg = 2.0;
  double motion_translation_um = 500.0;
};

struct CorrespondenceTruth {
  std::vector<Point3> points;  // noiseless robot-frame landmarks
  std::vector<Point2> left;    // noiseless projections
  std::vector<Point2> right;
  std::vector<bool> outlier;
  StereoRig rig;
};

// n_t frames of n_k landmarks on a tool moving through a Halton lattice of the
// scene volume, one lattice point per frame.
std::vector<std::vector<Point3>> tool_trajectory(const SimScene& scene, int frames, int halton_offset = 0);

std::pair<CorrespondenceSet, CorrespondenceTruth> generate_correspondences(const SimScene& scene);

struct SurfaceSample {
  std::vector<StereoMatch> matches;
  std::vector<Point3> truth;     // the 3D point each match was generated from
  std::vector<Point3> observed;  // 3D point consistent with the (possibly corrupted) match
  std::vector<bool> outlier;
};

// Samples the analytic surface on a jittered grid over its patch, projects the
// samples through the rig, and perturbs the pixels with matcher noise. Outliers
// are displaced along the left viewing ray by 150-500 um, so they survive the
// epipolar filter and triangulate to gross 3D errors.
SurfaceSample sample_surface(const SimScene& scene, const StereoRig& rig, int n_points,
                             double matcher_noise_px, double outlier_fraction, RngSeed seed);

// Camera motion used by the registration study: the reconstruction of x_robot
// after the motion is motion_truth.inverse().apply(x_robot).
RigidTransform camera_motion(const SimScene& scene);

// Registration frames with additive Gaussian noise on the reconstructed points.
std::vector<RegistrationFrame> registration_frames_with_noise(const SimScene& scene,
                                                              const RigidTransform& truth,
                                                              int frames, double noise_um,
                                                              RngSeed seed);

// Registration frames obtained by projecting tool landmarks through the moved
// true cameras, adding detection noise, and triangulating with `calibrated`.
std::vector<RegistrationFrame> registration_frames_from_images(const SimScene& scene,
                                                               const StereoRig& calibrated,
                                                               const RigidTransform& truth, int frames,
                                                               RngSeed seed);

}  // namespace affstereo
