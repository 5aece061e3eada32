#pragma once

#include "affstereo/calibration.hpp"
#include "affstereo/core.hpp"
#include "affstereo/kernels.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace affstereo {

// Affine epipolar constraint a*u_r + b*v_r + c*u_l + d*v_l + e = 0, stored as
// F = [[0,0,a],[0,0,b],[c,d,e]] so that [u_r 1] F [u_l 1]^T = 0.
struct AffineFundamental {
  Eigen::Matrix3d f = Eigen::Matrix3d::Zero();

  double a() const { return f(0, 2); }
  double b() const { return f(1, 2); }
  double c() const { return f(2, 0); }
  double d() const { return f(2, 1); }
  double e() const { return f(2, 2); }

  double residual(const Point2& left, const Point2& right) const;
  // Mean of the point-to-epipolar-line distances in the two images.
  double symmetric_distance(const Point2& left, const Point2& right) const;
};

struct StereoRig {
  AffineProjection left;
  AffineProjection right;
  AffineFundamental fundamental;
};

struct StereoMatch {
  Point2 left;
  Point2 right;
};

// Fits the five epipolar coefficients to projections of a fixed set of
// synthetic 3D points and normalises them to unit norm. Throws DegeneratePair
// when the constraint is not unique (the two views are related by a 2D affine
// map of the image, e.g. identical cameras).
AffineFundamental fundamental_from_cameras(const AffineProjection& left,
                                           const AffineProjection& right);

StereoRig make_stereo_rig(const AffineProjection& left, const AffineProjection& right);

std::vector<bool> filter_epipolar(std::span<const StereoMatch> matches, const AffineFundamental& f,
                                  double threshold_px,
                                  ExecutionPolicy policy = ExecutionPolicy::Parallel);

// Least-squares solution of [M_l; M_r] [x; 1] = [u_l; u_r]. RankDeficient when
// the stacked 4x3 block has rank < 3.
Point3 triangulate(const StereoRig& rig, const Point2& u_left, const Point2& u_right);

struct TriangulatedSet {
  std::vector<Point3> points;
  std::vector<std::size_t> source_index;  // index into the input match list
  std::size_t failed = 0;
};

TriangulatedSet triangulate_set(const StereoRig& rig, std::span<const StereoMatch> matches,
                                ExecutionPolicy policy = ExecutionPolicy::Parallel);

}  // namespace affstereo
