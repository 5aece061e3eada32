#pragma once

// Shared geometric types, error kinds, RNG handle and the linear least-squares
// backbone used by every stage of the pipeline.
//
// Units: lengths are micrometres (um), pixel coordinates are continuous with
// integer values at pixel centres, angles are radians.

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace affstereo {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static Point3 from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  bool operator==(const Point3&) const = default;
};

struct Point2 {
  double u = 0.0;
  double v = 0.0;

  Eigen::Vector2d vec() const { return {u, v}; }
  static Point2 from(const Eigen::Vector2d& p) { return {p.x(), p.y()}; }
  bool operator==(const Point2&) const = default;
};

bool is_finite(const Point3& p);
bool is_finite(const Point2& p);

enum class ErrorKind {
  InvalidArgument,
  ParseError,
  IoError,
  RankDeficient,
  DegenerateConfiguration,
  NoConsensus,
  InvalidInit,
  DegeneratePair,
  EmptyAfterRejection,
  DegenerateDomain,
  OutOfDomain,
  CollinearPoints,
  CountMismatch,
  AllZeroHeatmap,
};

const char* to_string(ErrorKind kind);

// CLI exit code for an error kind: 2 for input problems, 3 for numerical failure.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class RankDeficientError : public Error {
public:
  RankDeficientError(Eigen::Index rank, Eigen::Index expected, const std::string& context);
  Eigen::Index rank() const noexcept { return rank_; }

private:
  Eigen::Index rank_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

struct RngSeed {
  std::uint64_t value = 0;
};

// All randomness in the library flows through this handle. The engine and the
// distributions are fixed so that a seed reproduces draws bit for bit.
class Rng {
public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::uint64_t next() { return engine_(); }

  // Independent child stream, used to give each pipeline stage its own sequence.
  Rng fork(std::uint64_t salt);

private:
  std::mt19937_64 engine_;
};

struct NumericConfig {
  // Singular values / pivots below rank_tolerance * ||A|| count as zero.
  double rank_tolerance = 1e-10;
};

NumericConfig global_numeric_config();
void set_global_numeric_config(const NumericConfig& cfg);

struct LeastSquaresSolution {
  Eigen::VectorXd x;
  Eigen::Index rank = 0;
  double residual_norm = 0.0;
};

// Minimises ||A x - b||_2 with a column-pivoting Householder QR. Throws
// RankDeficientError when the effective rank is below A.cols().
LeastSquaresSolution solve_linear_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                                const NumericConfig& cfg = global_numeric_config());

// Rotation matrix from an axis-angle vector (Rodrigues) and back.
Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& w);
Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d& r);

// Angle of the relative rotation a^T b, in radians.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

// ||R^T R - I||_F
double orthonormality_error(const Eigen::Matrix3d& r);

inline double deg_to_rad(double deg) { return deg * 3.14159265358979323846 / 180.0; }

}  // namespace affstereo
