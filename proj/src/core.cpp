#include "affstereo/core.hpp"

#include <Eigen/Geometry>
#include <Eigen/QR>

#include <atomic>
#include <cmath>

namespace affstereo {

bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

bool is_finite(const Point2& p) { return std::isfinite(p.u) && std::isfinite(p.v); }

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::NoConsensus: return "NoConsensus";
    case ErrorKind::InvalidInit: return "InvalidInit";
    case ErrorKind::DegeneratePair: return "DegeneratePair";
    case ErrorKind::EmptyAfterRejection: return "EmptyAfterRejection";
    case ErrorKind::DegenerateDomain: return "DegenerateDomain";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::CollinearPoints: return "CollinearPoints";
    case ErrorKind::CountMismatch: return "CountMismatch";
    case ErrorKind::AllZeroHeatmap: return "AllZeroHeatmap";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::ParseError:
    case ErrorKind::IoError:
    case ErrorKind::CountMismatch:
      return 2;
    default:
      return 3;
  }
}

Error::Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

RankDeficientError::RankDeficientError(Eigen::Index rank, Eigen::Index expected,
                                       const std::string& context)
    : Error(ErrorKind::RankDeficient, context + ": effective rank " + std::to_string(rank) +
                                          " < " + std::to_string(expected)),
      rank_(rank) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

Rng Rng::fork(std::uint64_t salt) {
  // splitmix64 finaliser over (next draw ^ salt)
  std::uint64_t z = engine_() ^ (salt * 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return Rng(RngSeed{z});
}

namespace {
std::atomic<double> g_rank_tolerance{1e-10};
}

NumericConfig global_numeric_config() { return NumericConfig{g_rank_tolerance.load()}; }

void set_global_numeric_config(const NumericConfig& cfg) {
  if (!(cfg.rank_tolerance > 0.0)) fail(ErrorKind::InvalidArgument, "rank_tolerance must be > 0");
  g_rank_tolerance.store(cfg.rank_tolerance);
}

LeastSquaresSolution solve_linear_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                                const NumericConfig& cfg) {
  if (a.rows() != b.size()) fail(ErrorKind::InvalidArgument, "least squares: row count mismatch");
  if (a.rows() < a.cols())
    fail(ErrorKind::InvalidArgument, "least squares: fewer equations than unknowns");
  if (!a.allFinite() || !b.allFinite())
    fail(ErrorKind::InvalidArgument, "least squares: non-finite input");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(cfg.rank_tolerance);
  LeastSquaresSolution out;
  out.rank = qr.rank();
  if (out.rank < a.cols()) throw RankDeficientError(out.rank, a.cols(), "least squares");
  out.x = qr.solve(b);
  out.residual_norm = (a * out.x - b).norm();
  return out;
}

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d& r) {
  Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d rel = a.transpose() * b;
  const Eigen::Vector3d skew(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double s = 0.5 * skew.norm();
  const double c = 0.5 * (rel.trace() - 1.0);
  return std::atan2(s, c);
}

double orthonormality_error(const Eigen::Matrix3d& r) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
}

}  // namespace affstereo
