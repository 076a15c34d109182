#pragma once

// Configurations, affine transforms, target trajectories and geometric
// feasibility.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "affine_swarm/core.hpp"

namespace affine_swarm {

/// Smallest singular value must exceed this fraction of the largest for a matrix to count as full rank.
inline constexpr double kRankTolerance = 1e-8;

/// D x N matrix; column i is agent i's position.
struct Configuration {
  MatrixXd points;

  Configuration() = default;
  explicit Configuration(MatrixXd p) : points(std::move(p)) {}

  int dim() const { return static_cast<int>(points.rows()); }
  int size() const { return static_cast<int>(points.cols()); }
  auto position(int i) const { return points.col(i); }
  /// p_ij = p_i - p_j
  VectorXd relative(int i, int j) const { return points.col(i) - points.col(j); }
};

struct AffineTransform {
  MatrixXd theta;
  VectorXd translation;

  static AffineTransform identity(int dim) {
    return {MatrixXd::Identity(dim, dim), VectorXd::Zero(dim)};
  }
  int dim() const { return static_cast<int>(theta.rows()); }
};

/// Z* = theta * P + t 1^T
inline Configuration target_configuration(const Configuration& nominal, const AffineTransform& a) {
  if (a.theta.rows() != nominal.dim() || a.theta.cols() != nominal.dim() ||
      a.translation.size() != nominal.dim())
    throw ConfigError("target_configuration: dimension mismatch between transform (" +
                      std::to_string(a.theta.rows()) + ") and configuration (" +
                      std::to_string(nominal.dim()) + ")");
  MatrixXd z = a.theta * nominal.points;
  z.colwise() += a.translation;
  return Configuration(std::move(z));
}

inline bool full_row_rank(const MatrixXd& h, double rel_tol = kRankTolerance) {
  if (h.cols() < h.rows() || h.rows() == 0) return false;
  const Eigen::JacobiSVD<MatrixXd> svd(h);
  const auto& s = svd.singularValues();
  return s(0) > 0.0 && s(s.size() - 1) > rel_tol * s(0);
}

/// True iff H_{i,k} = P B_{i,k} has full row rank D.
inline bool check_geometric_feasibility(const Configuration& nominal, const MatrixXd& b_ik) {
  if (b_ik.cols() < nominal.dim()) return false;
  return full_row_rank(nominal.points * b_ik);
}

// ---------------------------------------------------------------------------
// Trajectories

enum class Interpolation { kLinear, kRotationGeodesic };

struct TrajectorySegment {
  double duration = 0.0;  // seconds
  AffineTransform target;  // transform reached at the end of the segment
  Interpolation mode = Interpolation::kLinear;
};

namespace detail {

// Polar split theta = R * S with R a proper rotation and S symmetric.
inline bool polar_split(const MatrixXd& theta, MatrixXd& rot, MatrixXd& stretch) {
  Eigen::JacobiSVD<MatrixXd> svd(theta, Eigen::ComputeFullU | Eigen::ComputeFullV);
  rot = svd.matrixU() * svd.matrixV().transpose();
  if (rot.determinant() <= 0.0) return false;
  stretch = svd.matrixV() * svd.singularValues().asDiagonal() * svd.matrixV().transpose();
  return true;
}

inline MatrixXd interpolate_rotation(const MatrixXd& ra, const MatrixXd& rb, double u) {
  if (ra.rows() == 2) {
    const MatrixXd rel = rb * ra.transpose();
    const double dphi = std::atan2(rel(1, 0), rel(0, 0));
    const double phi = u * dphi;
    MatrixXd r(2, 2);
    r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    return r * ra;
  }
  const Eigen::Matrix3d a3 = ra;
  const Eigen::Matrix3d b3 = rb;
  const Eigen::Quaterniond qa(a3), qb(b3);
  return qa.slerp(u, qb).toRotationMatrix();
}

}  // namespace detail

/// Piecewise target transform; segment n runs from the end of segment n-1.
class TrajectorySpec {
 public:
  TrajectorySpec() = default;
  TrajectorySpec(AffineTransform initial, std::vector<TrajectorySegment> segments)
      : initial_(std::move(initial)), segments_(std::move(segments)) {
    for (const auto& s : segments_) {
      if (!(s.duration > 0.0)) throw ConfigError("trajectory: segment duration must be positive");
      if (s.target.dim() != initial_.dim())
        throw ConfigError("trajectory: segment dimension differs from the initial transform");
    }
  }

  /// Constant transform held for `horizon` seconds.
  static TrajectorySpec stationary(const AffineTransform& a, double horizon) {
    return TrajectorySpec(a, {{horizon, a, Interpolation::kLinear}});
  }

  const AffineTransform& initial() const { return initial_; }
  const std::vector<TrajectorySegment>& segments() const { return segments_; }
  int dim() const { return initial_.dim(); }

  double horizon() const {
    double t = 0.0;
    for (const auto& s : segments_) t += s.duration;
    return t;
  }

  /// Start transform of segment n.
  const AffineTransform& segment_start(std::size_t n) const {
    return n == 0 ? initial_ : segments_[n - 1].target;
  }

  /// Transform at fraction u in [0, 1] of segment n. Exact at both ends.
  AffineTransform evaluate_segment(std::size_t n, double u) const {
    const AffineTransform& a = segment_start(n);
    const TrajectorySegment& s = segments_[n];
    if (u <= 0.0) return a;
    if (u >= 1.0) return s.target;
    AffineTransform out;
    out.translation = (1.0 - u) * a.translation + u * s.target.translation;
    if (s.mode == Interpolation::kRotationGeodesic) {
      MatrixXd ra, sa, rb, sb;
      if (detail::polar_split(a.theta, ra, sa) && detail::polar_split(s.target.theta, rb, sb)) {
        out.theta = detail::interpolate_rotation(ra, rb, u) * ((1.0 - u) * sa + u * sb);
        return out;
      }
    }
    out.theta = (1.0 - u) * a.theta + u * s.target.theta;
    return out;
  }

  AffineTransform evaluate(double time) const {
    const double tol = 1e-9 * std::max(1.0, horizon());
    if (time < -tol || time > horizon() + tol)
      throw ConfigError("trajectory: time " + std::to_string(time) + " outside [0, " +
                        std::to_string(horizon()) + "]");
    if (segments_.empty()) return initial_;
    double t0 = 0.0;
    for (std::size_t n = 0; n < segments_.size(); ++n) {
      const double t1 = t0 + segments_[n].duration;
      if (time <= t1 || n + 1 == segments_.size())
        return evaluate_segment(n, (time - t0) / segments_[n].duration);
      t0 = t1;
    }
    return segments_.back().target;
  }

 private:
  AffineTransform initial_;
  std::vector<TrajectorySegment> segments_;
};

inline MatrixXd rotation2d(double radians) {
  MatrixXd r(2, 2);
  r << std::cos(radians), -std::sin(radians), std::sin(radians), std::cos(radians);
  return r;
}

}  // namespace affine_swarm
