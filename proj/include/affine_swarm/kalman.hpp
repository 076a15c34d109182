#pragma once

// Relative Kalman filtering on per-edge constant-acceleration states.
// State layout: [pos, vel, acc] per dimension, dimensions stacked.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "affine_swarm/core.hpp"
#include "affine_swarm/rng.hpp"

namespace affine_swarm {

struct KinematicModel {
  int dim = 2;
  double dt = 0.01;
  double sigma_w = 1.0;
  SmallMat F;  // 3D x 3D
  SmallMat G;  // D x 3D
  SmallMat Q;  // 3D x 3D
  Eigen::Matrix3d f_block = Eigen::Matrix3d::Identity();  // per-dimension block of F
  Eigen::Matrix3d q_block = Eigen::Matrix3d::Zero();      // per-dimension block of Q

  static KinematicModel constant_acceleration(int dim, double dt, double sigma_w) {
    KinematicModel m;
    m.dim = dim;
    m.dt = dt;
    m.sigma_w = sigma_w;
    const int n = 3 * dim;
    m.F = SmallMat::Zero(n, n);
    m.G = SmallMat::Zero(dim, n);
    m.Q = SmallMat::Zero(n, n);
    Eigen::Matrix3d f, q;
    f << 1, dt, 0.5 * dt * dt, 0, 1, dt, 0, 0, 1;
    const double dt2 = dt * dt;
    q << dt2 * dt2 / 4, dt2 * dt / 2, dt2 / 2, dt2 * dt / 2, dt2, dt, dt2 / 2, dt, 1;
    q *= sigma_w * sigma_w;
    m.f_block = f;
    m.q_block = q;
    for (int d = 0; d < dim; ++d) {
      m.F.block(3 * d, 3 * d, 3, 3) = f;
      m.Q.block(3 * d, 3 * d, 3, 3) = q;
      m.G(d, 3 * d) = 1.0;
    }
    return m;
  }

  int state_size() const { return 3 * dim; }
};

struct EdgeFilterState {
  SmallVec mean;  // 3D
  SmallMat cov;   // 3D x 3D

  /// Position taken from `position`, derivatives zero, covariance
  /// diag(var[0], var[1], var[2]) in every dimension.
  static EdgeFilterState from_position(const Eigen::Ref<const VectorXd>& position,
                                       const Eigen::Vector3d& initial_variance) {
    const int dim = static_cast<int>(position.size());
    EdgeFilterState s;
    s.mean = SmallVec::Zero(3 * dim);
    s.cov = SmallMat::Zero(3 * dim, 3 * dim);
    for (int d = 0; d < dim; ++d) {
      s.mean(3 * d) = position(d);
      for (int r = 0; r < 3; ++r) s.cov(3 * d + r, 3 * d + r) = initial_variance(r);
    }
    return s;
  }

  DimVec position() const {
    DimVec p(mean.size() / 3);
    for (int d = 0; d < p.size(); ++d) p(d) = mean(3 * d);
    return p;
  }
};

enum class ObservationSource { kMeasured, kGeometric };

struct Observation {
  DimVec value;
  DimMat cov;
  ObservationSource source = ObservationSource::kMeasured;
};

/// Factor S with S S^T = R; tolerates singular R (including R = 0).
inline DimMat noise_factor(const DimMat& r) {
  Eigen::SelfAdjointEigenSolver<DimMat> es(r);
  const DimVec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

/// y = z + v with v ~ N(0, S S^T); draws dim standard normals from `rng`.
inline Observation observe_with_factor(const Eigen::Ref<const VectorXd>& truth, const DimMat& r,
                                       const DimMat& factor, CounterRng& rng) {
  const int dim = static_cast<int>(truth.size());
  DimVec n(dim);
  for (int d = 0; d < dim; ++d) n(d) = rng.normal();
  return {truth + factor * n, r, ObservationSource::kMeasured};
}

inline Observation observe(const Eigen::Ref<const VectorXd>& truth, const DimMat& r, CounterRng& rng) {
  return observe_with_factor(truth, r, noise_factor(r), rng);
}

namespace detail {

// In-place lower Cholesky factor of a small matrix; false unless positive definite.
template <class M>
bool cholesky_lower(M& a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    d = std::sqrt(d);
    a(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
      a(i, j) = v / d;
    }
  }
  return true;
}

}  // namespace detail

/// Throws NumericalError unless `cov` is symmetric positive semidefinite.
inline void require_psd(const SmallMat& cov, const char* where) {
  double scale = 1.0, asym = 0.0;
  bool finite = true;
  for (Eigen::Index j = 0; j < cov.cols(); ++j)
    for (Eigen::Index i = j; i < cov.rows(); ++i) {
      const double a = cov(i, j), b = cov(j, i);
      finite = finite && std::isfinite(a) && std::isfinite(b);
      scale = std::max({scale, std::abs(a), std::abs(b)});
      asym = std::max(asym, std::abs(a - b));
    }
  if (!finite || asym > 1e-9 * scale) throw NumericalError(std::string(where) + ": covariance is not symmetric");
  // a Cholesky factor settles the common positive definite case
  SmallMat factor = cov;
  if (detail::cholesky_lower(factor)) return;
  Eigen::LDLT<SmallMat> ldlt(cov);
  if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() >= -1e-9 * scale) return;
  // LDLT is inconclusive on singular matrices; decide by the spectrum
  const double lmin = Eigen::SelfAdjointEigenSolver<SmallMat>(cov, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (lmin < -1e-9 * scale)
    throw NumericalError(std::string(where) + ": covariance is not positive semidefinite (eigenvalue " +
                         std::to_string(lmin) + ")");
}

// F, Q are block diagonal with one 3x3 block per dimension and G selects the
// positions, so the products below work on blocks instead of full matrices.

inline EdgeFilterState rkf_predict(const EdgeFilterState& s, const KinematicModel& m) {
  const int dim = m.dim;
  EdgeFilterState out;
  out.mean.resize(3 * dim);
  out.cov.resize(3 * dim, 3 * dim);
  for (int a = 0; a < dim; ++a) {
    out.mean.segment<3>(3 * a) = m.f_block * s.mean.segment<3>(3 * a);
    for (int b = 0; b < dim; ++b) {
      Eigen::Matrix3d blk = m.f_block * s.cov.block<3, 3>(3 * a, 3 * b) * m.f_block.transpose();
      if (a == b) blk += m.q_block;
      out.cov.block<3, 3>(3 * a, 3 * b) = blk;
    }
  }
  symmetrize(out.cov);
  return out;
}

/// K = Sigma G^T (R + G Sigma G^T)^{-1}
inline SmallMat kalman_gain(const SmallMat& cov_pred, const KinematicModel& m, const DimMat& r) {
  const int dim = m.dim, n = 3 * dim;
  SmallMat pgt(n, dim);
  for (int d = 0; d < dim; ++d) pgt.col(d) = cov_pred.col(3 * d);
  DimMat s = r;
  for (int d = 0; d < dim; ++d)
    for (int e = 0; e < dim; ++e) s(d, e) += pgt(3 * d, e);
  if (!detail::cholesky_lower(s)) throw NumericalError("rkf: innovation covariance is not positive definite");
  // each row of K solves S k^T = (Sigma G^T)_row^T with S = L L^T
  SmallMat k(n, dim);
  for (int row = 0; row < n; ++row) {
    for (int d = 0; d < dim; ++d) {
      double v = pgt(row, d);
      for (int e = 0; e < d; ++e) v -= s(d, e) * k(row, e);
      k(row, d) = v / s(d, d);
    }
    for (int d = dim - 1; d >= 0; --d) {
      double v = k(row, d);
      for (int e = d + 1; e < dim; ++e) v -= s(e, d) * k(row, e);
      k(row, d) = v / s(d, d);
    }
  }
  return k;
}

inline EdgeFilterState rkf_correct(const EdgeFilterState& pred, const KinematicModel& m, const Observation& obs) {
  const int dim = m.dim, n = 3 * dim;
  const SmallMat k = kalman_gain(pred.cov, m, obs.cov);
  DimVec innovation(dim);
  SmallMat g_cov(dim, n);  // G Sigma
  for (int d = 0; d < dim; ++d) {
    innovation(d) = obs.value(d) - pred.mean(3 * d);
    g_cov.row(d) = pred.cov.row(3 * d);
  }
  EdgeFilterState out;
  out.mean = pred.mean + k * innovation;
  out.cov = pred.cov - k * g_cov;
  symmetrize(out.cov);
  return out;
}

/// One filter step: predict, then correct when an observation is present.
inline EdgeFilterState rkf_step(const EdgeFilterState& s, const KinematicModel& m,
                                const std::optional<Observation>& obs) {
  require_psd(s.cov, "rkf_step");
  EdgeFilterState pred = rkf_predict(s, m);
  if (!obs) return pred;
  return rkf_correct(pred, m, *obs);
}

}  // namespace affine_swarm
