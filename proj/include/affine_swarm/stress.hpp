#pragma once

// Stress matrices: the universal-rigidity certificate of a nominal framework
// and the gain matrix of the follower controllers.
//
// Convention: [L]_ij = -w_ij for an edge (i,j), [L]_ii = sum_j w_ij, where
// w_ij is the edge stress. Equilibrium sum_j w_ij (p_i - p_j) = 0 gives
// L P^T = 0, and L 1 = 0 holds by construction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "affine_swarm/core.hpp"
#include "affine_swarm/formation.hpp"
#include "affine_swarm/graph.hpp"

namespace affine_swarm {

struct StressMatrix {
  MatrixXd matrix;

  int size() const { return static_cast<int>(matrix.rows()); }
  /// Edge stress w_ij = -[L]_ij.
  double edge_stress(int i, int j) const { return -matrix(i, j); }
};

struct StressReport {
  double ones_residual = 0.0;         // ||L 1|| / ||L||_F
  double equilibrium_residual = 0.0;  // ||L P^T||_F / ||L||_F
  double sparsity_violation = 0.0;    // max |L_ij| over non-edges
  double asymmetry = 0.0;             // ||L - L^T||_F / ||L||_F
  VectorXd eigenvalues;               // ascending
  int near_zero = 0;                  // eigenvalues with |lambda| <= 1e-8 lambda_max
  bool psd = false;
};

inline StressReport inspect_stress(const StressMatrix& s, const NominalGraph& g,
                                   const Configuration& nominal) {
  StressReport r;
  const MatrixXd& l = s.matrix;
  const double norm = std::max(l.norm(), 1e-300);
  r.ones_residual = (l * VectorXd::Ones(l.cols())).norm() / norm;
  r.equilibrium_residual = (l * nominal.points.transpose()).norm() / norm;
  r.asymmetry = (l - l.transpose()).norm() / norm;
  for (int i = 0; i < l.rows(); ++i)
    for (int j = 0; j < l.cols(); ++j)
      if (i != j && g.edge_index(i, j) < 0) r.sparsity_violation = std::max(r.sparsity_violation, std::abs(l(i, j)));
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (l + l.transpose()), Eigen::EigenvaluesOnly);
  r.eigenvalues = es.eigenvalues();
  const double lmax = std::max(std::abs(r.eigenvalues.maxCoeff()), std::abs(r.eigenvalues.minCoeff()));
  for (int k = 0; k < r.eigenvalues.size(); ++k)
    if (std::abs(r.eigenvalues(k)) <= 1e-8 * lmax) ++r.near_zero;
  r.psd = r.eigenvalues.minCoeff() >= -1e-8 * lmax;
  return r;
}

struct StressSearchOptions {
  int restarts = 8;
  int iterations = 400;
  std::uint64_t seed = 0x5eed;
  /// Relative singular-value cutoff for the equilibrium null space.
  double null_tolerance = 1e-9;
  /// lambda_{D+2} must exceed this fraction of lambda_max.
  double certificate_tolerance = 1e-8;
  /// Target Frobenius norm of the returned matrix; <= 0 means N.
  double frobenius_norm = 0.0;
};

namespace detail {

// Smooth lower approximation of lambda_min: -(1/beta) log sum exp(-beta lambda).
struct SoftMin {
  double value;
  double exact;
  VectorXd grad;
};

inline SoftMin soft_min(const std::vector<MatrixXd>& basis, const VectorXd& c, double beta) {
  MatrixXd m = MatrixXd::Zero(basis[0].rows(), basis[0].cols());
  for (int k = 0; k < c.size(); ++k) m += c(k) * basis[k];
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  const VectorXd& lam = es.eigenvalues();
  const double lmin = lam(0);
  VectorXd w = (-beta * (lam.array() - lmin)).exp().matrix();
  const double z = w.sum();
  w /= z;
  SoftMin out{lmin - std::log(z) / beta, lmin, VectorXd::Zero(c.size())};
  for (int k = 0; k < c.size(); ++k) {
    const MatrixXd proj = es.eigenvectors().transpose() * basis[k] * es.eigenvectors();
    out.grad(k) = w.dot(proj.diagonal());
  }
  return out;
}

inline double min_eig(const std::vector<MatrixXd>& basis, const VectorXd& c) {
  MatrixXd m = MatrixXd::Zero(basis[0].rows(), basis[0].cols());
  for (int k = 0; k < c.size(); ++k) m += c(k) * basis[k];
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

inline MatrixXd stress_from_weights(int n, const std::vector<std::pair<int, int>>& pairs,
                                    const VectorXd& w) {
  MatrixXd l = MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [i, j] = pairs[e];
    l(i, j) -= w(static_cast<Eigen::Index>(e));
    l(j, i) -= w(static_cast<Eigen::Index>(e));
    l(i, i) += w(static_cast<Eigen::Index>(e));
    l(j, j) += w(static_cast<Eigen::Index>(e));
  }
  return l;
}

}  // namespace detail

/// Stress matrix for a universally rigid framework. Among the equilibrium
/// stresses (normalized to unit Frobenius norm) the one with the largest
/// (D+2)-th smallest eigenvalue is selected by projected ascent on a smoothed
/// minimum eigenvalue, then rescaled to the requested norm.
inline StressMatrix compute_stress(const NominalGraph& g, const Configuration& nominal,
                                   const StressSearchOptions& opt = {}) {
  const int n = g.n_nodes();
  const int d = nominal.dim();
  if (nominal.size() != n)
    throw ConfigError("compute_stress: configuration has " + std::to_string(nominal.size()) +
                      " points but the graph has " + std::to_string(n) + " nodes");

  MatrixXd aug(n, d + 1);
  aug << nominal.points.transpose(), VectorXd::Ones(n);
  if (!full_row_rank(aug.transpose()))
    throw NonGenericConfiguration("compute_stress: nominal points do not affinely span R^" +
                                  std::to_string(d));

  const auto pairs = g.undirected_edges();
  const int m = static_cast<int>(pairs.size());
  MatrixXd eq = MatrixXd::Zero(d * n, m);
  for (int e = 0; e < m; ++e) {
    const auto [i, j] = pairs[e];
    const VectorXd pij = nominal.relative(i, j);
    eq.block(d * i, e, d, 1) += pij;
    eq.block(d * j, e, d, 1) -= pij;
  }
  const Eigen::JacobiSVD<MatrixXd> svd(eq, Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv(k) > opt.null_tolerance * sv(0)) ++rank;
  const int r = m - rank;
  if (r == 0) throw NotUniversallyRigid("compute_stress: the framework admits no equilibrium stress");
  const MatrixXd null_w = svd.matrixV().rightCols(r);

  // Frobenius-orthonormal basis of candidate stress matrices.
  std::vector<MatrixXd> raw(r);
  MatrixXd vecs(n * n, r);
  for (int k = 0; k < r; ++k) {
    raw[k] = detail::stress_from_weights(n, pairs, null_w.col(k));
    vecs.col(k) = Eigen::Map<const VectorXd>(raw[k].data(), n * n);
  }
  const Eigen::SelfAdjointEigenSolver<MatrixXd> gram(vecs.transpose() * vecs);
  const MatrixXd whiten = gram.operatorInverseSqrt();
  const MatrixXd coeff_w = null_w * whiten;  // edge weights of the orthonormal basis

  Eigen::HouseholderQR<MatrixXd> qr(aug);
  const MatrixXd qfull = qr.householderQ() * MatrixXd::Identity(n, n);
  const MatrixXd q = qfull.rightCols(n - d - 1);
  std::vector<MatrixXd> basis(r);
  for (int k = 0; k < r; ++k) {
    const MatrixXd lk = detail::stress_from_weights(n, pairs, coeff_w.col(k));
    basis[k] = q.transpose() * lk * q;
    basis[k] = 0.5 * (basis[k] + basis[k].transpose()).eval();
  }

  VectorXd best = VectorXd::Zero(r);
  double best_val = -std::numeric_limits<double>::infinity();
  auto consider = [&](const VectorXd& c) {
    const double v = detail::min_eig(basis, c);
    if (v > best_val) {
      best_val = v;
      best = c;
    }
  };

  if (r == 1) {
    consider(VectorXd::Constant(1, 1.0));
    consider(VectorXd::Constant(1, -1.0));
  } else {
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    for (int rs = 0; rs < opt.restarts; ++rs) {
      VectorXd c(r);
      for (int k = 0; k < r; ++k) c(k) = nd(rng);
      c.normalize();
      for (double beta : {10.0, 40.0, 160.0, 640.0, 2560.0}) {
        double step = 0.5;
        detail::SoftMin cur = detail::soft_min(basis, c, beta);
        for (int it = 0; it < opt.iterations && step > 1e-12; ++it) {
          // Project the gradient onto the tangent space of the unit sphere.
          VectorXd gt = cur.grad - cur.grad.dot(c) * c;
          if (gt.norm() < 1e-14) break;
          const VectorXd trial = (c + step * gt).normalized();
          const detail::SoftMin next = detail::soft_min(basis, trial, beta);
          if (next.value > cur.value) {
            c = trial;
            cur = next;
            step *= 1.5;
          } else {
            step *= 0.5;
          }
        }
        consider(c);
      }
    }
  }

  // The basis is Frobenius-orthonormal, so ||L(c)||_F = ||c|| = 1 and every eigenvalue is <= 1.
  if (!(best_val > opt.certificate_tolerance))
    throw NotUniversallyRigid(
        "compute_stress: no positive semidefinite stress of rank N-D-1 exists (best lambda_{D+2} = " +
        std::to_string(best_val) + ")");

  VectorXd w = coeff_w * best;
  MatrixXd l = detail::stress_from_weights(n, pairs, w);
  l = 0.5 * (l + l.transpose()).eval();
  const double target = opt.frobenius_norm > 0.0 ? opt.frobenius_norm : static_cast<double>(n);
  l *= target / l.norm();

  StressMatrix out{std::move(l)};
  const StressReport rep = inspect_stress(out, g, nominal);
  if (!rep.psd || rep.near_zero != d + 1)
    throw NotUniversallyRigid("compute_stress: certificate check failed (" +
                              std::to_string(rep.near_zero) + " near-zero eigenvalues)");
  return out;
}

/// Problems with a user-supplied stress matrix; empty when it is a valid certificate.
inline std::vector<std::string> validate_stress(const StressMatrix& s, const NominalGraph& g,
                                                const Configuration& nominal) {
  std::vector<std::string> issues;
  if (s.size() != g.n_nodes() || s.matrix.cols() != g.n_nodes()) {
    issues.push_back("stress: expected a " + std::to_string(g.n_nodes()) + "x" +
                     std::to_string(g.n_nodes()) + " matrix");
    return issues;
  }
  const StressReport r = inspect_stress(s, g, nominal);
  if (r.asymmetry > 1e-10) issues.push_back("stress: matrix is not symmetric");
  if (r.sparsity_violation > 1e-12 * s.matrix.norm())
    issues.push_back("stress: nonzero entry for a pair that is not an edge");
  if (r.ones_residual > 1e-8) issues.push_back("stress: L 1 != 0");
  if (r.equilibrium_residual > 1e-8) issues.push_back("stress: L P^T != 0 (not an equilibrium stress)");
  if (!r.psd) issues.push_back("stress: matrix is not positive semidefinite");
  if (r.near_zero != nominal.dim() + 1)
    issues.push_back("stress: rank must be N - D - 1 (found " + std::to_string(r.near_zero) +
                     " near-zero eigenvalues)");
  return issues;
}

}  // namespace affine_swarm
