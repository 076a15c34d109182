#pragma once

// Dynamic consensus on shape estimates, the local convergence indicator and
// its tracking-error bound coefficients.

#include <span>
#include <vector>

#include "affine_swarm/core.hpp"

namespace affine_swarm {

/// One round of dynamic consensus filtering:
/// con' = con + eps [ sum_j (con_j - con) + sum_{raw} (raw_j - con) ].
/// `neighbor_raw` holds feasible raw estimates only, the agent's own included.
inline MatrixXd consensus_step(const MatrixXd& own, std::span<const MatrixXd> neighbor_consensus,
                               std::span<const MatrixXd> neighbor_raw, double epsilon) {
  MatrixXd acc = MatrixXd::Zero(own.rows(), own.cols());
  for (const auto& c : neighbor_consensus) acc += c - own;
  for (const auto& r : neighbor_raw) acc += r - own;
  return own + epsilon * acc;
}

/// psi = (1/n) sum_j ||theta_i - theta_j||_F^2 over the n received estimates.
/// Requires at least one neighbor.
inline double convergence_indicator(const MatrixXd& own, std::span<const MatrixXd> neighbors) {
  if (neighbors.empty()) throw std::invalid_argument("convergence_indicator: no neighbor estimates");
  double sum = 0.0;
  for (const auto& t : neighbors) sum += (own - t).squaredNorm();
  return sum / static_cast<double>(neighbors.size());
}

/// Local quantities entering the bound for one agent: B_{i,k} Phi_{i,k}^T (N x D)
/// and ||Phi_{i,k}||_F^2.
struct LocalGeometry {
  MatrixXd b_phi;
  double phi_norm2 = 0.0;
};

/// B_{i,k} Phi^T from the source agent, the destination of each column, and Phi (D x n).
inline LocalGeometry local_geometry(int agent, std::span<const int> destinations, const MatrixXd& phi,
                                    int n_nodes) {
  LocalGeometry lg;
  lg.b_phi = MatrixXd::Zero(n_nodes, phi.rows());
  for (std::size_t m = 0; m < destinations.size(); ++m) {
    const auto col = phi.col(static_cast<Eigen::Index>(m));
    lg.b_phi.row(agent) += col.transpose();
    lg.b_phi.row(destinations[m]) -= col.transpose();
  }
  lg.phi_norm2 = phi.squaredNorm();
  return lg;
}

struct BoundCoefficients {
  double c = 0.0;
  double b = 0.0;
};

/// c = (N / n) sum_j ||B_i Phi_i^T - B_j Phi_j^T||_F^2,
/// b = (tr R / n) sum_j (||Phi_i||_F^2 + ||Phi_j||_F^2), over the n counted neighbors.
inline BoundCoefficients bound_coefficients(const LocalGeometry& own, std::span<const LocalGeometry* const> neighbors,
                                            int n_nodes, double trace_r) {
  BoundCoefficients out;
  if (neighbors.empty()) return out;
  for (const LocalGeometry* j : neighbors) {
    out.c += (own.b_phi - j->b_phi).squaredNorm();
    out.b += own.phi_norm2 + j->phi_norm2;
  }
  const double n = static_cast<double>(neighbors.size());
  out.c *= static_cast<double>(n_nodes) / n;
  out.b *= trace_r / n;
  return out;
}

}  // namespace affine_swarm
