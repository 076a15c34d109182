#pragma once

// Single-integrator agents and the follower control laws. Leaders are not
// controlled here; the simulator places them on the target trajectory.

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "affine_swarm/core.hpp"
#include "affine_swarm/graph.hpp"
#include "affine_swarm/stress.hpp"

namespace affine_swarm {

/// u_i = -sum_j w_ij z_ij
struct StaticLeadersLaw {};

/// u_i = -alpha sum_j w_ij z_ij,k - eta sum_{tau<=k} sum_j w_ij z_ij,tau
struct ConstantVelocityLaw {
  double alpha = 1.0;
  double eta = 0.2;
};

/// u_i = -(1/gamma_i) sum_j w_ij (z_ij,k - zdot_j,k). Empty `gamma` selects
/// gamma_i = sum_j w_ij, under which affine target motion is an exact solution.
struct VaryingVelocityLaw {
  std::vector<double> gamma;
};

using ControlLaw = std::variant<StaticLeadersLaw, ConstantVelocityLaw, VaryingVelocityLaw>;

inline std::string law_name(const ControlLaw& law) {
  switch (law.index()) {
    case 0: return "static-leaders";
    case 1: return "constant-velocity";
    default: return "varying-velocity";
  }
}

/// Relative-position estimates per directed edge: column e of `values` holds the
/// estimate of z_from - z_to for edge e; `valid[e]` marks columns that were filled.
struct EdgeEstimates {
  MatrixXd values;
  std::vector<char> valid;

  EdgeEstimates() = default;
  EdgeEstimates(int dim, int n_edges) : values(MatrixXd::Zero(dim, n_edges)), valid(n_edges, 0) {}

  void set(int e, const Eigen::Ref<const VectorXd>& z) {
    values.col(e) = z;
    valid[e] = 1;
  }
};

/// Integral accumulators for ConstantVelocityLaw, one D-vector per agent.
struct ControlMemory {
  MatrixXd accumulator;

  ControlMemory() = default;
  ControlMemory(int dim, int n_agents) : accumulator(MatrixXd::Zero(dim, n_agents)) {}
};

inline double varying_velocity_gain(const VaryingVelocityLaw& law, int agent, const NominalGraph& g,
                                    const StressMatrix& s) {
  if (!law.gamma.empty()) return law.gamma[agent];
  double sum = 0.0;
  for (int j : g.neighbors(agent)) sum += s.edge_stress(agent, j);
  return sum;
}

/// Control input of follower `agent`. Every nominal neighbor must carry an
/// estimate; the ConstantVelocity accumulator of the agent advances by one step.
/// `neighbor_velocities` (D x M, column e = velocity of edge e's destination as
/// seen by its source) is required by VaryingVelocityLaw only.
inline VectorXd follower_input(const ControlLaw& law, int agent, const NominalGraph& g,
                               const StressMatrix& s, const EdgeEstimates& z_hat,
                               ControlMemory* memory = nullptr,
                               const MatrixXd* neighbor_velocities = nullptr) {
  const int dim = static_cast<int>(z_hat.values.rows());
  VectorXd weighted = VectorXd::Zero(dim);
  for (int e = g.block_begin(agent); e < g.block_end(agent); ++e) {
    if (!z_hat.valid[e])
      throw std::logic_error("follower_input: agent " + std::to_string(agent + 1) +
                             " has no estimate for neighbor " + std::to_string(g.edge(e).to + 1));
    weighted += s.edge_stress(agent, g.edge(e).to) * z_hat.values.col(e);
  }

  return std::visit(
      [&](const auto& l) -> VectorXd {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, StaticLeadersLaw>) {
          return -weighted;
        } else if constexpr (std::is_same_v<L, ConstantVelocityLaw>) {
          if (memory == nullptr) throw std::logic_error("follower_input: constant-velocity law needs memory");
          memory->accumulator.col(agent) += weighted;
          return -l.alpha * weighted - l.eta * memory->accumulator.col(agent);
        } else {
          if (neighbor_velocities == nullptr)
            throw std::logic_error("follower_input: varying-velocity law needs neighbor velocities");
          VectorXd acc = weighted;
          for (int e = g.block_begin(agent); e < g.block_end(agent); ++e)
            acc -= s.edge_stress(agent, g.edge(e).to) * neighbor_velocities->col(e);
          return -acc / varying_velocity_gain(l, agent, g, s);
        }
      },
      law);
}

/// z_{k+1} = z_k + dt u_k
inline VectorXd step_dynamics(const Eigen::Ref<const VectorXd>& z, const Eigen::Ref<const VectorXd>& u,
                              double dt) {
  return z + dt * u;
}

struct StabilityReport {
  bool ok = true;
  /// dt * lambda_max(L_ff) for the static law, spectral radius of the error map otherwise.
  double metric = 0.0;
  std::string message;
};

/// Forward-Euler stability of the noiseless follower error dynamics.
inline StabilityReport stability_check(const StressMatrix& s, double dt, const ControlLaw& law,
                                       const std::vector<int>& followers, const NominalGraph& g) {
  const int f = static_cast<int>(followers.size());
  StabilityReport rep;
  if (f == 0) return rep;
  MatrixXd lff(f, f);
  for (int a = 0; a < f; ++a)
    for (int b = 0; b < f; ++b) lff(a, b) = s.matrix(followers[a], followers[b]);

  const VectorXd mu = Eigen::SelfAdjointEigenSolver<MatrixXd>(lff, Eigen::EigenvaluesOnly).eigenvalues();
  if (mu(0) <= 0.0) {
    rep.ok = false;
    rep.message = "L_ff is not positive definite; followers are not stabilized by the leaders";
    return rep;
  }

  auto radius = [](const MatrixXd& m) {
    return Eigen::EigenSolver<MatrixXd>(m, false).eigenvalues().cwiseAbs().maxCoeff();
  };
  const MatrixXd id = MatrixXd::Identity(f, f);

  std::visit(
      [&](const auto& l) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, StaticLeadersLaw>) {
          rep.metric = dt * mu(f - 1);
          rep.ok = rep.metric < 2.0;
          if (!rep.ok) rep.message = "dt * lambda_max(L_ff) = " + std::to_string(rep.metric) + " >= 2";
        } else if constexpr (std::is_same_v<L, ConstantVelocityLaw>) {
          // state [e_k; s_{k-1}], s_k = s_{k-1} + L e_k
          MatrixXd a(2 * f, 2 * f);
          a << id - dt * (l.alpha + l.eta) * lff, -dt * l.eta * id, lff, id;
          rep.metric = radius(a);
          rep.ok = rep.metric < 1.0;
          if (!rep.ok) rep.message = "constant-velocity error map has spectral radius " + std::to_string(rep.metric);
        } else {
          // state [e_k; e_{k-1}], neighbor velocities by finite differences
          VectorXd inv_gamma(f);
          for (int a = 0; a < f; ++a) inv_gamma(a) = 1.0 / varying_velocity_gain(l, followers[a], g, s);
          MatrixXd w = -lff;
          w.diagonal().setZero();
          const MatrixXd gw = inv_gamma.asDiagonal() * w;
          MatrixXd a(2 * f, 2 * f);
          a << id - dt * inv_gamma.asDiagonal() * lff + gw, -gw, id, MatrixXd::Zero(f, f);
          rep.metric = radius(a);
          rep.ok = rep.metric < 1.0;
          if (!rep.ok) rep.message = "varying-velocity error map has spectral radius " + std::to_string(rep.metric);
        }
      },
      law);
  return rep;
}

}  // namespace affine_swarm
