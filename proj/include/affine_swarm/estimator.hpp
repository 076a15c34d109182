#pragma once

// Per-step estimator bank: turns the measurements available on the functional
// graph into relative-position estimates for every nominal edge of every
// active follower.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "affine_swarm/control.hpp"
#include "affine_swarm/formation.hpp"
#include "affine_swarm/graph.hpp"
#include "affine_swarm/indicator.hpp"
#include "affine_swarm/kalman.hpp"
#include "affine_swarm/ral.hpp"

namespace affine_swarm {

enum class EstimatorType { kNone, kRkf, kRal, kConral, kGaRkf };

inline std::string estimator_name(EstimatorType t) {
  switch (t) {
    case EstimatorType::kNone: return "none";
    case EstimatorType::kRkf: return "rkf";
    case EstimatorType::kRal: return "ral";
    case EstimatorType::kConral: return "conral";
    default: return "ga-rkf";
  }
}

inline std::optional<EstimatorType> parse_estimator(const std::string& s) {
  if (s == "none") return EstimatorType::kNone;
  if (s == "rkf") return EstimatorType::kRkf;
  if (s == "ral") return EstimatorType::kRal;
  if (s == "conral") return EstimatorType::kConral;
  if (s == "ga-rkf") return EstimatorType::kGaRkf;
  return std::nullopt;
}

struct EstimatorConfig {
  EstimatorType type = EstimatorType::kNone;
  double sigma_w = 1.0;
  double kappa = 1.0;
  double epsilon = 0.05;
  double psi_max = 1e3;
  RalConstraint constraint = RalConstraint::kAffine;
  Eigen::Vector3d initial_variance{1.0, 10.0, 100.0};
};

/// How each follower edge estimate was produced, summed over steps.
struct BranchCounts {
  long long measured = 0;
  long long geometric = 0;
  long long propagated = 0;
  long long held = 0;     // ral: previous estimate reused
  long long dropped = 0;  // none: term removed from the control sum

  BranchCounts& operator+=(const BranchCounts& o) {
    measured += o.measured;
    geometric += o.geometric;
    propagated += o.propagated;
    held += o.held;
    dropped += o.dropped;
    return *this;
  }
};

// ---------------------------------------------------------------------------
// Geometry stage

/// What one node can infer from its own available measurements at step k.
struct NodeGeometry {
  std::vector<int> edges;  // available outgoing edges, canonical order
  std::vector<int> dests;
  MatrixXd h;              // P B_{i,k}
  MatrixXd y;              // Y_{i,k}
  RalFactor factor;        // unconstrained
  bool affine_feasible = false;
  MatrixXd affine_theta;
  bool feasible = false;   // in the configured constraint mode
  MatrixXd theta;
};

class GeometryStage {
 public:
  GeometryStage() = default;
  GeometryStage(const NominalGraph& g, const Configuration& nominal, RalConstraint mode)
      : g_(&g), p_(&nominal), mode_(mode), nodes_(g.n_nodes()) {}

  /// `y` is D x M; only columns of available edges are read.
  void update(const FunctionalGraph& fg, const MatrixXd& y) {
    const int dim = p_->dim();
    for (int i = 0; i < g_->n_nodes(); ++i) {
      NodeGeometry& ng = nodes_[i];
      std::vector<int> edges;
      if (fg.node(i))
        for (int e = g_->block_begin(i); e < g_->block_end(i); ++e)
          if (fg.active(e)) edges.push_back(e);
      if (edges != ng.edges || ng.h.cols() != static_cast<Eigen::Index>(edges.size()) || first_) {
        ng.edges = std::move(edges);
        ng.dests.clear();
        const int n = static_cast<int>(ng.edges.size());
        ng.h.resize(dim, n);
        for (int m = 0; m < n; ++m) {
          const int j = g_->edge(ng.edges[m]).to;
          ng.dests.push_back(j);
          ng.h.col(m) = p_->relative(i, j);
        }
        ng.factor = ral_factor(ng.h);
      }
      const int n = static_cast<int>(ng.edges.size());
      ng.y.resize(dim, n);
      for (int m = 0; m < n; ++m) ng.y.col(m) = y.col(ng.edges[m]);
      ng.affine_feasible = ng.factor.feasible;
      if (ng.affine_feasible) ng.affine_theta = ng.y * ng.factor.phi.transpose();
      if (mode_ == RalConstraint::kAffine) {
        ng.feasible = ng.affine_feasible;
        if (ng.feasible) ng.theta = ng.affine_theta;
      } else {
        auto t = constrained_ral(ng.y, ng.h, mode_);
        ng.feasible = t.has_value();
        if (ng.feasible) ng.theta = std::move(*t);
      }
    }
    first_ = false;
  }

  const NodeGeometry& node(int i) const { return nodes_[i]; }
  RalConstraint mode() const { return mode_; }

 private:
  const NominalGraph* g_ = nullptr;
  const Configuration* p_ = nullptr;
  RalConstraint mode_ = RalConstraint::kAffine;
  std::vector<NodeGeometry> nodes_;
  bool first_ = true;
};

/// Updates psi in place for every active node with a feasible estimate and at
/// least one feasible received neighbor estimate; others keep their value.
/// `affine` selects the unconstrained estimates.
inline void update_indicators(const GeometryStage& geo, bool affine, std::vector<double>& psi) {
  // same sum as convergence_indicator, without copying the neighbor estimates
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const NodeGeometry& ng = geo.node(static_cast<int>(i));
    if (!(affine ? ng.affine_feasible : ng.feasible)) continue;
    const MatrixXd& own = affine ? ng.affine_theta : ng.theta;
    double sum = 0.0;
    int count = 0;
    for (int j : ng.dests) {
      const NodeGeometry& nj = geo.node(j);
      if (!(affine ? nj.affine_feasible : nj.feasible)) continue;
      sum += (own - (affine ? nj.affine_theta : nj.theta)).squaredNorm();
      ++count;
    }
    if (count > 0) psi[i] = sum / static_cast<double>(count);
  }
}

// ---------------------------------------------------------------------------
// Estimator bank

class EstimatorBank {
 public:
  EstimatorBank(const EstimatorConfig& cfg, const NominalGraph& g, const Configuration& nominal,
                std::vector<char> is_follower, double dt, const DimMat& r)
      : cfg_(cfg),
        g_(&g),
        p_(&nominal),
        follower_(std::move(is_follower)),
        r_(r),
        model_(KinematicModel::constant_acceleration(nominal.dim(), dt, cfg.sigma_w)),
        filters_(g.n_edges()),
        last_(MatrixXd::Zero(nominal.dim(), g.n_edges())),
        consensus_(g.n_nodes(), MatrixXd::Zero(nominal.dim(), nominal.dim())),
        psi_(g.n_nodes(), cfg.psi_max) {}

  const EstimatorConfig& config() const { return cfg_; }
  const BranchCounts& branches() const { return counts_; }
  /// Indicator used inside GA-RKF (configured constraint mode).
  const std::vector<double>& psi() const { return psi_; }
  const std::vector<MatrixXd>& consensus_states() const { return consensus_; }

  /// Fills `out` for every nominal edge of every active follower at step k.
  void step(int k, const FunctionalGraph& fg, const MatrixXd& y, const GeometryStage& geo, EdgeEstimates& out) {
    const int dim = p_->dim();
    switch (cfg_.type) {
      case EstimatorType::kGaRkf:
        update_indicators(geo, false, psi_);
        break;
      case EstimatorType::kConral:
        advance_consensus(fg, geo);
        break;
      default:
        break;
    }

    for (int i = 0; i < g_->n_nodes(); ++i) {
      if (!follower_[i] || !fg.node(i)) continue;
      const NodeGeometry& ng = geo.node(i);
      for (int e = g_->block_begin(i); e < g_->block_end(i); ++e) {
        const int j = g_->edge(e).to;
        const bool avail = fg.active(e);
        const VectorXd p_ij = p_->relative(i, j);
        switch (cfg_.type) {
          case EstimatorType::kNone:
            if (avail) {
              out.set(e, y.col(e));
              ++counts_.measured;
            } else {
              out.set(e, VectorXd::Zero(dim));
              ++counts_.dropped;
            }
            break;
          case EstimatorType::kRal:
            if (avail) {
              last_.col(e) = y.col(e);
              ++counts_.measured;
            } else if (ng.feasible) {
              last_.col(e) = ng.theta * p_ij;
              ++counts_.geometric;
            } else {
              ++counts_.held;
            }
            out.set(e, last_.col(e));
            break;
          case EstimatorType::kConral:
            if (avail) {
              out.set(e, y.col(e));
              ++counts_.measured;
            } else {
              out.set(e, consensus_[i] * p_ij);
              ++counts_.geometric;
            }
            break;
          case EstimatorType::kRkf:
          case EstimatorType::kGaRkf:
            filter_edge(k, e, i, avail, y, ng, p_ij, out);
            break;
        }
      }
    }
  }

 private:
  void filter_edge(int k, int e, int i, bool avail, const MatrixXd& y, const NodeGeometry& ng,
                   const VectorXd& p_ij, EdgeEstimates& out) {
    const bool geometric = cfg_.type == EstimatorType::kGaRkf && !avail && ng.feasible;
    std::optional<Observation> obs;
    if (avail) {
      obs = Observation{y.col(e), r_, ObservationSource::kMeasured};
      ++counts_.measured;
    } else if (geometric) {
      const int dim = p_->dim();
      DimMat rgeo = geo_covariance(ng, p_ij);
      rgeo += cfg_.kappa * psi_[i] * DimMat::Identity(dim, dim);
      obs = Observation{ng.theta * p_ij, rgeo, ObservationSource::kGeometric};
      ++counts_.geometric;
    } else {
      ++counts_.propagated;
    }

    if (k == 0 || !filters_[e]) {
      const VectorXd z0 = obs ? VectorXd(obs->value) : VectorXd::Zero(p_->dim());
      filters_[e] = EdgeFilterState::from_position(z0, cfg_.initial_variance);
    } else {
      filters_[e] = rkf_step(*filters_[e], model_, obs);
    }
    out.set(e, filters_[e]->position());
  }

  DimMat geo_covariance(const NodeGeometry& ng, const VectorXd& p_ij) const {
    if (ral_mode() == RalConstraint::kAffine) return ral_covariance_fast(ng.factor.phi, p_ij, r_);
    return constrained_covariance(ng.h, p_ij, r_, ral_mode());
  }

  RalConstraint ral_mode() const { return cfg_.constraint; }

  // Synchronous round: every active node reads the pre-round consensus states
  // and raw estimates of the neighbors it currently observes.
  void advance_consensus(const FunctionalGraph& fg, const GeometryStage& geo) {
    std::vector<MatrixXd> next = consensus_;
    std::vector<MatrixXd> con, raw;
    for (int i = 0; i < g_->n_nodes(); ++i) {
      if (!fg.node(i)) continue;
      const NodeGeometry& ng = geo.node(i);
      con.clear();
      raw.clear();
      if (ng.feasible) raw.push_back(ng.theta);
      for (int j : ng.dests) {
        con.push_back(consensus_[j]);
        const NodeGeometry& nj = geo.node(j);
        if (nj.feasible) raw.push_back(nj.theta);
      }
      next[i] = consensus_step(consensus_[i], con, raw, cfg_.epsilon);
    }
    consensus_ = std::move(next);
  }

  EstimatorConfig cfg_;
  const NominalGraph* g_;
  const Configuration* p_;
  std::vector<char> follower_;
  DimMat r_;
  KinematicModel model_;
  std::vector<std::optional<EdgeFilterState>> filters_;
  MatrixXd last_;
  std::vector<MatrixXd> consensus_;
  std::vector<double> psi_;
  BranchCounts counts_;
};

}  // namespace affine_swarm
