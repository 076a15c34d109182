#pragma once

// Nominal (design) graph, per-step functional graph, incidence blocks and the
// edge-availability models used to generate functional graphs.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "affine_swarm/core.hpp"
#include "affine_swarm/rng.hpp"

namespace affine_swarm {

/// Directed edge (from, to) with 0-based node ids. Agent `from` observes z_from - z_to.
struct DirectedEdge {
  int from = 0;
  int to = 0;

  friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
  friend auto operator<=>(const DirectedEdge&, const DirectedEdge&) = default;
};

/// Undirected design graph stored as bidirectional directed edges, ordered
/// lexicographically by (source, destination). Edge indices of agent i form
/// the contiguous block [block_begin(i), block_end(i)), matching B = [B_1 ... B_N].
class NominalGraph {
 public:
  NominalGraph() = default;

  /// `undirected` holds 0-based pairs; each unordered pair must appear once.
  NominalGraph(int n_nodes, const std::vector<std::pair<int, int>>& undirected) : n_(n_nodes) {
    if (n_nodes <= 0) throw ConfigError("graph: n_nodes must be positive");
    for (const auto& [a, b] : undirected) {
      if (a < 0 || b < 0 || a >= n_nodes || b >= n_nodes)
        throw ConfigError("graph: edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                          ") references a node outside 1.." + std::to_string(n_nodes));
      if (a == b) throw ConfigError("graph: self-loop at node " + std::to_string(a + 1));
      edges_.push_back({a, b});
      edges_.push_back({b, a});
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
      throw ConfigError("graph: duplicate edge in edge list");

    lookup_.assign(static_cast<std::size_t>(n_) * n_, -1);
    offsets_.assign(n_ + 1, 0);
    neighbors_.reserve(edges_.size());
    for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
      lookup_[edges_[e].from * n_ + edges_[e].to] = e;
      ++offsets_[edges_[e].from + 1];
      neighbors_.push_back(edges_[e].to);
    }
    for (int i = 0; i < n_; ++i) offsets_[i + 1] += offsets_[i];
  }

  int n_nodes() const { return n_; }
  /// Number of directed edges M.
  int n_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<DirectedEdge>& edges() const { return edges_; }
  const DirectedEdge& edge(int e) const { return edges_[e]; }

  int block_begin(int i) const { return offsets_[i]; }
  int block_end(int i) const { return offsets_[i + 1]; }
  int degree(int i) const { return offsets_[i + 1] - offsets_[i]; }
  int max_degree() const {
    int d = 0;
    for (int i = 0; i < n_; ++i) d = std::max(d, degree(i));
    return d;
  }

  /// Neighbors N_i in canonical order (aligned with the edge block of i).
  std::span<const int> neighbors(int i) const {
    return {neighbors_.data() + offsets_[i], static_cast<std::size_t>(degree(i))};
  }

  /// Index of directed edge (i, j), or -1.
  int edge_index(int i, int j) const { return lookup_[i * n_ + j]; }
  int reverse_edge(int e) const { return edge_index(edges_[e].to, edges_[e].from); }

  /// Undirected pairs (i < j) in lexicographic order.
  std::vector<std::pair<int, int>> undirected_edges() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& e : edges_)
      if (e.from < e.to) out.emplace_back(e.from, e.to);
    return out;
  }

 private:
  int n_ = 0;
  std::vector<DirectedEdge> edges_;
  std::vector<int> offsets_;
  std::vector<int> neighbors_;
  std::vector<int> lookup_;
};

/// Available nodes and directed edges at one step. Availability may be one-way.
struct FunctionalGraph {
  int step = 0;
  std::vector<char> node_active;
  std::vector<char> edge_active;

  static FunctionalGraph full(const NominalGraph& g, int step) {
    return {step, std::vector<char>(g.n_nodes(), 1), std::vector<char>(g.n_edges(), 1)};
  }

  bool active(int e) const { return edge_active[e] != 0; }
  bool node(int i) const { return node_active[i] != 0; }

  int n_active_edges() const {
    return static_cast<int>(std::count(edge_active.begin(), edge_active.end(), 1));
  }

  /// N_{i,k}: active edges leaving i.
  int n_active(const NominalGraph& g, int i) const {
    int n = 0;
    for (int e = g.block_begin(i); e < g.block_end(i); ++e) n += edge_active[e];
    return n;
  }

  int n_active_nodes() const {
    return static_cast<int>(std::count(node_active.begin(), node_active.end(), 1));
  }
};

/// Full bidirectional incidence matrix B (N x M): +1 at the source row, -1 at the destination row.
inline MatrixXd incidence_matrix(const NominalGraph& g) {
  MatrixXd b = MatrixXd::Zero(g.n_nodes(), g.n_edges());
  for (int e = 0; e < g.n_edges(); ++e) {
    b(g.edge(e).from, e) = 1.0;
    b(g.edge(e).to, e) = -1.0;
  }
  return b;
}

/// Per-agent blocks B_i (N x N_i).
inline std::vector<MatrixXd> incidence_blocks(const NominalGraph& g) {
  const MatrixXd b = incidence_matrix(g);
  std::vector<MatrixXd> blocks;
  blocks.reserve(g.n_nodes());
  for (int i = 0; i < g.n_nodes(); ++i)
    blocks.push_back(b.middleCols(g.block_begin(i), g.degree(i)));
  return blocks;
}

/// Active edge indices leaving agent i, in canonical order.
inline std::vector<int> active_edges_of(const FunctionalGraph& fg, const NominalGraph& g, int i) {
  std::vector<int> out;
  for (int e = g.block_begin(i); e < g.block_end(i); ++e)
    if (fg.active(e)) out.push_back(e);
  return out;
}

/// B_{i,k}: the columns of B_i whose edges are available at this step.
inline MatrixXd functional_block(const FunctionalGraph& fg, const NominalGraph& g, int i) {
  const std::vector<int> cols = active_edges_of(fg, g, i);
  MatrixXd b = MatrixXd::Zero(g.n_nodes(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    b(g.edge(cols[c]).from, static_cast<Eigen::Index>(c)) = 1.0;
    b(g.edge(cols[c]).to, static_cast<Eigen::Index>(c)) = -1.0;
  }
  return b;
}

inline std::vector<MatrixXd> functional_incidence(const FunctionalGraph& fg, const NominalGraph& g) {
  std::vector<MatrixXd> blocks;
  blocks.reserve(g.n_nodes());
  for (int i = 0; i < g.n_nodes(); ++i) blocks.push_back(functional_block(fg, g, i));
  return blocks;
}

// ---------------------------------------------------------------------------
// Loss models

struct NoLosses {};

/// Each directed edge is available independently per step with probability lambda.
/// `symmetric` couples (i,j) and (j,i) to one draw.
struct BernoulliLosses {
  double lambda = 1.0;
  bool symmetric = false;
};

/// One step interval [start_step, end_step) of a scripted topology.
struct ScheduleInterval {
  int start_step = 0;
  int end_step = 0;
  /// Edges removed during the interval (ignored when `active_edges` is set).
  std::vector<DirectedEdge> lost_edges;
  /// Explicit E_k; edges not listed are unavailable.
  std::optional<std::vector<DirectedEdge>> active_edges;
  /// Nodes removed from V_k together with every incident edge.
  std::vector<int> inactive_nodes;
};

struct ScheduledLosses {
  std::vector<ScheduleInterval> intervals;
  std::optional<BernoulliLosses> base;
};

struct NodeDeparture {
  int node = 0;
  int departure_step = 0;
  std::optional<int> return_step;
  std::optional<BernoulliLosses> base;
};

using LossModel = std::variant<NoLosses, BernoulliLosses, ScheduledLosses, NodeDeparture>;

/// Identity of the random stream for one Monte Carlo run.
struct RunStream {
  std::uint64_t seed = 0;
  std::uint64_t run = 0;
  /// Per-node keys used in RNG derivation (defaults to 1-based ids). Relabeling
  /// nodes while permuting keys reproduces the same draws.
  std::span<const std::uint64_t> node_keys = {};

  std::uint64_t key(int node) const {
    return node_keys.empty() ? static_cast<std::uint64_t>(node + 1) : node_keys[node];
  }
};

namespace detail {

inline void apply_bernoulli(const BernoulliLosses& m, const NominalGraph& g, int k,
                            const RunStream& rs, FunctionalGraph& fg) {
  for (int e = 0; e < g.n_edges(); ++e) {
    std::uint64_t a = rs.key(g.edge(e).from);
    std::uint64_t b = rs.key(g.edge(e).to);
    if (m.symmetric && b < a) std::swap(a, b);
    const std::uint64_t key =
        stream_key(rs.seed, {static_cast<std::uint64_t>(StreamTag::kEdgeAvailability), rs.run,
                             static_cast<std::uint64_t>(k), a, b, m.symmetric ? 1ULL : 0ULL});
    if (!(keyed_uniform(key) < m.lambda)) fg.edge_active[e] = 0;
  }
}

inline void remove_node(const NominalGraph& g, int d, FunctionalGraph& fg) {
  fg.node_active[d] = 0;
  for (int e = 0; e < g.n_edges(); ++e)
    if (g.edge(e).from == d || g.edge(e).to == d) fg.edge_active[e] = 0;
}

inline const ScheduleInterval* find_interval(const ScheduledLosses& s, int k) {
  for (const auto& iv : s.intervals)
    if (k >= iv.start_step && k < iv.end_step) return &iv;
  return nullptr;
}

}  // namespace detail

/// Functional graph at step k. Deterministic in (stream, k).
inline FunctionalGraph realize_functional(const NominalGraph& g, const LossModel& model, int k,
                                          const RunStream& stream) {
  FunctionalGraph fg = FunctionalGraph::full(g, k);
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, BernoulliLosses>) {
          detail::apply_bernoulli(m, g, k, stream, fg);
        } else if constexpr (std::is_same_v<M, ScheduledLosses>) {
          if (m.base) detail::apply_bernoulli(*m.base, g, k, stream, fg);
          const ScheduleInterval* iv = detail::find_interval(m, k);
          if (iv == nullptr)
            throw ConfigError("loss_model: schedule has no interval covering step " +
                              std::to_string(k));
          if (iv->active_edges) {
            std::vector<char> allowed(g.n_edges(), 0);
            for (const auto& e : *iv->active_edges) allowed[g.edge_index(e.from, e.to)] = 1;
            for (int e = 0; e < g.n_edges(); ++e) fg.edge_active[e] &= allowed[e];
          } else {
            for (const auto& e : iv->lost_edges) fg.edge_active[g.edge_index(e.from, e.to)] = 0;
          }
          for (int d : iv->inactive_nodes) detail::remove_node(g, d, fg);
        } else if constexpr (std::is_same_v<M, NodeDeparture>) {
          if (m.base) detail::apply_bernoulli(*m.base, g, k, stream, fg);
          const bool away = k >= m.departure_step && (!m.return_step || k < *m.return_step);
          if (away) detail::remove_node(g, m.node, fg);
        }
      },
      model);
  return fg;
}

/// Structural problems of a loss model for a run of `horizon_steps` steps
/// (steps 0..horizon_steps inclusive are realized). Empty when valid.
inline std::vector<std::string> validate_loss_model(const LossModel& model, const NominalGraph& g,
                                                    int horizon_steps) {
  std::vector<std::string> issues;
  auto check_bernoulli = [&](const BernoulliLosses& b, const std::string& where) {
    if (!(b.lambda >= 0.0 && b.lambda <= 1.0))
      issues.push_back(where + ".lambda = " + std::to_string(b.lambda) +
                       " is outside the legal range [0, 1]");
  };
  auto check_edge = [&](const DirectedEdge& e, const std::string& where) {
    if (e.from < 0 || e.to < 0 || e.from >= g.n_nodes() || e.to >= g.n_nodes() ||
        g.edge_index(e.from, e.to) < 0)
      issues.push_back(where + ": [" + std::to_string(e.from + 1) + ", " + std::to_string(e.to + 1) +
                       "] is not an edge of the nominal graph");
  };
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, BernoulliLosses>) {
          check_bernoulli(m, "loss_model");
        } else if constexpr (std::is_same_v<M, ScheduledLosses>) {
          if (m.base) check_bernoulli(*m.base, "loss_model.base");
          auto sorted = m.intervals;
          std::sort(sorted.begin(), sorted.end(),
                    [](const auto& a, const auto& b) { return a.start_step < b.start_step; });
          int covered = 0;
          for (std::size_t n = 0; n < sorted.size(); ++n) {
            const auto& iv = sorted[n];
            const std::string where = "loss_model.intervals[" + std::to_string(n) + "]";
            if (iv.end_step <= iv.start_step)
              issues.push_back(where + ": end_step must exceed start_step");
            if (iv.start_step > covered)
              issues.push_back("loss_model: steps " + std::to_string(covered) + ".." +
                               std::to_string(iv.start_step - 1) + " are not covered by any interval");
            if (iv.start_step < covered)
              issues.push_back(where + ": overlaps a previous interval");
            covered = std::max(covered, iv.end_step);
            for (const auto& e : iv.lost_edges) check_edge(e, where + ".lost_edges");
            if (iv.active_edges)
              for (const auto& e : *iv.active_edges) check_edge(e, where + ".active_edges");
            for (int d : iv.inactive_nodes)
              if (d < 0 || d >= g.n_nodes())
                issues.push_back(where + ".inactive_nodes: node " + std::to_string(d + 1) +
                                 " out of range");
          }
          if (covered <= horizon_steps)
            issues.push_back("loss_model: steps " + std::to_string(covered) + ".." +
                             std::to_string(horizon_steps) + " are not covered by any interval");
        } else if constexpr (std::is_same_v<M, NodeDeparture>) {
          if (m.base) check_bernoulli(*m.base, "loss_model.base");
          if (m.node < 0 || m.node >= g.n_nodes())
            issues.push_back("loss_model.node " + std::to_string(m.node + 1) + " out of range");
          if (m.departure_step < 0) issues.push_back("loss_model.departure_step must be >= 0");
          if (m.return_step && *m.return_step <= m.departure_step)
            issues.push_back("loss_model.return_step must exceed departure_step");
        }
      },
      model);
  return issues;
}

}  // namespace affine_swarm
