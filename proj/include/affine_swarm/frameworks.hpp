#pragma once

// Shipped example frameworks. Both are reconstructions with the node/edge
// counts of the two reference formations (7 nodes / 12 edges, 10 nodes / 30
// edges); positions lie on a half-unit grid with no three points near a line.
// Nodes 1..3 are the leaders.

#include <string>
#include <utility>
#include <vector>

#include "affine_swarm/formation.hpp"
#include "affine_swarm/graph.hpp"

namespace affine_swarm {

struct NominalFramework {
  std::string name;
  NominalGraph graph;
  Configuration nominal;
  std::vector<int> leaders;  // 0-based
};

namespace detail {

inline NominalFramework make_framework(std::string name, const std::vector<std::pair<int, int>>& edges1,
                                       const std::vector<std::pair<double, double>>& points,
                                       std::vector<int> leaders) {
  std::vector<std::pair<int, int>> e0;
  e0.reserve(edges1.size());
  for (const auto& [a, b] : edges1) e0.emplace_back(a - 1, b - 1);
  MatrixXd p(2, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    p(0, static_cast<Eigen::Index>(i)) = points[i].first;
    p(1, static_cast<Eigen::Index>(i)) = points[i].second;
  }
  return {std::move(name), NominalGraph(static_cast<int>(points.size()), e0), Configuration(p),
          std::move(leaders)};
}

}  // namespace detail

/// 7 agents, 12 undirected edges, single equilibrium stress (PSD, rank 4).
inline NominalFramework graph1() {
  return detail::make_framework(
      "graph1",
      {{1, 3}, {1, 4}, {1, 5}, {1, 6}, {1, 7}, {2, 4}, {2, 5}, {2, 6}, {3, 6}, {3, 7}, {4, 7}, {5, 7}},
      {{-0.5, 3.0}, {1.0, -0.5}, {-1.5, -2.5}, {1.0, 1.5}, {-0.5, 0.5}, {1.5, -3.0}, {-1.5, 0.5}},
      {0, 1, 2});
}

/// 10 agents, 30 undirected edges, 13-dimensional equilibrium stress space.
inline NominalFramework graph2() {
  return detail::make_framework(
      "graph2",
      {{1, 4}, {1, 5},  {1, 6},  {1, 7},  {1, 8},  {1, 9},  {1, 10}, {2, 3},  {2, 5},  {2, 6},
       {2, 7}, {2, 8},  {2, 10}, {3, 4},  {3, 5},  {3, 6},  {3, 9},  {3, 10}, {4, 5},  {4, 6},
       {4, 9}, {4, 10}, {5, 7},  {6, 7},  {6, 9},  {6, 10}, {7, 9},  {8, 9},  {8, 10}, {9, 10}},
      {{1.5, 4.0}, {3.5, -3.0}, {-3.0, 1.0}, {0.5, 2.5}, {3.0, 2.0}, {0.0, -2.5}, {1.5, 2.5},
       {2.5, -3.5}, {1.0, -2.0}, {4.0, -1.0}},
      {0, 1, 2});
}

/// Graph-1 positions on a graph that is not universally rigid: nodes 1..4
/// form K4 and node 5 (degree 2) is a cut vertex joining it to the path 6-7.
inline NominalFramework non_rigid_example() {
  NominalFramework f = graph1();
  f.name = "non-rigid";
  f.graph = NominalGraph(7, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}, {3, 4}, {4, 5}, {5, 6}});
  return f;
}

inline NominalFramework framework_by_name(const std::string& name) {
  if (name == "graph1") return graph1();
  if (name == "graph2") return graph2();
  if (name == "non-rigid") return non_rigid_example();
  throw ConfigError("unknown framework '" + name + "' (expected graph1 or graph2)");
}

}  // namespace affine_swarm
