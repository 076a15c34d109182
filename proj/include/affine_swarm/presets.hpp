#pragma once

// Named experiment presets. Each expands to one or more fully specified
// scenarios on Graph 1; the suffix ":graph2" selects Graph 2.

#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "affine_swarm/frameworks.hpp"
#include "affine_swarm/sim.hpp"
#include "affine_swarm/stress.hpp"

namespace affine_swarm {

struct PresetInfo {
  std::string name;
  std::string description;
};

inline std::vector<PresetInfo> preset_catalog() {
  return {
      {"noiseless-baseline", "static target, no noise, no losses, no estimator"},
      {"ci-bound", "maneuvers, sigma_v = 0.1, no losses, 1000 runs; indicator against its bound"},
      {"random-loss-convergence", "maneuvers, Bernoulli losses lambda = 0.5, every estimator"},
      {"lambda-sweep", "lambda = 0.1..1.0 for none, conral, rkf, ga-rkf"},
      {"switching-departure", "one-way then two-way edge losses, then a node departure; lossless baselines"},
  };
}

/// Scaled rotation followed by a translation.
inline AffineTransform planar_transform(double scale, double radians, double x, double y) {
  AffineTransform a;
  a.theta = scale * rotation2d(radians);
  a.translation = Eigen::Vector2d(x, y);
  return a;
}

/// 60 s: translate, contract, expand, rotate by 90 degrees, translate.
inline TrajectorySpec maneuver_trajectory() {
  const double pi = std::numbers::pi;
  return TrajectorySpec(AffineTransform::identity(2),
                        {{15, planar_transform(1, 0, 3, 0), Interpolation::kLinear},
                         {10, planar_transform(0.5, 0, 5, 0), Interpolation::kLinear},
                         {10, planar_transform(1, 0, 7, 0), Interpolation::kLinear},
                         {15, planar_transform(1, pi / 2, 9, 2), Interpolation::kRotationGeodesic},
                         {10, planar_transform(1, pi / 2, 9, 4), Interpolation::kLinear}});
}

namespace detail {

inline ScenarioConfig base_scenario(const NominalFramework& f, const StressMatrix& stress, std::string name) {
  ScenarioConfig c;
  c.name = std::move(name);
  c.graph = f.graph;
  c.nominal = f.nominal;
  c.stress = stress.matrix;
  c.leaders = f.leaders;
  c.trajectory = maneuver_trajectory();
  return c;
}

inline std::string lambda_tag(double lambda) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", lambda);
  return buf;
}

// Topology switch on the lossy phases; the losses are chosen so that dropping
// the terms destabilizes the loop while geometric reconstruction keeps it stable.
struct SwitchingPlan {
  std::vector<DirectedEdge> lost;  // one-way losses, reused two-way in phase 2
  int departing = 0;
};

inline SwitchingPlan switching_plan(const std::string& framework) {
  if (framework == "graph2") return {{{3, 0}, {3, 2}}, 9};
  return {{{6, 0}, {6, 2}}, 5};
}

}  // namespace detail

inline constexpr int kSwitchOneWayStep = 1500;
inline constexpr int kSwitchTwoWayStep = 3000;
inline constexpr int kSwitchDepartureStep = 4000;

/// Scheduled losses of the switching-departure preset.
inline ScheduledLosses switching_schedule(const std::string& framework, int horizon_steps) {
  const detail::SwitchingPlan plan = detail::switching_plan(framework);
  std::vector<DirectedEdge> both = plan.lost;
  for (const auto& e : plan.lost) both.push_back({e.to, e.from});
  ScheduledLosses s;
  s.intervals.push_back({0, kSwitchOneWayStep, {}, std::nullopt, {}});
  s.intervals.push_back({kSwitchOneWayStep, kSwitchTwoWayStep, plan.lost, std::nullopt, {}});
  s.intervals.push_back({kSwitchTwoWayStep, kSwitchDepartureStep, both, std::nullopt, {}});
  s.intervals.push_back({kSwitchDepartureStep, horizon_steps + 1, {}, std::nullopt, {plan.departing}});
  return s;
}

/// Expands `name` (optionally suffixed ":graph1" / ":graph2"). Throws ConfigError for unknown names.
inline std::vector<ScenarioConfig> expand_preset(const std::string& spec) {
  std::string name = spec;
  std::string framework = "graph1";
  if (const auto colon = spec.find(':'); colon != std::string::npos) {
    name = spec.substr(0, colon);
    framework = spec.substr(colon + 1);
  }
  const NominalFramework f = framework_by_name(framework);
  if (framework == "non-rigid") throw ConfigError("presets require graph1 or graph2");
  bool known = false;
  for (const auto& p : preset_catalog()) known = known || p.name == name;
  if (!known) throw ConfigError("unknown preset '" + name + "'");

  const StressMatrix stress = compute_stress(f.graph, f.nominal);
  const std::string prefix = name + (framework == "graph1" ? "" : "-" + framework);
  std::vector<ScenarioConfig> out;
  auto make = [&](const std::string& tag) {
    return detail::base_scenario(f, stress, tag.empty() ? prefix : prefix + "_" + tag);
  };

  if (name == "noiseless-baseline") {
    ScenarioConfig c = make("");
    c.trajectory = TrajectorySpec::stationary(AffineTransform::identity(2), c.sim.horizon);
    c.noise.sigma_v = 0.0;
    out.push_back(std::move(c));
  } else if (name == "ci-bound") {
    ScenarioConfig c = make("");
    c.sim.monte_carlo_runs = 1000;
    out.push_back(std::move(c));
  } else if (name == "random-loss-convergence") {
    for (auto t : {EstimatorType::kNone, EstimatorType::kRal, EstimatorType::kConral, EstimatorType::kRkf,
                   EstimatorType::kGaRkf}) {
      ScenarioConfig c = make(estimator_name(t));
      c.estimator.type = t;
      c.loss = BernoulliLosses{0.5, false};
      out.push_back(std::move(c));
    }
  } else if (name == "lambda-sweep") {
    for (auto t : {EstimatorType::kNone, EstimatorType::kConral, EstimatorType::kRkf, EstimatorType::kGaRkf})
      for (int l = 1; l <= 10; ++l) {
        const double lambda = l / 10.0;
        ScenarioConfig c = make(estimator_name(t) + "_lambda" + detail::lambda_tag(lambda));
        c.estimator.type = t;
        c.loss = BernoulliLosses{lambda, false};
        out.push_back(std::move(c));
      }
  } else {  // switching-departure
    for (int lossless = 0; lossless < 2; ++lossless)
      for (auto t : {EstimatorType::kNone, EstimatorType::kRkf, EstimatorType::kConral, EstimatorType::kGaRkf}) {
        ScenarioConfig c = make(estimator_name(t) + (lossless ? "_lossless" : ""));
        c.estimator.type = t;
        if (!lossless) c.loss = switching_schedule(framework, c.horizon_steps());
        out.push_back(std::move(c));
      }
  }
  return out;
}

}  // namespace affine_swarm
