#pragma once

// Closed-loop simulation: functional graph -> leaders -> measurements ->
// estimator -> followers, with per-step metrics and a threaded Monte Carlo
// harness.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "affine_swarm/control.hpp"
#include "affine_swarm/estimator.hpp"
#include "affine_swarm/formation.hpp"
#include "affine_swarm/graph.hpp"
#include "affine_swarm/indicator.hpp"
#include "affine_swarm/rng.hpp"
#include "affine_swarm/stress.hpp"

namespace affine_swarm {

enum class DepartedMotion { kFrozen, kDrift };

struct NoiseConfig {
  double sigma_v = 0.1;
  /// Overrides sigma_v^2 I when set.
  std::optional<MatrixXd> covariance;

  DimMat matrix(int dim) const {
    if (covariance) return *covariance;
    return DimMat::Identity(dim, dim) * (sigma_v * sigma_v);
  }
};

struct SimSettings {
  double dt = 0.01;
  double horizon = 60.0;
  int monte_carlo_runs = 50;
  std::uint64_t seed = 1;
  int log_stride = 10;
  double initial_perturbation = 1.0;
  double divergence_threshold = 1e6;
  /// Explicit Z_0 (D x N); replaces the perturbed target when set.
  std::optional<MatrixXd> initial_positions;
  /// Per-node RNG keys; empty means 1-based ids.
  std::vector<std::uint64_t> rng_node_keys;
  DepartedMotion departed_motion = DepartedMotion::kFrozen;
  /// Velocity of a departed node under kDrift.
  std::optional<VectorXd> exit_velocity;
};

struct ScenarioConfig {
  std::string name = "scenario";
  NominalGraph graph;
  Configuration nominal;
  /// Explicit stress; computed from (graph, nominal) when empty.
  std::optional<MatrixXd> stress;
  TrajectorySpec trajectory;
  ControlLaw law = StaticLeadersLaw{};
  std::vector<int> leaders;  // 0-based
  EstimatorConfig estimator;
  LossModel loss = NoLosses{};
  NoiseConfig noise;
  SimSettings sim;

  int horizon_steps() const { return static_cast<int>(std::llround(sim.horizon / sim.dt)); }
};

/// Structural problems of a scenario, listed exhaustively. Empty when valid.
inline std::vector<std::string> validate_scenario(const ScenarioConfig& c) {
  std::vector<std::string> issues;
  const int n = c.graph.n_nodes();
  const int dim = c.nominal.dim();
  if (c.nominal.size() != n)
    issues.push_back("nominal_configuration has " + std::to_string(c.nominal.size()) + " points but graph has " +
                     std::to_string(n) + " nodes");
  if (dim < 2 || dim > kMaxDim) issues.push_back("nominal_configuration dimension must be 2 or 3");
  if (!(c.sim.dt > 0.0)) issues.push_back("sim.dt must be positive");
  if (!(c.sim.horizon > 0.0)) issues.push_back("sim.horizon must be positive");
  if (c.sim.dt > 0.0 && c.sim.horizon > 0.0) {
    const double steps = c.sim.horizon / c.sim.dt;
    if (std::abs(steps - std::round(steps)) > 1e-6 * std::max(1.0, steps))
      issues.push_back("sim.horizon / sim.dt must be an integer");
  }
  if (c.sim.monte_carlo_runs < 1) issues.push_back("sim.monte_carlo_runs must be at least 1");
  if (c.sim.log_stride < 1) issues.push_back("sim.log_stride must be at least 1");
  if (c.sim.initial_perturbation < 0.0) issues.push_back("sim.initial_perturbation must be non-negative");
  if (!(c.sim.divergence_threshold > 0.0)) issues.push_back("sim.divergence_threshold must be positive");
  if (c.sim.initial_positions && (c.sim.initial_positions->rows() != dim || c.sim.initial_positions->cols() != n))
    issues.push_back("sim.initial_positions must be " + std::to_string(dim) + " x " + std::to_string(n));
  if (!c.sim.rng_node_keys.empty() && static_cast<int>(c.sim.rng_node_keys.size()) != n)
    issues.push_back("sim.rng_node_keys must list one key per node");
  if (c.sim.exit_velocity && c.sim.exit_velocity->size() != dim)
    issues.push_back("sim.exit_velocity must have dimension " + std::to_string(dim));

  if (c.leaders.empty()) issues.push_back("control.leaders must not be empty");
  std::vector<char> seen(std::max(n, 0), 0);
  for (int l : c.leaders) {
    if (l < 0 || l >= n) {
      issues.push_back("control.leaders: leader id " + std::to_string(l + 1) + " is outside [1, " +
                       std::to_string(n) + "]");
    } else if (seen[l]++) {
      issues.push_back("control.leaders: leader id " + std::to_string(l + 1) + " listed twice");
    }
  }
  if (static_cast<int>(c.leaders.size()) >= n) issues.push_back("control.leaders: at least one follower is required");

  std::visit(
      [&](const auto& l) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, ConstantVelocityLaw>) {
          if (!(l.alpha > 0.0)) issues.push_back("control.alpha must be positive");
          if (!(l.eta >= 0.0)) issues.push_back("control.eta must be non-negative");
        } else if constexpr (std::is_same_v<L, VaryingVelocityLaw>) {
          if (!l.gamma.empty() && static_cast<int>(l.gamma.size()) != n)
            issues.push_back("control.gamma must list one gain per node");
          for (double g : l.gamma)
            if (!(g > 0.0)) {
              issues.push_back("control.gamma entries must be positive");
              break;
            }
        }
      },
      c.law);

  const EstimatorConfig& e = c.estimator;
  if (!(e.sigma_w >= 0.0)) issues.push_back("estimator.sigma_w must be non-negative");
  if (!(e.kappa >= 0.0)) issues.push_back("estimator.kappa must be non-negative");
  if (!(e.psi_max >= 0.0)) issues.push_back("estimator.psi_max must be non-negative");
  if (!(e.initial_variance.minCoeff() > 0.0)) issues.push_back("estimator.initial_covariance entries must be positive");
  const double eps_max = 1.0 / (2.0 * c.graph.max_degree() + 1.0);
  if (!(e.epsilon > 0.0 && e.epsilon < eps_max))
    issues.push_back("estimator.epsilon = " + std::to_string(e.epsilon) + " is outside the legal range (0, " +
                     std::to_string(eps_max) + ")");

  if (c.noise.sigma_v < 0.0) issues.push_back("noise.sigma_v must be non-negative");
  if (c.noise.covariance) {
    const MatrixXd& r = *c.noise.covariance;
    if (r.rows() != dim || r.cols() != dim) {
      issues.push_back("noise.covariance must be " + std::to_string(dim) + " x " + std::to_string(dim));
    } else if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
               Eigen::SelfAdjointEigenSolver<MatrixXd>(r).eigenvalues().minCoeff() < 0.0) {
      issues.push_back("noise.covariance must be symmetric positive semidefinite");
    }
  }

  if (c.trajectory.dim() != dim) issues.push_back("trajectory dimension differs from nominal_configuration");
  else if (c.sim.horizon > 0.0 &&
           std::abs(c.trajectory.horizon() - c.sim.horizon) > 1e-9 * std::max(1.0, c.sim.horizon))
    issues.push_back("trajectory duration " + std::to_string(c.trajectory.horizon()) +
                     " s differs from sim.horizon " + std::to_string(c.sim.horizon) + " s");

  if (c.stress) {
    for (auto& s : validate_stress(StressMatrix{*c.stress}, c.graph, c.nominal)) issues.push_back("stress: " + s);
  }
  if (c.sim.dt > 0.0 && c.sim.horizon > 0.0)
    for (auto& s : validate_loss_model(c.loss, c.graph, c.horizon_steps())) issues.push_back(s);
  return issues;
}

/// Scenario with its stress resolved; shared read-only by all runs of a batch.
struct PreparedScenario {
  ScenarioConfig cfg;
  StressMatrix stress;
  std::vector<int> followers;
  std::vector<char> is_follower;
  StabilityReport stability;
  std::vector<MatrixXd> targets;  // Z*_k for k = 0..horizon, shared by all runs

  explicit PreparedScenario(ScenarioConfig c) : cfg(std::move(c)) {
    auto issues = validate_scenario(cfg);
    if (!issues.empty()) throw ConfigError("invalid scenario '" + cfg.name + "'", issues);
    stress = cfg.stress ? StressMatrix{*cfg.stress} : compute_stress(cfg.graph, cfg.nominal);
    is_follower.assign(cfg.graph.n_nodes(), 1);
    for (int l : cfg.leaders) is_follower[l] = 0;
    for (int i = 0; i < cfg.graph.n_nodes(); ++i)
      if (is_follower[i]) followers.push_back(i);
    stability = stability_check(stress, cfg.sim.dt, cfg.law, followers, cfg.graph);
    const int kmax = cfg.horizon_steps();
    targets.reserve(kmax + 1);
    for (int k = 0; k <= kmax; ++k)
      targets.push_back(target_configuration(cfg.nominal, cfg.trajectory.evaluate(std::min(k * cfg.sim.dt, cfg.trajectory.horizon()))).points);
  }
};

struct RunMetrics {
  int run = 0;
  int n_followers = 0;
  std::vector<int> steps;           // logged step indices
  std::vector<double> delta;        // per logged step
  std::vector<double> psi, c, b;    // logged step x follower, row-major (NaN when undefined)
  std::vector<long long> edge_available;  // per directed edge, steps available
  BranchCounts branches;
  bool diverged = false;
  int diverged_step = -1;
  int steps_completed = 0;          // number of simulated steps (k = 0..steps_completed-1)
  double mean_error = 0.0;          // mean delta over recorded steps
  double steady_state_error = 0.0;  // mean delta over the last 10% of steps; +inf if diverged

  double at(const std::vector<double>& v, std::size_t row, int f) const { return v[row * n_followers + f]; }
};

/// delta = (1/|active|) sum_{i active} ||z_i - z*_i||^2
inline double tracking_error(const MatrixXd& z, const MatrixXd& z_star, const std::vector<char>& active) {
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < z.cols(); ++i) {
    if (!active[i]) continue;
    sum += (z.col(i) - z_star.col(i)).squaredNorm();
    ++count;
  }
  if (count == 0) throw std::invalid_argument("tracking_error: no active nodes");
  return sum / count;
}

inline double tracking_error(const MatrixXd& z, const MatrixXd& z_star) {
  return tracking_error(z, z_star, std::vector<char>(z.cols(), 1));
}

/// Number of final steps averaged for the steady-state error.
inline int steady_state_window(int total_steps) { return std::max(1, static_cast<int>(std::ceil(0.1 * total_steps))); }

/// Optional per-step observer for tests: called after metrics with (k, Z_k, Z*_k, estimates).
using StepObserver = std::function<void(int, const MatrixXd&, const MatrixXd&, const EdgeEstimates&,
                                        const std::vector<VectorXd>&)>;

inline RunMetrics run_once(const PreparedScenario& ps, int run, const StepObserver& observer = {}) {
  const ScenarioConfig& cfg = ps.cfg;
  const NominalGraph& g = cfg.graph;
  const int n = g.n_nodes();
  const int m = g.n_edges();
  const int dim = cfg.nominal.dim();
  const int kmax = cfg.horizon_steps();
  const int nf = static_cast<int>(ps.followers.size());
  const double dt = cfg.sim.dt;
  const RunStream stream{cfg.sim.seed, static_cast<std::uint64_t>(run), cfg.sim.rng_node_keys};

  RunMetrics out;
  out.run = run;
  out.n_followers = nf;
  out.edge_available.assign(m, 0);

  const DimMat r = cfg.noise.matrix(dim);
  const DimMat r_factor = noise_factor(r);
  const bool noisy = r.cwiseAbs().maxCoeff() > 0.0;
  const double trace_r = r.trace();

  // Z_0
  MatrixXd z;
  if (cfg.sim.initial_positions) {
    z = *cfg.sim.initial_positions;
  } else {
    z = target_configuration(cfg.nominal, cfg.trajectory.evaluate(0.0)).points;
    const double rad = cfg.sim.initial_perturbation;
    if (rad > 0.0)
      for (int i = 0; i < n; ++i) {
        CounterRng rng(stream_key(cfg.sim.seed, {static_cast<std::uint64_t>(StreamTag::kInitialPosition),
                                                 stream.run, stream.key(i)}));
        for (int d = 0; d < dim; ++d) z(d, i) += rad * (2.0 * rng.uniform() - 1.0);
      }
  }

  GeometryStage geo(g, cfg.nominal, cfg.estimator.constraint);
  EstimatorBank bank(cfg.estimator, g, cfg.nominal, ps.is_follower, dt, r);
  ControlMemory memory(dim, n);
  EdgeEstimates est(dim, m), prev_est(dim, m);
  std::vector<VectorXd> u_prev(n, VectorXd::Zero(dim));
  MatrixXd velocities = MatrixXd::Zero(dim, m);
  const bool varying = std::holds_alternative<VaryingVelocityLaw>(cfg.law);
  std::vector<double> psi(n, cfg.estimator.psi_max);
  std::vector<LocalGeometry> local(n);
  std::vector<char> local_ok(n, 0);
  std::vector<char> departed_prev(n, 0);
  MatrixXd y = MatrixXd::Zero(dim, m);

  const int window = steady_state_window(kmax + 1);
  double sum_all = 0.0, sum_tail = 0.0;
  int tail_count = 0;

  for (int k = 0; k <= kmax; ++k) {
    const FunctionalGraph fg = realize_functional(g, cfg.loss, k, stream);
    const MatrixXd& z_star = ps.targets[k];

    for (int l : cfg.leaders)
      if (fg.node(l)) z.col(l) = z_star.col(l);

    for (int e = 0; e < m; ++e) {
      if (!fg.active(e)) continue;
      ++out.edge_available[e];
      const DirectedEdge& de = g.edge(e);
      y.col(e) = z.col(de.from) - z.col(de.to);
      if (noisy) {
        CounterRng rng(stream_key(cfg.sim.seed, {static_cast<std::uint64_t>(StreamTag::kMeasurementNoise),
                                                 stream.run, static_cast<std::uint64_t>(k),
                                                 stream.key(de.from), stream.key(de.to)}));
        y.col(e) = observe_with_factor(y.col(e), r, r_factor, rng).value;
      }
    }

    geo.update(fg, y);
    update_indicators(geo, true, psi);
    prev_est = est;
    bank.step(k, fg, y, geo, est);

    const double delta = tracking_error(z, z_star, fg.node_active);
    sum_all += delta;
    if (k > kmax - window) {
      sum_tail += delta;
      ++tail_count;
    }
    out.steps_completed = k + 1;

    if (k % cfg.sim.log_stride == 0 || k == kmax) {
      out.steps.push_back(k);
      out.delta.push_back(delta);
      const int n_active = fg.n_active_nodes();
      for (int i = 0; i < n; ++i) {
        const NodeGeometry& ng = geo.node(i);
        local_ok[i] = ng.affine_feasible;
        if (local_ok[i]) local[i] = local_geometry(i, ng.dests, ng.factor.phi, n);
      }
      std::vector<const LocalGeometry*> nbrs;
      for (int f = 0; f < nf; ++f) {
        const int i = ps.followers[f];
        double pv = std::numeric_limits<double>::quiet_NaN(), cv = pv, bv = pv;
        if (fg.node(i)) {
          pv = psi[i];
          nbrs.clear();
          if (local_ok[i])
            for (int j : geo.node(i).dests)
              if (local_ok[j]) nbrs.push_back(&local[j]);
          if (!nbrs.empty()) {
            const BoundCoefficients bc = bound_coefficients(local[i], nbrs, n_active, trace_r);
            cv = bc.c;
            bv = bc.b;
          }
        }
        out.psi.push_back(pv);
        out.c.push_back(cv);
        out.b.push_back(bv);
      }
    }

    if (!std::isfinite(delta) || delta > cfg.sim.divergence_threshold) {
      out.diverged = true;
      out.diverged_step = k;
      if (out.steps.empty() || out.steps.back() != k) {
        out.steps.push_back(k);
        out.delta.push_back(delta);
        for (int f = 0; f < nf; ++f) {
          const double nan = std::numeric_limits<double>::quiet_NaN();
          out.psi.push_back(fg.node(ps.followers[f]) ? psi[ps.followers[f]] : nan);
          out.c.push_back(nan);
          out.b.push_back(nan);
        }
      }
      break;
    }

    std::vector<VectorXd> inputs(n, VectorXd::Zero(dim));
    if (k < kmax) {
      if (varying) {
        for (int f = 0; f < nf; ++f) {
          const int i = ps.followers[f];
          if (!fg.node(i)) continue;
          for (int e = g.block_begin(i); e < g.block_end(i); ++e) {
            const VectorXd dz = k == 0 ? VectorXd::Zero(dim) : VectorXd(est.values.col(e) - prev_est.values.col(e));
            velocities.col(e) = u_prev[i] - dz / dt;
          }
        }
      }
      for (int f = 0; f < nf; ++f) {
        const int i = ps.followers[f];
        if (!fg.node(i)) continue;
        inputs[i] = follower_input(cfg.law, i, g, ps.stress, est, &memory, varying ? &velocities : nullptr);
      }
    }
    if (observer) observer(k, z, z_star, est, inputs);
    if (k == kmax) break;

    for (int f = 0; f < nf; ++f) {
      const int i = ps.followers[f];
      if (fg.node(i)) {
        z.col(i) = step_dynamics(z.col(i), inputs[i], dt);
        u_prev[i] = inputs[i];
      } else if (cfg.sim.departed_motion == DepartedMotion::kDrift && cfg.sim.exit_velocity) {
        z.col(i) += dt * *cfg.sim.exit_velocity;
      }
    }
  }

  out.branches = bank.branches();
  out.mean_error = sum_all / out.steps_completed;
  out.steady_state_error = out.diverged || tail_count == 0 ? std::numeric_limits<double>::infinity()
                                                          : sum_tail / tail_count;
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct StepAggregate {
  int step = 0;
  int n_runs = 0;  // runs that reached this step
  double delta_mean = 0.0;
  double delta_sd = 0.0;
  std::vector<double> psi_mean, psi_sd, c_mean, b_mean;  // per follower; finite samples only
};

struct BatchResult {
  std::string name;
  std::vector<RunMetrics> runs;
  std::vector<StepAggregate> steps;
  int n_diverged = 0;
  double mean_error = 0.0;          // mean over runs of per-run mean error
  double mean_error_se = 0.0;
  double steady_state_error = 0.0;  // mean over non-diverged runs (+inf if none)
  double steady_state_se = 0.0;
  BranchCounts branches;
  StabilityReport stability;
};

inline int batch_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("AFFINE_SWARM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return hw;
}

namespace detail {

inline void mean_sd(const std::vector<double>& x, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (x.empty()) {
    mean = std::numeric_limits<double>::quiet_NaN();
    sd = mean;
    return;
  }
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  if (x.size() > 1) {
    for (double v : x) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / static_cast<double>(x.size() - 1));
  }
}

}  // namespace detail

/// Aggregates in fixed run order, independent of the execution schedule.
inline BatchResult aggregate_runs(std::string name, std::vector<RunMetrics> runs, const StabilityReport& stab) {
  BatchResult br;
  br.name = std::move(name);
  br.stability = stab;
  br.runs = std::move(runs);
  if (br.runs.empty()) return br;
  const int nf = br.runs.front().n_followers;

  // Logged step grid of the longest run.
  std::size_t longest = 0;
  for (std::size_t r = 0; r < br.runs.size(); ++r)
    if (br.runs[r].steps.size() > br.runs[longest].steps.size()) longest = r;
  const std::vector<int>& grid = br.runs[longest].steps;

  std::vector<double> buf;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    StepAggregate a;
    a.step = grid[s];
    buf.clear();
    for (const auto& run : br.runs)
      if (s < run.steps.size() && run.steps[s] == a.step) buf.push_back(run.delta[s]);
    a.n_runs = static_cast<int>(buf.size());
    detail::mean_sd(buf, a.delta_mean, a.delta_sd);
    a.psi_mean.resize(nf);
    a.psi_sd.resize(nf);
    a.c_mean.resize(nf);
    a.b_mean.resize(nf);
    for (int f = 0; f < nf; ++f) {
      for (auto [src, mean, sd] : {std::tuple{&RunMetrics::psi, &a.psi_mean[f], &a.psi_sd[f]},
                                   std::tuple{&RunMetrics::c, &a.c_mean[f], static_cast<double*>(nullptr)},
                                   std::tuple{&RunMetrics::b, &a.b_mean[f], static_cast<double*>(nullptr)}}) {
        buf.clear();
        for (const auto& run : br.runs)
          if (s < run.steps.size() && run.steps[s] == a.step) {
            const double v = run.at(run.*src, s, f);
            if (std::isfinite(v)) buf.push_back(v);
          }
        double m, d;
        detail::mean_sd(buf, m, d);
        *mean = m;
        if (sd) *sd = d;
      }
    }
    br.steps.push_back(std::move(a));
  }

  std::vector<double> me, ss;
  for (const auto& run : br.runs) {
    me.push_back(run.mean_error);
    if (run.diverged) ++br.n_diverged;
    else ss.push_back(run.steady_state_error);
    br.branches += run.branches;
  }
  double sd;
  detail::mean_sd(me, br.mean_error, sd);
  br.mean_error_se = sd / std::sqrt(static_cast<double>(me.size()));
  if (ss.empty()) {
    br.steady_state_error = std::numeric_limits<double>::infinity();
    br.steady_state_se = 0.0;
  } else {
    detail::mean_sd(ss, br.steady_state_error, sd);
    br.steady_state_se = sd / std::sqrt(static_cast<double>(ss.size()));
  }
  return br;
}

/// Runs 0..monte_carlo_runs-1 on up to `threads` worker threads (0 = batch_threads()).
inline BatchResult run_monte_carlo(const PreparedScenario& ps, int threads = 0) {
  const int n_runs = ps.cfg.sim.monte_carlo_runs;
  std::vector<RunMetrics> runs(n_runs);
  if (threads <= 0) threads = batch_threads();
  threads = std::max(1, std::min(threads, n_runs));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < n_runs; r = next++) {
      try {
        runs[r] = run_once(ps, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_runs;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return aggregate_runs(ps.cfg.name, std::move(runs), ps.stability);
}

inline BatchResult run_monte_carlo(const ScenarioConfig& cfg, int threads = 0) {
  return run_monte_carlo(PreparedScenario(cfg), threads);
}

}  // namespace affine_swarm
