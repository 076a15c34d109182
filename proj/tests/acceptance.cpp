// Acceptance checks 1-8. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "affine_swarm/affine_swarm.hpp"
#include "affine_swarm/presets.hpp"

using namespace affine_swarm;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ScenarioConfig with_runs(ScenarioConfig c, int runs) {
  c.sim.monte_carlo_runs = runs;
  return c;
}

// 1 ---------------------------------------------------------------------------

Outcome noiseless_convergence() {
  Outcome o;
  const ScenarioConfig c = with_runs(expand_preset("noiseless-baseline").front(), 1);
  const RunMetrics r = run_once(PreparedScenario(c), 0);
  o.require(!r.diverged, "diverged");
  o.require(r.steps.back() == 6000, "last logged step " + std::to_string(r.steps.back()));
  o.require(r.delta.back() < 1e-10, "delta_6000 = " + fmt(r.delta.back()));
  o.detail = o.detail.empty() ? "delta_6000 = " + fmt(r.delta.back()) : o.detail;
  return o;
}

// 2 ---------------------------------------------------------------------------

Outcome theorem_pointwise() {
  Outcome o;
  long long checked = 0, violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (const char* fw : {"", ":graph2"}) {
    ScenarioConfig c = with_runs(expand_preset(std::string("ci-bound") + fw).front(), 1);
    c.noise.sigma_v = 0.0;
    c.sim.log_stride = 1;
    const RunMetrics r = run_once(PreparedScenario(c), 0);
    o.require(!r.diverged, c.name + " diverged");
    for (std::size_t s = 0; s < r.steps.size(); ++s)
      for (int f = 0; f < r.n_followers; ++f) {
        const double psi = r.at(r.psi, s, f), cf = r.at(r.c, s, f);
        if (!std::isfinite(psi) || !std::isfinite(cf)) {
          ++violations;
          continue;
        }
        const double gap = psi - (cf * r.delta[s] + 1e-12);
        worst = std::max(worst, gap);
        if (gap > 0.0) ++violations;
        ++checked;
      }
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(checked) + " (step, follower) pairs, max psi - c delta = " +
              fmt(worst + 1e-12);
  return o;
}

// 3 ---------------------------------------------------------------------------

Outcome corollary_statistical() {
  Outcome o;
  const ScenarioConfig c = expand_preset("ci-bound").front();
  const PreparedScenario ps(c);
  const BatchResult br = run_monte_carlo(ps);
  o.require(br.runs.size() == 1000, "runs = " + std::to_string(br.runs.size()));
  o.require(c.noise.sigma_v == 0.1, "sigma_v");
  o.require(br.n_diverged == 0, std::to_string(br.n_diverged) + " runs diverged");
  const int nf = static_cast<int>(ps.followers.size());
  const std::size_t n_steps = br.runs.front().steps.size();
  long long checked = 0, violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  std::vector<double> d;
  for (std::size_t s = 0; s < n_steps; ++s)
    for (int f = 0; f < nf; ++f) {
      // per-run psi - c delta; c and b depend on the geometry only
      d.clear();
      double b = 0.0;
      for (const auto& r : br.runs) {
        d.push_back(r.at(r.psi, s, f) - r.at(r.c, s, f) * r.delta[s]);
        b += r.at(r.b, s, f);
      }
      b /= static_cast<double>(br.runs.size());
      double mean = 0.0, var = 0.0;
      for (double x : d) mean += x;
      mean /= static_cast<double>(d.size());
      for (double x : d) var += (x - mean) * (x - mean);
      const double se = std::sqrt(var / static_cast<double>(d.size() - 1) / static_cast<double>(d.size()));
      if (!std::isfinite(mean) || !std::isfinite(b)) {
        ++violations;
        continue;
      }
      const double gap = mean - (b + 3.0 * se);
      worst = std::max(worst, gap / std::max(b, 1e-300));
      if (gap > 0.0) ++violations;
      ++checked;
    }
  o.require(violations == 0, std::to_string(violations) + " violations");
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(checked) +
              " (step, follower) pairs, max (mean psi - c mean delta - b - 3 SE) / b = " + fmt(worst);
  return o;
}

// 4 ---------------------------------------------------------------------------

Outcome lambda_sweep() {
  Outcome o;
  std::ostringstream table;
  for (const char* fw : {"graph1", "graph2"}) {
    std::map<std::string, std::vector<std::pair<double, double>>> curve;  // estimator -> (mean, se) by lambda
    for (const auto& c : expand_preset(std::string("lambda-sweep:") + fw)) {
      const BatchResult br = run_monte_carlo(c);
      o.require(br.runs.size() == 50, c.name + " runs");
      curve[estimator_name(c.estimator.type)].emplace_back(br.mean_error, br.mean_error_se);
    }
    table << " " << fw << ":";
    for (const auto& [name, v] : curve) {
      table << " " << name << "=[";
      for (std::size_t k = 0; k < v.size(); ++k) table << (k ? " " : "") << fmt(v[k].first);
      table << "]";
    }
    // index k holds lambda = (k + 1) / 10
    for (const char* flat : {"rkf", "ga-rkf"}) {
      const auto& v = curve[flat];
      o.require(v[2].first <= 2.0 * v[9].first,
                std::string(fw) + " " + flat + " lambda 0.3 / lambda 1 = " + fmt(v[2].first / v[9].first));
    }
    const auto& con = curve["conral"];
    for (std::size_t k = 0; k + 1 < con.size(); ++k) {
      const double tol = 3.0 * std::hypot(con[k].second, con[k + 1].second);
      o.require(con[k + 1].first <= con[k].first + tol,
                std::string(fw) + " conral increases from lambda " + fmt((k + 1) / 10.0));
    }
    const auto& none = curve["none"];
    // approaching the no-estimator curve: at lambda = 0.1 conral keeps at least half of the
    // no-estimator error, and its relative gain over no estimator is below the largest gain on
    // the lossy grid (lambda = 1 loses nothing, so both curves coincide there by construction)
    o.require(con[0].first >= 0.5 * none[0].first,
              std::string(fw) + " conral / none at lambda 0.1 = " + fmt(con[0].first / none[0].first));
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + 1 < con.size(); ++k) best_gain = std::max(best_gain, 1.0 - con[k].first / none[k].first);
    const double gain = 1.0 - con[0].first / none[0].first;
    o.require(gain < best_gain, std::string(fw) + " conral gain at lambda 0.1 = " + fmt(gain) +
                                    " not below the lossy-grid maximum " + fmt(best_gain));
  }
  o.detail += (o.detail.empty() ? "" : ";") + table.str();
  return o;
}

// 5 ---------------------------------------------------------------------------

Outcome switching_departure() {
  Outcome o;
  std::ostringstream table;
  for (const char* fw : {"graph1", "graph2"}) {
    std::map<std::string, BatchResult> res;
    for (const auto& c : expand_preset(std::string("switching-departure:") + fw)) res[c.name] = run_monte_carlo(c);
    const std::string pre = std::string("switching-departure") + (std::string(fw) == "graph2" ? "-graph2" : "");
    table << " " << fw << ":";
    for (const char* est : {"none", "rkf"}) {
      const BatchResult& b = res.at(pre + "_" + est);
      table << " " << est << " diverged " << b.n_diverged << "/" << b.runs.size();
      o.require(b.n_diverged > 0, std::string(fw) + " " + est + " did not diverge");
    }
    for (const char* est : {"conral", "ga-rkf"}) {
      const BatchResult& b = res.at(pre + "_" + est);
      const BatchResult& base = res.at(pre + "_" + est + "_lossless");
      table << " " << est << " ss " << fmt(b.steady_state_error) << " (lossless " << fmt(base.steady_state_error)
            << ", diverged " << b.n_diverged << ")";
      o.require(b.n_diverged == 0, std::string(fw) + " " + est + " diverged");
      o.require(b.steady_state_error <= 10.0 * base.steady_state_error,
                std::string(fw) + " " + est + " steady state above 10x lossless");
    }
  }
  o.detail += (o.detail.empty() ? "" : ";") + table.str();
  return o;
}

// 6 ---------------------------------------------------------------------------

MatrixXd gaussian(int r, int c, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  MatrixXd m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = nd(gen);
  return m;
}

MatrixXd spd(int d, std::mt19937_64& gen, double scale) {
  const MatrixXd a = gaussian(d, d, gen);
  return scale * (a * a.transpose() / d + 0.1 * MatrixXd::Identity(d, d));
}

Outcome estimator_oracles() {
  Outcome o;
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> ud(0.0, 1.0);

  // (a) naive Kalman filter, Joseph form with explicit inverses
  double kf_err = 0.0;
  for (int seq = 0; seq < 20; ++seq) {
    const int dim = 2 + seq % 2;
    const KinematicModel m = KinematicModel::constant_acceleration(dim, 0.005 + 0.05 * ud(gen), 0.1 + 2.0 * ud(gen));
    const DimMat r = spd(dim, gen, 0.05);
    CounterRng rng(100 + seq);
    EdgeFilterState s = EdgeFilterState::from_position(gaussian(dim, 1, gen), {1.0, 10.0, 100.0});
    MatrixXd x = s.mean, p = s.cov;
    const MatrixXd f = m.F, q = m.Q, h = m.G, rr = r;
    for (int k = 0; k < 200; ++k) {
      std::optional<Observation> obs;
      if (ud(gen) < 0.6) obs = observe(gaussian(dim, 1, gen), r, rng);
      s = rkf_step(s, m, obs);
      x = f * x;
      p = f * p * f.transpose() + q;
      if (obs) {
        const MatrixXd kk = p * h.transpose() * (h * p * h.transpose() + rr).inverse();
        x += kk * (MatrixXd(obs->value) - h * x);
        const MatrixXd ikh = MatrixXd::Identity(3 * dim, 3 * dim) - kk * h;
        p = ikh * p * ikh.transpose() + kk * rr * kk.transpose();
      }
      kf_err = std::max({kf_err, (MatrixXd(s.mean) - x).norm() / (1.0 + x.norm()),
                         (MatrixXd(s.cov) - p).norm() / (1.0 + p.norm())});
    }
  }
  o.require(kf_err <= 1e-10, "(a) rkf vs naive = " + fmt(kf_err));

  // (b) exact noiseless recovery
  double ral_err = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int dim = 2 + t % 2;
    const int n = dim + static_cast<int>(ud(gen) * 6);
    const MatrixXd h = gaussian(dim, n, gen), theta = gaussian(dim, dim, gen);
    const auto est = ral_estimate(theta * h, h);
    if (!est) {
      ral_err = std::numeric_limits<double>::infinity();
      continue;
    }
    ral_err = std::max(ral_err, (*est - theta).norm());
  }
  o.require(ral_err <= 1e-10, "(b) ral recovery = " + fmt(ral_err));

  // (c) geometric covariance against sampling
  double cov_err = 0.0;
  for (int t = 0; t < 3; ++t) {
    const MatrixXd h = gaussian(2, 4, gen), theta = gaussian(2, 2, gen);
    const VectorXd p = gaussian(2, 1, gen);
    const DimMat r = spd(2, gen, 0.1);
    const RalFactor rf = ral_factor(h);
    const MatrixXd model = ral_covariance(rf.phi, p, r);
    CounterRng rng(7 + t);
    const int draws = 100000;
    VectorXd mean = VectorXd::Zero(2);
    MatrixXd second = MatrixXd::Zero(2, 2);
    for (int k = 0; k < draws; ++k) {
      MatrixXd y = theta * h;
      for (int c = 0; c < 4; ++c) y.col(c) = observe(VectorXd(y.col(c)), r, rng).value;
      const VectorXd z = ral_reconstruct(y * rf.phi.transpose(), p);
      mean += z;
      second += z * z.transpose();
    }
    mean /= draws;
    const MatrixXd emp = (second - draws * mean * mean.transpose()) / (draws - 1);
    cov_err = std::max(cov_err, (emp - model).norm() / model.norm());
  }
  o.require(cov_err <= 0.05, "(c) covariance relative error = " + fmt(cov_err));

  // (d) Procrustes against a 360-point grid
  double grid_gap = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < 50; ++t) {
    const MatrixXd h = gaussian(2, 5, gen);
    const MatrixXd y = rotation2d(2.0 * std::numbers::pi * ud(gen)) * h + 0.2 * gaussian(2, 5, gen);
    const MatrixXd rot = *constrained_ral(y, h, RalConstraint::kRotation);
    const double ours = (y - rot * h).squaredNorm();
    for (int a = 0; a < 360; ++a)
      grid_gap = std::max(grid_gap, ours - (y - rotation2d(a * std::numbers::pi / 180.0) * h).squaredNorm());
  }
  o.require(grid_gap <= 1e-12, "(d) a grid angle beats Procrustes by " + fmt(grid_gap));

  // (e) E[V^T V] = tr(R) I_N
  {
    const int n = 6;
    const DimMat r = spd(2, gen, 0.2);
    CounterRng rng(55);
    MatrixXd acc = MatrixXd::Zero(n, n);
    const int draws = 100000;
    for (int k = 0; k < draws; ++k) {
      MatrixXd v(2, n);
      for (int i = 0; i < n; ++i) v.col(i) = observe(VectorXd::Zero(2), r, rng).value;
      acc += v.transpose() * v;
    }
    acc /= draws;
    const double dev = (acc - r.trace() * MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() / r.trace();
    o.require(dev <= 0.02, "(e) property deviation = " + fmt(dev));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("kf ") + fmt(kf_err) + ", ral " + fmt(ral_err) +
                ", cov " + fmt(cov_err) + ", grid gap " + fmt(grid_gap) + ", property " + fmt(dev);
  }
  return o;
}

// 7 ---------------------------------------------------------------------------

Outcome reductions() {
  Outcome o;
  for (const char* fw : {"", ":graph2"}) {
    ScenarioConfig c = with_runs(expand_preset(std::string("ci-bound") + fw).front(), 1);
    c.estimator.type = EstimatorType::kRkf;
    const RunMetrics a = run_once(PreparedScenario(c), 0);
    c.estimator.type = EstimatorType::kGaRkf;
    const RunMetrics b = run_once(PreparedScenario(c), 0);
    o.require(a.delta == b.delta, c.name + ": ga-rkf and rkf traces differ");

    std::vector<std::vector<VectorXd>> u_static, u_cv;
    auto recorder = [](std::vector<std::vector<VectorXd>>& out) {
      return [&out](int, const MatrixXd&, const MatrixXd&, const EdgeEstimates&, const std::vector<VectorXd>& u) {
        out.push_back(u);
      };
    };
    c.estimator.type = EstimatorType::kNone;
    c.law = StaticLeadersLaw{};
    run_once(PreparedScenario(c), 0, recorder(u_static));
    c.law = ConstantVelocityLaw{1.0, 0.0};
    run_once(PreparedScenario(c), 0, recorder(u_cv));
    o.require(!u_static.empty() && u_static == u_cv, c.name + ": constant-velocity(1, 0) inputs differ");

    const NominalGraph& g = c.graph;
    bool same = true;
    for (int k = 0; k <= c.horizon_steps(); ++k) {
      const FunctionalGraph f = realize_functional(g, NoLosses{}, k, RunStream{c.sim.seed, 0});
      same = same && f.n_active_edges() == g.n_edges() && f.n_active_nodes() == g.n_nodes();
    }
    o.require(same, c.name + ": functional graph differs from nominal");
  }
  if (o.pass) o.detail = "bitwise on both frameworks over 6001 steps";
  return o;
}

// 8 ---------------------------------------------------------------------------

Outcome stress_certificate() {
  Outcome o;
  std::ostringstream info;
  for (const auto& f : {graph1(), graph2()}) {
    const MatrixXd l = compute_stress(f.graph, f.nominal).matrix;
    const int n = f.graph.n_nodes(), d = f.nominal.dim();
    const double r1 = (l * VectorXd::Ones(n)).norm() / l.norm();
    const double rp = (l * f.nominal.points.transpose()).norm() / l.norm();
    o.require(r1 <= 1e-10 && rp <= 1e-10, f.name + " equilibrium residual");
    const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(l).eigenvalues();
    const double tol = 1e-8 * ev.cwiseAbs().maxCoeff();
    int zeros = 0;
    for (int k = 0; k < n; ++k) zeros += std::abs(ev(k)) <= tol;
    o.require(zeros == d + 1, f.name + " has " + std::to_string(zeros) + " near-zero eigenvalues");
    o.require(ev(d + 1) > tol, f.name + " remainder not positive");
    info << " " << f.name << ": |L1|/|L| " << fmt(r1) << ", |LP'|/|L| " << fmt(rp) << ", lambda_" << d + 2 << " "
         << fmt(ev(d + 1)) << ";";
  }
  bool rejected = false;
  const NominalFramework nr = non_rigid_example();
  try {
    compute_stress(nr.graph, nr.nominal);
  } catch (const NotUniversallyRigid&) {
    rejected = true;
  }
  o.require(rejected, "non-rigid graph accepted");
  info << " non-rigid rejected";
  o.detail += (o.detail.empty() ? "" : ";") + info.str();
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> all{
      {1, "noiseless convergence", 5.0, noiseless_convergence},
      {2, "indicator bound pointwise", 10.0, theorem_pointwise},
      {3, "indicator bound in expectation", 300.0, corollary_statistical},
      {4, "lambda sweep ordering", 900.0, lambda_sweep},
      {5, "switching topology with departure", 120.0, switching_departure},
      {6, "estimator oracles", 0.0, estimator_oracles},
      {7, "reduction identities", 0.0, reductions},
      {8, "stress certificate", 0.0, stress_certificate},
  };
  std::cout << "threads: " << batch_threads() << std::endl;
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0.0 && secs > c.limit_s) o.require(false, "runtime " + fmt(secs) + " s > " + fmt(c.limit_s) + " s");
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << ", " << fmt(secs)
              << " s): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
