#pragma once

// Result export: per-step metrics CSV, per-step aggregates CSV, summary and
// resolved-config JSON.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "affine_swarm/scenario_json.hpp"
#include "affine_swarm/sim.hpp"

namespace affine_swarm {

/// Shortest round-trip decimal; "nan", "inf", "-inf" for non-finite values.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> metrics_header(const std::vector<int>& followers) {
  std::vector<std::string> h{"run", "step", "time", "delta"};
  for (const char* q : {"psi", "c", "b"})
    for (int i : followers) h.push_back(std::string(q) + "_" + std::to_string(i + 1));
  return h;
}

namespace detail {

inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) os << ',';
    os << cells[k];
  }
  os << '\n';
}

}  // namespace detail

/// Long format: one row per (run, logged step); 4 + 3 * followers columns.
inline void write_metrics_csv(std::ostream& os, const BatchResult& br, const std::vector<int>& followers,
                              double dt) {
  detail::write_row(os, metrics_header(followers));
  const int nf = static_cast<int>(followers.size());
  std::vector<std::string> row;
  for (const auto& run : br.runs)
    for (std::size_t s = 0; s < run.steps.size(); ++s) {
      row.clear();
      row.push_back(std::to_string(run.run));
      row.push_back(std::to_string(run.steps[s]));
      row.push_back(format_double(run.steps[s] * dt));
      row.push_back(format_double(run.delta[s]));
      for (const auto* v : {&run.psi, &run.c, &run.b})
        for (int f = 0; f < nf; ++f) row.push_back(format_double(run.at(*v, s, f)));
      detail::write_row(os, row);
    }
}

/// Across-run means per logged step.
inline void write_aggregate_csv(std::ostream& os, const BatchResult& br, const std::vector<int>& followers,
                                double dt) {
  std::vector<std::string> h{"step", "time", "n_runs", "delta_mean", "delta_sd"};
  for (const char* q : {"psi_mean", "psi_sd", "c_mean", "b_mean"})
    for (int i : followers) h.push_back(std::string(q) + "_" + std::to_string(i + 1));
  detail::write_row(os, h);
  std::vector<std::string> row;
  for (const auto& a : br.steps) {
    row = {std::to_string(a.step), format_double(a.step * dt), std::to_string(a.n_runs),
           format_double(a.delta_mean), format_double(a.delta_sd)};
    for (const auto* v : {&a.psi_mean, &a.psi_sd, &a.c_mean, &a.b_mean})
      for (double x : *v) row.push_back(format_double(x));
    detail::write_row(os, row);
  }
}

/// JSON number, or null when not finite.
inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json summary_json(const PreparedScenario& ps, const BatchResult& br) {
  Json runs = Json::array();
  int first_div = -1;
  for (const auto& r : br.runs) {
    runs.push_back({{"run", r.run},
                    {"diverged", r.diverged},
                    {"diverged_step", r.diverged ? Json(r.diverged_step) : Json(nullptr)},
                    {"mean_error", finite_or_null(r.mean_error)},
                    {"steady_state_error", finite_or_null(r.steady_state_error)}});
    if (r.diverged && (first_div < 0 || r.diverged_step < first_div)) first_div = r.diverged_step;
  }
  const BranchCounts& b = br.branches;
  return {{"name", br.name},
          {"estimator", estimator_name(ps.cfg.estimator.type)},
          {"control_law", law_name(ps.cfg.law)},
          {"n_runs", static_cast<int>(br.runs.size())},
          {"n_diverged", br.n_diverged},
          {"divergence", br.n_diverged > 0},
          {"first_divergence_step", first_div >= 0 ? Json(first_div) : Json(nullptr)},
          {"mean_error", finite_or_null(br.mean_error)},
          {"mean_error_se", finite_or_null(br.mean_error_se)},
          {"steady_state_error", finite_or_null(br.steady_state_error)},
          {"steady_state_se", finite_or_null(br.steady_state_se)},
          {"steady_state_window_steps", steady_state_window(ps.cfg.horizon_steps() + 1)},
          {"branch_counts",
           {{"measured", b.measured},
            {"geometric", b.geometric},
            {"propagated", b.propagated},
            {"held", b.held},
            {"dropped", b.dropped}}},
          {"stability", {{"ok", br.stability.ok}, {"metric", br.stability.metric}, {"message", br.stability.message}}},
          {"runs", runs}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

/// Runs one scenario and writes its artifacts into `dir`; returns its summary.
inline Json run_and_export(const ScenarioConfig& cfg, const std::filesystem::path& dir, int threads = 0) {
  const PreparedScenario ps(cfg);
  const BatchResult br = run_monte_carlo(ps, threads);
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "metrics.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write '" + (dir / "metrics.csv").string() + "'");
    write_metrics_csv(csv, br, ps.followers, cfg.sim.dt);
  }
  {
    std::ofstream csv(dir / "aggregate.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write '" + (dir / "aggregate.csv").string() + "'");
    write_aggregate_csv(csv, br, ps.followers, cfg.sim.dt);
  }
  const Json summary = summary_json(ps, br);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  write_text(dir / "scenario.resolved.json", scenario_to_json(cfg, &ps.stress).dump(2) + "\n");
  return summary;
}

}  // namespace affine_swarm
