// Command-line runner for scenario files and named presets.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "affine_swarm/presets.hpp"
#include "affine_swarm/report.hpp"
#include "affine_swarm/scenario_json.hpp"

namespace as = affine_swarm;
namespace fs = std::filesystem;

namespace {

constexpr int kExitRunError = 1;
constexpr int kExitConfigError = 2;

struct CommonOptions {
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<int> stride;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--override", o.overrides, "dotted-path override key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "root RNG seed");
  cmd->add_option("--runs", o.runs, "Monte Carlo runs per scenario");
  cmd->add_option("--stride", o.stride, "metric logging stride in steps");
}

std::vector<std::string> all_overrides(const CommonOptions& o) {
  std::vector<std::string> out = o.overrides;
  if (o.seed) out.push_back("sim.seed=" + std::to_string(*o.seed));
  if (o.runs) out.push_back("sim.monte_carlo_runs=" + std::to_string(*o.runs));
  if (o.stride) out.push_back("sim.log_stride=" + std::to_string(*o.stride));
  return out;
}

// Scenario documents for a preset name or a file holding one scenario object
// or an array of them.
std::vector<as::Json> scenario_documents(const std::string& target) {
  std::vector<as::Json> docs;
  if (fs::is_regular_file(target)) {
    as::Json doc = as::read_json_file(target);
    if (doc.is_array())
      for (auto& d : doc) docs.push_back(d);
    else
      docs.push_back(std::move(doc));
    return docs;
  }
  for (const auto& c : as::expand_preset(target)) docs.push_back(as::scenario_to_json(c));
  return docs;
}

std::vector<as::ScenarioConfig> resolve(const std::string& target, const std::vector<std::string>& overrides) {
  std::vector<as::ScenarioConfig> out;
  std::vector<std::string> issues;
  const auto docs = scenario_documents(target);
  for (std::size_t n = 0; n < docs.size(); ++n) {
    as::Json doc = docs[n];
    for (const auto& o : overrides) as::apply_override(doc, o);
    try {
      out.push_back(as::scenario_from_json(doc));
    } catch (const as::ConfigError& e) {
      const std::string where = docs.size() > 1 ? "scenario[" + std::to_string(n) + "]: " : "";
      if (e.issues().empty()) issues.push_back(where + e.what());
      for (const auto& s : e.issues()) issues.push_back(where + s);
    }
  }
  if (!issues.empty()) throw as::ConfigError("invalid scenario input '" + target + "'", issues);
  return out;
}

int cmd_run(const std::string& target, const CommonOptions& opts, const std::string& out_dir, int threads) {
  const auto configs = resolve(target, all_overrides(opts));
  as::Json index = as::Json::array();
  fs::create_directories(out_dir);
  for (const auto& cfg : configs) {
    const auto t0 = std::chrono::steady_clock::now();
    as::Json summary = as::run_and_export(cfg, fs::path(out_dir) / cfg.name, threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << cfg.name << ": runs=" << summary["n_runs"] << " diverged=" << summary["n_diverged"]
              << " mean_error=" << summary["mean_error"] << " steady_state_error=" << summary["steady_state_error"]
              << " (" << secs << " s)\n";
    summary.erase("runs");
    index.push_back(std::move(summary));
  }
  as::write_text(fs::path(out_dir) / "summary.json", as::Json{{"target", target}, {"scenarios", index}}.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affine formation control simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts, show_opts;
  std::string run_target, out_dir = "results";
  int threads = 0;
  auto* run = app.add_subcommand("run", "run a preset or scenario file and export results");
  run->add_option("target", run_target, "preset name (optionally name:graph2) or scenario file")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--threads", threads, "worker threads (0 = hardware, capped by AFFINE_SWARM_THREADS)");
  add_common(run, run_opts);

  std::string validate_target;
  std::vector<std::string> validate_overrides;
  auto* validate = app.add_subcommand("validate", "check a scenario file and report every problem");
  validate->add_option("path", validate_target, "scenario file or preset name")->required();
  validate->add_option("--override", validate_overrides, "dotted-path override key=value (repeatable)");

  auto* list = app.add_subcommand("list-presets", "list the named presets");

  std::string show_target;
  auto* show = app.add_subcommand("show-preset", "print the resolved scenario documents of a preset");
  show->add_option("name", show_target, "preset name")->required();
  add_common(show, show_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_target, run_opts, out_dir, threads);
    if (*validate) {
      const auto configs = resolve(validate_target, validate_overrides);
      for (const auto& c : configs) std::cout << c.name << ": ok\n";
      return 0;
    }
    if (*list) {
      for (const auto& p : as::preset_catalog()) std::cout << p.name << "  " << p.description << "\n";
      return 0;
    }
    if (*show) {
      const auto configs = resolve(show_target, all_overrides(show_opts));
      as::Json out = as::Json::array();
      for (const auto& c : configs) out.push_back(as::scenario_to_json(c));
      std::cout << (out.size() == 1 ? out[0] : out).dump(2) << "\n";
      return 0;
    }
  } catch (const as::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunError;
  }
  return 0;
}
