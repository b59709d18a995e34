#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "coslat/config.hpp"
#include "coslat/harness.hpp"
#include "coslat/scenario.hpp"
#include "coslat/simd/kde_kernels.hpp"

namespace {

struct SimulateArgs {
  std::string config;
  std::optional<int> scenario;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::string method = "both";
  std::string mode = "distributed-lc";
  std::string out = "out";
  std::string truth;
  bool detail = false;
  bool quiet = false;
};

void add_simulate_options(CLI::App* cmd, SimulateArgs& a) {
  cmd->add_option("--config", a.config, "Configuration file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--scenario", a.scenario, "Scenario id")->check(CLI::IsMember({1, 2}));
  cmd->add_option("--runs", a.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "Experiment seed");
  cmd->add_option("--method", a.method, "coslat, baseline or both")
      ->check(CLI::IsMember({"coslat", "baseline", "both"}));
  cmd->add_option("--mode", a.mode, "Target update mode")
      ->check(CLI::IsMember({"distributed-lc", "centralized", "exact-extrinsic"}));
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_flag("--detail", a.detail, "Also write per-run runs.csv and events.csv");
  cmd->add_flag("--quiet", a.quiet, "No progress output");
}

coslat::ScenarioConfig resolve_config(const SimulateArgs& a) {
  coslat::ScenarioConfig cfg = a.config.empty() ? coslat::ScenarioConfig::defaults() : coslat::load_config(a.config);
  if (a.scenario) cfg.scenario = *a.scenario;
  if (a.runs) cfg.runs = *a.runs;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  return cfg;
}

int simulate(const SimulateArgs& a) {
  const coslat::ScenarioConfig cfg = resolve_config(a);
  coslat::ExperimentOptions opts;
  opts.mode = coslat::parse_mode(a.mode);
  if (a.method != "both") opts.methods = {coslat::parse_method(a.method)};
  opts.truth = a.truth.empty() ? coslat::experiment_truth(cfg) : coslat::read_truth_csv(a.truth);
  if (opts.truth->sensors.size() != cfg.sensor_count()) {
    throw std::invalid_argument("truth table has " + std::to_string(opts.truth->sensors.size()) +
                                " sensors, config has " + std::to_string(cfg.sensor_count()));
  }
  if (!a.quiet) {
    std::fprintf(stderr, "scenario %d, %d runs, %d steps, mode %s, simd %s\n", cfg.scenario, cfg.runs,
                 opts.truth->steps, a.mode.c_str(), std::string(coslat::simd::backend_name(coslat::simd::active_backend())).c_str());
    opts.progress = [](const coslat::RunRecord& r) {
      std::fprintf(stderr, "  run %d %-8s%s\n", r.run, coslat::method_name(r.method).c_str(),
                   r.excluded ? "  (excluded: target filter diverged)" : "");
    };
  }

  const auto records = coslat::run_experiment(cfg, opts);
  const auto curves = coslat::rmse_curves(records);
  coslat::export_csv(curves, records, a.out, a.detail);
  coslat::write_truth_csv(*opts.truth, (std::filesystem::path(a.out) / "truth.csv").string());

  const int steps = opts.truth->steps;
  for (const auto& c : curves) {
    std::printf("%-8s %-7s mean rmse over n=1..%d: %.4f\n", c.method.c_str(), c.metric.c_str(), steps,
                coslat::window_mean(c, 1, steps));
  }
  std::size_t excluded = 0;
  for (const auto& r : records) excluded += r.excluded ? 1 : 0;
  std::printf("excluded runs: %zu of %zu\n", excluded, records.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative self-localization and tracking simulator"};
  app.require_subcommand(1);

  SimulateArgs sim;
  add_simulate_options(app.add_subcommand("simulate", "Run a Monte Carlo experiment"), sim);

  SimulateArgs rep;
  auto* replay = app.add_subcommand("replay", "Run an experiment on a stored truth table");
  add_simulate_options(replay, rep);
  replay->add_option("--truth", rep.truth, "Truth table (node_id,n,x1,x2,v1,v2)")
      ->required()
      ->check(CLI::ExistingFile);

  std::string check_path;
  bool dump = false;
  auto* validate = app.add_subcommand("validate-config", "Check a configuration file");
  validate->add_option("config,--config", check_path, "Configuration file")->required();
  validate->add_flag("--print", dump, "Print the resolved configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("simulate")) return simulate(sim);
    if (app.got_subcommand("replay")) return simulate(rep);
    const auto cfg = coslat::load_config(check_path);
    if (dump) coslat::write_config(cfg, std::cout);
    std::printf("%s: ok (%zu sensors, scenario %d)\n", check_path.c_str(), cfg.sensor_count(), cfg.scenario);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
