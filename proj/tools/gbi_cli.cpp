#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gbi/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Goal-based investing: policy calibration, backtests and deep hedging"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::vector<double> kappa;
  std::vector<double> p;
  gbi::CommandOptions options;
  std::string checkpoint;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"calibrate", "Calibrate the configured policy and report K*, L or the success probability"},
      {"simulate", "Simulate price paths and write them to paths.csv"},
      {"backtest", "Run discrete delta hedging for every p and kappa"},
      {"train", "Train the deep hedger and write a checkpoint"},
      {"evaluate", "Evaluate a deep-hedger checkpoint on held-out paths"},
      {"table", "Emit the Theoretical / Deep Hedging / Discrete Delta summary table"},
      {"curves", "Write value and delta grids plus the static-strategy loss curve"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Root seed");
    sub->add_option("--kappa", kappa, "Proportional transaction costs")->expected(1, -1);
    sub->add_option("--p", p, "Shortfall loss orders")->expected(1, -1);
    sub->add_flag("--json", options.json, "Machine-readable summary on stdout");
    if (name == "evaluate") sub->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gbi::kExitDomain;
  }

  gbi::ExperimentConfig config;
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      config = gbi::experiment_from_json(gbi::Json::parse(is));
    }
  } catch (const gbi::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return gbi::kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: cannot read config: " << e.what() << '\n';
    return gbi::kExitDomain;
  }

  const CLI::App* sub = app.get_subcommands().front();
  if (!out_dir.empty()) config.output = out_dir;
  if (sub->count("--seed") > 0) {
    config.seed = seed;
    config.training.seed = seed;
  }
  if (!kappa.empty()) {
    config.kappa = kappa;
    config.training.kappa = kappa.front();
  }
  if (!p.empty()) {
    config.p = p;
    config.training.p = p.front();
  }
  if (!checkpoint.empty()) options.checkpoint = checkpoint;

  return gbi::run_command(sub->get_name(), config, options, std::cout, std::cerr);
}
