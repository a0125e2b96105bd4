#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gbi/closed_form.hpp"
#include "gbi/serialization.hpp"

namespace gbi {

struct CheckpointRef {
  double p = 1.0;
  double kappa = 0.0;
  std::string path;
};

/// Everything one experiment needs. Parsed from a JSON file; command-line flags override fields.
struct ExperimentConfig {
  // market
  std::vector<double> mu{0.08};
  std::vector<std::vector<double>> sigma{{0.30}};
  double r = 0.01;
  double spot0 = 100.0;
  // goal
  double goal = 100.0;
  double maturity = 10.0;
  double endowment = 70.0;
  // grid
  Eigen::Index steps = 520;
  double tau = 1.0 / 52.0;
  Eigen::Index paths = 10000;
  Eigen::Index theoretical_paths = 100000;
  std::uint64_t seed = 20230101;
  // policy
  std::string family = "efficient";
  std::vector<double> p{1.0, 1.5, 5.0};
  double delta = 1.0;
  double epsilon = 0.05;
  CarryConvention convention = CarryConvention::published;
  // costs
  std::vector<double> kappa{0.0, 0.005};
  // training
  TrainConfig training = [] {
    TrainConfig t;
    t.seed = 20230101;  // kept equal to the grid seed
    return t;
  }();
  std::vector<CheckpointRef> checkpoints;
  // curves
  std::vector<double> static_grid;  // empty: 101 points on [0, 1]
  // output
  std::string output = "out";

  Market market() const;
  GoalSpec goal_spec() const { return {goal, maturity, endowment}; }
  HedgingGrid hedging_grid() const { return {spot0, steps, tau}; }
};

Json to_json(const ExperimentConfig& config);
/// Accepts either a config object or a run manifest (whose "config" member is used).
ExperimentConfig experiment_from_json(const Json& j);
/// Cross-checks every block (N tau = T, positive prices, kappa in [0, 1), ...). Throws DomainError.
void validate(const ExperimentConfig& config);

struct CommandOptions {
  bool json = false;
  std::optional<std::string> checkpoint;
};

enum ExitCode : int { kExitOk = 0, kExitDomain = 2, kExitNumerical = 3 };

/// Runs one of calibrate, simulate, backtest, train, evaluate, table, curves. Writes files into
/// config.output plus a manifest.json, and a human (or JSON) summary to `out`.
int run_command(const std::string& command, const ExperimentConfig& config, const CommandOptions& options,
                std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace gbi
