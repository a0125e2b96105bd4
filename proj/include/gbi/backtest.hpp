#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gbi/market.hpp"
#include "gbi/policies.hpp"

namespace gbi {

enum class Phase { pre_rebalance, post_rebalance };

/// Bank balance b, share holding xi, spot S. Wealth is marked as b + xi S.
struct AccountState {
  double bank = 0.0;
  double shares = 0.0;
  double spot = 0.0;
  Phase phase = Phase::pre_rebalance;

  double wealth() const { return bank + shares * spot; }
};

/// Trades to `target` shares at the current spot, paying kappa |trade| S.
AccountState rebalance(const AccountState& pre, double target, double kappa);
/// Compounds the bank over one step of length tau and moves to the next spot.
AccountState accrue(const AccountState& post, double r, double tau, double next_spot);
/// Terminal wealth after liquidating the position at the current (terminal) spot.
double unwind(const AccountState& pre, double kappa);

struct BacktestConfig {
  Eigen::Index steps = 520;
  double tau = 1.0 / 52.0;
  double kappa = 0.0;
  double initial_bank = 70.0;
  double initial_shares = 0.0;
  /// Number of leading paths whose trades are written to the trade log.
  Eigen::Index trade_log_paths = 0;
};

struct DecisionInput {
  Eigen::Index step = 0;
  double time = 0.0;
  double spot = 0.0;
  double initial_spot = 0.0;
  double shares_before = 0.0;
  double bank_before = 0.0;
};

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual double decide(const DecisionInput& input) const = 0;
  /// True when every decision lies in [0, 1].
  virtual bool unit_bounded() const { return false; }
  virtual std::string name() const = 0;
};

class ConstantStrategy final : public Strategy {
 public:
  explicit ConstantStrategy(double shares) : shares_(shares) {}
  double decide(const DecisionInput&) const override { return shares_; }
  bool unit_bounded() const override { return shares_ >= 0.0 && shares_ <= 1.0; }
  std::string name() const override { return "constant"; }

 private:
  double shares_;
};

/// Holds the analytic hedge ratio of a policy, evaluated at (t, S_t) before the trade.
class DeltaStrategy final : public Strategy {
 public:
  explicit DeltaStrategy(AnyPolicy policy) : policy_(std::move(policy)) {}
  double decide(const DecisionInput& input) const override { return policy_delta(input.time, input.spot, policy_); }
  std::string name() const override { return "delta:" + family_name(policy_); }

 private:
  AnyPolicy policy_;
};

struct TradeRecord {
  Eigen::Index path = 0;
  Eigen::Index step = 0;
  double time = 0.0;
  double spot = 0.0;
  double shares_before = 0.0;
  double shares_after = 0.0;
  double bank = 0.0;
  double cost = 0.0;
};

struct BacktestResult {
  Eigen::VectorXd terminal;                 // V_T of the included paths
  std::vector<Eigen::Index> path_index;     // source path of each terminal entry
  Eigen::VectorXd terminal_spot;            // S_T of the included paths
  Eigen::Index excluded = 0;                // paths dropped because the strategy threw
  Eigen::Index held_steps = 0;              // non-finite decisions replaced by the prior holding
  double max_self_financing_error = 0.0;    // relative
  std::vector<TradeRecord> trades;
};

/// Runs `strategy` over asset 0 of every path: trade at t = 0, then N - 1 accrue/trade
/// steps, then unwind at T.
BacktestResult run_backtest(const PathSet& paths, const Strategy& strategy, const BacktestConfig& config, double r);

struct WealthStats {
  double mean = 0.0;
  double q05 = 0.0;
  double success_rate = 0.0;
  double success_ratio = 0.0;
  Eigen::Index count = 0;
  double se_mean = 0.0;
  double se_rate = 0.0;
  double se_ratio = 0.0;
};

/// Lower empirical quantile: the ceil(level * J)-th order statistic.
double lower_quantile(std::span<const double> samples, double level);
WealthStats statistics(std::span<const double> samples, double goal);
inline WealthStats statistics(const Eigen::VectorXd& samples, double goal) {
  return statistics(std::span<const double>(samples.data(), static_cast<std::size_t>(samples.size())), goal);
}

/// Compensated (Neumaier) summation.
double stable_sum(std::span<const double> values);

/// Objective-measure X_T pushed through the policy payoff.
Eigen::VectorXd theoretical_terminal_samples(const Market& market, const AnyPolicy& policy, double spot0,
                                             Eigen::Index samples, std::uint64_t seed);

void write_terminal_csv(std::ostream& out, const BacktestResult& result);
void write_trade_log_csv(std::ostream& out, const std::vector<TradeRecord>& trades);

}  // namespace gbi
