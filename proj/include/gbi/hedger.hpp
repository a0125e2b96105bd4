#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gbi/backtest.hpp"
#include "gbi/errors.hpp"
#include "gbi/market.hpp"

namespace gbi {

/// One feed-forward network per rebalancing date. Every layer is affine followed by a
/// sigmoid; inputs are (xi_{t-}, S_t / S_0), the output is the new holding xi_t in (0, 1).
///
/// All parameters live in a single flat vector. Network t occupies the slice
/// [t * params_per_network(), (t + 1) * params_per_network()), and within it each layer
/// stores its weight matrix (column-major, out x in) followed by its bias.
class NetworkStack {
 public:
  static std::vector<Eigen::Index> default_widths() { return {2, 10, 10, 1}; }

  explicit NetworkStack(Eigen::Index steps, std::vector<Eigen::Index> widths = default_widths());

  Eigen::Index steps() const { return steps_; }
  const std::vector<Eigen::Index>& widths() const { return widths_; }
  std::size_t layers() const { return widths_.size() - 1; }
  Eigen::Index params_per_network() const { return per_network_; }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  Eigen::Map<const Eigen::MatrixXd> weight(Eigen::Index step, std::size_t layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(Eigen::Index step, std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(Eigen::Index step, std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(Eigen::Index step, std::size_t layer);

  /// Offset of (layer weight, layer bias) inside one network's slice.
  Eigen::Index weight_offset(std::size_t layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(std::size_t layer) const { return offsets_[layer] + widths_[layer + 1] * widths_[layer]; }

  double forward(Eigen::Index step, double shares_before, double moneyness) const;

  /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
  void initialize_glorot(std::uint64_t seed);

 private:
  Eigen::Index steps_;
  std::vector<Eigen::Index> widths_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index per_network_ = 0;
  Eigen::VectorXd params_;
};

/// Market, goal and accounting constants the hedger is trained against.
struct HedgeProblem {
  double goal = 100.0;
  double p = 1.0;
  double lambda = 0.1;
  double kappa = 0.0;
  double r = 0.01;
  double tau = 1.0 / 52.0;
  double initial_bank = 70.0;
  double initial_shares = 0.0;
};

/// log(1 + e^x) without overflow.
double softplus(double x);
double logistic(double x);

/// softplus(H - V)^p + lambda softplus(V - H) for one terminal wealth.
double shortfall_loss(double terminal, double goal, double p, double lambda);
double shortfall_loss_derivative(double terminal, double goal, double p, double lambda);
/// Mean of shortfall_loss over the sample.
double shortfall_loss(std::span<const double> terminal, double goal, double p, double lambda);

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

/// Terminal wealth of the network strategy on the selected paths (asset 0).
Eigen::VectorXd network_terminal_wealth(const NetworkStack& stack, const PathSet& paths,
                                        std::span<const Eigen::Index> batch, const HedgeProblem& problem,
                                        unsigned threads = 1);
Eigen::VectorXd network_terminal_wealth(const NetworkStack& stack, const PathSet& paths, const HedgeProblem& problem,
                                        unsigned threads = 1);

/// Mean loss over the batch and its gradient with respect to every parameter, by
/// reverse-mode differentiation through the networks and the self-financing recursion.
/// The cost term kappa |dxi| S uses subgradient 0 at dxi = 0. Paths are processed in
/// fixed chunks and reduced in chunk order, so the result does not depend on `threads`.
LossGradient loss_and_gradient(const NetworkStack& stack, const PathSet& paths, std::span<const Eigen::Index> batch,
                               const HedgeProblem& problem, unsigned threads = 1);

class Adam {
 public:
  Adam(Eigen::Index size, double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& gradient);
  long long iterations() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  long long t_ = 0;
};

struct TrainConfig {
  double p = 1.0;
  double lambda = 0.1;
  double kappa = 0.0;
  Eigen::Index train_paths = 10000;
  Eigen::Index validation_paths = 2000;
  int epochs = 200;
  Eigen::Index batch_size = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int patience = 20;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<Eigen::Index> widths = NetworkStack::default_widths();
};

struct LossReport {
  std::vector<double> train_loss;  // mean minibatch loss per epoch
  std::vector<double> validation_loss;
  std::vector<double> gradient_norm;  // mean minibatch gradient norm per epoch
  int best_epoch = -1;
  int epochs_run = 0;
  double final_train_loss = 0.0;  // full training set, returned parameters
};

/// Training loss became non-finite; carries the trace up to the failure.
class TrainingDivergence : public NumericalError {
 public:
  TrainingDivergence(const std::string& what, LossReport report) : NumericalError(what), report_(std::move(report)) {}
  const LossReport& report() const { return report_; }

 private:
  LossReport report_;
};

struct TrainResult {
  NetworkStack stack;
  LossReport report;
};

/// Hedging grid: N steps of tau starting at spot s0, with the accounting constants of `problem`.
struct HedgingGrid {
  double spot0 = 100.0;
  Eigen::Index steps = 520;
  double tau = 1.0 / 52.0;
};

HedgeProblem make_problem(const Market& market, const GoalSpec& goal, const HedgingGrid& grid, const TrainConfig& cfg);

/// Objective-measure paths for the named substream ("training", "validation", "evaluation").
PathSet hedging_paths(const Market& market, const HedgingGrid& grid, Eigen::Index count, std::uint64_t seed,
                      std::string_view stream);

/// Minibatch Adam on a fixed, epoch-shuffled training set, keeping the parameters with the
/// best validation loss and stopping after `patience` epochs without improvement.
TrainResult train(const PathSet& training, const PathSet& validation, const HedgeProblem& problem,
                  const TrainConfig& config);
TrainResult train(const Market& market, const GoalSpec& goal, const HedgingGrid& grid, const TrainConfig& config);

struct StaticLossPoint {
  double shares = 0.0;
  double penalized = 0.0;
  double unpenalized = 0.0;
  double se_penalized = 0.0;
  double se_unpenalized = 0.0;
};

/// Loss of every constant holding xi_t = xi in `grid` on the given paths.
std::vector<StaticLossPoint> static_loss_curve(const PathSet& paths, const HedgeProblem& problem,
                                               std::span<const double> grid);

class NetworkStrategy final : public Strategy {
 public:
  explicit NetworkStrategy(const NetworkStack& stack) : stack_(stack) {}
  double decide(const DecisionInput& input) const override {
    return stack_.forward(input.step, input.shares_before, input.spot / input.initial_spot);
  }
  bool unit_bounded() const override { return true; }
  std::string name() const override { return "deep-hedger"; }

 private:
  const NetworkStack& stack_;
};

struct Evaluation {
  WealthStats stats;
  BacktestResult backtest;
};

/// Backtests the stack on held-out paths; backtest.terminal_spot / S_0 against
/// backtest.terminal gives the payoff diagram.
Evaluation evaluate(const NetworkStack& stack, const PathSet& paths, const HedgeProblem& problem);

}  // namespace gbi
