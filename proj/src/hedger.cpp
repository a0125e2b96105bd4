#include "gbi/hedger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "gbi/random.hpp"

namespace gbi {

using Eigen::Index;

// --- network stack --------------------------------------------------------

NetworkStack::NetworkStack(Index steps, std::vector<Index> widths) : steps_(steps), widths_(std::move(widths)) {
  if (steps_ < 1) throw DomainError("NetworkStack: at least one rebalancing date is required");
  if (widths_.size() < 2 || widths_.front() != 2 || widths_.back() != 1 ||
      std::any_of(widths_.begin(), widths_.end(), [](Index w) { return w < 1; })) {
    throw DomainError("NetworkStack: widths must start at 2 inputs and end at 1 output");
  }
  offsets_.reserve(layers());
  for (std::size_t l = 0; l < layers(); ++l) {
    offsets_.push_back(per_network_);
    per_network_ += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(steps_ * per_network_);
}

Eigen::Map<const Eigen::MatrixXd> NetworkStack::weight(Index step, std::size_t layer) const {
  return {params_.data() + step * per_network_ + weight_offset(layer), widths_[layer + 1], widths_[layer]};
}

Eigen::Map<Eigen::MatrixXd> NetworkStack::weight(Index step, std::size_t layer) {
  return {params_.data() + step * per_network_ + weight_offset(layer), widths_[layer + 1], widths_[layer]};
}

Eigen::Map<const Eigen::VectorXd> NetworkStack::bias(Index step, std::size_t layer) const {
  return {params_.data() + step * per_network_ + bias_offset(layer), widths_[layer + 1]};
}

Eigen::Map<Eigen::VectorXd> NetworkStack::bias(Index step, std::size_t layer) {
  return {params_.data() + step * per_network_ + bias_offset(layer), widths_[layer + 1]};
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double NetworkStack::forward(Index step, double shares_before, double moneyness) const {
  if (step < 0 || step >= steps_) throw DomainError("NetworkStack::forward: step outside [0, N)");
  Eigen::VectorXd a(2);
  a << shares_before, moneyness;
  for (std::size_t l = 0; l < layers(); ++l) {
    Eigen::VectorXd z = weight(step, l) * a + bias(step, l);
    a = z.unaryExpr([](double v) { return logistic(v); });
  }
  return a(0);
}

void NetworkStack::initialize_glorot(std::uint64_t seed) {
  UniformStream u(seed, 0);
  for (Index t = 0; t < steps_; ++t) {
    for (std::size_t l = 0; l < layers(); ++l) {
      const double limit = std::sqrt(6.0 / static_cast<double>(widths_[l] + widths_[l + 1]));
      auto w = weight(t, l);
      for (Index c = 0; c < w.cols(); ++c) {
        for (Index r = 0; r < w.rows(); ++r) w(r, c) = limit * (2.0 * u.next_uniform() - 1.0);
      }
      bias(t, l).setZero();
    }
  }
}

// --- loss -----------------------------------------------------------------

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double shortfall_loss(double terminal, double goal, double p, double lambda) {
  return std::pow(softplus(goal - terminal), p) + lambda * softplus(terminal - goal);
}

double shortfall_loss_derivative(double terminal, double goal, double p, double lambda) {
  const double gap = goal - terminal;
  return -p * std::pow(softplus(gap), p - 1.0) * logistic(gap) + lambda * logistic(-gap);
}

double shortfall_loss(std::span<const double> terminal, double goal, double p, double lambda) {
  std::vector<double> per(terminal.size());
  std::transform(terminal.begin(), terminal.end(), per.begin(),
                 [&](double v) { return shortfall_loss(v, goal, p, lambda); });
  return stable_sum(per) / static_cast<double>(terminal.size());
}

// --- batched forward / backward -------------------------------------------

namespace {

constexpr Index kChunk = 64;

struct Tape {
  std::vector<Eigen::MatrixXd> act;  // (step, layer) activations, widths[l] x B
  Eigen::MatrixXd spot;              // (N + 1) x B
  Eigen::RowVectorXd terminal;
};

Eigen::ArrayXd sign_of(const Eigen::ArrayXd& x) {
  return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

void forward_chunk(const NetworkStack& stack, const PathSet& paths, std::span<const Index> idx,
                   const HedgeProblem& pb, Tape& tape, bool record) {
  const Index B = static_cast<Index>(idx.size());
  const Index N = stack.steps();
  const std::size_t L = stack.layers();
  const RowMatrix& prices = paths.prices.front();
  const auto& widths = stack.widths();

  tape.spot.resize(N + 1, B);
  for (Index b = 0; b < B; ++b) {
    tape.spot.col(b) = prices.row(idx[static_cast<std::size_t>(b)]).transpose();
  }
  const Index slots = record ? N : 1;
  tape.act.resize(static_cast<std::size_t>(slots) * (L + 1));
  for (Index s = 0; s < slots; ++s) {
    for (std::size_t l = 0; l <= L; ++l) tape.act[static_cast<std::size_t>(s) * (L + 1) + l].resize(widths[l], B);
  }

  const double growth = std::exp(pb.r * pb.tau);
  Eigen::ArrayXd bank = Eigen::ArrayXd::Constant(B, pb.initial_bank);
  Eigen::ArrayXd shares = Eigen::ArrayXd::Constant(B, pb.initial_shares);
  const Eigen::ArrayXd s0 = tape.spot.row(0).transpose().array();

  for (Index k = 0; k < N; ++k) {
    if (k > 0) bank *= growth;
    const std::size_t base = record ? static_cast<std::size_t>(k) * (L + 1) : 0;
    Eigen::MatrixXd& in = tape.act[base];
    in.row(0) = shares.matrix().transpose();
    in.row(1) = (tape.spot.row(k).transpose().array() / s0).matrix().transpose();
    for (std::size_t l = 0; l < L; ++l) {
      Eigen::MatrixXd& out = tape.act[base + l + 1];
      out.noalias() = stack.weight(k, l).lazyProduct(tape.act[base + l]);
      out.colwise() += stack.bias(k, l);
      // vectorized logistic; exp overflow saturates to 0 correctly
      out = (1.0 + (-out.array()).exp()).inverse().matrix();
    }
    const Eigen::ArrayXd next = tape.act[base + L].row(0).transpose().array();
    const Eigen::ArrayXd spot = tape.spot.row(k).transpose().array();
    const Eigen::ArrayXd trade = next - shares;
    bank -= trade * spot + pb.kappa * trade.abs() * spot;
    shares = next;
  }
  bank *= growth;
  const Eigen::ArrayXd final_spot = tape.spot.row(N).transpose().array();
  tape.terminal = (bank + shares * final_spot - pb.kappa * shares.abs() * final_spot).matrix().transpose();
}

void backward_chunk(const NetworkStack& stack, const Tape& tape, const HedgeProblem& pb,
                    const Eigen::ArrayXd& dterminal, Eigen::VectorXd& grad) {
  const Index N = stack.steps();
  const std::size_t L = stack.layers();
  const double growth = std::exp(pb.r * pb.tau);
  const Index per = stack.params_per_network();

  const Eigen::ArrayXd final_spot = tape.spot.row(N).transpose().array();
  const Eigen::ArrayXd last = tape.act[static_cast<std::size_t>(N - 1) * (L + 1) + L].row(0).transpose().array();
  Eigen::ArrayXd gbank = dterminal * growth;
  Eigen::ArrayXd gshares = dterminal * (final_spot - pb.kappa * sign_of(last) * final_spot);

  Eigen::MatrixXd delta;
  Eigen::MatrixXd back;
  for (Index k = N - 1; k >= 0; --k) {
    const std::size_t base = static_cast<std::size_t>(k) * (L + 1);
    const Eigen::ArrayXd spot = tape.spot.row(k).transpose().array();
    const Eigen::ArrayXd out = tape.act[base + L].row(0).transpose().array();
    const Eigen::ArrayXd before = tape.act[base].row(0).transpose().array();
    // b_k = b_{k-} - (xi_k - xi_{k-}) S_k - kappa |xi_k - xi_{k-}| S_k
    const Eigen::ArrayXd trade_cost = gbank * (spot + pb.kappa * sign_of(out - before) * spot);
    const Eigen::ArrayXd gout = gshares - trade_cost;
    Eigen::ArrayXd gbefore = trade_cost;

    delta = (gout * out * (1.0 - out)).matrix().transpose();
    for (std::size_t l = L; l-- > 0;) {
      const Eigen::MatrixXd& a_in = tape.act[base + l];
      Eigen::Map<Eigen::MatrixXd> gw(grad.data() + k * per + stack.weight_offset(l), stack.widths()[l + 1],
                                     stack.widths()[l]);
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + k * per + stack.bias_offset(l), stack.widths()[l + 1]);
      gw.noalias() += delta.lazyProduct(a_in.transpose());
      gb += delta.rowwise().sum();
      back.noalias() = stack.weight(k, l).transpose().lazyProduct(delta);
      if (l > 0) {
        delta = (back.array() * a_in.array() * (1.0 - a_in.array())).matrix();
      } else {
        gbefore += back.row(0).transpose().array();
      }
    }
    gshares = gbefore;
    if (k > 0) gbank *= growth;
  }
}

template <class Fn>
void for_each_chunk(Index count, unsigned threads, Fn&& fn) {
  const Index chunks = (count + kChunk - 1) / kChunk;
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    for (Index c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (Index c = w; c < chunks; c += workers) fn(c);
    });
  }
  for (auto& t : pool) t.join();
}

void check_paths(const NetworkStack& stack, const PathSet& paths, const HedgeProblem& pb) {
  if (paths.assets() < 1 || paths.steps != stack.steps() || std::abs(paths.tau - pb.tau) > 1e-14 * pb.tau) {
    throw DomainError("hedger: path grid does not match the network stack");
  }
}

}  // namespace

Eigen::VectorXd network_terminal_wealth(const NetworkStack& stack, const PathSet& paths,
                                        std::span<const Index> batch, const HedgeProblem& problem, unsigned threads) {
  check_paths(stack, paths, problem);
  const Index count = static_cast<Index>(batch.size());
  Eigen::VectorXd out(count);
  for_each_chunk(count, threads, [&](Index c) {
    const Index begin = c * kChunk;
    const Index size = std::min(kChunk, count - begin);
    Tape tape;
    forward_chunk(stack, paths, batch.subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(size)),
                  problem, tape, false);
    out.segment(begin, size) = tape.terminal.transpose();
  });
  return out;
}

Eigen::VectorXd network_terminal_wealth(const NetworkStack& stack, const PathSet& paths, const HedgeProblem& problem,
                                        unsigned threads) {
  std::vector<Index> all(static_cast<std::size_t>(paths.paths()));
  std::iota(all.begin(), all.end(), Index{0});
  return network_terminal_wealth(stack, paths, all, problem, threads);
}

LossGradient loss_and_gradient(const NetworkStack& stack, const PathSet& paths, std::span<const Index> batch,
                               const HedgeProblem& problem, unsigned threads) {
  if (batch.empty()) throw DomainError("loss_and_gradient: empty batch");
  check_paths(stack, paths, problem);
  const Index count = static_cast<Index>(batch.size());
  const Index chunks = (count + kChunk - 1) / kChunk;
  std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(chunks));
  std::vector<double> losses(static_cast<std::size_t>(count));

  for_each_chunk(count, threads, [&](Index c) {
    const Index begin = c * kChunk;
    const Index size = std::min(kChunk, count - begin);
    thread_local Tape tape;
    forward_chunk(stack, paths, batch.subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(size)),
                  problem, tape, true);
    Eigen::ArrayXd dterminal(size);
    for (Index b = 0; b < size; ++b) {
      const double v = tape.terminal(b);
      losses[static_cast<std::size_t>(begin + b)] = shortfall_loss(v, problem.goal, problem.p, problem.lambda);
      dterminal(b) = shortfall_loss_derivative(v, problem.goal, problem.p, problem.lambda) / static_cast<double>(count);
    }
    Eigen::VectorXd& g = grads[static_cast<std::size_t>(c)];
    g = Eigen::VectorXd::Zero(stack.parameters().size());
    backward_chunk(stack, tape, problem, dterminal, g);
  });

  LossGradient out;
  out.loss = stable_sum(losses) / static_cast<double>(count);
  out.gradient = Eigen::VectorXd::Zero(stack.parameters().size());
  for (const auto& g : grads) out.gradient += g;
  return out;
}

// --- optimizer ------------------------------------------------------------

Adam::Adam(Index size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& gradient) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * gradient;
  v_ = beta2_ * v_ + (1.0 - beta2_) * gradient.cwiseProduct(gradient);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

// --- training -------------------------------------------------------------

HedgeProblem make_problem(const Market& market, const GoalSpec& goal, const HedgingGrid& grid, const TrainConfig& cfg) {
  if (std::abs(static_cast<double>(grid.steps) * grid.tau - goal.maturity) > 1e-9 * goal.maturity) {
    throw DomainError("make_problem: N * tau must equal the goal maturity");
  }
  return {goal.goal, cfg.p, cfg.lambda, cfg.kappa, market.r, grid.tau, goal.endowment, 0.0};
}

PathSet hedging_paths(const Market& market, const HedgingGrid& grid, Index count, std::uint64_t seed,
                      std::string_view stream) {
  SimulationSpec spec;
  spec.initial = Eigen::VectorXd::Constant(market.n(), grid.spot0);
  spec.steps = grid.steps;
  spec.tau = grid.tau;
  spec.paths = count;
  spec.seed = derive_seed(seed, stream);
  spec.measure = Measure::objective;
  return simulate_paths(market, spec);
}

TrainResult train(const PathSet& training, const PathSet& validation, const HedgeProblem& problem,
                  const TrainConfig& config) {
  if (config.batch_size < 1 || config.epochs < 1 || !(config.learning_rate > 0.0) || !(problem.lambda >= 0.0) ||
      !(problem.p > 0.0)) {
    throw DomainError("train: invalid training configuration");
  }
  NetworkStack stack(training.steps, config.widths);
  stack.initialize_glorot(derive_seed(config.seed, "initialization"));
  Adam adam(stack.parameters().size(), config.learning_rate, config.beta1, config.beta2, config.epsilon);

  const Index J = training.paths();
  std::vector<Index> order(static_cast<std::size_t>(J));
  std::iota(order.begin(), order.end(), Index{0});
  UniformStream shuffle(derive_seed(config.seed, "shuffle"), 0);

  LossReport report;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params = stack.parameters();
  int since_best = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    double norm_sum = 0.0;
    int batches = 0;
    for (Index begin = 0; begin < J; begin += config.batch_size) {
      const Index size = std::min(config.batch_size, J - begin);
      const std::span<const Index> batch(order.data() + begin, static_cast<std::size_t>(size));
      LossGradient lg = loss_and_gradient(stack, training, batch, problem, config.threads);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
        report.epochs_run = epoch;
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << ", batch " << batches;
        throw TrainingDivergence(msg.str(), report);
      }
      adam.step(stack.parameters(), lg.gradient);
      loss_sum += lg.loss;
      norm_sum += lg.gradient.norm();
      ++batches;
    }
    const Eigen::VectorXd v = network_terminal_wealth(stack, validation, problem, config.threads);
    const double val = shortfall_loss(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())),
                                      problem.goal, problem.p, problem.lambda);
    report.train_loss.push_back(loss_sum / batches);
    report.gradient_norm.push_back(norm_sum / batches);
    report.validation_loss.push_back(val);
    report.epochs_run = epoch + 1;
    if (!std::isfinite(val)) {
      throw TrainingDivergence("train: non-finite validation loss", report);
    }
    if (val < best) {
      best = val;
      best_params = stack.parameters();
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  stack.parameters() = best_params;
  const Eigen::VectorXd t = network_terminal_wealth(stack, training, problem, config.threads);
  report.final_train_loss = shortfall_loss(std::span<const double>(t.data(), static_cast<std::size_t>(t.size())),
                                           problem.goal, problem.p, problem.lambda);
  return {std::move(stack), std::move(report)};
}

TrainResult train(const Market& market, const GoalSpec& goal, const HedgingGrid& grid, const TrainConfig& config) {
  const HedgeProblem problem = make_problem(market, goal, grid, config);
  const PathSet training = hedging_paths(market, grid, config.train_paths, config.seed, "training");
  const PathSet validation = hedging_paths(market, grid, config.validation_paths, config.seed, "validation");
  return train(training, validation, problem, config);
}

// --- static strategies and evaluation -------------------------------------

namespace {

BacktestConfig backtest_config(const PathSet& paths, const HedgeProblem& problem) {
  BacktestConfig cfg;
  cfg.steps = paths.steps;
  cfg.tau = problem.tau;
  cfg.kappa = problem.kappa;
  cfg.initial_bank = problem.initial_bank;
  cfg.initial_shares = problem.initial_shares;
  return cfg;
}

std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = stable_sum(v) / n;
  std::vector<double> sq(v.size());
  std::transform(v.begin(), v.end(), sq.begin(), [m](double x) { return (x - m) * (x - m); });
  const double se = v.size() > 1 ? std::sqrt(stable_sum(sq) / (n - 1.0) / n) : 0.0;
  return {m, se};
}

}  // namespace

std::vector<StaticLossPoint> static_loss_curve(const PathSet& paths, const HedgeProblem& problem,
                                               std::span<const double> grid) {
  const BacktestConfig cfg = backtest_config(paths, problem);
  std::vector<StaticLossPoint> curve;
  curve.reserve(grid.size());
  for (double xi : grid) {
    if (!(xi >= 0.0 && xi <= 1.0)) throw DomainError("static_loss_curve: holdings must lie in [0, 1]");
    const BacktestResult bt = run_backtest(paths, ConstantStrategy(xi), cfg, problem.r);
    std::vector<double> pen(static_cast<std::size_t>(bt.terminal.size()));
    std::vector<double> unpen(pen.size());
    for (Index j = 0; j < bt.terminal.size(); ++j) {
      pen[static_cast<std::size_t>(j)] = shortfall_loss(bt.terminal(j), problem.goal, problem.p, problem.lambda);
      unpen[static_cast<std::size_t>(j)] = shortfall_loss(bt.terminal(j), problem.goal, problem.p, 0.0);
    }
    const auto [pm, ps] = mean_and_se(pen);
    const auto [um, us] = mean_and_se(unpen);
    curve.push_back({xi, pm, um, ps, us});
  }
  return curve;
}

Evaluation evaluate(const NetworkStack& stack, const PathSet& paths, const HedgeProblem& problem) {
  check_paths(stack, paths, problem);
  Evaluation out;
  out.backtest = run_backtest(paths, NetworkStrategy(stack), backtest_config(paths, problem), problem.r);
  out.stats = statistics(out.backtest.terminal, problem.goal);
  return out;
}

}  // namespace gbi
