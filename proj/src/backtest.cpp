#include "gbi/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace gbi {

AccountState rebalance(const AccountState& pre, double target, double kappa) {
  if (!std::isfinite(target)) throw StrategyFault("rebalance: non-finite target holding");
  if (pre.phase != Phase::pre_rebalance) throw DomainError("rebalance: account is not in the pre-rebalance phase");
  const double trade = target - pre.shares;
  AccountState post = pre;
  post.bank = pre.bank - trade * pre.spot - kappa * std::abs(trade) * pre.spot;
  post.shares = target;
  post.phase = Phase::post_rebalance;
  return post;
}

AccountState accrue(const AccountState& post, double r, double tau, double next_spot) {
  if (post.phase != Phase::post_rebalance) throw DomainError("accrue: account is not in the post-rebalance phase");
  AccountState pre = post;
  pre.bank = post.bank * std::exp(r * tau);
  pre.spot = next_spot;
  pre.phase = Phase::pre_rebalance;
  return pre;
}

double unwind(const AccountState& pre, double kappa) {
  return pre.bank + pre.shares * pre.spot - kappa * std::abs(pre.shares) * pre.spot;
}

BacktestResult run_backtest(const PathSet& paths, const Strategy& strategy, const BacktestConfig& config, double r) {
  if (paths.assets() < 1 || paths.steps != config.steps || std::abs(paths.tau - config.tau) > 1e-14 * config.tau) {
    throw DomainError("run_backtest: path grid and backtest configuration disagree");
  }
  if (!(config.kappa >= 0.0 && config.kappa < 1.0)) {
    throw DomainError("run_backtest: kappa must lie in [0, 1)");
  }
  const RowMatrix& prices = paths.prices.front();
  const Eigen::Index J = paths.paths();
  const Eigen::Index N = config.steps;

  BacktestResult result;
  std::vector<double> terminal;
  std::vector<double> terminal_spot;
  terminal.reserve(static_cast<std::size_t>(J));
  terminal_spot.reserve(static_cast<std::size_t>(J));

  for (Eigen::Index j = 0; j < J; ++j) {
    AccountState state{config.initial_bank, config.initial_shares, prices(j, 0), Phase::pre_rebalance};
    std::vector<TradeRecord> log;
    double sf_error = 0.0;
    Eigen::Index held = 0;
    bool failed = false;
    try {
      for (Eigen::Index k = 0; k < N; ++k) {
        if (k > 0) state = accrue(state, r, config.tau, prices(j, k));
        const DecisionInput input{k, paths.time(k), state.spot, prices(j, 0), state.shares, state.bank};
        double target = strategy.decide(input);
        if (!std::isfinite(target)) {
          target = state.shares;
          ++held;
        }
        const AccountState post = rebalance(state, target, config.kappa);
        const double cost = config.kappa * std::abs(post.shares - state.shares) * state.spot;
        const double before = state.wealth();
        const double residual = std::abs(post.wealth() + cost - before);
        const double scale = std::max({std::abs(before), std::abs(state.bank), std::abs(state.shares * state.spot), 1.0});
        sf_error = std::max(sf_error, residual / scale);
        if (j < config.trade_log_paths) {
          log.push_back({j, k, input.time, state.spot, state.shares, post.shares, post.bank, cost});
        }
        state = post;
      }
    } catch (const std::exception&) {
      failed = true;
    }
    if (failed) {
      ++result.excluded;
      continue;
    }
    state = accrue(state, r, config.tau, prices(j, N));
    terminal.push_back(unwind(state, config.kappa));
    terminal_spot.push_back(state.spot);
    result.path_index.push_back(j);
    result.held_steps += held;
    result.max_self_financing_error = std::max(result.max_self_financing_error, sf_error);
    result.trades.insert(result.trades.end(), log.begin(), log.end());
  }

  result.terminal = Eigen::Map<const Eigen::VectorXd>(terminal.data(), static_cast<Eigen::Index>(terminal.size()));
  result.terminal_spot =
      Eigen::Map<const Eigen::VectorXd>(terminal_spot.data(), static_cast<Eigen::Index>(terminal_spot.size()));
  return result;
}

double stable_sum(std::span<const double> values) {
  double sum = 0.0;
  double compensation = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      compensation += (sum - t) + v;
    } else {
      compensation += (v - t) + sum;
    }
    sum = t;
  }
  return sum + compensation;
}

double lower_quantile(std::span<const double> samples, double level) {
  if (samples.empty()) throw DomainError("lower_quantile: empty sample");
  if (!(level > 0.0 && level <= 1.0)) throw DomainError("lower_quantile: level must lie in (0, 1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  const auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(sorted.size())));
  const std::size_t index = std::max<std::size_t>(rank, 1) - 1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(index), sorted.end());
  return sorted[index];
}

WealthStats statistics(std::span<const double> samples, double goal) {
  if (samples.empty()) throw DomainError("statistics: empty sample");
  if (!(goal > 0.0)) throw DomainError("statistics: goal must be positive");
  const auto count = static_cast<double>(samples.size());
  std::vector<double> hit(samples.size());
  std::vector<double> ratio(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool reached = samples[i] >= goal;
    hit[i] = reached ? 1.0 : 0.0;
    ratio[i] = reached ? 1.0 : samples[i] / goal;
  }
  auto mean_of = [&](std::span<const double> v) { return stable_sum(v) / count; };
  auto se_of = [&](std::span<const double> v, double m) {
    if (v.size() < 2) return 0.0;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
    return std::sqrt(stable_sum(sq) / (count - 1.0) / count);
  };

  WealthStats s;
  s.count = static_cast<Eigen::Index>(samples.size());
  s.mean = mean_of(samples);
  s.q05 = lower_quantile(samples, 0.05);
  s.success_rate = mean_of(hit);
  s.success_ratio = mean_of(ratio);
  s.se_mean = se_of(samples, s.mean);
  s.se_rate = se_of(hit, s.success_rate);
  s.se_ratio = se_of(ratio, s.success_ratio);
  return s;
}

Eigen::VectorXd theoretical_terminal_samples(const Market& market, const AnyPolicy& policy, double spot0,
                                             Eigen::Index samples, std::uint64_t seed) {
  if (market.n() != 1) throw DomainError("theoretical_terminal_samples: single-asset markets only");
  SimulationSpec spec;
  spec.initial = Eigen::VectorXd::Constant(1, spot0);
  spec.steps = 1;
  spec.tau = goal_of(policy).maturity;
  spec.paths = samples;
  spec.seed = seed;
  spec.measure = Measure::objective;
  const PathSet paths = simulate_paths(market, spec);
  Eigen::VectorXd out(samples);
  for (Eigen::Index j = 0; j < samples; ++j) out(j) = policy_payoff(paths.prices[0](j, 1), policy);
  return out;
}

void write_terminal_csv(std::ostream& out, const BacktestResult& result) {
  out << "path,V_T\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < result.terminal.size(); ++i) {
    out << result.path_index[static_cast<std::size_t>(i)] << ',' << result.terminal(i) << '\n';
  }
}

void write_trade_log_csv(std::ostream& out, const std::vector<TradeRecord>& trades) {
  out << "path,step,time,spot,xi_pre,xi_post,bank,cost\n" << std::setprecision(17);
  for (const TradeRecord& t : trades) {
    out << t.path << ',' << t.step << ',' << t.time << ',' << t.spot << ',' << t.shares_before << ','
        << t.shares_after << ',' << t.bank << ',' << t.cost << '\n';
  }
}

}  // namespace gbi
