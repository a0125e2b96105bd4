#include "gbi/market.hpp"

#include <iomanip>
#include <ostream>

#include "gbi/random.hpp"

namespace gbi {

GoalRegime classify_goal(const GoalSpec& goal, double r) {
  if (!(goal.goal > 0.0) || !(goal.maturity > 0.0)) {
    throw DomainError("goal: H and T must be positive");
  }
  if (!(goal.endowment > 0.0)) {
    throw DomainError("goal: endowment z must be positive");
  }
  return goal.endowment >= goal.discounted_goal(r) ? GoalRegime::super_replicating : GoalRegime::nontrivial;
}

PathSet simulate_paths(const Market& market, const SimulationSpec& spec) {
  const Eigen::Index n = market.n();
  if (spec.steps < 1 || spec.paths < 1 || !(spec.tau > 0.0)) {
    throw DomainError("simulate_paths: requires N >= 1, J >= 1 and tau > 0");
  }
  if (spec.initial.size() != n || (spec.initial.array() <= 0.0).any()) {
    throw DomainError("simulate_paths: initial prices must be positive, one per asset");
  }

  PathSet out;
  out.measure = spec.measure;
  out.steps = spec.steps;
  out.tau = spec.tau;
  out.seed = spec.seed;
  out.initial = spec.initial;
  out.growth_initial = spec.growth_initial;
  out.prices.assign(static_cast<std::size_t>(n), RowMatrix(spec.paths, spec.steps + 1));
  if (n > 1) {
    out.growth.resize(spec.paths, spec.steps + 1);
  }

  const double sqrt_tau = std::sqrt(spec.tau);
  const Eigen::VectorXd drift = spec.measure == Measure::objective ? market.mu : Eigen::VectorXd::Constant(n, market.r);
  const Eigen::VectorXd log_drift = (drift - 0.5 * market.diffusion.diagonal()) * spec.tau;
  // Under P the shocks are increments of W; W* = W + vartheta t picks up the drift.
  const Eigen::VectorXd girsanov =
      spec.measure == Measure::objective ? Eigen::VectorXd(market.vartheta * spec.tau) : Eigen::VectorXd::Zero(n);
  const double growth_drift = (market.r - 0.5 * market.sigma_star * market.sigma_star) * spec.tau;

  Eigen::VectorXd zeta(n);
  Eigen::VectorXd log_price(n);
  for (Eigen::Index j = 0; j < spec.paths; ++j) {
    NormalStream normals(spec.seed, static_cast<std::uint64_t>(j));
    log_price = spec.initial.array().log();
    double log_growth = std::log(spec.growth_initial);
    for (Eigen::Index i = 0; i < n; ++i) {
      out.prices[static_cast<std::size_t>(i)](j, 0) = spec.initial(i);
    }
    if (n > 1) {
      out.growth(j, 0) = spec.growth_initial;
    }
    for (Eigen::Index k = 1; k <= spec.steps; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) {
        zeta(i) = normals();
      }
      const Eigen::VectorXd shock = sqrt_tau * zeta;
      log_price += log_drift + market.sigma * shock;
      for (Eigen::Index i = 0; i < n; ++i) {
        out.prices[static_cast<std::size_t>(i)](j, k) = std::exp(log_price(i));
      }
      if (n > 1) {
        log_growth += growth_drift + market.vartheta.dot(shock + girsanov);
        out.growth(j, k) = std::exp(log_growth);
      }
    }
  }
  return out;
}

double density_process(const Market& market, const PathSet& paths, Eigen::Index path, Eigen::Index step) {
  if (path < 0 || path >= paths.paths() || step < 0 || step > paths.steps) {
    throw DomainError("density_process: (path, step) outside the path grid");
  }
  const double t = paths.time(step);
  const double ss = market.sigma_star * market.sigma_star;
  if (market.n() == 1) {
    const double sigma = market.sigma(0, 0);
    const double theta = market.vartheta(0);
    const double x = std::log(paths.prices[0](path, step) / paths.initial(0));
    return std::exp(-(theta / sigma) * (x - (market.r - 0.5 * sigma * sigma) * t) + 0.5 * ss * t);
  }
  const double g = std::log(paths.growth(path, step) / paths.growth_initial);
  return std::exp(-(g - (market.r - 0.5 * ss) * t) + 0.5 * ss * t);
}

void write_paths_csv(std::ostream& out, const PathSet& paths) {
  const bool with_growth = paths.growth.size() > 0;
  out << "path,step,time,asset_index,price";
  if (with_growth) out << ",growth_portfolio";
  out << '\n';
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < paths.paths(); ++j) {
    for (Eigen::Index k = 0; k <= paths.steps; ++k) {
      for (Eigen::Index i = 0; i < paths.assets(); ++i) {
        out << j << ',' << k << ',' << paths.time(k) << ',' << i << ',' << paths.prices[static_cast<std::size_t>(i)](j, k);
        if (with_growth) out << ',' << paths.growth(j, k);
        out << '\n';
      }
    }
  }
}

}  // namespace gbi
