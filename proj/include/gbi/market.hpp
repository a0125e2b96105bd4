#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gbi/errors.hpp"

namespace gbi {

template <typename Scalar>
Scalar discount_factor(Scalar t, Scalar maturity, Scalar rate) {
  if (!(t >= Scalar(0)) || !(t <= maturity) || !(rate >= Scalar(0))) {
    throw DomainError("discount_factor: requires 0 <= t <= T and r >= 0");
  }
  return std::exp(-rate * (maturity - t));
}

/// Constant-coefficient market: n assets driven by n Brownian motions plus a bank account.
template <typename Scalar>
struct MarketParams {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector mu;
  Matrix sigma;
  Scalar r{};

  Matrix diffusion;   // sigma * sigma^T
  Vector vartheta;    // market price of risk
  Vector pi_star;     // growth-portfolio weights
  Scalar sigma_star{};

  Eigen::Index n() const { return mu.size(); }
};

using Market = MarketParams<double>;

inline constexpr double kRcondTolerance = 1e-10;

template <typename Scalar>
MarketParams<Scalar> derive_market(const typename MarketParams<Scalar>::Vector& mu,
                                   const typename MarketParams<Scalar>::Matrix& sigma, Scalar r) {
  using Matrix = typename MarketParams<Scalar>::Matrix;
  const Eigen::Index n = mu.size();
  if (n < 1 || sigma.rows() != n || sigma.cols() != n) {
    throw DomainError("derive_market: mu must have n >= 1 entries and sigma must be n x n");
  }
  if (!(r >= Scalar(0)) || !std::isfinite(r)) {
    throw DomainError("derive_market: risk-free rate must be finite and non-negative");
  }
  Eigen::FullPivLU<Matrix> lu(sigma);
  if (lu.rank() < n || !(lu.rcond() >= Scalar(kRcondTolerance))) {
    throw RankError("derive_market: volatility matrix is singular");
  }

  MarketParams<Scalar> m;
  m.mu = mu;
  m.sigma = sigma;
  m.r = r;
  m.diffusion = sigma * sigma.transpose();
  m.vartheta = lu.solve(mu - Matrix::Constant(n, 1, r));
  if ((m.vartheta.array() <= Scalar(0)).any()) {
    throw AssumptionViolation("derive_market: every entry of the market price of risk must be positive");
  }
  m.pi_star = lu.transpose().solve(m.vartheta);
  m.sigma_star = m.vartheta.norm();
  return m;
}

inline Market derive_market(double mu, double sigma, double r) {
  return derive_market<double>(Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, sigma), r);
}

/// Investment goal H at maturity T funded by initial endowment z.
struct GoalSpec {
  double goal{};
  double maturity{};
  double endowment{};

  double discounted_goal(double r, double t = 0.0) const { return goal * discount_factor(t, maturity, r); }
};

/// Reports the degenerate endowment cases: z <= 0 is rejected, z >= H_{0,T} is super-replicable.
enum class GoalRegime { nontrivial, super_replicating };
GoalRegime classify_goal(const GoalSpec& goal, double r);

enum class Measure { objective, risk_neutral };

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PathSet {
  Measure measure = Measure::objective;
  Eigen::Index steps = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  Eigen::VectorXd initial;           // S_0 per asset
  std::vector<RowMatrix> prices;     // one J x (steps + 1) block per asset
  RowMatrix growth;                  // Pi_t, only populated when n > 1
  double growth_initial = 1.0;

  Eigen::Index paths() const { return prices.empty() ? 0 : prices.front().rows(); }
  Eigen::Index assets() const { return static_cast<Eigen::Index>(prices.size()); }
  double time(Eigen::Index step) const { return static_cast<double>(step) * tau; }
  double horizon() const { return time(steps); }
};

struct SimulationSpec {
  Eigen::VectorXd initial;
  Eigen::Index steps = 1;
  double tau = 1.0;
  Eigen::Index paths = 1;
  std::uint64_t seed = 0;
  Measure measure = Measure::objective;
  double growth_initial = 1.0;
};

/// Exact lognormal stepping. Path j draws its normals from stream j of `seed`,
/// so any subset of paths can be regenerated independently.
PathSet simulate_paths(const Market& market, const SimulationSpec& spec);

/// Density process Z_t on path j at grid index `step`, recovered from the growth
/// portfolio (or from the single asset when n == 1).
double density_process(const Market& market, const PathSet& paths, Eigen::Index path, Eigen::Index step);

/// CSV `path,step,time,asset_index,price[,growth_portfolio]`, 17 significant digits.
void write_paths_csv(std::ostream& out, const PathSet& paths);

}  // namespace gbi
