#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gbi/errors.hpp"
#include "gbi/market.hpp"

using namespace gbi;

namespace {

// mean and standard error of a sample
std::pair<double, double> mean_se(const Eigen::VectorXd& x) {
  const double m = x.mean();
  const double var = (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
  return {m, std::sqrt(var / static_cast<double>(x.size()))};
}

SimulationSpec one_asset_spec(Eigen::Index paths, Eigen::Index steps, double tau, Measure measure) {
  SimulationSpec spec;
  spec.initial = Eigen::VectorXd::Constant(1, 100.0);
  spec.steps = steps;
  spec.tau = tau;
  spec.paths = paths;
  spec.seed = 7;
  spec.measure = measure;
  return spec;
}

}  // namespace

TEST_CASE("discount factor") {
  CHECK(discount_factor(10.0, 10.0, 0.05) == 1.0);
  CHECK(discount_factor(0.0, 10.0, 0.01) == doctest::Approx(0.9048374180359595).epsilon(1e-15));
  CHECK(discount_factor(5.0, 10.0, 0.0) == 1.0);
  CHECK_THROWS_AS(discount_factor(11.0, 10.0, 0.01), DomainError);
  CHECK_THROWS_AS(discount_factor(-1.0, 10.0, 0.01), DomainError);
  CHECK_THROWS_AS(discount_factor(0.0, 10.0, -0.01), DomainError);
}

TEST_CASE("derive_market one asset") {
  const Market m = derive_market(0.08, 0.30, 0.01);
  CHECK(m.vartheta(0) == doctest::Approx(0.07 / 0.30).epsilon(1e-15));
  CHECK(m.sigma_star == doctest::Approx(0.07 / 0.30).epsilon(1e-15));
  CHECK(m.pi_star(0) == doctest::Approx(0.07 / 0.09).epsilon(1e-14));
  CHECK_THROWS_AS(derive_market(0.01, 0.30, 0.01), AssumptionViolation);
  CHECK_THROWS_AS(derive_market(0.00, 0.30, 0.01), AssumptionViolation);
}

TEST_CASE("derive_market diagonal and full volatility") {
  Eigen::VectorXd mu(2);
  mu << 0.08, 0.06;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(2, 2);
  sigma(0, 0) = 0.3;
  sigma(1, 1) = 0.2;
  const Market m = derive_market<double>(mu, sigma, 0.01);
  CHECK(m.vartheta(0) == doctest::Approx(0.07 / 0.3));
  CHECK(m.vartheta(1) == doctest::Approx(0.05 / 0.2));
  const double ss = std::pow(0.07 / 0.3, 2) + std::pow(0.05 / 0.2, 2);
  CHECK(std::abs(m.sigma_star * m.sigma_star - ss) <= 1e-12 * ss);

  sigma(1, 0) = 0.05;
  const Market f = derive_market<double>(mu, sigma, 0.01);
  CHECK(std::abs(f.sigma_star * f.sigma_star - f.vartheta.squaredNorm()) <= 1e-12 * f.vartheta.squaredNorm());
  // sigma vartheta = mu - r and sigma^T pi* = vartheta
  CHECK((sigma * f.vartheta - (mu.array() - 0.01).matrix()).norm() < 1e-14);
  CHECK((sigma.transpose() * f.pi_star - f.vartheta).norm() < 1e-13);
}

TEST_CASE("derive_market rejects singular volatility") {
  Eigen::VectorXd mu(2);
  mu << 0.08, 0.06;
  Eigen::MatrixXd sigma(2, 2);
  sigma << 0.3, 0.3, 0.3, 0.3;
  CHECK_THROWS_AS(derive_market<double>(mu, sigma, 0.01), RankError);
  sigma << 0.3, 0.0, 0.0, 1e-14;
  CHECK_THROWS_AS(derive_market<double>(mu, sigma, 0.01), RankError);
}

TEST_CASE("goal classification") {
  CHECK(classify_goal({100.0, 10.0, 70.0}, 0.01) == GoalRegime::nontrivial);
  CHECK(classify_goal({100.0, 10.0, 100.0 * std::exp(-0.1)}, 0.01) == GoalRegime::super_replicating);
  CHECK_THROWS_AS(classify_goal({100.0, 10.0, 0.0}, 0.01), DomainError);
  CHECK_THROWS_AS(classify_goal({100.0, 10.0, -5.0}, 0.01), DomainError);
}

TEST_CASE("path set shape, first column and determinism") {
  const Market m = derive_market(0.08, 0.30, 0.01);
  const auto spec = one_asset_spec(50, 20, 0.5, Measure::objective);
  const PathSet a = simulate_paths(m, spec);
  const PathSet b = simulate_paths(m, spec);
  REQUIRE(a.paths() == 50);
  REQUIRE(a.prices[0].cols() == 21);
  CHECK((a.prices[0].col(0).array() == 100.0).all());
  CHECK((a.prices[0].array() > 0.0).all());
  CHECK(a.prices[0] == b.prices[0]);
  CHECK(a.growth.size() == 0);

  auto other = spec;
  other.seed = 8;
  CHECK(simulate_paths(m, other).prices[0] != a.prices[0]);
  // a path does not depend on how many paths are drawn
  auto fewer = spec;
  fewer.paths = 10;
  CHECK(simulate_paths(m, fewer).prices[0].row(9) == a.prices[0].row(9));
}

TEST_CASE("vanishing volatility is deterministic growth") {
  const Market m = derive_market(0.08, 1e-12, 0.01);
  const PathSet p = simulate_paths(m, one_asset_spec(20, 52, 1.0 / 52.0, Measure::risk_neutral));
  const double expected = 100.0 * std::exp(0.01);
  CHECK(((p.prices[0].col(52).array() / expected - 1.0).abs() < 1e-6).all());
}

TEST_CASE("discounted spot is a risk-neutral martingale") {
  const Market m = derive_market(0.08, 0.30, 0.01);
  const PathSet p = simulate_paths(m, one_asset_spec(100000, 1, 10.0, Measure::risk_neutral));
  const Eigen::VectorXd disc = p.prices[0].col(1) * std::exp(-0.1);
  const auto [mean, se] = mean_se(disc);
  CHECK(std::abs(mean - 100.0) < 3.0 * se);
  // the same holds on a multi-step grid
  const PathSet q = simulate_paths(m, one_asset_spec(20000, 10, 1.0, Measure::risk_neutral));
  const auto [mean_q, se_q] = mean_se(Eigen::VectorXd(q.prices[0].col(10) * std::exp(-0.1)));
  CHECK(std::abs(mean_q - 100.0) < 3.0 * se_q);
}

TEST_CASE("objective drift") {
  const Market m = derive_market(0.08, 0.30, 0.01);
  const PathSet p = simulate_paths(m, one_asset_spec(100000, 1, 10.0, Measure::objective));
  const auto [mean, se] = mean_se(Eigen::VectorXd(p.prices[0].col(1)));
  CHECK(std::abs(mean - 100.0 * std::exp(0.8)) < 3.0 * se);
}

TEST_CASE("density process") {
  const Market m = derive_market(0.08, 0.30, 0.01);
  const PathSet p = simulate_paths(m, one_asset_spec(100000, 1, 10.0, Measure::objective));
  CHECK(density_process(m, p, 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  Eigen::VectorXd z(p.paths());
  for (Eigen::Index j = 0; j < p.paths(); ++j) z(j) = density_process(m, p, j, 1);
  const auto [mean, se] = mean_se(z);
  CHECK(std::abs(mean - 1.0) < 3.0 * se);

  // Z re-weights P to P*: E[Z_T S_T] e^{-rT} = S_0
  const Eigen::VectorXd weighted = z.array() * p.prices[0].col(1).array() * std::exp(-0.1);
  const auto [mw, sw] = mean_se(weighted);
  CHECK(std::abs(mw - 100.0) < 3.0 * sw);

  // a path growing at r - sigma^2/2 has Z_t = exp(sigma*^2 t / 2)
  PathSet flat = p;
  flat.prices[0].resize(1, 2);
  flat.prices[0](0, 0) = 100.0;
  flat.prices[0](0, 1) = 100.0 * std::exp((0.01 - 0.045) * 10.0);
  const double ss = m.sigma_star * m.sigma_star;
  CHECK(density_process(m, flat, 0, 1) == doctest::Approx(std::exp(0.5 * ss * 10.0)).epsilon(1e-13));
  CHECK_THROWS_AS(density_process(m, flat, 1, 0), DomainError);
}

TEST_CASE("growth portfolio follows its lognormal law on every path") {
  Eigen::VectorXd mu(2);
  mu << 0.08, 0.06;
  Eigen::MatrixXd sigma(2, 2);
  sigma << 0.3, 0.0, 0.1, 0.2;
  const Market m = derive_market<double>(mu, sigma, 0.01);
  SimulationSpec spec;
  spec.initial = Eigen::VectorXd::Constant(2, 100.0);
  spec.steps = 12;
  spec.tau = 0.25;
  spec.paths = 200;
  spec.seed = 3;
  const PathSet p = simulate_paths(m, spec);
  REQUIRE(p.growth.rows() == 200);
  const double T = 3.0;
  const Eigen::MatrixXd inv = sigma.inverse();
  const Eigen::VectorXd drift = (mu - 0.5 * m.diffusion.diagonal()) * T;
  for (Eigen::Index j = 0; j < p.paths(); ++j) {
    Eigen::VectorXd log_ret(2);
    log_ret << std::log(p.prices[0](j, 12) / 100.0), std::log(p.prices[1](j, 12) / 100.0);
    const Eigen::VectorXd w = inv * (log_ret - drift);  // W_T
    const Eigen::VectorXd w_star = w + m.vartheta * T;
    const double expected = std::exp((0.01 - 0.5 * m.sigma_star * m.sigma_star) * T + m.vartheta.dot(w_star));
    CHECK(p.growth(j, 12) == doctest::Approx(expected).epsilon(1e-11));
  }
  // Pi is a P*-numeraire-adjusted martingale: E[Z_T] = 1 via the growth relation
  spec.paths = 50000;
  spec.steps = 1;
  spec.tau = 3.0;
  const PathSet big = simulate_paths(m, spec);
  Eigen::VectorXd z(big.paths());
  for (Eigen::Index j = 0; j < big.paths(); ++j) z(j) = density_process(m, big, j, 1);
  const auto [mean, se] = mean_se(z);
  CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("simulation preconditions") {
  const Market m = derive_market(0.08, 0.30, 0.01);
  auto spec = one_asset_spec(10, 5, 0.1, Measure::objective);
  spec.steps = 0;
  CHECK_THROWS_AS(simulate_paths(m, spec), DomainError);
  spec = one_asset_spec(0, 5, 0.1, Measure::objective);
  CHECK_THROWS_AS(simulate_paths(m, spec), DomainError);
  spec = one_asset_spec(10, 5, 0.0, Measure::objective);
  CHECK_THROWS_AS(simulate_paths(m, spec), DomainError);
  spec = one_asset_spec(10, 5, 0.1, Measure::objective);
  spec.initial(0) = -1.0;
  CHECK_THROWS_AS(simulate_paths(m, spec), DomainError);
}

TEST_CASE("paths csv") {
  const Market m = derive_market(0.08, 0.30, 0.01);
  const PathSet p = simulate_paths(m, one_asset_spec(2, 3, 0.5, Measure::objective));
  std::ostringstream os;
  write_paths_csv(os, p);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "path,step,time,asset_index,price");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 2 * 4);
}
