#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "gbi/errors.hpp"
#include "gbi/hedger.hpp"
#include "gbi/random.hpp"

using namespace gbi;

namespace {

const Market kMarket = derive_market(0.08, 0.30, 0.01);

PathSet small_paths(Eigen::Index count, Eigen::Index steps, double tau, std::uint64_t seed = 21) {
  return hedging_paths(kMarket, {100.0, steps, tau}, count, seed, "test");
}

void randomize(NetworkStack& stack, std::uint64_t seed, double scale) {
  UniformStream u(seed, 0);
  for (Eigen::Index i = 0; i < stack.parameters().size(); ++i) {
    stack.parameters()(i) = scale * (2.0 * u.next_uniform() - 1.0);
  }
}

std::vector<Eigen::Index> all_paths(const PathSet& p) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(p.paths()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  return idx;
}

// central differences of the batch loss in every parameter
void check_gradient(NetworkStack stack, const PathSet& paths, const HedgeProblem& problem) {
  const auto batch = all_paths(paths);
  const LossGradient lg = loss_and_gradient(stack, paths, batch, problem);
  auto loss_at = [&](const NetworkStack& s) {
    const Eigen::VectorXd v = network_terminal_wealth(s, paths, batch, problem);
    return shortfall_loss(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), problem.goal,
                          problem.p, problem.lambda);
  };
  CHECK(lg.loss == doctest::Approx(loss_at(stack)).epsilon(1e-14));
  const double h = 1e-6;
  int checked = 0;
  for (Eigen::Index i = 0; i < stack.parameters().size(); ++i) {
    const double keep = stack.parameters()(i);
    stack.parameters()(i) = keep + h;
    const double up = loss_at(stack);
    stack.parameters()(i) = keep - h;
    const double down = loss_at(stack);
    stack.parameters()(i) = keep;
    const double fd = (up - down) / (2.0 * h);
    INFO("parameter " << i << " fd=" << fd << " analytic=" << lg.gradient(i));
    CHECK(std::abs(fd - lg.gradient(i)) <= 1e-4 * std::abs(fd) + 1e-6);
    ++checked;
  }
  CHECK(checked == stack.parameters().size());
}

}  // namespace

TEST_CASE("network layout") {
  const NetworkStack stack(3);
  CHECK(stack.params_per_network() == 151);
  CHECK(stack.parameters().size() == 3 * 151);
  CHECK(stack.weight_offset(0) == 0);
  CHECK(stack.bias_offset(0) == 20);
  CHECK(stack.weight_offset(1) == 30);
  CHECK(stack.bias_offset(2) == 150);
  CHECK_THROWS_AS(NetworkStack(0), DomainError);
  CHECK_THROWS_AS(NetworkStack(2, {3, 4, 1}), DomainError);
  CHECK_THROWS_AS(NetworkStack(2, {2, 4, 2}), DomainError);
}

TEST_CASE("forward pass") {
  NetworkStack stack(2);
  CHECK(stack.forward(0, 0.3, 1.2) == 0.5);
  CHECK(stack.forward(1, 0.9, 0.1) == 0.5);
  stack.bias(1, 2)(0) = 800.0;
  CHECK(stack.forward(1, 0.2, 1.0) == 1.0);
  CHECK(stack.forward(0, 0.2, 1.0) == 0.5);
  CHECK_THROWS_AS(stack.forward(2, 0.2, 1.0), DomainError);

  // hand-evaluated 2 -> 1 network
  NetworkStack tiny(1, {2, 1});
  tiny.weight(0, 0)(0, 0) = 0.5;
  tiny.weight(0, 0)(0, 1) = -1.5;
  tiny.bias(0, 0)(0) = 0.25;
  CHECK(tiny.forward(0, 0.4, 2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-(0.2 - 3.0 + 0.25)))).epsilon(1e-15));

  NetworkStack wild(4);
  randomize(wild, 3, 5.0);
  for (double xi : {0.0, 0.5, 1.0}) {
    for (double m : {0.1, 1.0, 8.0}) {
      const double out = wild.forward(2, xi, m);
      CHECK(out > 0.0);
      CHECK(out < 1.0);
      CHECK(out == wild.forward(2, xi, m));
    }
  }
}

TEST_CASE("glorot initialization") {
  NetworkStack a(5);
  NetworkStack b(5);
  a.initialize_glorot(42);
  b.initialize_glorot(42);
  CHECK(a.parameters() == b.parameters());
  const double limit = std::sqrt(6.0 / 12.0);
  CHECK((a.weight(3, 0).array().abs() <= limit).all());
  CHECK((a.bias(3, 1).array() == 0.0).all());
  b.initialize_glorot(43);
  CHECK(a.parameters() != b.parameters());
}

TEST_CASE("shortfall loss") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(softplus(-1000.0) == 0.0);
  CHECK(shortfall_loss(100.0, 100.0, 1.0, 0.0) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(shortfall_loss(1e6, 100.0, 1.0, 0.0) == 0.0);
  CHECK(shortfall_loss(0.0, 100.0, 1.0, 0.0) == doctest::Approx(100.0).epsilon(1e-15));
  // the penalty adds exactly lambda log 2 at V = H
  const double lambda = 0.1;
  CHECK(shortfall_loss(100.0, 100.0, 1.5, lambda) - shortfall_loss(100.0, 100.0, 1.5, 0.0) <=
        lambda * std::log(2.0) * (1.0 + 1e-15));
  // finite for wealth excursions up to 1e6
  for (double v : {-1e6, -1e3, 0.0, 1e3, 1e6}) {
    for (double p : {1.0, 1.5, 5.0}) {
      CHECK(std::isfinite(shortfall_loss(v, 100.0, p, lambda)));
      CHECK(std::isfinite(shortfall_loss_derivative(v, 100.0, p, lambda)));
    }
  }
  // derivative against a central difference
  for (double v : {50.0, 99.0, 100.5, 130.0}) {
    const double h = 1e-5;
    const double fd = (shortfall_loss(v + h, 100.0, 1.5, lambda) - shortfall_loss(v - h, 100.0, 1.5, lambda)) / (2 * h);
    CHECK(shortfall_loss_derivative(v, 100.0, 1.5, lambda) == doctest::Approx(fd).epsilon(1e-7));
  }
  const std::vector<double> sample{90.0, 110.0};
  CHECK(shortfall_loss(sample, 100.0, 1.0, 0.0) ==
        doctest::Approx(0.5 * (softplus(10.0) + softplus(-10.0))).epsilon(1e-15));
}

TEST_CASE("gradient matches finite differences on a reduced instance") {
  const double tau = 0.25;
  const PathSet paths = small_paths(8, 4, tau);
  for (double kappa : {0.0, 0.005}) {
    for (double p : {1.0, 1.5}) {
      NetworkStack stack(4, {2, 3, 3, 1});
      randomize(stack, 17, 1.5);
      const HedgeProblem problem{100.0, p, 0.1, kappa, 0.01, tau, 70.0, 0.0};
      INFO("kappa=" << kappa << " p=" << p);
      check_gradient(stack, paths, problem);
    }
  }
}

TEST_CASE("gradient on a single path with a 2-2-2-1 stack") {
  const PathSet paths = small_paths(1, 3, 1.0 / 3.0, 4);
  NetworkStack stack(3, {2, 2, 2, 1});
  randomize(stack, 5, 2.0);
  check_gradient(stack, paths, {100.0, 1.0, 0.1, 0.0, 0.01, 1.0 / 3.0, 70.0, 0.2});
}

TEST_CASE("gradient vanishes on a saturated plateau") {
  const PathSet paths = small_paths(16, 4, 0.25);
  NetworkStack stack(4, {2, 3, 3, 1});
  randomize(stack, 9, 1.0);
  const HedgeProblem rich{100.0, 1.0, 0.0, 0.0, 0.01, 0.25, 1e4, 0.0};
  const auto lg = loss_and_gradient(stack, paths, all_paths(paths), rich);
  CHECK(lg.gradient.norm() < 1e-8);
}

TEST_CASE("gradient is invariant to duplicated paths and thread count") {
  const PathSet paths = small_paths(150, 6, 1.0 / 6.0);
  NetworkStack stack(6, {2, 4, 4, 1});
  randomize(stack, 13, 1.0);
  const HedgeProblem problem{100.0, 1.5, 0.1, 0.005, 0.01, 1.0 / 6.0, 70.0, 0.0};
  const auto batch = all_paths(paths);
  std::vector<Eigen::Index> twice(batch);
  twice.insert(twice.end(), batch.begin(), batch.end());
  const auto once = loss_and_gradient(stack, paths, batch, problem);
  const auto doubled = loss_and_gradient(stack, paths, twice, problem);
  CHECK(doubled.loss == doctest::Approx(once.loss).epsilon(1e-13));
  CHECK((doubled.gradient - once.gradient).norm() <= 1e-12 * once.gradient.norm());

  const auto threaded = loss_and_gradient(stack, paths, batch, problem, 3);
  CHECK(threaded.loss == once.loss);
  CHECK(threaded.gradient == once.gradient);
  CHECK_THROWS_AS(loss_and_gradient(stack, paths, std::vector<Eigen::Index>{}, problem), DomainError);
}

TEST_CASE("batched wealth equals the backtest of the network strategy") {
  const double tau = 10.0 / 520.0;
  const PathSet paths = small_paths(70, 520, tau);
  NetworkStack stack(520);
  stack.initialize_glorot(8);
  const HedgeProblem problem{100.0, 1.0, 0.1, 0.005, 0.01, tau, 70.0, 0.0};
  const Eigen::VectorXd fast = network_terminal_wealth(stack, paths, problem);
  const Evaluation ev = evaluate(stack, paths, problem);
  REQUIRE(ev.backtest.terminal.size() == 70);
  CHECK((fast - ev.backtest.terminal).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(ev.backtest.max_self_financing_error <= 1e-12);
}

TEST_CASE("untrained zero stack is the static half strategy") {
  const double tau = 10.0 / 52.0;
  const PathSet paths = small_paths(300, 52, tau);
  const NetworkStack zero(52);
  const HedgeProblem problem{100.0, 1.0, 0.1, 0.005, 0.01, tau, 70.0, 0.0};
  const WealthStats a = evaluate(zero, paths, problem).stats;
  BacktestConfig cfg;
  cfg.steps = 52;
  cfg.tau = tau;
  cfg.kappa = 0.005;
  const WealthStats b = statistics(run_backtest(paths, ConstantStrategy(0.5), cfg, 0.01).terminal, 100.0);
  CHECK(a.mean == b.mean);
  CHECK(a.q05 == b.q05);
  CHECK(a.success_rate == b.success_rate);
  CHECK(a.success_ratio == b.success_ratio);
}

TEST_CASE("adam first step moves every parameter by the learning rate") {
  Adam adam(3, 1e-3);
  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  Eigen::VectorXd g(3);
  g << 4.0, -0.01, 1e3;
  const Eigen::VectorXd before = x;
  adam.step(x, g);
  // m_hat / sqrt(v_hat) = sign(g) on the first step
  for (int i = 0; i < 3; ++i) {
    CHECK((before(i) - x(i)) == doctest::Approx(1e-3 * (g(i) > 0 ? 1.0 : -1.0) * std::abs(g(i)) / (std::abs(g(i)) + 1e-8)));
  }
}

TEST_CASE("static loss curve") {
  const double tau = 10.0 / 52.0;
  const PathSet paths = small_paths(400, 52, tau);
  const HedgeProblem problem{100.0, 1.0, 0.1, 0.0, 0.01, tau, 70.0, 0.0};
  const std::vector<double> grid{0.0, 0.25, 0.5, 1.0};
  const auto curve = static_loss_curve(paths, problem, grid);
  REQUIRE(curve.size() == 4);
  CHECK(curve[0].unpenalized == doctest::Approx(softplus(100.0 - 70.0 * std::exp(0.1))).epsilon(1e-14));
  CHECK(curve[0].se_unpenalized == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(curve[2].shares == 0.5);
  for (const auto& pt : curve) CHECK(pt.penalized >= pt.unpenalized);
  CHECK_THROWS_AS(static_loss_curve(paths, problem, std::vector<double>{1.5}), DomainError);
}

TEST_CASE("training is deterministic and improves on its start") {
  const double tau = 0.5;
  const PathSet training = small_paths(512, 20, tau, 1);
  const PathSet validation = small_paths(128, 20, tau, 2);
  const HedgeProblem problem{100.0, 1.0, 0.1, 0.0, 0.01, tau, 70.0, 0.0};
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-2;
  cfg.seed = 99;
  const TrainResult a = train(training, validation, problem, cfg);
  const TrainResult b = train(training, validation, problem, cfg);
  CHECK(a.stack.parameters() == b.stack.parameters());
  CHECK(a.report.train_loss == b.report.train_loss);
  REQUIRE(a.report.epochs_run == 8);
  CHECK(a.report.validation_loss.size() == 8);
  CHECK(a.report.gradient_norm.size() == 8);

  NetworkStack start(20);
  start.initialize_glorot(derive_seed(99, "initialization"));
  const Eigen::VectorXd v0 = network_terminal_wealth(start, training, problem);
  const double initial = shortfall_loss(std::span<const double>(v0.data(), 512), 100.0, 1.0, 0.1);
  CHECK(a.report.final_train_loss < initial);

  TrainConfig other = cfg;
  other.seed = 100;
  CHECK(train(training, validation, problem, other).stack.parameters() != a.stack.parameters());

  TrainConfig bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(training, validation, problem, bad), DomainError);
}

TEST_CASE("divergence is reported with the loss trace") {
  const double tau = 0.5;
  const PathSet training = small_paths(64, 20, tau, 1);
  const PathSet validation = small_paths(16, 20, tau, 2);
  // an overflowing shortfall power makes the loss infinite
  const HedgeProblem problem{100.0, 400.0, 0.1, 0.0, 0.01, tau, 70.0, 0.0};
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  try {
    train(training, validation, problem, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDivergence& e) {
    CHECK(e.report().epochs_run == 0);
  }
}

TEST_CASE("problem construction checks the grid") {
  TrainConfig cfg;
  const GoalSpec goal{100.0, 10.0, 70.0};
  const HedgeProblem pb = make_problem(kMarket, goal, {100.0, 520, 1.0 / 52.0}, cfg);
  CHECK(pb.initial_bank == 70.0);
  CHECK(pb.r == 0.01);
  CHECK_THROWS_AS(make_problem(kMarket, goal, {100.0, 500, 1.0 / 52.0}, cfg), DomainError);
}
