#include "gbi/policies.hpp"

#include <cmath>
#include <limits>

namespace gbi {
namespace {

double remaining_time(double t, const GoalSpec& goal) {
  if (!(t >= 0.0) || !(t <= goal.maturity)) {
    throw DomainError("evaluation time must lie in [0, T]");
  }
  return goal.maturity - t;
}

void require_spot(double spot) {
  if (!(spot > 0.0) || !std::isfinite(spot)) {
    throw DomainError("spot must be positive and finite");
  }
}

double digital_strike(const Underlying& u, double r, double maturity, double unit_price) {
  return u.spot0 * std::exp((r - 0.5 * u.vol * u.vol) * maturity -
                            u.vol * std::sqrt(maturity) * normal_quantile(unit_price));
}

double strike_probability(double t, double spot, double strike, double r, double vol, const GoalSpec& goal) {
  const double remaining = remaining_time(t, goal);
  if (remaining == 0.0) return spot >= strike ? 1.0 : 0.0;
  if (strike == 0.0) return 1.0;
  if (std::isinf(strike)) return 0.0;
  return saturated_cdf(d_minus(spot, strike, r, vol, remaining));
}

double strike_density(double t, double spot, double strike, double r, double vol, const GoalSpec& goal) {
  const double remaining = remaining_time(t, goal);
  if (remaining == 0.0) throw MaturityError("hedge ratio is undefined at maturity");
  if (strike == 0.0 || std::isinf(strike)) return 0.0;
  const double d = d_minus(spot, strike, r, vol, remaining);
  if (std::abs(d) > kSaturation) return 0.0;
  return normal_pdf(d) / (spot * vol * std::sqrt(remaining));
}

}  // namespace

Underlying underlying_of(const Market& market, double spot0) {
  require_spot(spot0);
  if (market.n() == 1) return {spot0, market.sigma(0, 0), false};
  return {spot0, market.sigma_star, true};
}

double digital_d_minus(double t, double spot, double strike, const Market& market, const GoalSpec& goal) {
  require_spot(spot);
  if (!(strike > 0.0)) throw DomainError("digital_d_minus: strike must be positive");
  const double remaining = remaining_time(t, goal);
  if (remaining == 0.0) throw MaturityError("digital_d_minus: undefined at maturity");
  return d_minus(spot, strike, market.r, underlying_of(market, spot).vol, remaining);
}

double digital_price(double t, double spot, double strike, const Market& market, const GoalSpec& goal) {
  require_spot(spot);
  if (!(strike > 0.0)) throw DomainError("digital_price: strike must be positive");
  const double vol = underlying_of(market, spot).vol;
  return discount_factor(t, goal.maturity, market.r) * strike_probability(t, spot, strike, market.r, vol, goal);
}

// --- efficient ------------------------------------------------------------

EfficientHedgePolicy calibrate_efficient(const Market& market, const GoalSpec& goal, double spot0, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("calibrate_efficient: p must lie in [0, 1]");
  }
  EfficientHedgePolicy policy{goal, market, underlying_of(market, spot0), 0.0, p, false};
  if (classify_goal(goal, market.r) == GoalRegime::super_replicating) {
    policy.all_bond = true;
    return policy;
  }
  policy.strike = digital_strike(policy.underlying, market.r, goal.maturity,
                                 goal.endowment / goal.discounted_goal(market.r));
  return policy;
}

double efficient_value(double t, double spot, const EfficientHedgePolicy& policy) {
  require_spot(spot);
  const double r = policy.market.r;
  if (policy.all_bond) {
    remaining_time(t, policy.goal);
    return policy.goal.endowment * std::exp(r * t);
  }
  return policy.goal.discounted_goal(r, t) *
         strike_probability(t, spot, policy.strike, r, policy.underlying.vol, policy.goal);
}

double efficient_delta(double t, double spot, const EfficientHedgePolicy& policy) {
  require_spot(spot);
  const double r = policy.market.r;
  if (policy.all_bond) {
    if (remaining_time(t, policy.goal) == 0.0) throw MaturityError("hedge ratio is undefined at maturity");
    return 0.0;
  }
  return policy.goal.discounted_goal(r, t) *
         strike_density(t, spot, policy.strike, r, policy.underlying.vol, policy.goal);
}

FlaggedValue success_probability(double t, double wealth, const Market& market, const GoalSpec& goal) {
  if (!(wealth > 0.0)) throw DomainError("success_probability: wealth must be positive");
  const double remaining = remaining_time(t, goal);
  const double target = goal.discounted_goal(market.r, t);
  if (wealth > target) return {1.0, true};
  if (wealth == target) return {1.0, false};
  const double edge = std::sqrt(market.sigma_star * market.sigma_star * remaining);
  return {normal_cdf(normal_quantile(wealth / target) + edge), false};
}

// --- risk averse ----------------------------------------------------------

double risk_averse_initial_value(const RiskAversePolicy& shape, double log_threshold) {
  const double maturity = shape.goal.maturity;
  return shape.goal.discounted_goal(shape.market.r) *
         knockout_claim(shape.underlying.spot0, log_threshold, shape.exponent, shape.market.r, shape.underlying.vol,
                        maturity, shape.convention);
}

RiskAversePolicy calibrate_risk_averse(const Market& market, const GoalSpec& goal, double spot0, double p,
                                       CarryConvention convention) {
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw DomainError("calibrate_risk_averse: requires p > 1");
  }
  if ((market.vartheta.array() <= 0.0).any()) {
    throw AssumptionViolation("calibrate_risk_averse: requires mu > r");
  }
  if (classify_goal(goal, market.r) != GoalRegime::nontrivial) {
    throw DomainError("calibrate_risk_averse: endowment must lie in (0, H_{0,T})");
  }

  RiskAversePolicy policy;
  policy.goal = goal;
  policy.market = market;
  policy.underlying = underlying_of(market, spot0);
  policy.convention = convention;
  policy.p = p;
  policy.p_prime = 1.0 / (p - 1.0);
  if (market.n() == 1) {
    const double sigma = market.sigma(0, 0);
    policy.alpha = (market.mu(0) - market.r) / (sigma * sigma);
    policy.exponent = policy.alpha / (p - 1.0);
  } else {
    policy.alpha = std::numeric_limits<double>::quiet_NaN();
    policy.exponent = policy.p_prime;
  }

  const double z = goal.endowment;
  auto excess = [&](double log_threshold) { return risk_averse_initial_value(policy, log_threshold) - z; };

  // The initial value decreases from H_{0,T} (L -> 0) to 0 (L -> infinity).
  double lo = std::log(spot0 * 1e-8);
  double hi = std::log(spot0 * 1e8);
  for (int i = 0; i < kMaxBracketExpansions && excess(lo) <= 0.0; ++i) lo -= std::log(1e4);
  for (int i = 0; i < kMaxBracketExpansions && excess(hi) >= 0.0; ++i) hi += std::log(1e4);
  if (excess(lo) <= 0.0 || excess(hi) >= 0.0) {
    throw DomainError("calibrate_risk_averse: threshold cannot be bracketed");
  }

  double mid = 0.5 * (lo + hi);
  double f = excess(mid);
  int it = 1;
  for (; it < kMaxBisection && std::abs(f) > kCalibrationTolerance * z; ++it) {
    if (f > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    mid = 0.5 * (lo + hi);
    f = excess(mid);
  }
  if (std::abs(f) > kCalibrationTolerance * z) {
    throw NumericalError("calibrate_risk_averse: bisection did not reach the residual tolerance");
  }

  policy.log_threshold = mid;
  policy.threshold = std::exp(mid);
  policy.iterations = it;
  policy.residual = f;
  if (market.n() == 1) {
    const double sigma = market.sigma(0, 0);
    const double alpha = policy.alpha;
    policy.k = std::pow(spot0, alpha) *
               std::exp(alpha * (market.mu(0) + market.r - sigma * sigma) * goal.maturity / 2.0);
    policy.a_p = std::exp((alpha * mid - std::log(policy.k)) / (p - 1.0));
  } else {
    policy.a_p = std::exp(policy.p_prime * (mid - market.r * goal.maturity - std::log(spot0)));
  }
  return policy;
}

double risk_averse_value(double t, double spot, const RiskAversePolicy& policy) {
  require_spot(spot);
  const double remaining = remaining_time(t, policy.goal);
  if (remaining == 0.0) return modified_claim_payoff(spot, policy);
  return policy.goal.discounted_goal(policy.market.r, t) *
         knockout_claim(spot, policy.log_threshold, policy.exponent, policy.market.r, policy.underlying.vol, remaining,
                        policy.convention);
}

double risk_averse_delta(double t, double spot, const RiskAversePolicy& policy) {
  require_spot(spot);
  const double remaining = remaining_time(t, policy.goal);
  if (remaining == 0.0) throw MaturityError("hedge ratio is undefined at maturity");
  return policy.goal.discounted_goal(policy.market.r, t) *
         knockout_claim_delta(spot, policy.log_threshold, policy.exponent, policy.market.r, policy.underlying.vol,
                              remaining, policy.convention);
}

double AllBondPolicy::terminal_wealth() const { return goal.endowment * std::exp(r * goal.maturity); }

AllBondPolicy risk_averse_limit_policy(const GoalSpec& goal, double r) {
  if (!(goal.maturity > 0.0) || !(r >= 0.0)) throw DomainError("risk_averse_limit_policy: invalid goal");
  return {goal, r};
}

// --- protection -----------------------------------------------------------

ProtectedPolicy calibrate_protected(const Market& market, const GoalSpec& goal, double spot0, double allowance) {
  if (!(allowance >= 0.0 && allowance <= 1.0)) {
    throw DomainError("calibrate_protected: allowance must lie in [0, 1]");
  }
  ProtectedPolicy policy{goal, market, underlying_of(market, spot0), allowance, 0.0, false};
  if (classify_goal(goal, market.r) == GoalRegime::super_replicating) {
    policy.all_bond = true;
    return policy;
  }
  const double bond = goal.discounted_goal(market.r);
  const double floor = (1.0 - allowance) * bond;
  if (goal.endowment < floor || allowance == 0.0) {
    throw InfeasibleFloor("calibrate_protected: endowment does not cover the floor (1 - delta) H_{0,T}");
  }
  const double unit_price = (goal.endowment - floor) / (allowance * bond);
  policy.strike = unit_price == 0.0 ? std::numeric_limits<double>::infinity()
                                    : digital_strike(policy.underlying, market.r, goal.maturity, unit_price);
  return policy;
}

double protected_floor(double t, const ProtectedPolicy& policy) {
  return (1.0 - policy.allowance) * policy.goal.discounted_goal(policy.market.r, t);
}

double protected_value(double t, double spot, const ProtectedPolicy& policy) {
  require_spot(spot);
  const double r = policy.market.r;
  if (policy.all_bond) {
    remaining_time(t, policy.goal);
    return policy.goal.endowment * std::exp(r * t);
  }
  return protected_floor(t, policy) +
         policy.allowance * policy.goal.discounted_goal(r, t) *
             strike_probability(t, spot, policy.strike, r, policy.underlying.vol, policy.goal);
}

double protected_delta(double t, double spot, const ProtectedPolicy& policy) {
  require_spot(spot);
  const double r = policy.market.r;
  if (policy.all_bond) {
    if (remaining_time(t, policy.goal) == 0.0) throw MaturityError("hedge ratio is undefined at maturity");
    return 0.0;
  }
  return policy.allowance * policy.goal.discounted_goal(r, t) *
         strike_density(t, spot, policy.strike, r, policy.underlying.vol, policy.goal);
}

FlaggedValue protected_success_probability(double t, double wealth, double allowance, const Market& market,
                                           const GoalSpec& goal) {
  if (!(allowance >= 0.0 && allowance <= 1.0)) {
    throw DomainError("protected_success_probability: allowance must lie in [0, 1]");
  }
  const double remaining = remaining_time(t, goal);
  const double target = goal.discounted_goal(market.r, t);
  const double floor = (1.0 - allowance) * target;
  if (wealth < floor) throw InfeasibleFloor("protected_success_probability: wealth below the floor");
  if (wealth > target) return {1.0, true};
  if (wealth == target) return {1.0, false};
  const double q = (wealth - floor) / (allowance * target);
  if (q <= 0.0) return {0.0, true};
  const double edge = std::sqrt(market.sigma_star * market.sigma_star * remaining);
  return {normal_cdf(normal_quantile(q) + edge), false};
}

FlaggedValue protected_min_endowment(double epsilon, double allowance, const Market& market, const GoalSpec& goal) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0) || !(allowance >= 0.0 && allowance <= 1.0)) {
    throw DomainError("protected_min_endowment: epsilon and delta must lie in [0, 1]");
  }
  const double bond = goal.discounted_goal(market.r);
  if (epsilon == 1.0) return {(1.0 - allowance) * bond, true};
  if (epsilon == 0.0) return {(2.0 - allowance) * bond, true};
  const double edge = std::sqrt(market.sigma_star * market.sigma_star * goal.maturity);
  return {(normal_cdf(normal_quantile(1.0 - epsilon) - edge) + 1.0 - allowance) * bond, false};
}

// --- payoffs --------------------------------------------------------------

double modified_claim_payoff(double terminal, const EfficientHedgePolicy& policy) {
  if (policy.all_bond) return policy.goal.endowment * std::exp(policy.market.r * policy.goal.maturity);
  return terminal >= policy.strike ? policy.goal.goal : 0.0;
}

double modified_claim_payoff(double terminal, const RiskAversePolicy& policy) {
  const double log_moneyness = std::log(terminal) - policy.log_threshold;
  if (log_moneyness < 0.0) return 0.0;
  return policy.goal.goal * (1.0 - std::exp(-policy.exponent * log_moneyness));
}

double modified_claim_payoff(double terminal, const ProtectedPolicy& policy) {
  if (policy.all_bond) return policy.goal.endowment * std::exp(policy.market.r * policy.goal.maturity);
  const double h = policy.goal.goal;
  return (1.0 - policy.allowance) * h + (terminal >= policy.strike ? policy.allowance * h : 0.0);
}

double modified_claim_payoff(double, const AllBondPolicy& policy) { return policy.terminal_wealth(); }

// --- variant access -------------------------------------------------------

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

std::string family_name(const AnyPolicy& policy) {
  return std::visit(overloaded{[](const EfficientHedgePolicy&) { return std::string("efficient"); },
                               [](const RiskAversePolicy&) { return std::string("risk-averse"); },
                               [](const ProtectedPolicy&) { return std::string("protected"); },
                               [](const AllBondPolicy&) { return std::string("all-bond"); }},
                    policy);
}

const GoalSpec& goal_of(const AnyPolicy& policy) {
  return std::visit([](const auto& p) -> const GoalSpec& { return p.goal; }, policy);
}

double policy_value(double t, double spot, const AnyPolicy& policy) {
  return std::visit(overloaded{[&](const EfficientHedgePolicy& p) { return efficient_value(t, spot, p); },
                               [&](const RiskAversePolicy& p) { return risk_averse_value(t, spot, p); },
                               [&](const ProtectedPolicy& p) { return protected_value(t, spot, p); },
                               [&](const AllBondPolicy& p) { return p.goal.endowment * std::exp(p.r * t); }},
                    policy);
}

double policy_delta(double t, double spot, const AnyPolicy& policy) {
  return std::visit(overloaded{[&](const EfficientHedgePolicy& p) { return efficient_delta(t, spot, p); },
                               [&](const RiskAversePolicy& p) { return risk_averse_delta(t, spot, p); },
                               [&](const ProtectedPolicy& p) { return protected_delta(t, spot, p); },
                               [&](const AllBondPolicy& p) {
                                 if (t >= p.goal.maturity) throw MaturityError("hedge ratio is undefined at maturity");
                                 return 0.0;
                               }},
                    policy);
}

double policy_payoff(double terminal, const AnyPolicy& policy) {
  return std::visit([&](const auto& p) { return modified_claim_payoff(terminal, p); }, policy);
}

Eigen::VectorXd growth_dollar_holdings(const Market& market, double growth_value, double growth_delta) {
  return growth_delta * growth_value * market.pi_star;
}

}  // namespace gbi
