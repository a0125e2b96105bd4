#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>

#include "gbi/closed_form.hpp"
#include "gbi/market.hpp"

namespace gbi {

/// The asset a policy is written on: the single risky asset when n == 1, otherwise
/// the optimal growth portfolio Pi_t.
struct Underlying {
  double spot0 = 1.0;
  double vol = 0.0;
  bool growth_portfolio = false;
};

Underlying underlying_of(const Market& market, double spot0);

/// Value carrying an "evaluated at a limit" flag (super-replication, epsilon in {0, 1}, ...).
struct FlaggedValue {
  double value = 0.0;
  bool at_limit = false;
};

// --- digital call ---------------------------------------------------------

double digital_d_minus(double t, double spot, double strike, const Market& market, const GoalSpec& goal);

/// R_{t,T} Phi(d_-); at t = T the payoff indicator 1{x >= K}.
double digital_price(double t, double spot, double strike, const Market& market, const GoalSpec& goal);

// --- efficient / quantile hedging (p in [0, 1]) ---------------------------

struct EfficientHedgePolicy {
  GoalSpec goal;
  Market market;
  Underlying underlying;
  double strike = 0.0;
  double p = 1.0;  // carried for reporting; the strike does not depend on it
  bool all_bond = false;
};

EfficientHedgePolicy calibrate_efficient(const Market& market, const GoalSpec& goal, double spot0, double p = 1.0);
double efficient_value(double t, double spot, const EfficientHedgePolicy& policy);
double efficient_delta(double t, double spot, const EfficientHedgePolicy& policy);

/// Maximal probability of reaching H from wealth x at time t.
FlaggedValue success_probability(double t, double wealth, const Market& market, const GoalSpec& goal);

// --- risk aversion (p > 1) ------------------------------------------------

struct RiskAversePolicy {
  GoalSpec goal;
  Market market;
  Underlying underlying;
  CarryConvention convention = CarryConvention::published;
  double p = 2.0;
  double p_prime = 1.0;   // 1 / (p - 1)
  double alpha = 0.0;     // (mu - r) / sigma^2, single-asset case only
  double exponent = 0.0;  // alpha / (p - 1) for one asset, p' on the growth portfolio
  double threshold = 0.0; // L, may underflow to 0 for large p
  double log_threshold = 0.0;
  double a_p = 0.0;
  double k = 0.0;         // single-asset density constant, rho_* = k X_T^{-alpha}
  int iterations = 0;
  double residual = 0.0;
};

inline constexpr double kCalibrationTolerance = 1e-8;
inline constexpr int kMaxBisection = 200;
/// Each expansion widens the bracket by a factor 1e4 on the side that failed.
inline constexpr int kMaxBracketExpansions = 1000;

RiskAversePolicy calibrate_risk_averse(const Market& market, const GoalSpec& goal, double spot0, double p,
                                       CarryConvention convention = CarryConvention::published);
/// Initial value of the claim for a trial threshold; this is the map the calibration inverts.
double risk_averse_initial_value(const RiskAversePolicy& shape, double log_threshold);
double risk_averse_value(double t, double spot, const RiskAversePolicy& policy);
double risk_averse_delta(double t, double spot, const RiskAversePolicy& policy);

/// p -> infinity: everything stays in the bank.
struct AllBondPolicy {
  GoalSpec goal;
  double r = 0.0;
  double terminal_wealth() const;
};

AllBondPolicy risk_averse_limit_policy(const GoalSpec& goal, double r);

// --- downward protection --------------------------------------------------

struct ProtectedPolicy {
  GoalSpec goal;
  Market market;
  Underlying underlying;
  double allowance = 1.0;  // delta: share of H_{0,T} that may be lost
  double strike = 0.0;     // strike of the digital paying allowance * H
  bool all_bond = false;
};

ProtectedPolicy calibrate_protected(const Market& market, const GoalSpec& goal, double spot0, double allowance);
double protected_value(double t, double spot, const ProtectedPolicy& policy);
double protected_delta(double t, double spot, const ProtectedPolicy& policy);
double protected_floor(double t, const ProtectedPolicy& policy);

FlaggedValue protected_success_probability(double t, double wealth, double allowance, const Market& market,
                                           const GoalSpec& goal);
FlaggedValue protected_min_endowment(double epsilon, double allowance, const Market& market, const GoalSpec& goal);

// --- terminal payoffs -----------------------------------------------------

double modified_claim_payoff(double terminal, const EfficientHedgePolicy& policy);
double modified_claim_payoff(double terminal, const RiskAversePolicy& policy);
double modified_claim_payoff(double terminal, const ProtectedPolicy& policy);
double modified_claim_payoff(double terminal, const AllBondPolicy& policy);

// --- uniform access -------------------------------------------------------

using AnyPolicy = std::variant<EfficientHedgePolicy, RiskAversePolicy, ProtectedPolicy, AllBondPolicy>;

std::string family_name(const AnyPolicy& policy);
const GoalSpec& goal_of(const AnyPolicy& policy);
double policy_value(double t, double spot, const AnyPolicy& policy);
double policy_delta(double t, double spot, const AnyPolicy& policy);
double policy_payoff(double terminal, const AnyPolicy& policy);

/// Maps a hedge ratio on the growth portfolio to dollar holdings per asset (pi_* is constant).
Eigen::VectorXd growth_dollar_holdings(const Market& market, double growth_value, double growth_delta);

}  // namespace gbi
