#pragma once

#include <iosfwd>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "gbi/backtest.hpp"
#include "gbi/hedger.hpp"
#include "gbi/policies.hpp"

namespace gbi {

using Json = nlohmann::ordered_json;

/// Doubles are written with 17 significant digits so they round-trip exactly.
std::string dump_json(const Json& j);

Json to_json(const Market& market);
Json to_json(const GoalSpec& goal);
/// {family, K_star | L, p, alpha_p, market, goal, ...}
Json to_json(const AnyPolicy& policy);
Json to_json(const WealthStats& stats);

struct Checkpoint {
  NetworkStack stack;
  TrainConfig config;
  int epoch = 0;
};

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j, TrainConfig defaults = {});
Json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const Json& j);

/// `t,spot,value,delta` over the product grid. Deltas at t = T are left empty.
void write_value_grid_csv(std::ostream& out, const AnyPolicy& policy, std::span<const double> times,
                          std::span<const double> spots);
void write_static_curve_csv(std::ostream& out, const std::vector<StaticLossPoint>& curve);
void write_loss_curve_csv(std::ostream& out, const LossReport& report);
/// `path,S_T_over_S0,V_T`
void write_payoff_diagram_csv(std::ostream& out, const BacktestResult& result, double spot0);

}  // namespace gbi
