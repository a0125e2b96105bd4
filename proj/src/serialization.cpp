#include "gbi/serialization.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace gbi {
namespace {

std::string format_double(double v) {
  if (!std::isfinite(v)) return v > 0 ? "Infinity" : (v < 0 ? "-Infinity" : "NaN");
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// nlohmann prints doubles with max_digits10 already; non-finite values become null, so
// they are encoded as strings instead.
Json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double read_number(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

const char* convention_name(CarryConvention c) {
  return c == CarryConvention::published ? "published" : "arbitrage-free";
}

}  // namespace

std::string dump_json(const Json& j) { return j.dump(2); }

Json to_json(const Market& market) {
  Json j;
  j["mu"] = vector_json(market.mu);
  j["sigma"] = matrix_json(market.sigma);
  j["r"] = market.r;
  j["vartheta"] = vector_json(market.vartheta);
  j["pi_star"] = vector_json(market.pi_star);
  j["sigma_star"] = market.sigma_star;
  return j;
}

Json to_json(const GoalSpec& goal) {
  return Json{{"H", goal.goal}, {"T", goal.maturity}, {"z", goal.endowment}};
}

Json to_json(const AnyPolicy& policy) {
  Json j;
  j["family"] = family_name(policy);
  if (const auto* e = std::get_if<EfficientHedgePolicy>(&policy)) {
    j["K_star"] = number(e->strike);
    j["p"] = e->p;
    j["alpha_p"] = nullptr;
    j["all_bond"] = e->all_bond;
    j["spot0"] = e->underlying.spot0;
    j["underlying"] = e->underlying.growth_portfolio ? "growth-portfolio" : "asset";
    j["market"] = to_json(e->market);
  } else if (const auto* ra = std::get_if<RiskAversePolicy>(&policy)) {
    j["L"] = ra->threshold;
    j["log_L"] = ra->log_threshold;
    j["p"] = ra->p;
    j["alpha_p"] = ra->exponent;
    j["p_prime"] = ra->p_prime;
    j["a_p"] = ra->a_p;
    j["k"] = number(ra->k);
    j["convention"] = convention_name(ra->convention);
    j["spot0"] = ra->underlying.spot0;
    j["underlying"] = ra->underlying.growth_portfolio ? "growth-portfolio" : "asset";
    j["bisection_iterations"] = ra->iterations;
    j["residual"] = ra->residual;
    j["market"] = to_json(ra->market);
  } else if (const auto* pr = std::get_if<ProtectedPolicy>(&policy)) {
    j["K_star"] = number(pr->strike);
    j["delta"] = pr->allowance;
    j["p"] = 1.0;
    j["alpha_p"] = nullptr;
    j["all_bond"] = pr->all_bond;
    j["spot0"] = pr->underlying.spot0;
    j["market"] = to_json(pr->market);
  } else {
    const auto& b = std::get<AllBondPolicy>(policy);
    j["terminal_wealth"] = b.terminal_wealth();
    j["r"] = b.r;
  }
  j["goal"] = to_json(goal_of(policy));
  return j;
}

Json to_json(const WealthStats& s) {
  return Json{{"mean", s.mean},          {"q05", s.q05},         {"success_rate", s.success_rate},
              {"success_ratio", s.success_ratio}, {"se_mean", s.se_mean}, {"se_rate", s.se_rate},
              {"se_ratio", s.se_ratio},  {"J", s.count}};
}

Json to_json(const TrainConfig& c) {
  Json widths = Json::array();
  for (auto w : c.widths) widths.push_back(w);
  return Json{{"p", c.p},
              {"lambda", c.lambda},
              {"kappa", c.kappa},
              {"train_paths", c.train_paths},
              {"validation_paths", c.validation_paths},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon},
              {"patience", c.patience},
              {"seed", c.seed},
              {"threads", c.threads},
              {"widths", widths}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  c.p = j.value("p", c.p);
  c.lambda = j.value("lambda", c.lambda);
  c.kappa = j.value("kappa", c.kappa);
  c.train_paths = j.value("train_paths", c.train_paths);
  c.validation_paths = j.value("validation_paths", c.validation_paths);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  if (j.contains("widths")) c.widths = j.at("widths").get<std::vector<Eigen::Index>>();
  return c;
}

Json to_json(const Checkpoint& cp) {
  const NetworkStack& s = cp.stack;
  Json layers = Json::array();
  for (auto w : s.widths()) layers.push_back(w);
  Json networks = Json::array();
  for (Eigen::Index t = 0; t < s.steps(); ++t) {
    Json net = Json::array();
    for (std::size_t l = 0; l < s.layers(); ++l) {
      const Eigen::MatrixXd w = s.weight(t, l);
      Json flat = Json::array();
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(number(w(r, c)));
      }
      net.push_back(Json{{"weights", flat}, {"bias", vector_json(s.bias(t, l))}});
    }
    networks.push_back(net);
  }
  return Json{{"N", s.steps()},
              {"layer_dims", layers},
              {"networks", networks},
              {"config", to_json(cp.config)},
              {"seed", cp.config.seed},
              {"epoch", cp.epoch}};
}

Checkpoint checkpoint_from_json(const Json& j) {
  const auto steps = j.at("N").get<Eigen::Index>();
  const auto dims = j.at("layer_dims").get<std::vector<Eigen::Index>>();
  Checkpoint cp{NetworkStack(steps, dims), train_config_from_json(j.value("config", Json::object())),
                j.value("epoch", 0)};
  const Json& networks = j.at("networks");
  if (static_cast<Eigen::Index>(networks.size()) != steps) {
    throw DomainError("checkpoint: network count does not match N");
  }
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Json& net = networks.at(static_cast<std::size_t>(t));
    for (std::size_t l = 0; l < cp.stack.layers(); ++l) {
      auto w = cp.stack.weight(t, l);
      std::vector<double> flat;
      std::vector<double> bias;
      for (const Json& v : net.at(l).at("weights")) flat.push_back(read_number(v));
      for (const Json& v : net.at(l).at("bias")) bias.push_back(read_number(v));
      if (static_cast<Eigen::Index>(flat.size()) != w.size() || static_cast<Eigen::Index>(bias.size()) != w.rows()) {
        throw DomainError("checkpoint: layer shape mismatch");
      }
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[static_cast<std::size_t>(r * w.cols() + c)];
      }
      for (Eigen::Index r = 0; r < w.rows(); ++r) cp.stack.bias(t, l)(r) = bias[static_cast<std::size_t>(r)];
    }
  }
  cp.config.seed = j.value("seed", cp.config.seed);
  return cp;
}

void write_value_grid_csv(std::ostream& out, const AnyPolicy& policy, std::span<const double> times,
                          std::span<const double> spots) {
  out << "t,spot,value,delta\n" << std::setprecision(17);
  for (double t : times) {
    for (double s : spots) {
      out << t << ',' << s << ',' << policy_value(t, s, policy) << ',';
      if (t < goal_of(policy).maturity) out << policy_delta(t, s, policy);
      out << '\n';
    }
  }
}

void write_static_curve_csv(std::ostream& out, const std::vector<StaticLossPoint>& curve) {
  out << "xi,penalized_loss,unpenalized_loss,se_penalized,se_unpenalized\n" << std::setprecision(17);
  for (const auto& pt : curve) {
    out << pt.shares << ',' << pt.penalized << ',' << pt.unpenalized << ',' << pt.se_penalized << ','
        << pt.se_unpenalized << '\n';
  }
}

void write_loss_curve_csv(std::ostream& out, const LossReport& report) {
  out << "epoch,train_loss,val_loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    out << e << ',' << report.train_loss[e] << ',' << report.validation_loss[e] << '\n';
  }
}

void write_payoff_diagram_csv(std::ostream& out, const BacktestResult& result, double spot0) {
  out << "path,S_T_over_S0,V_T\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < result.terminal.size(); ++i) {
    out << result.path_index[static_cast<std::size_t>(i)] << ',' << result.terminal_spot(i) / spot0 << ','
        << result.terminal(i) << '\n';
  }
}

}  // namespace gbi
