#include "gbi/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "gbi/random.hpp"

namespace gbi {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "gbi 0.1.0";

std::string tag(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string run_tag(double p, double kappa) { return "p" + tag(p) + "_k" + tag(kappa); }

CarryConvention parse_convention(const std::string& s) {
  if (s == "published") return CarryConvention::published;
  if (s == "arbitrage-free") return CarryConvention::arbitrage_free;
  throw DomainError("config: convention must be \"published\" or \"arbitrage-free\"");
}

const char* convention_name(CarryConvention c) {
  return c == CarryConvention::published ? "published" : "arbitrage-free";
}

/// Output directory guarded by a lock file; records every file written for the manifest.
class OutputDir {
 public:
  explicit OutputDir(const fs::path& root) : root_(root) {
    fs::create_directories(root_);
    lock_ = root_ / ".gbi.lock";
    std::FILE* f = std::fopen(lock_.c_str(), "wx");
    if (f == nullptr) throw DomainError("output directory is locked by another run: " + lock_.string());
    std::fclose(f);
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;
  ~OutputDir() {
    std::error_code ec;
    fs::remove(lock_, ec);
  }

  fs::path write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path path = root_ / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DomainError("cannot open output file " + path.string());
    body(os);
    os.close();
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
    return path;
  }

  void write_manifest(const std::string& command, const ExperimentConfig& config, double seconds) {
    Json files = Json::array();
    for (const auto& name : files_) {
      files.push_back(Json{{"name", name},
                           {"checksum", file_checksum(root_ / name)},
                           {"bytes", static_cast<std::uint64_t>(fs::file_size(root_ / name))}});
    }
    Json manifest{{"version", kVersion},
                  {"command", command},
                  {"config", to_json(config)},
                  {"seeds",
                   {{"root", config.seed},
                    {"evaluation", derive_seed(config.seed, "evaluation")},
                    {"theoretical", derive_seed(config.seed, "theoretical")},
                    {"training", derive_seed(config.seed, "training")},
                    {"validation", derive_seed(config.seed, "validation")}}},
                  {"wall_clock_seconds", seconds},
                  {"files", files}};
    std::ofstream os(root_ / "manifest.json", std::ios::binary);
    os << dump_json(manifest) << '\n';
  }

 private:
  fs::path root_;
  fs::path lock_;
  std::vector<std::string> files_;
};

/// p <= 1 selects the efficient (quantile) hedge, p > 1 the risk-averse claim.
AnyPolicy policy_for_order(const ExperimentConfig& c, double p) {
  const Market market = c.market();
  if (p <= 1.0) return calibrate_efficient(market, c.goal_spec(), c.spot0, p);
  return calibrate_risk_averse(market, c.goal_spec(), c.spot0, p, c.convention);
}

AnyPolicy configured_policy(const ExperimentConfig& c) {
  const Market market = c.market();
  const double p = c.p.empty() ? 1.0 : c.p.front();
  if (c.family == "efficient") return calibrate_efficient(market, c.goal_spec(), c.spot0, p);
  if (c.family == "risk-averse") return calibrate_risk_averse(market, c.goal_spec(), c.spot0, p, c.convention);
  if (c.family == "protected") return calibrate_protected(market, c.goal_spec(), c.spot0, c.delta);
  if (c.family == "all-bond") return risk_averse_limit_policy(c.goal_spec(), c.r);
  throw DomainError("config: unknown policy family " + c.family);
}

PathSet evaluation_paths(const ExperimentConfig& c) {
  return hedging_paths(c.market(), c.hedging_grid(), c.paths, c.seed, "evaluation");
}

BacktestConfig backtest_config(const ExperimentConfig& c, double kappa) {
  BacktestConfig cfg;
  cfg.steps = c.steps;
  cfg.tau = c.tau;
  cfg.kappa = kappa;
  cfg.initial_bank = c.endowment;
  cfg.initial_shares = 0.0;
  return cfg;
}

HedgeProblem problem_for(const ExperimentConfig& c, double p, double lambda, double kappa) {
  return {c.goal, p, lambda, kappa, c.r, c.tau, c.endowment, 0.0};
}

void print(std::ostream& out, const CommandOptions& opt, const Json& summary, const std::string& human) {
  if (opt.json) {
    out << dump_json(summary) << '\n';
  } else {
    out << human;
  }
}

std::string stats_line(const WealthStats& s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "mean=" << s.mean << " q05=" << s.q05
     << " success_rate=" << s.success_rate << " success_ratio=" << s.success_ratio << " (J=" << s.count << ")";
  return os.str();
}

// --- commands ---------------------------------------------------------------

int cmd_calibrate(const ExperimentConfig& c, const CommandOptions& opt, OutputDir& dir, std::ostream& out) {
  const Market market = c.market();
  const GoalSpec goal = c.goal_spec();
  const AnyPolicy policy = configured_policy(c);
  Json summary = to_json(policy);
  std::ostringstream human;
  human << std::setprecision(10);
  human << "family: " << family_name(policy) << '\n';

  const bool all_bond = std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, EfficientHedgePolicy> || std::is_same_v<P, ProtectedPolicy>) {
          return p.all_bond;
        } else {
          return std::is_same_v<P, AllBondPolicy>;
        }
      },
      policy);
  if (all_bond) {
    human << "notice: endowment covers the discounted goal; the whole endowment stays in the bank\n";
    summary["notice"] = "all-bond";
  }
  if (const auto* e = std::get_if<EfficientHedgePolicy>(&policy); e && !e->all_bond) {
    const FlaggedValue prob = success_probability(0.0, goal.endowment, market, goal);
    human << "K*: " << e->strike << '\n' << "success probability: " << prob.value << '\n';
    summary["success_probability"] = prob.value;
  } else if (const auto* ra = std::get_if<RiskAversePolicy>(&policy)) {
    human << "L: " << ra->threshold << '\n'
          << "alpha_p: " << ra->exponent << '\n'
          << "success probability: 0 (the modified claim stays below H)\n";
    summary["success_probability"] = 0.0;
  } else if (const auto* pr = std::get_if<ProtectedPolicy>(&policy); pr && !pr->all_bond) {
    const FlaggedValue prob = protected_success_probability(0.0, goal.endowment, c.delta, market, goal);
    const FlaggedValue x_eps = protected_min_endowment(c.epsilon, c.delta, market, goal);
    human << "K*: " << pr->strike << '\n'
          << "success probability: " << prob.value << '\n'
          << "minimum endowment for epsilon=" << c.epsilon << ": " << x_eps.value << '\n';
    summary["success_probability"] = prob.value;
    summary["x_epsilon"] = x_eps.value;
  }
  dir.write("policy.json", [&](std::ostream& os) { os << dump_json(to_json(policy)) << '\n'; });
  print(out, opt, summary, human.str());
  return kExitOk;
}

int cmd_simulate(const ExperimentConfig& c, const CommandOptions& opt, OutputDir& dir, std::ostream& out) {
  const PathSet paths = evaluation_paths(c);
  dir.write("paths.csv", [&](std::ostream& os) { write_paths_csv(os, paths); });
  Json summary{{"paths", paths.paths()}, {"steps", paths.steps}, {"seed", paths.seed}};
  print(out, opt, summary, "wrote " + std::to_string(paths.paths()) + " paths to paths.csv\n");
  return kExitOk;
}

int cmd_backtest(const ExperimentConfig& c, const CommandOptions& opt, OutputDir& dir, std::ostream& out) {
  const PathSet paths = evaluation_paths(c);
  Json runs = Json::array();
  std::ostringstream human;
  for (double p : c.p) {
    const AnyPolicy policy = policy_for_order(c, p);
    const DeltaStrategy strategy(policy);
    for (double kappa : c.kappa) {
      BacktestConfig cfg = backtest_config(c, kappa);
      cfg.trade_log_paths = 5;
      const BacktestResult bt = run_backtest(paths, strategy, cfg, c.r);
      const WealthStats stats = statistics(bt.terminal, c.goal);
      const std::string t = run_tag(p, kappa);
      dir.write("backtest_" + t + ".csv", [&](std::ostream& os) { write_terminal_csv(os, bt); });
      dir.write("trades_" + t + ".csv", [&](std::ostream& os) { write_trade_log_csv(os, bt.trades); });
      Json s = to_json(stats);
      s["kappa"] = kappa;
      s["p"] = p;
      s["strategy"] = strategy.name();
      s["excluded_paths"] = bt.excluded;
      s["held_steps"] = bt.held_steps;
      runs.push_back(s);
      human << "p=" << p << " kappa=" << kappa << ": " << stats_line(stats) << '\n';
    }
  }
  dir.write("backtest_summary.json", [&](std::ostream& os) { os << dump_json(runs) << '\n'; });
  print(out, opt, runs, human.str());
  return kExitOk;
}

int cmd_train(const ExperimentConfig& c, const CommandOptions& opt, OutputDir& dir, std::ostream& out,
              std::ostream& err) {
  try {
    TrainConfig cfg = c.training;
    cfg.seed = c.seed;  // one top-level seed drives every stream
    TrainResult result = train(c.market(), c.goal_spec(), c.hedging_grid(), cfg);
    const Checkpoint cp{result.stack, cfg, result.report.epochs_run};
    dir.write("checkpoint.json", [&](std::ostream& os) { os << dump_json(to_json(cp)) << '\n'; });
    dir.write("loss_curve.csv", [&](std::ostream& os) { write_loss_curve_csv(os, result.report); });
    Json summary{{"final_train_loss", result.report.final_train_loss},
                 {"best_epoch", result.report.best_epoch},
                 {"epochs_run", result.report.epochs_run},
                 {"p", c.training.p},
                 {"kappa", c.training.kappa},
                 {"lambda", c.training.lambda}};
    dir.write("train_report.json", [&](std::ostream& os) { os << dump_json(summary) << '\n'; });
    std::ostringstream human;
    human << "trained " << result.report.epochs_run << " epochs (best " << result.report.best_epoch
          << "), final training loss " << std::setprecision(10) << result.report.final_train_loss << '\n';
    print(out, opt, summary, human.str());
    return kExitOk;
  } catch (const TrainingDivergence& e) {
    const fs::path trace = dir.write("loss_trace.csv", [&](std::ostream& os) { write_loss_curve_csv(os, e.report()); });
    err << e.what() << "; loss trace: " << trace.string() << '\n';
    return kExitNumerical;
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot open checkpoint " + path);
  return checkpoint_from_json(Json::parse(is));
}

int cmd_evaluate(const ExperimentConfig& c, const CommandOptions& opt, OutputDir& dir, std::ostream& out) {
  if (!opt.checkpoint) throw DomainError("evaluate: --checkpoint is required");
  const Checkpoint cp = load_checkpoint(*opt.checkpoint);
  if (cp.stack.steps() != c.steps) throw DomainError("evaluate: checkpoint N does not match the grid");
  const PathSet paths = evaluation_paths(c);
  Json runs = Json::array();
  std::ostringstream human;
  for (double kappa : c.kappa) {
    const Evaluation ev = evaluate(cp.stack, paths, problem_for(c, cp.config.p, cp.config.lambda, kappa));
    const std::string t = run_tag(cp.config.p, kappa);
    dir.write("payoff_" + t + ".csv", [&](std::ostream& os) { write_payoff_diagram_csv(os, ev.backtest, c.spot0); });
    Json s = to_json(ev.stats);
    s["kappa"] = kappa;
    s["p"] = cp.config.p;
    s["strategy"] = "deep-hedger";
    runs.push_back(s);
    human << "kappa=" << kappa << ": " << stats_line(ev.stats) << '\n';
  }
  dir.write("evaluation.json", [&](std::ostream& os) { os << dump_json(runs) << '\n'; });
  print(out, opt, runs, human.str());
  return kExitOk;
}

int cmd_table(const ExperimentConfig& c, const CommandOptions& opt, OutputDir& dir, std::ostream& out) {
  const char* names[] = {"mean", "q05", "success_rate", "success_ratio"};
  auto pick = [](const WealthStats& s, int i) {
    switch (i) {
      case 0: return s.mean;
      case 1: return s.q05;
      case 2: return s.success_rate;
      default: return s.success_ratio;
    }
  };

  std::vector<std::string> columns{"Theoretical"};
  for (double k : c.kappa) columns.push_back("DeepHedging k=" + tag(k));
  for (double k : c.kappa) columns.push_back("DiscreteDelta k=" + tag(k));

  // rows[p index][column] -> stats, absent when no checkpoint was supplied
  std::vector<std::vector<std::optional<WealthStats>>> cells;
  if (!c.p.empty()) {
    const PathSet paths = evaluation_paths(c);
    const Market market = c.market();
    for (double p : c.p) {
      std::vector<std::optional<WealthStats>> row;
      const AnyPolicy policy = policy_for_order(c, p);
      const Eigen::VectorXd theo = theoretical_terminal_samples(market, policy, c.spot0, c.theoretical_paths,
                                                                derive_seed(c.seed, "theoretical"));
      row.emplace_back(statistics(theo, c.goal));
      for (double k : c.kappa) {
        const auto it = std::find_if(c.checkpoints.begin(), c.checkpoints.end(),
                                     [&](const CheckpointRef& r) { return r.p == p && r.kappa == k; });
        if (it == c.checkpoints.end()) {
          row.emplace_back(std::nullopt);
          continue;
        }
        const Checkpoint cp = load_checkpoint(it->path);
        row.emplace_back(evaluate(cp.stack, paths, problem_for(c, p, cp.config.lambda, k)).stats);
      }
      const DeltaStrategy strategy(policy);
      for (double k : c.kappa) {
        row.emplace_back(statistics(run_backtest(paths, strategy, backtest_config(c, k), c.r).terminal, c.goal));
      }
      cells.push_back(std::move(row));
    }
  }

  Json summary = Json::array();
  dir.write("table.csv", [&](std::ostream& os) {
    os << "statistic,p,column,value\n" << std::setprecision(17);
    for (int s = 0; s < 4; ++s) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t col = 0; col < columns.size(); ++col) {
          os << names[s] << ',' << c.p[i] << ',' << columns[col] << ',';
          if (cells[i][col]) os << pick(*cells[i][col], s);
          else os << "absent";
          os << '\n';
        }
      }
    }
  });
  std::ostringstream md;
  md << std::fixed << std::setprecision(2);
  for (int s = 0; s < 4; ++s) {
    md << "| " << names[s];
    for (const auto& col : columns) md << " | " << col;
    md << " |\n|---";
    for (std::size_t col = 0; col < columns.size(); ++col) md << "|---";
    md << "|\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      md << "| p=" << tag(c.p[i]);
      Json row{{"statistic", names[s]}, {"p", c.p[i]}};
      for (std::size_t col = 0; col < columns.size(); ++col) {
        if (cells[i][col]) {
          md << " | " << pick(*cells[i][col], s);
          row[columns[col]] = pick(*cells[i][col], s);
        } else {
          md << " | absent";
          row[columns[col]] = "absent";
        }
      }
      md << " |\n";
      summary.push_back(row);
    }
    md << '\n';
  }
  dir.write("table.md", [&](std::ostream& os) { os << md.str(); });
  print(out, opt, summary, md.str());
  return kExitOk;
}

int cmd_curves(const ExperimentConfig& c, const CommandOptions& opt, OutputDir& dir, std::ostream& out) {
  const double T = c.maturity;
  const std::vector<double> times{0.0, 0.25 * T, 0.5 * T, 0.75 * T, 0.9 * T, 0.99 * T};
  std::vector<double> spots;
  const int points = 201;
  for (int i = 0; i < points; ++i) {
    spots.push_back(c.spot0 * std::pow(10.0, -1.0 + 2.0 * i / (points - 1)));
  }
  Json files = Json::array();
  for (double p : c.p) {
    const AnyPolicy policy = policy_for_order(c, p);
    const std::string name = "value_grid_p" + tag(p) + ".csv";
    dir.write(name, [&](std::ostream& os) { write_value_grid_csv(os, policy, times, spots); });
    files.push_back(name);
  }
  std::vector<double> grid = c.static_grid;
  if (grid.empty()) {
    for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  }
  const double kappa = c.kappa.empty() ? 0.0 : c.kappa.front();
  const auto curve =
      static_loss_curve(evaluation_paths(c), problem_for(c, c.training.p, c.training.lambda, kappa), grid);
  dir.write("static_curve.csv", [&](std::ostream& os) { write_static_curve_csv(os, curve); });
  files.push_back("static_curve.csv");
  print(out, opt, Json{{"files", files}}, "wrote " + std::to_string(files.size()) + " curve files\n");
  return kExitOk;
}

}  // namespace

Market ExperimentConfig::market() const {
  const auto n = static_cast<Eigen::Index>(mu.size());
  Eigen::VectorXd m(n);
  Eigen::MatrixXd s(n, n);
  if (static_cast<Eigen::Index>(sigma.size()) != n) throw DomainError("config: sigma must be n x n");
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i) = mu[static_cast<std::size_t>(i)];
    const auto& row = sigma[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != n) throw DomainError("config: sigma must be n x n");
    for (Eigen::Index k = 0; k < n; ++k) s(i, k) = row[static_cast<std::size_t>(k)];
  }
  return derive_market<double>(m, s, r);
}

Json to_json(const ExperimentConfig& c) {
  Json checkpoints = Json::array();
  for (const auto& ref : c.checkpoints) {
    checkpoints.push_back(Json{{"p", ref.p}, {"kappa", ref.kappa}, {"path", ref.path}});
  }
  return Json{{"market", {{"mu", c.mu}, {"sigma", c.sigma}, {"r", c.r}, {"spot0", c.spot0}}},
              {"goal", {{"H", c.goal}, {"T", c.maturity}, {"z", c.endowment}}},
              {"grid",
               {{"N", c.steps}, {"tau", c.tau}, {"J", c.paths}, {"theoretical_J", c.theoretical_paths}, {"seed", c.seed}}},
              {"policy",
               {{"family", c.family},
                {"p", c.p},
                {"delta", c.delta},
                {"epsilon", c.epsilon},
                {"convention", convention_name(c.convention)}}},
              {"costs", {{"kappa", c.kappa}}},
              {"training", to_json(c.training)},
              {"checkpoints", checkpoints},
              {"curves", {{"static_grid", c.static_grid}}},
              {"output", c.output}};
}

ExperimentConfig experiment_from_json(const Json& input) {
  const Json& j = input.contains("config") && input.at("config").is_object() ? input.at("config") : input;
  ExperimentConfig c;
  auto number_list = [](const Json& v) {
    if (v.is_number()) return std::vector<double>{v.get<double>()};
    return v.get<std::vector<double>>();
  };
  try {
    if (j.contains("market")) {
      const Json& m = j.at("market");
      if (m.contains("mu")) c.mu = number_list(m.at("mu"));
      if (m.contains("sigma")) {
        const Json& s = m.at("sigma");
        if (s.is_number()) {
          c.sigma = {{s.get<double>()}};
        } else if (!s.empty() && s.at(0).is_number()) {
          // a vector is read as a diagonal volatility matrix
          const auto d = s.get<std::vector<double>>();
          c.sigma.assign(d.size(), std::vector<double>(d.size(), 0.0));
          for (std::size_t i = 0; i < d.size(); ++i) c.sigma[i][i] = d[i];
        } else {
          c.sigma = s.get<std::vector<std::vector<double>>>();
        }
      }
      c.r = m.value("r", c.r);
      c.spot0 = m.value("spot0", c.spot0);
    }
    if (j.contains("goal")) {
      const Json& g = j.at("goal");
      c.goal = g.value("H", c.goal);
      c.maturity = g.value("T", c.maturity);
      c.endowment = g.value("z", c.endowment);
    }
    if (j.contains("grid")) {
      const Json& g = j.at("grid");
      c.steps = g.value("N", c.steps);
      c.tau = g.value("tau", c.tau);
      c.paths = g.value("J", c.paths);
      c.theoretical_paths = g.value("theoretical_J", c.theoretical_paths);
      c.seed = g.value("seed", c.seed);
    }
    if (j.contains("policy")) {
      const Json& p = j.at("policy");
      c.family = p.value("family", c.family);
      if (p.contains("p")) c.p = number_list(p.at("p"));
      c.delta = p.value("delta", c.delta);
      c.epsilon = p.value("epsilon", c.epsilon);
      if (p.contains("convention")) c.convention = parse_convention(p.at("convention").get<std::string>());
    }
    if (j.contains("costs") && j.at("costs").contains("kappa")) c.kappa = number_list(j.at("costs").at("kappa"));
    if (j.contains("training")) c.training = train_config_from_json(j.at("training"), c.training);
    if (j.contains("checkpoints")) {
      for (const Json& ref : j.at("checkpoints")) {
        c.checkpoints.push_back({ref.at("p").get<double>(), ref.at("kappa").get<double>(), ref.at("path").get<std::string>()});
      }
    }
    if (j.contains("curves") && j.at("curves").contains("static_grid")) {
      c.static_grid = j.at("curves").at("static_grid").get<std::vector<double>>();
    }
    c.output = j.value("output", c.output);
    c.training.seed = c.seed;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("config: ") + e.what());
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  const Market market = c.market();
  if (!(c.spot0 > 0.0)) throw DomainError("config: spot0 must be positive");
  if (!(c.goal > 0.0) || !(c.maturity > 0.0)) throw DomainError("config: H and T must be positive");
  if (!(c.endowment > 0.0)) throw DomainError("config: endowment z must be positive");
  if (c.steps < 1 || !(c.tau > 0.0) || c.paths < 1 || c.theoretical_paths < 1) {
    throw DomainError("config: grid requires N >= 1, tau > 0, J >= 1");
  }
  if (std::abs(static_cast<double>(c.steps) * c.tau - c.maturity) > 1e-9 * c.maturity) {
    throw DomainError("config: N * tau must equal T");
  }
  for (double k : c.kappa) {
    if (!(k >= 0.0 && k < 1.0)) throw DomainError("config: every kappa must lie in [0, 1)");
  }
  for (double p : c.p) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("config: every p must be finite and non-negative");
  }
  if (!(c.delta >= 0.0 && c.delta <= 1.0)) throw DomainError("config: delta must lie in [0, 1]");
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) throw DomainError("config: epsilon must lie in [0, 1]");
  if (!(c.training.lambda >= 0.0) || !(c.training.p > 0.0) || c.training.batch_size < 1 || c.training.epochs < 1 ||
      c.training.train_paths < 1 || c.training.validation_paths < 1 || !(c.training.kappa >= 0.0 && c.training.kappa < 1.0)) {
    throw DomainError("config: invalid training block");
  }
  for (double x : c.static_grid) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("config: static grid must lie in [0, 1]");
  }
  (void)market;
}

std::string file_checksum(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

int run_command(const std::string& command, const ExperimentConfig& config, const CommandOptions& options,
                std::ostream& out, std::ostream& err) {
  static const std::map<std::string, int> known{{"calibrate", 0}, {"simulate", 1}, {"backtest", 2}, {"train", 3},
                                                {"evaluate", 4},  {"table", 5},    {"curves", 6}};
  const auto it = known.find(command);
  if (it == known.end()) {
    err << "unknown command: " << command << '\n';
    return kExitDomain;
  }
  try {
    validate(config);
    const auto start = std::chrono::steady_clock::now();
    OutputDir dir(config.output);
    int code = kExitOk;
    switch (it->second) {
      case 0: code = cmd_calibrate(config, options, dir, out); break;
      case 1: code = cmd_simulate(config, options, dir, out); break;
      case 2: code = cmd_backtest(config, options, dir, out); break;
      case 3: code = cmd_train(config, options, dir, out, err); break;
      case 4: code = cmd_evaluate(config, options, dir, out); break;
      case 5: code = cmd_table(config, options, dir, out); break;
      default: code = cmd_curves(config, options, dir, out); break;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    dir.write_manifest(command, config, seconds);
    return code;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace gbi
