#include "npg/experiment.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "npg/errors.hpp"
#include "npg/instances.hpp"
#include "npg/markov_game.hpp"
#include "npg/matrix_game_fa.hpp"
#include "npg/monotone_game.hpp"
#include "npg/rng.hpp"

namespace npg {

using Json = nlohmann::ordered_json;

namespace {

// Each task writes only its own slot, so the worker count cannot change any result.
void run_tasks(std::vector<std::function<void()>>& tasks, int threads) {
  std::vector<std::exception_ptr> errors(tasks.size());
  auto guarded = [&](std::size_t i) {
    try {
      tasks[i]();
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, tasks.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) guarded(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < tasks.size(); i += workers) guarded(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// One column of a trace; rows past a divergence are NaN.
struct Column {
  std::string name;
  std::vector<double> values;
  bool diverged = false;
};

TraceTable make_table(const std::string& name, long budget, const std::vector<Column>& cols) {
  TraceTable t;
  t.name = name;
  for (const auto& c : cols) t.columns.push_back(c.name);
  for (long k = 1; k <= budget; ++k) {
    t.iterations.push_back(k);
    std::vector<double> row;
    for (const auto& c : cols) row.push_back(c.values[static_cast<std::size_t>(k - 1)]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void summarize(ExperimentOutput& out, const std::string& table, const std::vector<Column>& cols) {
  for (const auto& c : cols) {
    std::ostringstream os;
    os << table << "." << c.name << " final " << fmt(c.values.back()) << (c.diverged ? " (diverged)" : "");
    out.summary.push_back(os.str());
  }
}

double param_dist(const ParamVector& theta, const ParamVector& nu, const OracleSolution& t) {
  return std::sqrt((theta - t.theta_star).squaredNorm() + (nu - t.nu_star).squaredNorm());
}

void fill_nan(Column& c, long budget) {
  c.diverged = true;
  c.values.resize(static_cast<std::size_t>(budget), std::nan(""));
}

CostMatrix biased_pennies() {
  Eigen::Matrix2d q;
  q << 1.0, -1.0, -0.5, 1.0;
  return CostMatrix(q);
}

ExperimentOutput run_vanilla_vs_modified(const ExperimentConfig& cfg) {
  const RegularizedGame game{CostMatrix(Eigen::MatrixXd::Identity(cfg.n, cfg.n)), cfg.tau};
  const long T = cfg.iterations;
  Column vanilla{"vanilla", {}, false};
  Column modified{"modified", {}, false};
  std::vector<std::function<void()>> tasks;
  tasks.emplace_back([&] {
    ParamVector th = ParamVector::Zero(cfg.n);
    ParamVector nu = ParamVector::Zero(cfg.n);
    try {
      for (long k = 1; k <= T; ++k) {
        std::tie(th, nu) = vanilla_npg_step(game, th, nu, cfg.eta);
        vanilla.values.push_back(th(0));
      }
    } catch (const DivergedParameter&) {
      fill_nan(vanilla, T);
    }
  });
  tasks.emplace_back([&] {
    ParamVector th = ParamVector::Zero(cfg.n);
    ParamVector nu = ParamVector::Zero(cfg.n);
    try {
      for (long k = 1; k <= T; ++k) {
        std::tie(th, nu) = npg_step(game, th, nu, cfg.eta);
        modified.values.push_back(th(0));
      }
    } catch (const DivergedParameter&) {
      fill_nan(modified, T);
    }
  });
  run_tasks(tasks, cfg.threads);

  ExperimentOutput out;
  std::vector<Column> cols{vanilla, modified};
  out.tables.push_back(make_table("theta1", T, cols));
  summarize(out, "theta1", cols);
  out.summary.push_back("modified target theta(1) " + fmt(qre_fixed_point(game.q, game.tau).theta_star(0)));
  // Vanilla growth is the expected outcome; only the modified run must stay bounded.
  out.unexpected_divergence = modified.diverged || std::abs(modified.values.back()) > kDivergenceThreshold;
  return out;
}

ExperimentOutput run_npg_vs_onpg(const ExperimentConfig& cfg) {
  CostMatrix q = biased_pennies();
  if (cfg.game == "random") {
    CounterRng rng(cfg.seed);
    q = CostMatrix(rng.uniform_matrix(cfg.n, cfg.n, -1.0, 1.0));
  }
  const RegularizedGame game{q, cfg.tau};
  const OracleSolution target = qre_fixed_point(game.q, game.tau);
  const long T = cfg.iterations;
  std::vector<Column> cols;
  for (double eta : cfg.eta_grid) {
    cols.push_back({"npg_eta=" + fmt(eta), {}, false});
    cols.push_back({"onpg_eta=" + fmt(eta), {}, false});
  }
  std::vector<std::function<void()>> tasks;
  for (std::size_t i = 0; i < cfg.eta_grid.size(); ++i) {
    const double eta = cfg.eta_grid[i];
    Column* npg_col = &cols[2 * i];
    Column* onpg_col = &cols[2 * i + 1];
    tasks.emplace_back([&, eta, npg_col] {
      ParamVector th = ParamVector::Zero(q.rows());
      ParamVector nu = ParamVector::Zero(q.cols());
      try {
        for (long k = 1; k <= T; ++k) {
          std::tie(th, nu) = npg_step(game, th, nu, eta);
          npg_col->values.push_back(param_dist(th, nu, target));
        }
      } catch (const DivergedParameter&) {
        fill_nan(*npg_col, T);
      }
    });
    tasks.emplace_back([&, eta, onpg_col] {
      OptimisticState s = OptimisticState::zeros(q.rows(), q.cols());
      try {
        for (long k = 1; k <= T; ++k) {
          s = onpg_step(game, s, eta);
          onpg_col->values.push_back(param_dist(s.theta, s.nu, target));
        }
      } catch (const DivergedParameter&) {
        fill_nan(*onpg_col, T);
      }
    });
  }
  run_tasks(tasks, cfg.threads);

  ExperimentOutput out;
  out.tables.push_back(make_table("param_dist", T, cols));
  summarize(out, "param_dist", cols);
  out.summary.push_back("onpg stepsize bound " + fmt(onpg_stepsize_bound(game)));
  // NPG above its bound may stall or diverge; ONPG is expected to stay bounded.
  for (std::size_t i = 1; i < cols.size(); i += 2) out.unexpected_divergence |= cols[i].diverged;
  return out;
}

ExperimentOutput run_matrix_fa(const ExperimentConfig& cfg) {
  CounterRng rng(cfg.seed);
  const RegularizedGame game{CostMatrix(rng.uniform_matrix(cfg.n, cfg.n, -1.0, 1.0)), cfg.tau};
  const FeatureMap f = build_feature_map(Eigen::MatrixXd::Identity(cfg.d, cfg.d), cfg.n);
  QreOptions opts;
  opts.restrict_g = &f;
  opts.restrict_h = &f;
  const OracleSolution target = qre_fixed_point(game.q, game.tau, opts);
  const double eta = cfg.eta > 0.0 ? cfg.eta : fa_stepsize_bound(game, f, f);
  const long T = cfg.iterations;
  Column col{"onpg_fa", {}, false};
  OptimisticState s = OptimisticState::zeros(cfg.d, cfg.d);
  try {
    for (long k = 1; k <= T; ++k) {
      s = onpg_fa_step(game, f, s, eta);
      col.values.push_back(param_dist(s.theta, s.nu, target));
    }
  } catch (const DivergedParameter&) {
    fill_nan(col, T);
  }
  ExperimentOutput out;
  std::vector<Column> cols{col};
  out.tables.push_back(make_table("param_dist", T, cols));
  summarize(out, "param_dist", cols);
  out.summary.push_back("stepsize " + fmt(eta));
  out.unexpected_divergence = col.diverged;
  return out;
}

ExperimentOutput run_monotone_methods(const ExperimentConfig& cfg) {
  const MonotoneGameSpec spec = cyclic_linear_game(cfg.n_players, cfg.n, cfg.seed, cfg.tau);
  const MonotoneOracleSolution target = pp_reference_monotone(spec);
  const long T = cfg.iterations;
  const std::vector<MonotoneMethod> methods{MonotoneMethod::kOnpg, MonotoneMethod::kEg, MonotoneMethod::kPp};
  std::vector<Column> kl_cols;
  std::vector<Column> dist_cols;
  for (auto m : methods) {
    kl_cols.push_back({to_string(m), {}, false});
    dist_cols.push_back({to_string(m), {}, false});
  }
  std::vector<std::function<void()>> tasks;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    tasks.emplace_back([&, i] {
      MonotoneConfig mc;
      mc.eta = cfg.eta > 0.0 ? cfg.eta : monotone_default_stepsize(spec, methods[i]);
      mc.guaranteed = cfg.eta <= 0.0;
      mc.max_iters = T;
      mc.kl_tol = -1.0;
      mc.param_tol = 0.0;
      const MonotoneTrace tr = solve_monotone(spec, mc, methods[i], target);
      for (std::size_t r = 1; r < tr.records.size(); ++r) {
        kl_cols[i].values.push_back(tr.records[r].kl_main);
        dist_cols[i].values.push_back(tr.records[r].param_dist);
      }
      if (tr.status == SolverStatus::kDiverged) {
        fill_nan(kl_cols[i], T);
        fill_nan(dist_cols[i], T);
      }
    });
  }
  run_tasks(tasks, cfg.threads);

  ExperimentOutput out;
  out.tables.push_back(make_table("kl", T, kl_cols));
  out.tables.push_back(make_table("param_dist", T, dist_cols));
  summarize(out, "kl", kl_cols);
  summarize(out, "param_dist", dist_cols);
  for (const auto& c : kl_cols) out.unexpected_divergence |= c.diverged;
  return out;
}

ExperimentOutput markov_output(const MarkovResult& res, const std::string& column, long t_outer) {
  Column q{column, {}, false};
  Column p{column, {}, false};
  for (const auto& r : res.trace) {
    q.values.push_back(r.q_error);
    p.values.push_back(r.param_dist);
  }
  ExperimentOutput out;
  std::vector<Column> qc{q};
  std::vector<Column> pc{p};
  out.tables.push_back(make_table("q_error", t_outer, qc));
  out.tables.push_back(make_table("param_dist", t_outer, pc));
  summarize(out, "q_error", qc);
  summarize(out, "param_dist", pc);
  out.summary.push_back("inner stepsize " + fmt(res.eta));
  return out;
}

MarkovConfig markov_config(const ExperimentConfig& cfg) {
  MarkovConfig mc;
  mc.eta = cfg.eta;
  mc.threads = cfg.threads;
  return mc;
}

ExperimentOutput run_markov_tabular(const ExperimentConfig& cfg) {
  const MarkovGameSpec spec = random_markov_game(cfg.n_states, cfg.n, cfg.gamma, cfg.tau, cfg.seed);
  const MarkovResult res = solve_markov_tabular(spec, cfg.t_outer, cfg.t_inner, markov_config(cfg));
  return markov_output(res, "tabular", cfg.t_outer);
}

ExperimentOutput run_markov_fa(const ExperimentConfig& cfg) {
  const MarkovGameSpec spec = uniform_transition_game(cfg.n_states, cfg.n, cfg.gamma, cfg.tau, cfg.seed);
  const MarkovFeatureMap mf = first_action_feature_map(cfg.n_states, cfg.n);
  const MarkovResult res = solve_markov_fa(spec, mf, cfg.t_outer, cfg.t_inner, markov_config(cfg));
  return markov_output(res, "fa", cfg.t_outer);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{"version", "experiment", "rng", "seed", "output", "threads", "game",
                                          "n", "d", "n_states", "n_players", "gamma", "tau", "eta",
                                          "eta_grid", "iterations", "t_outer", "t_inner"};
  return keys;
}

template <typename T>
T get_field(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(key, "has the wrong type");
  }
}

void require_range(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ValidationError(field, what);
}

}  // namespace

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"vanilla-vs-modified", "npg-vs-onpg",    "matrix-fa",
                                            "monotone-methods",    "markov-tabular", "markov-fa"};
  return ids;
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.output = "out/" + experiment;
  if (experiment == "vanilla-vs-modified") {
    c.n = 5;
    c.tau = 0.1;
    c.eta = 1e-3;
    c.iterations = 100000;
  } else if (experiment == "npg-vs-onpg") {
    c.game = "biased-pennies";
    c.n = 2;
    c.tau = 0.02;
    c.eta_grid = {0.05, 0.1, 0.2};
    c.iterations = 20000;
  } else if (experiment == "matrix-fa") {
    c.seed = 4;
    c.n = 100;
    c.d = 10;
    c.tau = 0.1;
    c.iterations = 1500;
  } else if (experiment == "monotone-methods") {
    c.seed = 3;
    c.n_players = 3;
    c.n = 4;
    c.tau = 0.1;
    c.iterations = 3000;
  } else if (experiment == "markov-tabular") {
    c.seed = 5;
    c.n_states = 5;
    c.n = 4;
    c.gamma = 0.8;
    c.tau = 0.1;
    c.t_outer = 50;
    c.t_inner = 2000;
  } else if (experiment == "markov-fa") {
    c.seed = 71;
    c.n_states = 10;
    c.n = 10;
    c.gamma = 0.8;
    c.tau = 0.1;
    c.t_outer = 60;
    c.t_inner = 2000;
  } else {
    std::string ids;
    for (const auto& id : experiment_ids()) ids += (ids.empty() ? "" : ", ") + id;
    throw ValidationError("experiment", "unknown id '" + experiment + "'; expected one of " + ids);
  }
  return c;
}

void validate_config(const ExperimentConfig& c) {
  require_range(c.version == kConfigFormatVersion, "version", "unsupported config version");
  default_config(c.experiment);
  require_range(!c.output.empty(), "output", "must be a nonempty path");
  require_range(c.threads >= 1 && c.threads <= 64, "threads", "must lie in [1, 64]");
  require_range(std::isfinite(c.tau) && c.tau > 0.0, "tau", "must be positive");
  require_range(std::isfinite(c.eta) && c.eta >= 0.0, "eta", "must be finite and nonnegative");
  require_range(c.eta * c.tau < 1.0, "eta", "needs eta * tau < 1");
  const bool markov = c.experiment == "markov-tabular" || c.experiment == "markov-fa";
  if (markov) {
    require_range(c.n >= 1 && c.n <= 100, "n", "must lie in [1, 100]");
    require_range(c.n_states >= 1 && c.n_states <= 10, "n_states", "must lie in [1, 10]");
    require_range(c.gamma >= 0.0 && c.gamma < 1.0, "gamma", "must lie in [0, 1)");
    require_range(c.tau < 1.0, "tau", "must lie in (0, 1) for Markov games");
    require_range(c.t_outer >= 1 && c.t_outer <= 100000, "t_outer", "must lie in [1, 100000]");
    require_range(c.t_inner >= 1 && c.t_inner <= 10000000, "t_inner", "must lie in [1, 1e7]");
    return;
  }
  require_range(c.iterations >= 1 && c.iterations <= 100000000, "iterations", "must lie in [1, 1e8]");
  if (c.experiment == "npg-vs-onpg") {
    require_range(c.game == "random" || c.game == "biased-pennies", "game", "expected random or biased-pennies");
    require_range(!c.eta_grid.empty(), "eta_grid", "must list at least one stepsize");
    for (double e : c.eta_grid)
      require_range(std::isfinite(e) && e > 0.0 && e * c.tau < 1.0, "eta_grid", "entries need 0 < eta * tau < 1");
  }
  if (c.experiment != "npg-vs-onpg" || c.game == "random")
    require_range(c.n >= 1 && c.n <= 100, "n", "must lie in [1, 100]");
  if (c.experiment == "vanilla-vs-modified") require_range(c.eta > 0.0, "eta", "must be positive");
  if (c.experiment == "matrix-fa") require_range(c.d >= 1 && c.d <= c.n, "d", "must lie in [1, n]");
  if (c.experiment == "monotone-methods") {
    require_range(c.n_players >= 2 && c.n_players <= 5, "n_players", "must lie in [2, 5]");
    require_range(c.eta == 0.0 || c.eta * c.tau < 0.5, "eta", "needs eta * tau < 1/2 for the proximal point run");
  }
}

ExperimentConfig config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("document", e.what());
  }
  if (!j.is_object()) throw ValidationError("document", "must be an object");
  for (const auto& item : j.items())
    if (!known_keys().count(item.key())) throw ValidationError(item.key(), "unknown key");
  if (!j.contains("experiment")) throw ValidationError("experiment", "missing");
  ExperimentConfig c = default_config(get_field<std::string>(j, "experiment"));
  if (j.contains("version")) c.version = get_field<int>(j, "version");
  if (j.contains("rng") && get_field<std::string>(j, "rng") != kRngName)
    throw ValidationError("rng", std::string("only ") + kRngName + " is supported");
  if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed");
  if (j.contains("output")) c.output = get_field<std::string>(j, "output");
  if (j.contains("threads")) c.threads = get_field<int>(j, "threads");
  if (j.contains("game")) c.game = get_field<std::string>(j, "game");
  if (j.contains("n")) c.n = get_field<int>(j, "n");
  if (j.contains("d")) c.d = get_field<int>(j, "d");
  if (j.contains("n_states")) c.n_states = get_field<int>(j, "n_states");
  if (j.contains("n_players")) c.n_players = get_field<int>(j, "n_players");
  if (j.contains("gamma")) c.gamma = get_field<double>(j, "gamma");
  if (j.contains("tau")) c.tau = get_field<double>(j, "tau");
  if (j.contains("eta")) c.eta = get_field<double>(j, "eta");
  if (j.contains("eta_grid")) c.eta_grid = get_field<std::vector<double>>(j, "eta_grid");
  if (j.contains("iterations")) c.iterations = get_field<long>(j, "iterations");
  if (j.contains("t_outer")) c.t_outer = get_field<long>(j, "t_outer");
  if (j.contains("t_inner")) c.t_inner = get_field<long>(j, "t_inner");
  validate_config(c);
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  Json j;
  j["version"] = c.version;
  j["experiment"] = c.experiment;
  j["rng"] = kRngName;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["threads"] = c.threads;
  if (c.experiment == "npg-vs-onpg") j["game"] = c.game;
  j["n"] = c.n;
  if (c.experiment == "matrix-fa") j["d"] = c.d;
  if (c.experiment == "monotone-methods") j["n_players"] = c.n_players;
  const bool markov = c.experiment == "markov-tabular" || c.experiment == "markov-fa";
  if (markov) {
    j["n_states"] = c.n_states;
    j["gamma"] = c.gamma;
  }
  j["tau"] = c.tau;
  j["eta"] = c.eta;
  if (c.experiment == "npg-vs-onpg") j["eta_grid"] = c.eta_grid;
  if (markov) {
    j["t_outer"] = c.t_outer;
    j["t_inner"] = c.t_inner;
  } else {
    j["iterations"] = c.iterations;
  }
  return j.dump(2) + "\n";
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.experiment == "vanilla-vs-modified") return run_vanilla_vs_modified(cfg);
  if (cfg.experiment == "npg-vs-onpg") return run_npg_vs_onpg(cfg);
  if (cfg.experiment == "matrix-fa") return run_matrix_fa(cfg);
  if (cfg.experiment == "monotone-methods") return run_monotone_methods(cfg);
  if (cfg.experiment == "markov-tabular") return run_markov_tabular(cfg);
  return run_markov_fa(cfg);
}

std::string format_csv(const TraceTable& table) {
  std::string s = "iteration";
  for (const auto& c : table.columns) s += "," + c;
  s += "\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    s += std::to_string(table.iterations[r]);
    for (double x : table.rows[r]) s += "," + fmt(x);
    s += "\n";
  }
  return s;
}

std::vector<std::string> write_outputs(const ExperimentConfig& cfg, const ExperimentOutput& out) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output);
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto write = [&](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ValidationError("output", "cannot write " + p.string());
    f << text;
    written.push_back(p.string());
  };
  for (const auto& t : out.tables) write(dir / (t.name + ".csv"), format_csv(t));
  write(dir / "config.json", config_to_json(cfg));
  return written;
}

}  // namespace npg
