#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "hierduals/applications.hpp"
#include "hierduals/io.hpp"
#include "hierduals/validation.hpp"

namespace hierduals::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kIo = 3, kConvergence = 4 };

/// Worker count: hardware concurrency, capped by HIERDUALS_THREADS when set.
inline int thread_budget() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("HIERDUALS_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) n = std::min(n, cap);
    } catch (const std::exception&) {
      throw RejectedInput(std::string("HIERDUALS_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return n;
}

class Phases {
 public:
  void start(std::string name) {
    stop();
    name_ = std::move(name);
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    if (name_.empty()) return;
    out_.emplace_back(name_, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count());
    name_.clear();
  }
  const std::vector<std::pair<std::string, double>>& timings() {
    stop();
    return out_;
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
  std::vector<std::pair<std::string, double>> out_;
};

struct CommonFit {
  std::string app = "rfl";
  std::string data;
  std::string out;
  double q = 0.9;
  int k = 2;
  double a = 1.0;
  double clamp = kDefaultQuantileClamp;
  int max_iters = 500;
  double tol = 1e-8;
  std::string trend_solver = "interior-point";
  bool strict = false;
};

inline void add_common(CLI::App* sub, CommonFit& c) {
  sub->add_option("--app", c.app, "rfl, qrtf, fdp, fl or lfl")
      ->required()
      ->check(CLI::IsMember({"rfl", "qrtf", "fdp", "fl", "lfl"}));
  sub->add_option("--data", c.data, "input CSV (x,y or x,y,m)")->required();
  sub->add_option("--out", c.out, "output JSON")->required();
  sub->add_option("--q", c.q, "quantile level (qrtf)");
  sub->add_option("--k", c.k, "trend filter order (qrtf)");
  sub->add_option("--a", c.a, "double-Pareto scale (fdp)");
  sub->add_option("--clamp", c.clamp, "variance-mean weight clamp (qrtf)");
  sub->add_option("--max-iters", c.max_iters, "outer iteration cap");
  sub->add_option("--tol", c.tol, "relative objective change for convergence");
  sub->add_option("--trend-solver", c.trend_solver, "inner qrtf solver")
      ->check(CLI::IsMember({"interior-point", "admm"}));
  sub->add_flag("--strict", c.strict, "exit 4 when a fit does not converge");
}

inline SolverConfig solver_config(const CommonFit& c) {
  SolverConfig cfg;
  cfg.max_iters = c.max_iters;
  cfg.tol = c.tol;
  cfg.trend_solver = c.trend_solver == "admm" ? TrendSolver::admm : TrendSolver::interior_point;
  cfg.validate();
  return cfg;
}

inline AppSpec app_spec(const CommonFit& c, double lam) {
  AppSpec s;
  s.app = app_from_string(c.app);
  s.lam = lam;
  s.q = c.q;
  s.k = c.k;
  s.a = c.a;
  s.clamp = c.clamp;
  s.validate();
  return s;
}

inline json config_echo(const CommonFit& c) {
  return {{"app", c.app},       {"data", c.data}, {"q", c.q},         {"k", c.k},
          {"a", c.a},           {"clamp", c.clamp}, {"max_iters", c.max_iters},
          {"tol", c.tol},       {"trend_solver", c.trend_solver},   {"strict", c.strict}};
}

/// Seed recorded in the data file's manifest sidecar, if any.
inline std::optional<std::uint64_t> data_seed(const std::string& data_path) {
  const std::string side = manifest_sidecar(data_path);
  if (!std::filesystem::exists(side)) return std::nullopt;
  return RunManifest::from_json(read_json(side)).seed;
}

inline std::string join_args(int argc, const char* const* argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

struct SimulateArgs {
  std::string app = "rfl";
  int n = 0;
  int m = 25;
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_simulate(const SimulateArgs& a, const std::string& cmdline, std::ostream& log) {
  Phases ph;
  ph.start("simulate");
  const App app = app_from_string(a.app);
  if (app != App::rfl && app != App::qrtf && app != App::fdp) {
    throw RejectedInput("simulate supports rfl, qrtf and fdp");
  }
  const Dataset d = simulate(app, a.n, a.seed, a.m);
  ph.start("write");
  RunManifest man;
  man.command_line = cmdline;
  man.seed = a.seed;
  man.config = {{"app", a.app}, {"n", a.n}, {"seed", a.seed}, {"rng", kRngName}};
  if (app == App::fdp) man.config["m"] = a.m;
  const CsvTable t = dataset_table(d);
  man.timings = ph.timings();
  write_csv(a.out, t, man);
  log << "wrote " << t.size() << " rows to " << a.out << "\n";
  return kOk;
}

inline int cmd_fit(const CommonFit& c, double lam, const std::string& cmdline, std::ostream& log) {
  Phases ph;
  ph.start("read");
  const AppSpec spec = app_spec(c, lam);
  const SolverConfig cfg = solver_config(c);
  const InputData in = read_input(spec.app, c.data);
  const auto seed = data_seed(c.data);
  ph.start("fit");
  const FitResult fit = fit_app(spec, in.y, in.m, cfg);
  ph.start("write");
  json j = fit_to_json(spec, fit);
  if (seed) j["seed"] = *seed;
  RunManifest man;
  man.command_line = cmdline;
  man.seed = seed;
  man.config = config_echo(c);
  man.config["lambda"] = lam;
  man.timings = ph.timings();
  j["manifest"] = man.to_json();
  write_json(c.out, j);
  log << to_string(spec.app) << " lambda=" << lam << " objective=" << fit.objective << " iters=" << fit.iters
      << " df=" << fit.df << (fit.converged ? "" : " (not converged)") << "\n";
  if (c.strict && !fit.converged) return kConvergence;
  return kOk;
}

struct PathArgs {
  std::string lambdas;
  std::string criterion = "aic";
  int folds = 5;
  std::string warm_start;  // empty: fused-lasso for fdp, previous otherwise
  std::string fit_csv;     // empty: <out stem>.selected.csv
};

inline std::string default_fit_csv(const std::string& out) {
  std::filesystem::path p(out);
  p.replace_extension();
  return p.string() + ".selected.csv";
}

inline int cmd_path(const CommonFit& c, const PathArgs& pa, const std::string& cmdline, std::ostream& log) {
  Phases ph;
  ph.start("read");
  const AppSpec spec = app_spec(c, 0.0);
  const SolverConfig cfg = solver_config(c);
  const std::vector<double> grid = parse_lambda_grid(pa.lambdas);
  const InputData in = read_input(spec.app, c.data);
  const auto seed = data_seed(c.data);
  PathOptions opt;
  opt.criterion = criterion_from_string(pa.criterion);
  opt.folds = pa.folds;
  opt.threads = thread_budget();
  if (pa.warm_start.empty()) {
    opt.warm_start = spec.app == App::fdp ? WarmStart::fused_lasso_init : WarmStart::previous;
  } else if (pa.warm_start == "previous") {
    opt.warm_start = WarmStart::previous;
  } else if (pa.warm_start == "fused-lasso") {
    opt.warm_start = WarmStart::fused_lasso_init;
  } else {
    throw RejectedInput("unknown warm start '" + pa.warm_start + "' (expected previous or fused-lasso)");
  }
  ph.start(opt.criterion == Criterion::cv ? "path+cv" : "path");
  const SolutionPath path = solution_path(spec, in.y, in.m, grid, opt, cfg);
  ph.start("write");
  const std::string fit_csv = pa.fit_csv.empty() ? default_fit_csv(c.out) : pa.fit_csv;
  const FitResult& best = path.fits[static_cast<std::size_t>(path.selected)];

  RunManifest man;
  man.command_line = cmdline;
  man.seed = seed;
  man.config = config_echo(c);
  man.config["lambdas"] = pa.lambdas;
  man.config["criterion"] = pa.criterion;
  man.config["folds"] = pa.folds;
  man.config["warm_start"] = opt.warm_start == WarmStart::previous ? "previous" : "fused-lasso";
  man.config["threads"] = opt.threads;

  CsvTable t;
  t.add_column("x", in.x);
  t.add_column("y", in.y);
  if (is_binomial(spec.app)) t.add_column("m", in.m);
  t.add_column("fitted", best.beta);
  for (const auto& [name, v] : in.truth) t.add_column(name, v);

  json j = path_to_json(spec, path, opt.criterion, opt.folds);
  j["fit_csv"] = std::filesystem::path(fit_csv).filename().string();
  if (seed) j["seed"] = *seed;
  man.timings = ph.timings();
  j["manifest"] = man.to_json();
  write_csv(fit_csv, t, man);
  write_json(c.out, j);

  log << to_string(spec.app) << " path over " << grid.size() << " lambdas, " << pa.criterion << " selected index "
      << path.selected << " (lambda=" << grid[static_cast<std::size_t>(path.selected)] << ", df=" << best.df
      << ")\n";
  if (c.strict) {
    for (const auto& f : path.fits) {
      if (!f.converged) return kConvergence;
    }
  }
  return kOk;
}

struct CheckArgs {
  std::string suite = "all";
  double tol = 1e-6;
  std::string out;
};

inline json report_to_json(const CheckReport& r) {
  json items = json::array();
  for (const auto& it : r.items) {
    items.push_back({{"suite", it.suite},
                     {"name", it.name},
                     {"metric", number_or_null(it.metric)},
                     {"tol", it.tol},
                     {"passed", it.passed},
                     {"note", it.note}});
  }
  return {{"passed", r.passed()}, {"seconds", r.seconds}, {"items", items}};
}

inline int cmd_check(const CheckArgs& a, const std::string& cmdline, std::ostream& log) {
  const CheckReport rep = run_checks(suite_from_string(a.suite), a.tol);
  for (const auto& it : rep.items) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e <= %.1e", it.metric, it.tol);
    log << (it.passed ? "PASS " : "FAIL ") << it.suite << ": " << it.name << "  max_gap " << buf;
    if (!it.note.empty()) log << "  (" << it.note << ")";
    log << "\n";
  }
  log << (rep.passed() ? "all checks passed" : "some checks failed") << " in " << rep.seconds << " s\n";
  if (!a.out.empty()) {
    json j = report_to_json(rep);
    RunManifest man;
    man.command_line = cmdline;
    man.config = {{"suite", a.suite}, {"tol", a.tol}};
    man.timings = {{"check", rep.seconds}};
    j["manifest"] = man.to_json();
    write_json(a.out, j);
  }
  return rep.passed() ? kOk : kValidation;
}

/// Parses and runs one subcommand. Errors are reported on `err` and mapped to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"hierarchical-duality estimators: simulate, fit, path, check"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "write a simulated dataset as CSV");
  s->add_option("--app", sim.app, "rfl, qrtf or fdp")->required()->check(CLI::IsMember({"rfl", "qrtf", "fdp"}));
  s->add_option("--n", sim.n, "number of points")->required()->check(CLI::PositiveNumber);
  s->add_option("--m", sim.m, "trials per point (fdp)")->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "RNG seed")->required();
  s->add_option("--out", sim.out, "output CSV")->required();

  CommonFit fit_args;
  double lam = 0.0;
  auto* f = app.add_subcommand("fit", "fit one application at a single lambda");
  add_common(f, fit_args);
  f->add_option("--lambda", lam, "penalty weight")->required()->check(CLI::NonNegativeNumber);

  CommonFit path_common;
  PathArgs pa;
  auto* p = app.add_subcommand("path", "warm-started solution path with AIC or CV selection");
  add_common(p, path_common);
  p->add_option("--lambdas", pa.lambdas, "logspace:<lo>:<hi>:<count> or a decreasing comma list")->required();
  p->add_option("--criterion", pa.criterion, "aic or cv")->check(CLI::IsMember({"aic", "cv"}));
  p->add_option("--folds", pa.folds, "CV folds")->check(CLI::Range(2, 1000000));
  p->add_option("--warm-start", pa.warm_start, "previous or fused-lasso");
  p->add_option("--fit-csv", pa.fit_csv, "plot-ready CSV of the selected fit");

  CheckArgs ca;
  auto* c = app.add_subcommand("check", "run the numerical validation suites");
  c->add_option("--suite", ca.suite, "envelope, prox, conjugate, solver or all")
      ->check(CLI::IsMember({"envelope", "prox", "conjugate", "solver", "all"}));
  c->add_option("--tol", ca.tol, "envelope and conjugate tolerance")->check(CLI::PositiveNumber);
  c->add_option("--out", ca.out, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, err);
    return code == 0 ? kOk : kValidation;
  }

  const std::string cmdline = join_args(argc, argv);
  try {
    if (*s) return cmd_simulate(sim, cmdline, log);
    if (*f) return cmd_fit(fit_args, lam, cmdline, log);
    if (*p) return cmd_path(path_common, pa, cmdline, log);
    if (*c) return cmd_check(ca, cmdline, log);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const MonotonicityViolation& e) {
    err << "error: " << e.what() << "\n";
    return kConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}

}  // namespace hierduals::cli
