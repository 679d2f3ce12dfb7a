#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "hierduals/duality.hpp"
#include "hierduals/losses.hpp"
#include "hierduals/operators.hpp"
#include "hierduals/penalties.hpp"
#include "hierduals/solvers.hpp"

namespace hierduals {

enum class Suite { envelope, prox, conjugate, solver, all };

inline std::string to_string(Suite s) {
  switch (s) {
    case Suite::envelope: return "envelope";
    case Suite::prox: return "prox";
    case Suite::conjugate: return "conjugate";
    case Suite::solver: return "solver";
    case Suite::all: return "all";
  }
  return "?";
}

inline Suite suite_from_string(const std::string& s) {
  for (auto v : {Suite::envelope, Suite::prox, Suite::conjugate, Suite::solver, Suite::all}) {
    if (to_string(v) == s) return v;
  }
  throw RejectedInput("unknown check suite '" + s + "'");
}

struct CheckItem {
  std::string suite;
  std::string name;
  double metric = 0.0;  // worst observed error
  double tol = 0.0;
  bool passed = false;
  std::string note;
};

struct CheckReport {
  std::vector<CheckItem> items;
  double seconds = 0.0;

  bool passed() const {
    for (const auto& it : items) {
      if (!it.passed) return false;
    }
    return !items.empty();
  }

  void append(const CheckReport& other) {
    items.insert(items.end(), other.items.begin(), other.items.end());
    seconds += other.seconds;
  }
};

/// 241 evenly spaced points on [−6, 6] with x = 0 removed.
inline std::vector<double> envelope_x_grid() {
  std::vector<double> xs;
  for (int i = 0; i <= 240; ++i) {
    if (i != 120) xs.push_back(-6.0 + 12.0 * i / 240.0);
  }
  return xs;
}

/// Every declared envelope of the penalty and loss catalogs.
inline std::vector<EnvelopeTarget> envelope_catalog() {
  std::vector<EnvelopeTarget> cat;
  for (const PenaltySpec& p : {PenaltySpec::double_pareto(1.0, 1.0), PenaltySpec::mcp(1.0, 3.0),
                               PenaltySpec::l1(1.0), PenaltySpec::ridge(1.0), PenaltySpec::limited_translation()}) {
    cat.push_back(*declared_envelope(p));
  }
  cat.push_back(huber_envelope(1.0));
  for (double m : {1.0, 4.0}) {
    cat.push_back(logcosh_scale_envelope(m));
    cat.push_back(logcosh_location_envelope(m));
  }
  for (double q : {0.1, 0.5, 0.9}) cat.push_back(check_envelope(q));
  return cat;
}

/// The Gaussian-location members: θ(x) = x²/2 − f(x) must be convex and θ⋆⋆ = θ.
inline std::vector<EnvelopeTarget> location_catalog() {
  std::vector<EnvelopeTarget> out;
  for (auto& t : envelope_catalog()) {
    if (t.family.tag() == FamilyTag::gaussian_location) out.push_back(std::move(t));
  }
  return out;
}

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_;
};

inline std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline CheckItem make_item(const std::string& suite, const std::string& name, double metric, double tol,
                           std::string note = {}) {
  return CheckItem{suite, name, metric, tol, metric <= tol, std::move(note)};
}

}  // namespace detail

inline CheckReport check_envelope_suite(double tol = 1e-6) {
  detail::Stopwatch sw;
  CheckReport rep;
  const auto xs = envelope_x_grid();
  for (const auto& t : envelope_catalog()) {
    const EnvelopeReport r = check_envelope_identity(t, xs, tol);
    CheckItem it = detail::make_item("envelope", t.name, r.max_gap, tol,
                                     "worst x " + detail::fmt_g(r.worst_x) + ", lambda-hat error " +
                                         detail::fmt_g(r.max_lambda_error) + " spacings");
    it.passed = r.passed;
    rep.items.push_back(std::move(it));
  }
  rep.seconds = sw.seconds();
  return rep;
}

/// inf_{x ≥ 0} {λx − φ(x)} by grid search over [0, hi].
inline double concave_dual_numeric(const PenaltySpec& p, double lam, double hi) {
  if (lam <= 0.0 && p.kind == PenaltyKind::double_pareto && p.gamma > 0.0) return -kInf;
  return conjugate_numeric([&](double x) { return penalty_value(p, x); }, lam, GridSpec{0.0, hi, 401, 6},
                           ConjugateSense::concave);
}

inline CheckReport check_conjugate_suite(double tol = 1e-6, double double_tol = 1e-5) {
  detail::Stopwatch sw;
  CheckReport rep;
  for (const PenaltySpec& p : {PenaltySpec::double_pareto(1.0, 1.0), PenaltySpec::mcp(1.0, 3.0)}) {
    double worst = 0.0;
    for (int i = 0; i <= 40; ++i) {
      const double lam = 2.0 * p.gamma * i / 40.0;
      // Double-Pareto's minimizer sits at γ/λ − a.
      const double hi = p.kind == PenaltyKind::double_pareto ? std::max(10.0, 4.0 * p.gamma / std::max(lam, 1e-3))
                                                              : 2.0 * p.a * p.gamma + 1.0;
      const double num = concave_dual_numeric(p, lam, hi);
      const double closed = penalty_dual(p, lam);
      const double err = (num == closed) ? 0.0 : std::abs(num - closed);
      worst = std::max(worst, std::isnan(err) ? kInf : err);
    }
    rep.items.push_back(detail::make_item("conjugate", to_string(p.kind) + " dual on [0, 2 gamma]", worst, tol));
  }
  std::vector<double> x_test;
  for (int i = 0; i <= 24; ++i) x_test.push_back(-6.0 + 0.5 * i);
  for (const auto& t : location_catalog()) {
    auto theta = [&t](double x) { return 0.5 * x * x - t.value(x); };
    const double gap = double_conjugate_gap(theta, ConjugateSense::convex, x_test, GridSpec{-12.0, 12.0, 121, 6},
                                            GridSpec{-12.0, 12.0, 121, 6});
    rep.items.push_back(detail::make_item("conjugate", t.name + " double conjugate", gap, double_tol));
  }
  rep.seconds = sw.seconds();
  return rep;
}

/// Penalty kinds that have a prox.
inline std::vector<PenaltyKind> prox_kinds() {
  return {PenaltyKind::l1, PenaltyKind::ridge, PenaltyKind::double_pareto, PenaltyKind::mcp,
          PenaltyKind::limited_translation};
}

/// Brute-force argmin of (s/2)(x − u)² + φ(x): 5000 points on [−|u|−5, |u|+5], 3 refinements.
inline GridResult prox_brute_force(const PenaltySpec& p, double u, double s) {
  const double r = std::abs(u) + 5.0;
  return grid_minimize([&](double x) { return 0.5 * s * (x - u) * (x - u) + penalty_value(p, x); },
                       GridSpec{-r, r, 5000, 3});
}

/// `count` random prox evaluations cycling through the prox kinds with random
/// hyperparameters; each must match the brute force in argument or objective.
inline CheckReport check_prox_suite(int count = 200, std::uint64_t seed = 20140905, double arg_tol = 1e-4,
                                    double obj_tol = 1e-8) {
  detail::Stopwatch sw;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto kinds = prox_kinds();
  std::vector<double> worst_arg(kinds.size(), 0.0);
  std::vector<double> worst_obj(kinds.size(), 0.0);
  std::vector<int> fails(kinds.size(), 0);
  std::vector<int> draws(kinds.size(), 0);
  for (int i = 0; i < count; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) % kinds.size();
    ++draws[j];
    const double u = -5.0 + 10.0 * unif(gen);
    const double s = 0.2 + 4.8 * unif(gen);
    PenaltySpec p = PenaltySpec::l1(1.0);
    switch (kinds[j]) {
      case PenaltyKind::l1: p = PenaltySpec::l1(0.1 + 2.9 * unif(gen)); break;
      case PenaltyKind::ridge: p = PenaltySpec::ridge(0.1 + 2.9 * unif(gen)); break;
      case PenaltyKind::double_pareto:
        p = PenaltySpec::double_pareto(0.1 + 2.9 * unif(gen), 0.2 + 2.8 * unif(gen));
        break;
      case PenaltyKind::mcp: p = PenaltySpec::mcp(0.1 + 1.9 * unif(gen), 1.1 + 3.9 * unif(gen)); break;
      default: p = PenaltySpec::limited_translation(); break;
    }
    const double x = prox(p, u, s);
    const GridResult b = prox_brute_force(p, u, s);
    const double obj = 0.5 * s * (x - u) * (x - u) + penalty_value(p, x);
    const double darg = std::abs(x - b.argmin);
    const double dobj = std::abs(obj - b.value);
    worst_arg[j] = std::max(worst_arg[j], darg);
    worst_obj[j] = std::max(worst_obj[j], dobj);
    if (!(darg <= arg_tol || dobj <= obj_tol)) ++fails[j];
  }
  CheckReport rep;
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    CheckItem it;
    it.suite = "prox";
    it.name = to_string(kinds[j]) + " prox vs brute force";
    it.metric = worst_arg[j];
    it.tol = arg_tol;
    it.passed = fails[j] == 0;
    it.note = std::to_string(draws[j]) + " draws, " + std::to_string(fails[j]) + " failures, worst objective gap " + detail::fmt_g(worst_obj[j]);
    rep.items.push_back(std::move(it));
  }
  const double x = prox_double_pareto_closed_form(3.0, 1.0, 1.0, 1.0);
  rep.items.push_back(detail::make_item("prox", "double-pareto closed form at u=3", std::abs(x - (1.0 + std::sqrt(3.0))),
                                        1e-10));
  rep.seconds = sw.seconds();
  return rep;
}

/// KKT residual of argmin Σ (ω_i/2)(z_i − β_i)² + lam‖D⁽ᵏ⁺¹⁾β‖₁ at β. The dual v is the
/// least-squares solution of Dᵀv = Ω(z − β); the residual is the larger of the
/// stationarity misfit and the subgradient violation (|v_j| ≤ lam where (Dβ)_j ≈ 0,
/// v_j = lam·sgn((Dβ)_j) elsewhere). Dense, for small n.
inline double trend_filter_kkt_residual(const Eigen::VectorXd& z, const Eigen::VectorXd& omega, int k, double lam,
                                        const Eigen::VectorXd& beta, double zero_tol = 1e-7) {
  const Eigen::MatrixXd d = DifferenceOperator(static_cast<int>(z.size()), k).dense();
  const Eigen::VectorXd g = omega.cwiseProduct(z - beta);
  const Eigen::VectorXd v = (d * d.transpose()).ldlt().solve(d * g);
  double res = (d.transpose() * v - g).lpNorm<Eigen::Infinity>();
  const Eigen::VectorXd db = d * beta;
  for (Eigen::Index j = 0; j < db.size(); ++j) {
    if (std::abs(db[j]) > zero_tol) {
      res = std::max(res, std::abs(v[j] - lam * sgn(db[j])));
    } else {
      res = std::max(res, std::abs(v[j]) - lam);
    }
  }
  return res;
}

inline CheckReport check_solver_suite(int instances = 50, std::uint64_t seed = 77, double tol = 1e-6) {
  detail::Stopwatch sw;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SolverConfig admm;
  admm.trend_solver = TrendSolver::admm;
  admm.inner_max_iters = 200000;
  admm.inner_tol = 1e-13;
  double worst_dp = 0.0;
  double worst_kkt_ip = 0.0;
  double worst_kkt_admm = 0.0;
  for (int t = 0; t < instances; ++t) {
    const int n = 5 + static_cast<int>(unif(gen) * 46.0);
    Eigen::VectorXd z(n), omega(n), u(n - 1);
    for (int i = 0; i < n; ++i) {
      z[i] = -3.0 + 6.0 * unif(gen);
      omega[i] = 0.5 + 1.5 * unif(gen);
    }
    for (int i = 0; i < n - 1; ++i) u[i] = 0.05 + 1.5 * unif(gen);
    const Eigen::VectorXd dp = weighted_fused_lasso(z, omega, u);
    const Eigen::VectorXd ad = trend_filter_admm(z, omega, 0, u, admm, TrendSplitting::soft_threshold);
    worst_dp = std::max(worst_dp, (dp - ad).lpNorm<Eigen::Infinity>());

    const int k = t % 3;
    if (n < k + 3) continue;
    const double lam = 0.1 + 2.0 * unif(gen);
    SolverConfig ip;
    ip.inner_tol = 1e-12;
    const Eigen::VectorXd b_ip = solve_trend_filter(z, omega, k, lam, ip);
    worst_kkt_ip = std::max(worst_kkt_ip, trend_filter_kkt_residual(z, omega, k, lam, b_ip));
    const Eigen::VectorXd b_ad = solve_trend_filter(z, omega, k, lam, admm);
    worst_kkt_admm = std::max(worst_kkt_admm, trend_filter_kkt_residual(z, omega, k, lam, b_ad));
  }
  CheckReport rep;
  rep.items.push_back(detail::make_item("solver", "fused lasso DP vs long-run ADMM", worst_dp, tol));
  rep.items.push_back(detail::make_item("solver", "trend filter KKT (interior point)", worst_kkt_ip, tol));
  rep.items.push_back(detail::make_item("solver", "trend filter KKT (ADMM)", worst_kkt_admm, tol));
  rep.seconds = sw.seconds();
  return rep;
}

inline CheckReport run_checks(Suite s, double tol = 1e-6) {
  CheckReport rep;
  if (s == Suite::envelope || s == Suite::all) rep.append(check_envelope_suite(tol));
  if (s == Suite::conjugate || s == Suite::all) rep.append(check_conjugate_suite(tol));
  if (s == Suite::prox || s == Suite::all) rep.append(check_prox_suite());
  if (s == Suite::solver || s == Suite::all) rep.append(check_solver_suite(50, 77, tol));
  return rep;
}

}  // namespace hierduals
