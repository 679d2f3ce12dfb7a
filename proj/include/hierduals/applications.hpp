#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "hierduals/errors.hpp"
#include "hierduals/losses.hpp"
#include "hierduals/operators.hpp"
#include "hierduals/penalties.hpp"
#include "hierduals/solvers.hpp"

namespace hierduals {

/// The three estimators, plus the two convex baselines they are compared against:
/// the Gaussian fused lasso (fl) and the logistic fused lasso (lfl).
enum class App { rfl, qrtf, fdp, fl, lfl };

inline std::string to_string(App a) {
  switch (a) {
    case App::rfl: return "rfl";
    case App::qrtf: return "qrtf";
    case App::fdp: return "fdp";
    case App::fl: return "fl";
    case App::lfl: return "lfl";
  }
  return "unknown";
}

inline App app_from_string(const std::string& s) {
  for (auto a : {App::rfl, App::qrtf, App::fdp, App::fl, App::lfl}) {
    if (to_string(a) == s) return a;
  }
  throw RejectedInput("unknown app '" + s + "' (expected rfl, qrtf, fdp, fl or lfl)");
}

inline bool is_binomial(App a) { return a == App::fdp || a == App::lfl; }

struct AppSpec {
  App app = App::rfl;
  double lam = 1.0;
  double q = 0.9;  // qrtf
  int k = 2;       // qrtf
  double a = 1.0;  // fdp
  double clamp = kDefaultQuantileClamp;  // qrtf weight clamp

  static AppSpec rfl(double lam) { return make(App::rfl, lam); }
  static AppSpec qrtf(double lam, double q = 0.9, int k = 2) {
    AppSpec s = make(App::qrtf, lam);
    s.q = q;
    s.k = k;
    s.validate();
    return s;
  }
  static AppSpec fdp(double lam, double a = 1.0) {
    AppSpec s = make(App::fdp, lam);
    s.a = a;
    s.validate();
    return s;
  }
  static AppSpec fl(double lam) { return make(App::fl, lam); }
  static AppSpec lfl(double lam) { return make(App::lfl, lam); }

  AppSpec with_lambda(double l) const {
    AppSpec s = *this;
    s.lam = l;
    s.validate();
    return s;
  }

  void validate() const {
    detail::require(std::isfinite(lam) && lam >= 0.0, "lambda must be finite and >= 0");
    if (app == App::qrtf) {
      detail::require(q > 0.0 && q < 1.0, "q must lie in (0, 1)");
      detail::require(k >= 1, "trend filter order k must be >= 1");
      detail::require(clamp > 0.0, "clamp must be > 0");
    }
    if (app == App::fdp) detail::require(std::isfinite(a) && a > 0.0, "double-Pareto scale a must be > 0");
  }

 private:
  static AppSpec make(App app, double lam) {
    AppSpec s;
    s.app = app;
    s.lam = lam;
    s.validate();
    return s;
  }
};

// ---------------------------------------------------------------------------
// Degrees of freedom.

/// Relative tolerance for fused levels and knots.
inline constexpr double kLevelTol = 1e-6;

inline double level_tolerance(const Eigen::VectorXd& beta) {
  return kLevelTol * std::max(1.0, beta.size() ? beta.cwiseAbs().maxCoeff() : 0.0);
}

/// Number of runs of adjacent values within 1e-6·max(1, ‖β‖∞) of each other.
inline int distinct_levels(const Eigen::VectorXd& beta) {
  if (beta.size() == 0) return 0;
  const double tol = level_tolerance(beta);
  int levels = 1;
  for (Eigen::Index i = 0; i + 1 < beta.size(); ++i) {
    if (std::abs(beta[i + 1] - beta[i]) > tol) ++levels;
  }
  return levels;
}

/// Nonzero entries of D⁽ᵏ⁺¹⁾β, at the same relative tolerance as distinct_levels.
inline int count_knots(const Eigen::VectorXd& beta, int k) {
  const Eigen::VectorXd d = DifferenceOperator(static_cast<int>(beta.size()), k).apply(beta);
  const double tol = level_tolerance(beta);
  return static_cast<int>((d.array().abs() > tol).count());
}

inline double aic(const FitResult& fit, double loss_value_at_fit) {
  return 2.0 * loss_value_at_fit + 2.0 * fit.df;
}

/// Data term of each app; binomial apps use the negative log-likelihood without constants.
inline double app_loss(const AppSpec& spec, const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                       const Eigen::VectorXd& beta) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = y[i] - beta[i];
    switch (spec.app) {
      case App::rfl: total += huber(r); break;
      case App::qrtf: total += check_loss(r, spec.q); break;
      case App::fl: total += 0.5 * r * r; break;
      case App::fdp:
      case App::lfl: total += m[i] * log1p_exp(beta[i]) - y[i] * beta[i]; break;
    }
  }
  return total;
}

inline double total_variation(const Eigen::VectorXd& beta) {
  double tv = 0.0;
  for (Eigen::Index i = 0; i + 1 < beta.size(); ++i) tv += std::abs(beta[i + 1] - beta[i]);
  return tv;
}

inline double double_pareto_fusion(const Eigen::VectorXd& beta, double a) {
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < beta.size(); ++i) total += std::log1p(std::abs(beta[i + 1] - beta[i]) / a);
  return total;
}

namespace detail {

inline void require_binomial(const Eigen::VectorXd& y, const Eigen::VectorXd& m) {
  require(m.size() == y.size(), "binomial data needs one trial count per response");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    require(std::isfinite(y[i]) && std::isfinite(m[i]), "binomial data must be finite");
    require(m[i] >= 1.0 && m[i] == std::floor(m[i]), "trial counts must be positive integers");
    require(y[i] >= 0.0 && y[i] <= m[i] && y[i] == std::floor(y[i]), "successes must be integers in [0, m]");
  }
}

inline void require_finite(const Eigen::VectorXd& y) {
  require(y.allFinite(), "responses must be finite");
}

inline SolverConfig inner_config(const SolverConfig& cfg) {
  SolverConfig inner = cfg;
  inner.max_iters = cfg.inner_max_iters;
  inner.tol = cfg.inner_tol;
  inner.record_trace = false;
  return inner;
}

inline FitResult finish(const MMOutcome& mm, Eigen::VectorXd beta) {
  FitResult res;
  res.beta = std::move(beta);
  res.objective = mm.objective;
  res.trace = mm.trace;
  res.iters = mm.iters;
  res.converged = mm.converged;
  return res;
}

/// Empirical logit log((y + ½)/(m − y + ½)).
inline Eigen::VectorXd empirical_logit(const Eigen::VectorXd& y, const Eigen::VectorXd& m) {
  Eigen::VectorXd b(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) b[i] = std::log((y[i] + 0.5) / (m[i] - y[i] + 0.5));
  return b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Estimators.

/// Gaussian fused lasso ½‖y − β‖² + λ‖D⁽¹⁾β‖₁, solved exactly.
inline FitResult fit_fl(const Eigen::VectorXd& y, double lam) {
  detail::require(y.size() >= 2, "fused lasso needs at least two observations");
  detail::require_finite(y);
  detail::require(lam >= 0.0 && std::isfinite(lam), "lambda must be finite and >= 0");
  const Eigen::Index n = y.size();
  FitResult res;
  res.beta = weighted_fused_lasso(y, Eigen::VectorXd::Ones(n), Eigen::VectorXd::Constant(n - 1, lam));
  res.objective = 0.5 * (y - res.beta).squaredNorm() + lam * total_variation(res.beta);
  res.trace = {res.objective};
  res.iters = 1;
  res.converged = true;
  res.df = distinct_levels(res.beta);
  res.aic = aic(res, 0.5 * (y - res.beta).squaredNorm());
  return res;
}

/// Σ H(y_i − β_i) + λ‖D⁽¹⁾β‖₁ by alternating the Huber location update and an exact
/// fused lasso on the working response y − u. Default start: β = y.
inline FitResult fit_rfl(const Eigen::VectorXd& y, double lam, const SolverConfig& cfg,
                         const std::optional<Eigen::VectorXd>& init = {}) {
  detail::require(y.size() >= 2, "robust fused lasso needs at least two observations");
  detail::require_finite(y);
  detail::require(lam >= 0.0 && std::isfinite(lam), "lambda must be finite and >= 0");
  const Eigen::Index n = y.size();
  const LossSpec loss = LossSpec::huber(y);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd edges = Eigen::VectorXd::Constant(n - 1, lam);

  struct State {
    Eigen::VectorXd beta, u;
  };
  State st{init.value_or(y), Eigen::VectorXd::Zero(n)};
  detail::require(st.beta.size() == n, "initial value has wrong length");
  std::function<double(const State&)> objective = [&](const State& s) {
    return loss_value(loss, s.beta) + lam * total_variation(s.beta);
  };
  std::vector<MMStep<State>> steps{
      {"huber-location-update", [&](State& s) { s.u = location_envelope_update(loss, s.beta); }},
      {"fused-lasso", [&](State& s) { s.beta = weighted_fused_lasso(y - s.u, ones, edges); }},
  };
  const MMOutcome mm = mm_driver(objective, steps, st, cfg);
  FitResult res = detail::finish(mm, st.beta);
  res.aux["u"] = location_envelope_update(loss, res.beta);
  res.df = distinct_levels(res.beta);
  res.aic = aic(res, loss_value(loss, res.beta));
  return res;
}

/// Check loss (|r| smoothed below 1/clamp) + λ‖D⁽ᵏ⁺¹⁾β‖₁ by alternating the variance-mean
/// (ω, z) update and a weighted trend filter. The trend-filter step is kept only when
/// it does not increase the quadratic surrogate, so the trace is monotone even when the
/// inner ADMM stops early. Default start: the least-squares trend filter at the same λ.
inline FitResult fit_qrtf(const Eigen::VectorXd& y, double q, int k, double lam, const SolverConfig& cfg,
                          const std::optional<Eigen::VectorXd>& init = {}, double clamp = kDefaultQuantileClamp) {
  detail::require(k >= 1, "trend filter order k must be >= 1");
  detail::require(y.size() >= k + 2, "trend filter of order k needs at least k + 2 observations");
  detail::require_finite(y);
  detail::require(lam >= 0.0 && std::isfinite(lam), "lambda must be finite and >= 0");
  const Eigen::Index n = y.size();
  const LossSpec loss = LossSpec::check(y, q);
  const DifferenceOperator d(static_cast<int>(n), k);
  const SolverConfig inner = detail::inner_config(cfg);

  struct State {
    Eigen::VectorXd beta, omega, z;
    AdmmState admm;
  };
  State st;
  st.beta = init ? *init : solve_trend_filter(y, Eigen::VectorXd::Ones(n), k, lam, inner);
  detail::require(st.beta.size() == n, "initial value has wrong length");
  auto penalty = [&](const Eigen::VectorXd& b) { return lam * d.apply(b).lpNorm<1>(); };
  std::function<double(const State&)> objective = [&](const State& s) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += check_loss_smoothed(y[i] - s.beta[i], q, clamp);
    return total + penalty(s.beta);
  };
  auto surrogate = [&](const State& s, const Eigen::VectorXd& b) {
    return 0.5 * (s.omega.array() * (s.z - b).array().square()).sum() + penalty(b);
  };
  std::vector<MMStep<State>> steps{
      {"variance-mean-update",
       [&](State& s) {
         VarianceMeanWeights w = variance_mean_update(loss, s.beta, clamp);
         s.omega = std::move(w.omega);
         s.z = std::move(w.z);
       }},
      {"weighted-trend-filter",
       [&](State& s) {
         Eigen::VectorXd cand = solve_trend_filter(s.z, s.omega, k, lam, inner, &s.admm);
         if (surrogate(s, cand) <= surrogate(s, s.beta)) s.beta = std::move(cand);
       }},
  };
  const MMOutcome mm = mm_driver(objective, steps, st, cfg);
  FitResult res = detail::finish(mm, st.beta);
  res.aux["omega"] = st.omega;
  res.aux["z"] = st.z;
  res.df = count_knots(res.beta, k) + k + 1;
  res.aic = aic(res, loss_value(loss, res.beta));
  return res;
}

/// Binomial-logit likelihood + λ Σ |Δβ| (logistic fused lasso).
inline FitResult fit_lfl(const Eigen::VectorXd& y, const Eigen::VectorXd& m, double lam, const SolverConfig& cfg,
                         const std::optional<Eigen::VectorXd>& init = {}) {
  detail::require(y.size() >= 2, "logistic fused lasso needs at least two observations");
  detail::require_binomial(y, m);
  detail::require(lam >= 0.0 && std::isfinite(lam), "lambda must be finite and >= 0");
  const Eigen::Index n = y.size();
  FitResult res = logistic_fused_lasso(y, m, Eigen::VectorXd::Constant(n - 1, lam),
                                       init.value_or(detail::empirical_logit(y, m)), cfg);
  res.df = distinct_levels(res.beta);
  res.aic = aic(res, binomial_nll(y, m, res.beta));
  return res;
}

/// Binomial-logit likelihood + λ Σ log(1 + |Δβ|/a). Alternates the edge update
/// u_i = λ/(a + |Δβ_i|) with an inner logistic fused lasso. Default start: the
/// logistic fused lasso at edge weight λ/a.
inline FitResult fit_fdp(const Eigen::VectorXd& y, const Eigen::VectorXd& m, double lam, double a,
                         const SolverConfig& cfg, const std::optional<Eigen::VectorXd>& init = {}) {
  detail::require(y.size() >= 2, "fused double-Pareto needs at least two observations");
  detail::require_binomial(y, m);
  detail::require(lam >= 0.0 && std::isfinite(lam), "lambda must be finite and >= 0");
  detail::require(a > 0.0 && std::isfinite(a), "double-Pareto scale a must be > 0");
  const Eigen::Index n = y.size();
  const SolverConfig inner = detail::inner_config(cfg);
  const PenaltySpec edge_penalty = PenaltySpec::double_pareto(lam, a);

  struct State {
    Eigen::VectorXd beta, u;
  };
  State st;
  st.beta = init ? *init : fit_lfl(y, m, lam / a, inner).beta;
  detail::require(st.beta.size() == n, "initial value has wrong length");
  st.u = Eigen::VectorXd::Zero(n - 1);
  std::function<double(const State&)> objective = [&](const State& s) {
    return binomial_nll(y, m, s.beta) + lam * double_pareto_fusion(s.beta, a);
  };
  std::vector<MMStep<State>> steps{
      {"double-pareto-edge-update",
       [&](State& s) {
         for (Eigen::Index i = 0; i + 1 < n; ++i) s.u[i] = penalty_deriv(edge_penalty, std::abs(s.beta[i + 1] - s.beta[i]));
       }},
      {"logistic-fused-lasso", [&](State& s) { s.beta = logistic_fused_lasso(y, m, s.u, s.beta, inner).beta; }},
  };
  const MMOutcome mm = mm_driver(objective, steps, st, cfg);
  FitResult res = detail::finish(mm, st.beta);
  steps[0].apply(st);  // edge weights at the returned fit
  res.aux["u"] = st.u;
  res.df = distinct_levels(res.beta);
  res.aic = aic(res, binomial_nll(y, m, res.beta));
  return res;
}

/// Dispatch on spec.app; `m` is ignored by the Gaussian-type apps.
inline FitResult fit_app(const AppSpec& spec, const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                         const SolverConfig& cfg, const std::optional<Eigen::VectorXd>& init = {}) {
  spec.validate();
  switch (spec.app) {
    case App::rfl: return fit_rfl(y, spec.lam, cfg, init);
    case App::qrtf: return fit_qrtf(y, spec.q, spec.k, spec.lam, cfg, init, spec.clamp);
    case App::fdp: return fit_fdp(y, m, spec.lam, spec.a, cfg, init);
    case App::fl: return fit_fl(y, spec.lam);
    case App::lfl: return fit_lfl(y, m, spec.lam, cfg, init);
  }
  throw RejectedInput("unknown app");
}

// ---------------------------------------------------------------------------
// Model selection.

enum class Criterion { aic, cv };

inline std::string to_string(Criterion c) { return c == Criterion::aic ? "aic" : "cv"; }

inline Criterion criterion_from_string(const std::string& s) {
  if (s == "aic") return Criterion::aic;
  if (s == "cv") return Criterion::cv;
  throw RejectedInput("unknown criterion '" + s + "' (expected aic or cv)");
}

enum class WarmStart {
  previous,          // start at the previous λ's solution
  fused_lasso_init,  // fdp only: start at the logistic fused lasso at the same λ
};

struct PathOptions {
  Criterion criterion = Criterion::aic;
  int folds = 5;
  WarmStart warm_start = WarmStart::previous;
  int threads = 1;  // CV folds only
};

struct SolutionPath {
  std::vector<double> lambdas;
  std::vector<FitResult> fits;
  std::vector<double> criterion_values;
  std::vector<std::string> init_source;  // "default", "previous" or "fused-lasso"
  int selected = 0;
};

/// argmin with ties (relative 1e-10) resolved toward the earlier, i.e. larger, λ.
inline int select_min(const std::vector<double>& values) {
  detail::require(!values.empty(), "cannot select from an empty table");
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    const double tie = 1e-10 * std::max(1.0, std::abs(values[best]));
    if (values[i] < values[best] - tie) best = i;
  }
  return best;
}

inline void require_decreasing(const std::vector<double>& lambdas) {
  detail::require(!lambdas.empty(), "lambda grid is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    detail::require(std::isfinite(lambdas[i]) && lambdas[i] >= 0.0, "lambda values must be finite and >= 0");
    if (i > 0) detail::require(lambdas[i] < lambdas[i - 1], "lambda grid must be strictly decreasing");
  }
}

namespace detail {

/// Fits every λ in order with warm starts; no criterion.
inline SolutionPath fit_path(const AppSpec& spec, const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                             const std::vector<double>& lambdas, const SolverConfig& cfg, WarmStart warm) {
  require_decreasing(lambdas);
  if (warm == WarmStart::fused_lasso_init) {
    require(spec.app == App::fdp, "fused-lasso-init warm starts apply to fdp only");
  }
  SolutionPath path;
  path.lambdas = lambdas;
  std::optional<Eigen::VectorXd> prev;
  std::optional<Eigen::VectorXd> prev_lfl;
  for (double lam : lambdas) {
    const AppSpec s = spec.with_lambda(lam);
    if (warm == WarmStart::fused_lasso_init) {
      const FitResult init = fit_lfl(y, m, lam / spec.a, inner_config(cfg), prev_lfl);
      prev_lfl = init.beta;
      path.fits.push_back(fit_app(s, y, m, cfg, init.beta));
      path.init_source.emplace_back("fused-lasso");
    } else {
      path.fits.push_back(fit_app(s, y, m, cfg, prev));
      path.init_source.emplace_back(prev ? "previous" : "default");
    }
    prev = path.fits.back().beta;
  }
  return path;
}

/// Linear interpolation of fitted values at retained indices onto all of 0..n−1;
/// constant beyond the first and last retained index.
inline Eigen::VectorXd interpolate_fit(const std::vector<int>& idx, const Eigen::VectorXd& fitted, int n) {
  Eigen::VectorXd out(n);
  std::size_t j = 0;
  for (int i = 0; i < n; ++i) {
    while (j + 1 < idx.size() && idx[j + 1] <= i) ++j;
    if (i <= idx.front()) {
      out[i] = fitted[0];
    } else if (i >= idx.back()) {
      out[i] = fitted[fitted.size() - 1];
    } else {
      const double t = static_cast<double>(i - idx[j]) / (idx[j + 1] - idx[j]);
      out[i] = (1.0 - t) * fitted[j] + t * fitted[j + 1];
    }
  }
  return out;
}

}  // namespace detail

struct CVResult {
  double best_lambda = 0.0;
  int best_index = 0;
  std::vector<double> lambdas;
  std::vector<double> cv_loss;  // summed held-out loss per λ
};

/// K-fold CV with folds i mod K. Each fold's path is warm-started along the grid;
/// held-out points are predicted by linear interpolation between retained neighbours.
/// Folds may run on up to `threads` workers; losses are summed in fold order, so the
/// result does not depend on the thread count.
inline CVResult kfold_cv(const AppSpec& spec, const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                         const std::vector<double>& lambdas, int folds, const SolverConfig& cfg, int threads = 1) {
  require_decreasing(lambdas);
  const int n = static_cast<int>(y.size());
  detail::require(folds >= 2, "cross validation needs at least two folds");
  detail::require(folds <= n, "more folds than observations");
  const bool binom = is_binomial(spec.app);
  if (binom) detail::require(m.size() == n, "binomial data needs m with the same length as y");
  const WarmStart warm = spec.app == App::fdp ? WarmStart::fused_lasso_init : WarmStart::previous;

  auto run_fold = [&](int f) {
    std::vector<int> train;
    std::vector<int> test;
    for (int i = 0; i < n; ++i) (i % folds == f ? test : train).push_back(i);
    detail::require(train.size() >= 2, "a fold leaves fewer than two training points");
    Eigen::VectorXd yt(train.size());
    Eigen::VectorXd mt(binom ? train.size() : 0);
    for (std::size_t j = 0; j < train.size(); ++j) {
      yt[j] = y[train[j]];
      if (binom) mt[j] = m[train[j]];
    }
    Eigen::VectorXd yh(test.size());
    Eigen::VectorXd mh(binom ? test.size() : 0);
    for (std::size_t j = 0; j < test.size(); ++j) {
      yh[j] = y[test[j]];
      if (binom) mh[j] = m[test[j]];
    }
    const SolutionPath path = detail::fit_path(spec, yt, mt, lambdas, cfg, warm);
    std::vector<double> loss(lambdas.size());
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      const Eigen::VectorXd all = detail::interpolate_fit(train, path.fits[l].beta, n);
      Eigen::VectorXd pred(test.size());
      for (std::size_t j = 0; j < test.size(); ++j) pred[j] = all[test[j]];
      loss[l] = app_loss(spec, yh, mh, pred);
    }
    return loss;
  };

  std::vector<std::vector<double>> per_fold(folds);
  const int workers = std::clamp(threads, 1, folds);
  if (workers == 1) {
    for (int f = 0; f < folds; ++f) per_fold[f] = run_fold(f);
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(folds);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int f = next++; f < folds; f = next++) {
          try {
            per_fold[f] = run_fold(f);
          } catch (...) {
            errors[f] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  CVResult out;
  out.lambdas = lambdas;
  out.cv_loss.assign(lambdas.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    for (std::size_t l = 0; l < lambdas.size(); ++l) out.cv_loss[l] += per_fold[f][l];
  }
  out.best_index = select_min(out.cv_loss);
  out.best_lambda = lambdas[out.best_index];
  return out;
}

/// Warm-started path over a strictly decreasing grid, scored by AIC or K-fold CV.
inline SolutionPath solution_path(const AppSpec& spec, const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                                  const std::vector<double>& lambdas, const PathOptions& opt, const SolverConfig& cfg) {
  SolutionPath path = detail::fit_path(spec, y, m, lambdas, cfg, opt.warm_start);
  if (opt.criterion == Criterion::aic) {
    for (const FitResult& f : path.fits) path.criterion_values.push_back(f.aic);
  } else {
    path.criterion_values = kfold_cv(spec, y, m, lambdas, opt.folds, cfg, opt.threads).cv_loss;
  }
  path.selected = select_min(path.criterion_values);
  return path;
}

// ---------------------------------------------------------------------------
// Simulation.

inline constexpr const char* kRngName = "mt19937_64";

/// Deterministic variates from a 64-bit Mersenne Twister; the transforms are
/// written out so that datasets are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Box–Muller; one normal per pair of uniforms.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Student t with 3 degrees of freedom: Z / sqrt(χ²₃ / 3).
  double student_t3() {
    const double z = normal();
    double chi2 = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double g = normal();
      chi2 += g * g;
    }
    return z / std::sqrt(chi2 / 3.0);
  }

  /// Sum of m Bernoulli(p) draws.
  int binomial(int m, double p) {
    int s = 0;
    for (int j = 0; j < m; ++j) s += uniform() < p ? 1 : 0;
    return s;
  }

 private:
  std::mt19937_64 gen_;
};

struct Dataset {
  App app = App::rfl;
  std::uint64_t seed = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd m;      // fdp
  Eigen::VectorXd truth;  // rfl: β, qrtf: mean, fdp: log-odds
  Eigen::VectorXd sigma;  // qrtf
};

inline constexpr double kRflLevels[5] = {0.0, 4.0, 1.0, -3.0, 0.0};
inline constexpr double kFdpLevels[5] = {-2.0, 1.0, -1.0, 2.0, 0.0};

inline double fifths_level(const double (&levels)[5], double x) {
  const int j = std::clamp(static_cast<int>(std::floor(5.0 * x)), 0, 4);
  return levels[j];
}

inline double qrtf_mean(double x) { return 5.0 * std::sin(2.0 * std::numbers::pi * x); }
inline double qrtf_sigma(double x) { return 0.5 + std::exp(1.5 * std::sin(4.0 * std::numbers::pi * x)); }

/// rfl: x_i = (i + ½)/n, levels (0, 4, 1, −3, 0) on fifths, unscaled t₃ noise.
/// qrtf: x_i = i/(n − 1), y = 5 sin(2πx) + σ(x)Z with σ(x) = 0.5 + exp(1.5 sin 4πx).
/// fdp: x_i = (i + ½)/n, log-odds (−2, 1, −1, 2, 0) on fifths, y ~ Bin(m, p).
inline Dataset simulate(App app, int n, std::uint64_t seed, int m = 25) {
  detail::require(n >= 2, "simulation needs n >= 2");
  detail::require(app == App::rfl || app == App::qrtf || app == App::fdp, "simulate supports rfl, qrtf and fdp");
  if (app == App::fdp) detail::require(m >= 1, "binomial trials m must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.app = app;
  d.seed = seed;
  d.x.resize(n);
  d.y.resize(n);
  d.truth.resize(n);
  if (app == App::qrtf) d.sigma.resize(n);
  if (app == App::fdp) d.m = Eigen::VectorXd::Constant(n, m);
  for (int i = 0; i < n; ++i) {
    switch (app) {
      case App::rfl:
        d.x[i] = (i + 0.5) / n;
        d.truth[i] = fifths_level(kRflLevels, d.x[i]);
        d.y[i] = d.truth[i] + rng.student_t3();
        break;
      case App::qrtf:
        d.x[i] = static_cast<double>(i) / (n - 1);
        d.truth[i] = qrtf_mean(d.x[i]);
        d.sigma[i] = qrtf_sigma(d.x[i]);
        d.y[i] = d.truth[i] + d.sigma[i] * rng.normal();
        break;
      case App::fdp:
        d.x[i] = (i + 0.5) / n;
        d.truth[i] = fifths_level(kFdpLevels, d.x[i]);
        d.y[i] = rng.binomial(m, logistic(d.truth[i]));
        break;
      default: break;
    }
  }
  return d;
}

inline double mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  detail::require(a.size() == b.size() && a.size() > 0, "mse needs equal nonempty vectors");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

/// Standard normal 0.9 quantile.
inline constexpr double kNormalQ90 = 1.2815515655446004;

/// 10^e for e from hi_exp down to lo_exp (decreasing, as paths expect).
inline std::vector<double> logspace(double lo_exp, double hi_exp, int count) {
  detail::require(count >= 1, "logspace count must be >= 1");
  std::vector<double> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double e = count == 1 ? hi_exp : hi_exp - (hi_exp - lo_exp) * i / (count - 1);
    out.push_back(std::pow(10.0, e));
  }
  return out;
}

}  // namespace hierduals
