#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hierduals/errors.hpp"
#include "hierduals/losses.hpp"
#include "hierduals/operators.hpp"
#include "hierduals/penalties.hpp"

namespace hierduals {

/// Inner solver used for weighted trend filtering inside the quantile MM.
enum class TrendSolver { interior_point, admm };

struct SolverConfig {
  int max_iters = 500;
  double tol = 1e-8;  // relative objective change
  int inner_max_iters = 2000;
  double inner_tol = 1e-10;
  std::optional<double> admm_rho;  // nullopt: ρ = λ
  bool record_trace = true;
  /// Proximal gradient only: additionally require ‖x⁺ − x‖₂ ≤ step_tol (0 disables).
  double step_tol = 0.0;
  /// Allowed objective increase per MM step, relative to max(1, |f|).
  double monotone_slack = 1e-10;
  TrendSolver trend_solver = TrendSolver::interior_point;

  void validate() const {
    detail::require(max_iters > 0, "max_iters must be positive");
    detail::require(inner_max_iters > 0, "inner_max_iters must be positive");
    detail::require(tol > 0.0, "tol must be > 0");
    detail::require(inner_tol > 0.0, "inner_tol must be > 0");
    detail::require(step_tol >= 0.0, "step_tol must be >= 0");
    detail::require(monotone_slack >= 0.0, "monotone_slack must be >= 0");
    if (admm_rho) detail::require(*admm_rho > 0.0, "admm_rho must be > 0");
  }
};

struct FitResult {
  Eigen::VectorXd beta;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> trace;
  int iters = 0;
  bool converged = false;
  int df = 0;
  double aic = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, Eigen::VectorXd> aux;
};

inline double relative_change(double before, double after) {
  return std::abs(before - after) / std::max(1.0, std::abs(before));
}

// ---------------------------------------------------------------------------
// Weighted 1-D fused lasso by dynamic programming.
//
// The derivative of each forward value function is piecewise linear and
// increasing. It is stored as a deque of knots (position, slope jump,
// intercept jump) between a left and a right linear base; the message to the
// next node clips it to [−u, u], and the clip points bound the backtrack.

namespace detail {
inline Eigen::VectorXd fused_lasso_chain(const Eigen::VectorXd& z, const Eigen::VectorXd& omega,
                                         const Eigen::VectorXd& u_edges);
}  // namespace detail

/// argmin_β Σ (ω_i/2)(z_i − β_i)² + Σ u_i |β_{i+1} − β_i|, exactly.
inline Eigen::VectorXd weighted_fused_lasso(const Eigen::VectorXd& z, const Eigen::VectorXd& omega,
                                            const Eigen::VectorXd& u_edges) {
  const int n = static_cast<int>(z.size());
  detail::require(n >= 1, "fused lasso needs at least one observation");
  detail::require(omega.size() == n, "fused lasso weights must match the response length");
  detail::require(u_edges.size() == n - 1, "fused lasso needs one edge weight per adjacent pair");
  for (int i = 0; i < n; ++i) {
    detail::require(std::isfinite(z[i]), "fused lasso response must be finite");
    detail::require(omega[i] > 0.0 && std::isfinite(omega[i]), "fused lasso weights must be positive");
  }
  for (int i = 0; i + 1 < n; ++i) {
    detail::require(u_edges[i] >= 0.0 && std::isfinite(u_edges[i]), "edge weights must be non-negative");
  }
  // A zero edge decouples the chain; solving the pieces separately keeps them exact.
  Eigen::VectorXd beta(n);
  int start = 0;
  for (int i = 0; i < n; ++i) {
    if (i + 1 < n && u_edges[i] > 0.0) continue;
    const int len = i + 1 - start;
    beta.segment(start, len) = detail::fused_lasso_chain(z.segment(start, len), omega.segment(start, len),
                                                         u_edges.segment(start, std::max(0, len - 1)));
    start = i + 1;
  }
  return beta;
}

namespace detail {

inline Eigen::VectorXd fused_lasso_chain(const Eigen::VectorXd& z, const Eigen::VectorXd& omega,
                                         const Eigen::VectorXd& u_edges) {
  const int n = static_cast<int>(z.size());
  Eigen::VectorXd beta(n);
  if (n == 1) {
    beta[0] = z[0];
    return beta;
  }

  struct Knot {
    double x, da, db;
  };
  std::vector<Knot> kn(2 * static_cast<std::size_t>(n) + 2);
  int lo = n + 1;
  int hi = n + 1;  // active knots are kn[lo..hi)
  std::vector<double> tm(n - 1);
  std::vector<double> tp(n - 1);

  double al = omega[0], bl = -omega[0] * z[0];
  double ar = al, br = bl;
  for (int k = 0; k + 1 < n; ++k) {
    const double u = u_edges[k];

    double a = al, c = bl;
    while (lo < hi && a * kn[lo].x + c < -u) {
      a += kn[lo].da;
      c += kn[lo].db;
      ++lo;
    }
    double t = (-u - c) / a;
    kn[--lo] = {t, a, c + u};
    tm[k] = t;

    a = ar;
    c = br;
    // kn[lo] is the knot just placed at f = −u; it is never absorbed.
    while (hi - 1 > lo && a * kn[hi - 1].x + c > u) {
      a -= kn[hi - 1].da;
      c -= kn[hi - 1].db;
      --hi;
    }
    t = std::max(tm[k], (u - c) / a);
    kn[hi++] = {t, -a, u - c};
    tp[k] = t;

    const double w = omega[k + 1];
    al = w;
    bl = -u - w * z[k + 1];
    ar = w;
    br = u - w * z[k + 1];
  }

  double a = al, c = bl;
  while (lo < hi && a * kn[lo].x + c < 0.0) {
    a += kn[lo].da;
    c += kn[lo].db;
    ++lo;
  }
  beta[n - 1] = -c / a;
  for (int k = n - 2; k >= 0; --k) beta[k] = std::clamp(beta[k + 1], tm[k], tp[k]);
  return beta;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weighted trend filtering by ADMM.

enum class TrendSplitting {
  /// α = D⁽ᵏ⁺¹⁾β with a soft-threshold α-step.
  soft_threshold,
  /// α = D⁽ᵏ⁾β with an exact fused-lasso α-step on the remaining first difference.
  fused_lasso,
};

/// ADMM variables carried between calls for warm starts.
struct AdmmState {
  Eigen::VectorXd alpha;
  Eigen::VectorXd w;  // scaled dual
  double rho = 0.0;
  TrendSplitting splitting = TrendSplitting::fused_lasso;

  bool compatible(Eigen::Index rows, TrendSplitting s) const {
    return rho > 0.0 && alpha.size() == rows && w.size() == rows && splitting == s;
  }
};

struct AdmmInfo {
  int iters = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// argmin_β Σ (ω_i/2)(z_i − β_i)² + Σ_j lam_j |(D⁽ᵏ⁺¹⁾β)_j| with per-row weights lam_j.
inline Eigen::VectorXd trend_filter_admm(const Eigen::VectorXd& z, const Eigen::VectorXd& omega, int k,
                                         const Eigen::VectorXd& lam, const SolverConfig& cfg,
                                         TrendSplitting splitting, AdmmState* state = nullptr,
                                         AdmmInfo* info = nullptr) {
  cfg.validate();
  const int n = static_cast<int>(z.size());
  const DifferenceOperator full(n, k);
  detail::require(omega.size() == n, "trend filter weights must match the response length");
  detail::require(lam.size() == full.rows(), "trend filter needs one penalty weight per difference row");
  for (int i = 0; i < n; ++i) {
    detail::require(omega[i] > 0.0 && std::isfinite(omega[i]), "trend filter weights must be positive");
  }
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    detail::require(lam[j] >= 0.0 && std::isfinite(lam[j]), "trend filter penalty must be non-negative");
  }
  if (splitting == TrendSplitting::fused_lasso && k == 0) splitting = TrendSplitting::soft_threshold;

  AdmmInfo local_info;
  AdmmInfo& out = info ? *info : local_info;
  out = AdmmInfo{};
  if (lam.size() == 0 || lam.maxCoeff() == 0.0) {
    out.converged = true;
    return z;
  }

  // Split operator: D⁽ᵏ⁺¹⁾ for soft-thresholding, D⁽ᵏ⁾ for the fused-lasso step.
  const bool fused = splitting == TrendSplitting::fused_lasso;
  const DifferenceOperator split = fused ? DifferenceOperator(n, k - 1) : full;
  const int m = split.rows();

  AdmmState local_state;
  AdmmState& st = state ? *state : local_state;
  if (!st.compatible(m, splitting)) {
    st.splitting = splitting;
    st.rho = cfg.admm_rho.value_or(lam.maxCoeff());
    st.alpha = split.apply(z);
    st.w = Eigen::VectorXd::Zero(m);
  } else if (cfg.admm_rho) {
    st.rho = *cfg.admm_rho;
  }

  const Eigen::VectorXd omega_z = omega.cwiseProduct(z);
  Eigen::VectorXd beta = z;
  auto factor = [&] { return BandedCholesky(split.weighted_gram(omega, st.rho)); };
  BandedCholesky chol = factor();
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  for (int it = 1; it <= cfg.inner_max_iters; ++it) {
    beta = chol.solve(omega_z + st.rho * split.apply_transpose(st.alpha - st.w));
    const Eigen::VectorXd d_beta = split.apply(beta);
    const Eigen::VectorXd v = d_beta + st.w;
    const Eigen::VectorXd alpha_old = st.alpha;
    if (fused) {
      st.alpha = weighted_fused_lasso(v, Eigen::VectorXd::Constant(m, st.rho), lam);
    } else {
      for (int j = 0; j < m; ++j) st.alpha[j] = soft_threshold(v[j], lam[j] / st.rho);
    }
    const Eigen::VectorXd primal = d_beta - st.alpha;
    st.w += primal;

    out.iters = it;
    out.primal_residual = primal.norm();
    out.dual_residual = st.rho * split.apply_transpose(st.alpha - alpha_old).norm();
    const double eps_pri = cfg.inner_tol * (sqrt_m + std::max(d_beta.norm(), st.alpha.norm()));
    const double eps_dual = cfg.inner_tol * (sqrt_n + st.rho * split.apply_transpose(st.w).norm());
    if (out.primal_residual <= eps_pri && out.dual_residual <= eps_dual) {
      out.converged = true;
      break;
    }
    if (!cfg.admm_rho) {
      // Residual balancing; the scaled dual w = y/ρ is rescaled with ρ.
      if (out.primal_residual > 10.0 * out.dual_residual) {
        st.rho *= 2.0;
        st.w /= 2.0;
        chol = factor();
      } else if (out.dual_residual > 10.0 * out.primal_residual) {
        st.rho /= 2.0;
        st.w *= 2.0;
        chol = factor();
      }
    }
  }
  return beta;
}

struct InteriorPointInfo {
  int iters = 0;
  bool converged = false;
  double gap = 0.0;  // duality gap at exit; bounds the primal suboptimality
};

/// Same problem as trend_filter_admm, by a primal-dual interior-point method on the dual
///   min_v ½ vᵀ D Ω⁻¹ Dᵀ v − vᵀ D z  subject to |v_j| ≤ lam_j,
/// with β = z − Ω⁻¹Dᵀv. Each Newton step is one banded factorization. Stops when the
/// duality gap is below inner_tol·max(1, |primal objective|), or when it stalls at
/// roundoff; the iterate with the smallest gap is returned. All lam_j must be > 0.
inline Eigen::VectorXd trend_filter_interior_point(const Eigen::VectorXd& z, const Eigen::VectorXd& omega, int k,
                                                   const Eigen::VectorXd& lam, const SolverConfig& cfg,
                                                   InteriorPointInfo* info = nullptr) {
  cfg.validate();
  const int n = static_cast<int>(z.size());
  const DifferenceOperator d(n, k);
  const int m = d.rows();
  const int w = d.width();
  const int p = k + 1;
  detail::require(omega.size() == n, "trend filter weights must match the response length");
  detail::require(lam.size() == m, "trend filter needs one penalty weight per difference row");
  for (int i = 0; i < n; ++i) {
    detail::require(omega[i] > 0.0 && std::isfinite(omega[i]), "trend filter weights must be positive");
  }
  for (int j = 0; j < m; ++j) {
    detail::require(lam[j] > 0.0 && std::isfinite(lam[j]), "interior-point trend filter needs lam > 0");
  }
  InteriorPointInfo local_info;
  InteriorPointInfo& out = info ? *info : local_info;
  out = InteriorPointInfo{};

  constexpr double kAlpha = 0.01;  // sufficient decrease
  constexpr double kBeta = 0.5;    // backtracking factor
  constexpr double kMu = 2.0;      // barrier growth
  constexpr int kStallLimit = 8;
  const int max_iters = std::min(cfg.inner_max_iters, 200);

  std::vector<double> c(w);
  for (int j = 0; j < w; ++j) c[j] = d.coefficient(0, j);
  const Eigen::VectorXd inv_omega = omega.cwiseInverse();
  const Eigen::VectorXd dz = d.apply(z);

  // Rows share one stencil, so D and Dᵀ are written out directly.
  auto apply_dt = [&](const Eigen::VectorXd& v, Eigen::VectorXd& o) {
    o.setZero(n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < w; ++j) o[i + j] += c[j] * v[i];
    }
  };
  auto apply_q = [&](const Eigen::VectorXd& v, Eigen::VectorXd& dtv, Eigen::VectorXd& o) {
    apply_dt(v, dtv);
    o.resize(m);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < w; ++j) s += c[j] * dtv[i + j] * inv_omega[i + j];
      o[i] = s;
    }
  };

  // Q = D Ω⁻¹ Dᵀ in lower-band storage, half-bandwidth p.
  std::vector<double> qband(static_cast<std::size_t>(m) * (p + 1), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int e = 0; e <= std::min(p, i); ++e) {
      const int j = i - e;
      double s = 0.0;
      for (int l = i; l <= j + w - 1; ++l) s += c[l - i] * c[l - j] * inv_omega[l];
      qband[static_cast<std::size_t>(i) * (p + 1) + e] = s;
    }
  }

  std::vector<double> lband(qband.size());
  auto factor_solve = [&](const Eigen::VectorXd& diag_add, const Eigen::VectorXd& rhs, Eigen::VectorXd& x) {
    lband = qband;
    auto at = [&](int i, int j) -> double& { return lband[static_cast<std::size_t>(i) * (p + 1) + (i - j)]; };
    for (int i = 0; i < m; ++i) at(i, i) += diag_add[i];
    for (int i = 0; i < m; ++i) {
      const int j0 = std::max(0, i - p);
      for (int j = j0; j <= i; ++j) {
        double s = at(i, j);
        for (int l = std::max(j0, j - p); l < j; ++l) s -= at(i, l) * at(j, l);
        if (i == j) {
          if (!(s > 0.0)) throw DomainError("interior-point Newton matrix is not positive definite");
          at(i, i) = std::sqrt(s);
        } else {
          at(i, j) = s / at(j, j);
        }
      }
    }
    x = rhs;
    for (int i = 0; i < m; ++i) {
      double s = x[i];
      for (int l = std::max(0, i - p); l < i; ++l) s -= at(i, l) * x[l];
      x[i] = s / at(i, i);
    }
    for (int i = m - 1; i >= 0; --i) {
      double s = x[i];
      for (int l = i + 1; l <= std::min(m - 1, i + p); ++l) s -= at(l, i) * x[l];
      x[i] = s / at(i, i);
    }
  };

  Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd mu1 = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd mu2 = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd best_v = v;
  double best_gap = kInf;
  int stalled = 0;
  double t = 1e-10;
  double step = kInf;
  Eigen::VectorXd dtv, qv, qdv, dv, r(m), diag_add(m), dmu1(m), dmu2(m), scratch;

  auto residual_norm = [&](const Eigen::VectorXd& q_v, const Eigen::VectorXd& vv, const Eigen::VectorXd& a1,
                           const Eigen::VectorXd& a2) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      const double rd = q_v[j] - dz[j] + a1[j] - a2[j];
      const double c1 = -a1[j] * (vv[j] - lam[j]) - 1.0 / t;
      const double c2 = -a2[j] * (-vv[j] - lam[j]) - 1.0 / t;
      s += rd * rd + c1 * c1 + c2 * c2;
    }
    return std::sqrt(s);
  };

  apply_q(v, dtv, qv);
  for (int it = 0; it < max_iters; ++it) {
    double pobj = 0.5 * dtv.cwiseProduct(inv_omega).dot(dtv);
    const double dobj = -pobj + v.dot(dz);
    for (int j = 0; j < m; ++j) pobj += lam[j] * std::abs(dz[j] - qv[j]);
    const double gap = pobj - dobj;
    out.iters = it;
    if (gap < best_gap) {
      stalled = gap < 0.999 * best_gap ? 0 : stalled + 1;
      best_gap = gap;
      best_v = v;
    } else {
      ++stalled;
    }
    if (gap <= cfg.inner_tol * std::max(1.0, std::abs(pobj))) {
      out.converged = true;
      break;
    }
    if (stalled >= kStallLimit || step < 1e-12) break;
    if (step >= 0.2) t = std::max(2.0 * m * kMu / gap, 1.2 * t);

    for (int j = 0; j < m; ++j) {
      const double f1 = v[j] - lam[j];
      const double f2 = -v[j] - lam[j];
      diag_add[j] = -(mu1[j] / f1 + mu2[j] / f2);
      r[j] = -qv[j] + dz[j] + (1.0 / t) / f1 - (1.0 / t) / f2;
    }
    factor_solve(diag_add, r, dv);
    step = 1.0;
    for (int j = 0; j < m; ++j) {
      const double f1 = v[j] - lam[j];
      const double f2 = -v[j] - lam[j];
      dmu1[j] = -(mu1[j] + (1.0 / t + dv[j] * mu1[j]) / f1);
      dmu2[j] = -(mu2[j] + (1.0 / t - dv[j] * mu2[j]) / f2);
      if (dmu1[j] < 0.0) step = std::min(step, -0.99 * mu1[j] / dmu1[j]);
      if (dmu2[j] < 0.0) step = std::min(step, -0.99 * mu2[j] / dmu2[j]);
    }
    // Feasibility of v + s·dv in closed form, then backtracking on the residual.
    for (int j = 0; j < m; ++j) {
      if (dv[j] > 0.0) step = std::min(step, 0.99 * (lam[j] - v[j]) / dv[j]);
      if (dv[j] < 0.0) step = std::min(step, 0.99 * (-lam[j] - v[j]) / dv[j]);
    }
    apply_q(dv, scratch, qdv);
    const double res0 = residual_norm(qv, v, mu1, mu2);
    for (int ls = 0; ls < 30; ++ls) {
      const double res = residual_norm(qv + step * qdv, v + step * dv, mu1 + step * dmu1, mu2 + step * dmu2);
      if (res <= (1.0 - kAlpha * step) * res0) break;
      step *= kBeta;
    }
    v += step * dv;
    mu1 += step * dmu1;
    mu2 += step * dmu2;
    apply_q(v, dtv, qv);
  }
  out.gap = best_gap;
  apply_dt(best_v, dtv);
  return z - dtv.cwiseProduct(inv_omega);
}

/// argmin_β Σ (ω_i/2)(z_i − β_i)² + lam ‖D⁽ᵏ⁺¹⁾β‖₁.
inline Eigen::VectorXd weighted_trend_filter(const Eigen::VectorXd& z, const Eigen::VectorXd& omega, int k,
                                             double lam, const SolverConfig& cfg,
                                             TrendSplitting splitting = TrendSplitting::fused_lasso,
                                             AdmmState* state = nullptr, AdmmInfo* info = nullptr) {
  detail::require(k >= 0, "trend filter order must be >= 0");
  detail::require(lam >= 0.0 && std::isfinite(lam), "trend filter lambda must be non-negative");
  const int n = static_cast<int>(z.size());
  detail::require(n >= k + 2, "trend filter of order " + std::to_string(k) + " needs n >= " + std::to_string(k + 2));
  return trend_filter_admm(z, omega, k, Eigen::VectorXd::Constant(n - k - 1, lam), cfg, splitting, state, info);
}

/// weighted_trend_filter with the inner solver chosen by cfg.trend_solver.
inline Eigen::VectorXd solve_trend_filter(const Eigen::VectorXd& z, const Eigen::VectorXd& omega, int k, double lam,
                                          const SolverConfig& cfg, AdmmState* state = nullptr) {
  if (cfg.trend_solver == TrendSolver::admm || lam == 0.0) {
    return weighted_trend_filter(z, omega, k, lam, cfg, TrendSplitting::fused_lasso, state);
  }
  detail::require(k >= 0, "trend filter order must be >= 0");
  detail::require(std::isfinite(lam) && lam > 0.0, "trend filter lambda must be non-negative");
  const int n = static_cast<int>(z.size());
  detail::require(n >= k + 2, "trend filter of order " + std::to_string(k) + " needs n >= " + std::to_string(k + 2));
  return trend_filter_interior_point(z, omega, k, Eigen::VectorXd::Constant(n - k - 1, lam), cfg);
}

// ---------------------------------------------------------------------------
// MM driver.

template <class State>
struct MMStep {
  std::string name;
  std::function<void(State&)> apply;
};

struct MMOutcome {
  double objective = 0.0;
  std::vector<double> trace;
  int iters = 0;
  bool converged = false;
};

/// Runs `steps` cyclically on `state`. The objective is checked after every step and
/// recorded after every cycle (trace[0] is the initial value). Stops when the relative
/// change over a cycle falls below cfg.tol.
template <class State>
MMOutcome mm_driver(const std::function<double(const State&)>& objective, const std::vector<MMStep<State>>& steps,
                    State& state, const SolverConfig& cfg) {
  cfg.validate();
  detail::require(!steps.empty(), "mm_driver needs at least one step");
  MMOutcome out;
  double f = objective(state);
  if (!std::isfinite(f)) throw RejectedInput("initial objective is not finite");
  out.trace.push_back(f);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const double start = f;
    for (const auto& step : steps) {
      step.apply(state);
      const double next = objective(state);
      if (!(next <= f + cfg.monotone_slack * std::max(1.0, std::abs(f)))) {
        throw MonotonicityViolation(step.name, f, next);
      }
      f = next;
    }
    out.iters = it;
    if (cfg.record_trace) {
      out.trace.push_back(f);
    } else {
      out.trace.back() = f;
    }
    if (relative_change(start, f) < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.objective = f;
  return out;
}

// ---------------------------------------------------------------------------
// Proximal gradient.

inline double penalized_objective(const LossSpec& loss, const PenaltySpec& pen, const Eigen::VectorXd& x) {
  double total = loss_value(loss, x);
  for (Eigen::Index i = 0; i < x.size(); ++i) total += penalty_value(pen, x[i]);
  return total;
}

/// x⁺ = prox_{aφ}(x − a∇l(x)) with a = 1/L.
inline Eigen::VectorXd proximal_gradient_step(const LossSpec& loss, const PenaltySpec& pen, const Eigen::VectorXd& x,
                                              double lipschitz) {
  const Eigen::VectorXd g = loss_grad(loss, x);
  Eigen::VectorXd next(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) next[i] = prox(pen, x[i] - g[i] / lipschitz, lipschitz);
  return next;
}

/// Fixed step 1/L proximal gradient. aux["lambda"] holds x/a − ∇l(x) at the final iterate.
inline FitResult proximal_gradient(const LossSpec& loss, const PenaltySpec& pen, const Eigen::VectorXd& init,
                                   const SolverConfig& cfg) {
  cfg.validate();
  if (loss.kind == LossKind::check) throw CapabilityError("proximal gradient needs a differentiable loss");
  if (pen.kind == PenaltyKind::psi_specified) throw CapabilityError("proximal gradient needs a penalty with a prox");
  detail::require(init.size() == loss.dim(), "initial value has wrong length");
  const double lip = lipschitz_bound(loss);
  detail::require(lip > 0.0, "Lipschitz bound must be positive");

  FitResult res;
  Eigen::VectorXd x = init;
  double f = penalized_objective(loss, pen, x);
  res.trace.push_back(f);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Eigen::VectorXd next = proximal_gradient_step(loss, pen, x, lip);
    const double step = (next - x).norm();
    const double fn = penalized_objective(loss, pen, next);
    const double change = relative_change(f, fn);
    x = next;
    f = fn;
    res.iters = it;
    if (cfg.record_trace) {
      res.trace.push_back(f);
    } else {
      res.trace.back() = f;
    }
    if (change < cfg.tol && (cfg.step_tol <= 0.0 || step <= cfg.step_tol)) {
      res.converged = true;
      break;
    }
    if (!x.allFinite()) break;
  }
  res.beta = x;
  res.objective = f;
  res.df = static_cast<int>((x.array() != 0.0).count());
  res.aux["lambda"] = lip * x - loss_grad(loss, x);
  return res;
}

// ---------------------------------------------------------------------------
// Logistic fused lasso.

inline double binomial_nll(const Eigen::VectorXd& y, const Eigen::VectorXd& m, const Eigen::VectorXd& beta) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < beta.size(); ++i) total += m[i] * log1p_exp(beta[i]) - y[i] * beta[i];
  return total;
}

inline double weighted_total_variation(const Eigen::VectorXd& u, const Eigen::VectorXd& beta) {
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < beta.size(); ++i) total += u[i] * std::abs(beta[i + 1] - beta[i]);
  return total;
}

/// Binomial-logit likelihood plus Σ u_i |β_{i+1} − β_i|. Each MM step majorizes the
/// logit terms by their curvature bound m_i/4 and solves the fused lasso exactly.
inline FitResult logistic_fused_lasso(const Eigen::VectorXd& y, const Eigen::VectorXd& m, const Eigen::VectorXd& u_edges,
                                      const Eigen::VectorXd& init, const SolverConfig& cfg) {
  const LossSpec loss = LossSpec::binomial_logit(y, m);
  const int n = loss.n();
  detail::require(init.size() == n, "initial value has wrong length");
  detail::require(u_edges.size() == n - 1, "logistic fused lasso needs one edge weight per adjacent pair");
  const Eigen::VectorXd omega = 0.25 * m;

  Eigen::VectorXd beta = init;
  std::function<double(const Eigen::VectorXd&)> objective = [&](const Eigen::VectorXd& b) {
    return binomial_nll(y, m, b) + weighted_total_variation(u_edges, b);
  };
  std::vector<MMStep<Eigen::VectorXd>> steps{{"logit-curvature-majorizer", [&](Eigen::VectorXd& b) {
                                                const Eigen::VectorXd g = loss_grad(loss, b);
                                                const Eigen::VectorXd z = b - g.cwiseQuotient(omega);
                                                b = weighted_fused_lasso(z, omega, u_edges);
                                              }}};
  const MMOutcome mm = mm_driver(objective, steps, beta, cfg);

  FitResult res;
  res.beta = beta;
  res.objective = mm.objective;
  res.trace = mm.trace;
  res.iters = mm.iters;
  res.converged = mm.converged;
  return res;
}

}  // namespace hierduals
