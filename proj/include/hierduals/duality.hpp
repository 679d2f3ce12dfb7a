#pragma once

// Envelope (variational) representations and the grid oracles that validate them.
//
// Every family writes a target function as an infimum over an auxiliary
// variable λ of a joint term; the closed-form λ-update rules used by the
// solvers are the minimizers of that joint term.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hierduals/errors.hpp"

namespace hierduals {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using ScalarFn = std::function<double(double)>;

struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  int count = 201;
  int refinement_rounds = 3;

  void validate() const {
    detail::require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "grid requires lo < hi");
    detail::require(count >= 3, "grid requires count >= 3");
    detail::require(refinement_rounds >= 0, "grid requires refinement_rounds >= 0");
  }
};

struct GridResult {
  double argmin = std::numeric_limits<double>::quiet_NaN();
  double value = kInf;
  double spacing = 0.0;  // spacing of the last refinement round
};

/// Grid-refined minimum of f over [grid.lo, grid.hi]. Non-finite values count as +∞.
/// Each refinement round re-grids the 4 cells around the incumbent.
template <class F>
GridResult grid_minimize(F&& f, const GridSpec& grid) {
  grid.validate();
  GridResult best;
  double lo = grid.lo;
  double hi = grid.hi;
  const int last = grid.count - 1;
  for (int round = 0; round <= grid.refinement_rounds; ++round) {
    const double width = hi - lo;
    int best_i = -1;
    double best_round = kInf;
    for (int i = 0; i <= last; ++i) {
      const double x = lo + width * static_cast<double>(i) / last;
      const double v = f(x);
      if (std::isnan(v) || v == kInf) continue;
      if (v < best_round) {
        best_round = v;
        best_i = i;
      }
      if (v < best.value) {
        best.value = v;
        best.argmin = x;
      }
    }
    best.spacing = width / last;
    if (best_i < 0) break;
    const double center = lo + width * static_cast<double>(best_i) / last;
    const double h = width / last;
    const double new_lo = std::max(grid.lo, center - 2.0 * h);
    const double new_hi = std::min(grid.hi, center + 2.0 * h);
    if (!(new_lo < new_hi)) break;
    lo = new_lo;
    hi = new_hi;
  }
  return best;
}

enum class ConjugateSense { convex, concave };

/// Convex sense: sup_x {λx − f(x)}. Concave sense: inf_x {λx − f(x)}. Both over the grid.
template <class F>
double conjugate_numeric(F&& f, double lambda, const GridSpec& grid, ConjugateSense sense) {
  if (sense == ConjugateSense::convex) {
    const auto r = grid_minimize([&](double x) { return f(x) - lambda * x; }, grid);
    return -r.value;
  }
  const auto r = grid_minimize([&](double x) { return lambda * x - f(x); }, grid);
  return r.value;
}

enum class FamilyTag { exponential, gaussian_scale, gaussian_location, variance_mean, multivariate_location };

inline std::string to_string(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::exponential: return "exponential";
    case FamilyTag::gaussian_scale: return "gaussian-scale";
    case FamilyTag::gaussian_location: return "gaussian-location";
    case FamilyTag::variance_mean: return "variance-mean";
    case FamilyTag::multivariate_location: return "multivariate-location";
  }
  return "unknown";
}

/// Which joint term the auxiliary variable enters. The drift κ exists only for
/// variance-mean envelopes and the step c only for multivariate location envelopes.
class EnvelopeFamily {
 public:
  static EnvelopeFamily exponential() { return EnvelopeFamily(FamilyTag::exponential); }
  static EnvelopeFamily gaussian_scale() { return EnvelopeFamily(FamilyTag::gaussian_scale); }
  static EnvelopeFamily gaussian_location() { return EnvelopeFamily(FamilyTag::gaussian_location); }
  static EnvelopeFamily variance_mean(double drift) {
    detail::require(std::isfinite(drift), "variance-mean drift must be finite");
    EnvelopeFamily f(FamilyTag::variance_mean);
    f.drift_ = drift;
    return f;
  }
  static EnvelopeFamily multivariate_location(double step) {
    detail::require(std::isfinite(step) && step > 0.0, "multivariate-location step must be > 0");
    EnvelopeFamily f(FamilyTag::multivariate_location);
    f.step_ = step;
    return f;
  }

  FamilyTag tag() const noexcept { return tag_; }
  std::optional<double> drift() const noexcept { return drift_; }
  std::optional<double> step() const noexcept { return step_; }

  /// λ ≥ 0 is required for the exponential, scale and variance-mean families.
  bool requires_nonnegative_lambda() const noexcept {
    return tag_ == FamilyTag::exponential || tag_ == FamilyTag::gaussian_scale ||
           tag_ == FamilyTag::variance_mean;
  }

  friend bool operator==(const EnvelopeFamily&, const EnvelopeFamily&) = default;

 private:
  explicit EnvelopeFamily(FamilyTag tag) : tag_(tag) {}
  FamilyTag tag_;
  std::optional<double> drift_;
  std::optional<double> step_;
};

/// Joint term whose infimum over λ is the target. `dual` is the family's dual function:
///   exponential            λ|x| − φ⋆(λ)
///   gaussian-scale         (λ/2)x² − θ⋆(λ)
///   gaussian-location      ½(x − λ)² + ψ(λ)
///   variance-mean          (λ/2)(x − κ/λ)² − ψ(λ)
///   multivariate-location  (1/2c)(x − cλ)² + ψ(λ)
template <class Dual>
double envelope_integrand(const EnvelopeFamily& family, Dual&& dual, double x, double lambda) {
  if (family.requires_nonnegative_lambda() && !(lambda >= 0.0)) {
    throw RejectedInput(to_string(family.tag()) + " envelope requires lambda >= 0");
  }
  switch (family.tag()) {
    case FamilyTag::exponential: {
      const double d = dual(lambda);
      if (d == -kInf) return kInf;
      return lambda * std::abs(x) - d;
    }
    case FamilyTag::gaussian_scale: {
      const double d = dual(lambda);
      if (d == -kInf) return kInf;
      return 0.5 * lambda * x * x - d;
    }
    case FamilyTag::gaussian_location: return 0.5 * (x - lambda) * (x - lambda) + dual(lambda);
    case FamilyTag::variance_mean: {
      const double kappa = *family.drift();
      if (lambda == 0.0) return kInf;
      const double d = dual(lambda);
      if (d == -kInf) return kInf;
      const double centered = x - kappa / lambda;
      return 0.5 * lambda * centered * centered - d;
    }
    case FamilyTag::multivariate_location: {
      const double c = *family.step();
      const double diff = x - c * lambda;
      return diff * diff / (2.0 * c) + dual(lambda);
    }
  }
  return kInf;
}

/// Multivariate location envelope: (1/2c)‖x − cλ‖² + ψ(λ).
template <class Dual>
double envelope_integrand(const EnvelopeFamily& family, Dual&& dual, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& lambda) {
  detail::require(family.tag() == FamilyTag::multivariate_location,
                  "vector envelope integrand requires the multivariate-location family");
  detail::require(x.size() == lambda.size(), "x and lambda dimensions differ");
  const double c = *family.step();
  return (x - c * lambda).squaredNorm() / (2.0 * c) + dual(lambda);
}

struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

/// A function with a declared envelope representation, plus its closed-form λ̂ rule.
struct EnvelopeTarget {
  std::string name;
  EnvelopeFamily family = EnvelopeFamily::exponential();
  ScalarFn value;       // φ(x) or f(x)
  ScalarFn dual;        // φ⋆, θ⋆ or ψ depending on the family
  ScalarFn lambda_hat;  // closed-form envelope minimizer
  Interval dual_domain; // λ outside this set makes the joint term +∞
};

/// λ-grid used when none is supplied. Exponential grids start at the dual-domain
/// boundary; scale and variance-mean grids start at max(1e-8, boundary) and reach
/// max(10, 10·λ̂(smallest |x|)). Location grids cover the x range padded by 10.
inline GridSpec default_lambda_grid(const EnvelopeTarget& t, std::span<const double> x_grid) {
  GridSpec g;
  double xmin_abs = kInf;
  double xlo = kInf;
  double xhi = -kInf;
  for (double x : x_grid) {
    if (x != 0.0) xmin_abs = std::min(xmin_abs, std::abs(x));
    xlo = std::min(xlo, x);
    xhi = std::max(xhi, x);
  }
  if (!std::isfinite(xmin_abs)) xmin_abs = 1.0;
  switch (t.family.tag()) {
    case FamilyTag::exponential:
    case FamilyTag::gaussian_scale:
    case FamilyTag::variance_mean: {
      double lo = std::isfinite(t.dual_domain.lo) ? std::max(0.0, t.dual_domain.lo) : 0.0;
      if (t.family.tag() != FamilyTag::exponential) lo = std::max(lo, 1e-8);
      double top = 10.0;
      if (t.lambda_hat) {
        const double lh = std::abs(t.lambda_hat(xmin_abs));
        if (std::isfinite(lh)) top = std::max(top, 10.0 * lh);
      }
      if (std::isfinite(t.dual_domain.hi)) top = std::min(top, t.dual_domain.hi);
      g.lo = lo;
      g.hi = std::max(top, lo + 1.0);
      break;
    }
    case FamilyTag::gaussian_location:
    case FamilyTag::multivariate_location: {
      if (!std::isfinite(xlo)) {
        xlo = -1.0;
        xhi = 1.0;
      }
      g.lo = std::max(t.dual_domain.lo, xlo - 10.0);
      g.hi = std::min(t.dual_domain.hi, xhi + 10.0);
      break;
    }
  }
  return g;
}

/// λ attaining the grid-refined minimum of the joint term at x (also returns the minimum).
inline GridResult envelope_minimize_numeric(const EnvelopeTarget& t, double x, const GridSpec& grid) {
  return grid_minimize(
      [&](double lam) {
        if (!t.dual_domain.contains(lam)) return kInf;
        return envelope_integrand(t.family, t.dual, x, lam);
      },
      grid);
}

inline double envelope_argmin_numeric(const EnvelopeTarget& t, double x, const GridSpec& grid) {
  return envelope_minimize_numeric(t, x, grid).argmin;
}

struct EnvelopeReport {
  std::string name;
  double max_gap = 0.0;
  double worst_x = 0.0;
  bool lambda_agreement = true;
  double max_lambda_error = 0.0;  // |λ̂_closed − λ̂_numeric| in units of the final spacing
  double worst_lambda_x = 0.0;
  bool passed = true;  // max_gap ≤ tol and λ̂ agreement
};

/// Compares target(x) with the numeric infimum of the joint term on every x in the grid.
/// λ̂ agreement means the closed form is within one final grid spacing of the numeric
/// argmin at every x. Failures are reported, never thrown.
inline EnvelopeReport check_envelope_identity(const EnvelopeTarget& t, std::span<const double> x_grid,
                                              double tol, std::optional<GridSpec> lambda_grid = {}) {
  detail::require(tol > 0.0, "tolerance must be positive");
  const GridSpec grid = lambda_grid.value_or(default_lambda_grid(t, x_grid));
  EnvelopeReport rep;
  rep.name = t.name;
  for (double x : x_grid) {
    const GridResult r = envelope_minimize_numeric(t, x, grid);
    const double gap = std::abs(t.value(x) - r.value);
    if (!(gap <= rep.max_gap)) {
      rep.max_gap = std::isnan(gap) ? kInf : gap;
      rep.worst_x = x;
    }
    if (t.lambda_hat) {
      const double err = std::abs(t.lambda_hat(x) - r.argmin) / r.spacing;
      if (!(err <= rep.max_lambda_error)) {
        rep.max_lambda_error = std::isnan(err) ? kInf : err;
        rep.worst_lambda_x = x;
      }
    }
  }
  rep.lambda_agreement = rep.max_lambda_error <= 1.0;
  rep.passed = rep.max_gap <= tol && rep.lambda_agreement;
  return rep;
}

/// max |θ(x) − θ⋆⋆(x)| over x_test, with both conjugates computed on grids.
/// θ⋆ is searched over `primal_grid` (x values), θ⋆⋆ over `dual_grid` (λ values).
template <class F>
double double_conjugate_gap(F&& theta, ConjugateSense sense, std::span<const double> x_test,
                            const GridSpec& primal_grid, const GridSpec& dual_grid) {
  double worst = 0.0;
  for (double x : x_test) {
    auto star = [&](double lam) { return conjugate_numeric(theta, lam, primal_grid, sense); };
    const double back = conjugate_numeric(star, x, dual_grid, sense);
    worst = std::max(worst, std::abs(back - theta(x)));
  }
  return worst;
}

}  // namespace hierduals
