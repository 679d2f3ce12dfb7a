#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>

#include "hierduals/duality.hpp"
#include "hierduals/errors.hpp"
#include "hierduals/operators.hpp"

namespace hierduals {

enum class PenaltyKind { l1, ridge, double_pareto, mcp, limited_translation, psi_specified };

inline std::string to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::l1: return "l1";
    case PenaltyKind::ridge: return "ridge";
    case PenaltyKind::double_pareto: return "double-pareto";
    case PenaltyKind::mcp: return "mcp";
    case PenaltyKind::limited_translation: return "limited-translation";
    case PenaltyKind::psi_specified: return "psi-specified";
  }
  return "unknown";
}

inline PenaltyKind penalty_kind_from_string(const std::string& s) {
  for (auto k : {PenaltyKind::l1, PenaltyKind::ridge, PenaltyKind::double_pareto, PenaltyKind::mcp,
                 PenaltyKind::limited_translation, PenaltyKind::psi_specified}) {
    if (to_string(k) == s) return k;
  }
  throw RejectedInput("unknown penalty kind '" + s + "'");
}

/// Penalty family plus hyperparameters. `weight` is the strength of l1 and ridge;
/// double-Pareto and MCP take their strength from `gamma` and scale from `a`.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::l1;
  double gamma = 1.0;
  double a = 1.0;
  double weight = 1.0;
  /// ψ(λ) on λ ≥ 0 for psi-specified penalties (extended evenly to λ < 0).
  ScalarFn psi;

  static PenaltySpec l1(double weight) { return make(PenaltyKind::l1, 1.0, 1.0, weight); }
  static PenaltySpec ridge(double weight) { return make(PenaltyKind::ridge, 1.0, 1.0, weight); }
  static PenaltySpec double_pareto(double gamma, double a) {
    return make(PenaltyKind::double_pareto, gamma, a, 1.0);
  }
  static PenaltySpec mcp(double gamma, double a) { return make(PenaltyKind::mcp, gamma, a, 1.0); }
  static PenaltySpec limited_translation() { return make(PenaltyKind::limited_translation, 1.0, 1.0, 1.0); }
  /// The non-sparse example ψ(λ) = λ / (2(1 + λ)) when no ψ is given.
  static PenaltySpec psi_specified(ScalarFn psi = {}) {
    PenaltySpec p;
    p.kind = PenaltyKind::psi_specified;
    p.psi = psi ? std::move(psi) : ScalarFn([](double lam) { return lam / (2.0 * (1.0 + lam)); });
    p.validate();
    return p;
  }

  void validate() const {
    detail::require(std::isfinite(weight) && weight >= 0.0, "penalty weight must be >= 0");
    if (kind == PenaltyKind::double_pareto || kind == PenaltyKind::mcp) {
      detail::require(std::isfinite(gamma) && gamma >= 0.0, "penalty gamma must be >= 0");
      detail::require(std::isfinite(a) && a > 0.0, "penalty scale a must be > 0");
    }
    if (kind == PenaltyKind::psi_specified) detail::require(static_cast<bool>(psi), "psi-specified penalty needs psi");
  }

  /// Flat key-value form: kind, gamma, a, weight.
  std::map<std::string, std::string> to_config() const {
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    return {{"kind", to_string(kind)}, {"gamma", num(gamma)}, {"a", num(a)}, {"weight", num(weight)}};
  }

  static PenaltySpec from_config(const std::map<std::string, std::string>& cfg) {
    auto get = [&](const char* key, double fallback) {
      auto it = cfg.find(key);
      if (it == cfg.end()) return fallback;
      try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
      } catch (const std::exception&) {
        throw RejectedInput(std::string("penalty config: bad number for '") + key + "'");
      }
    };
    auto it = cfg.find("kind");
    detail::require(it != cfg.end(), "penalty config requires 'kind'");
    const PenaltyKind kind = penalty_kind_from_string(it->second);
    PenaltySpec p = kind == PenaltyKind::psi_specified ? psi_specified() : make(kind, 1.0, 1.0, 1.0);
    p.gamma = get("gamma", 1.0);
    p.a = get("a", 1.0);
    p.weight = get("weight", 1.0);
    p.validate();
    return p;
  }

 private:
  static PenaltySpec make(PenaltyKind kind, double gamma, double a, double weight) {
    PenaltySpec p;
    p.kind = kind;
    p.gamma = gamma;
    p.a = a;
    p.weight = weight;
    p.validate();
    return p;
  }
};

/// Divergent gaussian-scale λ̂ at x = 0 is replaced by this cap.
inline constexpr double kLambdaCap = 1e8;

inline const double kSqrt2 = std::sqrt(2.0);

namespace detail {

inline double psi_even(const PenaltySpec& p, double lam) { return p.psi(std::abs(lam)); }

inline double psi_specified_value(const PenaltySpec& p, double x) {
  const double ax = std::abs(x);
  const GridSpec grid{0.0, ax + 2.0, 201, 3};
  return grid_minimize([&](double lam) { return 0.5 * (ax - lam) * (ax - lam) + psi_even(p, lam); }, grid)
      .value;
}

inline double mcp_value(double ax, double gamma, double a) {
  return ax < a * gamma ? gamma * ax - ax * ax / (2.0 * a) : 0.5 * a * gamma * gamma;
}

}  // namespace detail

/// φ(|x|).
inline double penalty_value(const PenaltySpec& p, double x) {
  const double ax = std::abs(x);
  switch (p.kind) {
    case PenaltyKind::l1: return p.weight * ax;
    case PenaltyKind::ridge: return 0.5 * p.weight * ax * ax;
    case PenaltyKind::double_pareto: return p.gamma * std::log1p(ax / p.a);
    case PenaltyKind::mcp: return detail::mcp_value(ax, p.gamma, p.a);
    case PenaltyKind::limited_translation: return std::min(1.0, 0.5 * ax * ax);
    case PenaltyKind::psi_specified: return detail::psi_specified_value(p, x);
  }
  return 0.0;
}

/// Signed derivative selection; at x = 0 the right limit φ'(0⁺).
inline double penalty_deriv(const PenaltySpec& p, double x) {
  const double ax = std::abs(x);
  const double s = x == 0.0 ? 1.0 : sgn(x);
  switch (p.kind) {
    case PenaltyKind::l1: return s * p.weight;
    case PenaltyKind::ridge: return p.weight * x;
    case PenaltyKind::double_pareto: return s * p.gamma / (p.a + ax);
    case PenaltyKind::mcp: return s * std::max(0.0, p.gamma - ax / p.a);
    case PenaltyKind::limited_translation: return ax < kSqrt2 ? x : 0.0;
    case PenaltyKind::psi_specified: break;
  }
  throw CapabilityError("psi-specified penalty has no closed-form derivative");
}

/// Concave dual φ⋆(λ) = inf_{x≥0} {λx − φ(x)}, λ ≥ 0.
inline double penalty_dual(const PenaltySpec& p, double lam) {
  if (!(lam >= 0.0)) throw DomainError("concave dual is -inf for lambda < 0");
  switch (p.kind) {
    case PenaltyKind::l1: return lam >= p.weight ? 0.0 : -kInf;
    case PenaltyKind::ridge: return -kInf;
    case PenaltyKind::double_pareto: {
      // C = γ − γ log γ + γ log a makes the envelope tight; the infimum sits at x = γ/λ − a.
      if (p.gamma == 0.0) return 0.0;
      if (lam * p.a >= p.gamma) return 0.0;
      if (lam == 0.0) return -kInf;
      return p.gamma * std::log(lam) - lam * p.a + p.gamma - p.gamma * std::log(p.gamma) +
             p.gamma * std::log(p.a);
    }
    case PenaltyKind::mcp: {
      if (lam > p.gamma) return 0.0;
      const double d = lam - p.gamma;
      return -0.5 * p.a * d * d;
    }
    case PenaltyKind::limited_translation: {
      const GridSpec grid{0.0, std::max(10.0, 10.0 / std::max(lam, 1e-3)), 401, 3};
      return conjugate_numeric([&](double x) { return penalty_value(p, x); }, lam, grid, ConjugateSense::concave);
    }
    case PenaltyKind::psi_specified: break;
  }
  throw CapabilityError("psi-specified penalty is evaluate-only");
}

/// Envelope-optimal λ for the given family.
inline double lambda_hat(const PenaltySpec& p, double x, const EnvelopeFamily& family) {
  const double ax = std::abs(x);
  switch (family.tag()) {
    case FamilyTag::exponential:
      if (p.kind == PenaltyKind::l1 || p.kind == PenaltyKind::double_pareto || p.kind == PenaltyKind::mcp) {
        return penalty_deriv(p, ax);
      }
      break;
    case FamilyTag::gaussian_scale:
      if (p.kind == PenaltyKind::psi_specified) break;
      if (p.kind == PenaltyKind::ridge) return p.weight;
      if (p.kind == PenaltyKind::limited_translation) return ax < kSqrt2 ? 1.0 : 0.0;
      if (ax == 0.0) return kLambdaCap;
      return std::min(kLambdaCap, penalty_deriv(p, ax) / ax);
    case FamilyTag::gaussian_location:
      if (p.kind == PenaltyKind::limited_translation) return x - penalty_deriv(p, x);
      if (p.kind == PenaltyKind::ridge && p.weight <= 1.0) return x - penalty_deriv(p, x);
      break;
    case FamilyTag::variance_mean:
    case FamilyTag::multivariate_location: break;
  }
  throw CapabilityError(to_string(p.kind) + " penalty has no " + to_string(family.tag()) + " envelope");
}

/// Joint term used by the envelope checks, for the canonical family of each kind
/// (psi-specified has none: its value is defined by the envelope itself).
inline std::optional<EnvelopeTarget> declared_envelope(const PenaltySpec& p) {
  EnvelopeTarget t;
  t.name = to_string(p.kind);
  t.value = [p](double x) { return penalty_value(p, x); };
  switch (p.kind) {
    case PenaltyKind::l1:
    case PenaltyKind::double_pareto:
    case PenaltyKind::mcp:
      t.family = EnvelopeFamily::exponential();
      t.dual = [p](double lam) { return penalty_dual(p, lam); };
      t.lambda_hat = [p](double x) { return lambda_hat(p, x, EnvelopeFamily::exponential()); };
      t.dual_domain = {p.kind == PenaltyKind::l1 ? p.weight : 0.0, kInf};
      return t;
    case PenaltyKind::ridge:
      // θ(z) = φ(√(2z)) = w z is linear, so θ⋆ is 0 on [w, ∞) and −∞ below.
      t.family = EnvelopeFamily::gaussian_scale();
      t.dual = [w = p.weight](double lam) { return lam >= w ? 0.0 : -kInf; };
      t.lambda_hat = [p](double x) { return lambda_hat(p, x, EnvelopeFamily::gaussian_scale()); };
      t.dual_domain = {p.weight, kInf};
      return t;
    case PenaltyKind::limited_translation:
      t.family = EnvelopeFamily::gaussian_location();
      t.dual = [](double lam) {
        const double al = std::abs(lam);
        if (al > kSqrt2) return 1.0;
        const double d = kSqrt2 - al;
        return 1.0 - 0.5 * d * d;
      };
      t.lambda_hat = [p](double x) { return lambda_hat(p, x, EnvelopeFamily::gaussian_location()); };
      return t;
    case PenaltyKind::psi_specified: break;
  }
  return std::nullopt;
}

namespace detail {

/// Picks the smallest objective; ties within relative 1e-14 go to the larger magnitude.
template <class Obj, std::size_t N>
double best_candidate(Obj&& obj, const std::array<double, N>& cands, std::size_t used) {
  double best_x = cands[0];
  double best_v = obj(best_x);
  for (std::size_t i = 1; i < used; ++i) {
    const double x = cands[i];
    const double v = obj(x);
    const double tie = 1e-14 * std::max(1.0, std::abs(best_v));
    if (v < best_v - tie || (std::abs(v - best_v) <= tie && std::abs(x) > std::abs(best_x))) {
      best_v = std::min(v, best_v);
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace detail

/// The closed form d(u) = (a|u| − γ/s)₊, x = sgn(u)/2 {|u| − a + √((a − |u|)² + 4d)}.
/// It returns the larger stationary point; `prox` additionally compares against 0.
inline double prox_double_pareto_closed_form(double u, double s, double gamma, double a) {
  const double au = std::abs(u);
  const double d = std::max(0.0, a * au - gamma / s);
  return 0.5 * sgn(u) * (au - a + std::sqrt((a - au) * (a - au) + 4.0 * d));
}

/// argmin_x { (s/2)(x − u)² + φ(x) }. For the nonconvex kinds the global minimizer is
/// chosen among 0 and the stationary points.
inline double prox(const PenaltySpec& p, double u, double s) {
  if (!(s > 0.0)) throw RejectedInput("prox requires s > 0");
  const double au = std::abs(u);
  const double su = sgn(u);
  auto obj = [&](double x) { return 0.5 * s * (x - au) * (x - au) + penalty_value(p, x); };
  switch (p.kind) {
    case PenaltyKind::l1: return soft_threshold(u, p.weight / s);
    case PenaltyKind::ridge: return s * u / (s + p.weight);
    case PenaltyKind::double_pareto: {
      std::array<double, 3> c{0.0, 0.0, 0.0};
      std::size_t used = 1;
      const double disc = (p.a + au) * (p.a + au) - 4.0 * p.gamma / s;
      if (disc >= 0.0) {
        const double r = std::sqrt(disc);
        for (double root : {0.5 * (au - p.a + r), 0.5 * (au - p.a - r)}) {
          if (root > 0.0) c[used++] = root;
        }
      }
      return su * detail::best_candidate(obj, c, used);
    }
    case PenaltyKind::mcp: {
      const double knot = p.a * p.gamma;
      std::array<double, 4> c{0.0, knot, std::max(au, knot), 0.0};
      std::size_t used = 3;
      const double curvature = s - 1.0 / p.a;
      if (curvature > 0.0) c[used++] = std::clamp((s * au - p.gamma) / curvature, 0.0, knot);
      return su * detail::best_candidate(obj, c, used);
    }
    case PenaltyKind::limited_translation: {
      const std::array<double, 2> c{std::min(kSqrt2, s * au / (s + 1.0)), std::max(au, kSqrt2)};
      return su * detail::best_candidate(obj, c, 2);
    }
    case PenaltyKind::psi_specified: break;
  }
  throw CapabilityError("psi-specified penalty has no prox");
}

}  // namespace hierduals
