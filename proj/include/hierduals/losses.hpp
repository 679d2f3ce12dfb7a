#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "hierduals/duality.hpp"
#include "hierduals/errors.hpp"
#include "hierduals/operators.hpp"

namespace hierduals {

enum class LossKind { gaussian, huber, check, binomial_logit };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::gaussian: return "gaussian";
    case LossKind::huber: return "huber";
    case LossKind::check: return "check";
    case LossKind::binomial_logit: return "binomial-logit";
  }
  return "unknown";
}

/// Loss / negative log-likelihood over the linear predictor η = Aβ (A = I when no design).
struct LossSpec {
  LossKind kind = LossKind::gaussian;
  Eigen::VectorXd y;
  Eigen::VectorXd m;  // binomial trials
  double q = 0.5;     // target quantile
  std::optional<Eigen::MatrixXd> design;
  double huber_threshold = 1.0;

  static LossSpec gaussian(Eigen::VectorXd y, std::optional<Eigen::MatrixXd> design = {}) {
    LossSpec l;
    l.kind = LossKind::gaussian;
    l.y = std::move(y);
    l.design = std::move(design);
    l.validate();
    return l;
  }
  static LossSpec huber(Eigen::VectorXd y, double threshold = 1.0) {
    LossSpec l;
    l.kind = LossKind::huber;
    l.y = std::move(y);
    l.huber_threshold = threshold;
    l.validate();
    return l;
  }
  static LossSpec check(Eigen::VectorXd y, double q) {
    LossSpec l;
    l.kind = LossKind::check;
    l.y = std::move(y);
    l.q = q;
    l.validate();
    return l;
  }
  static LossSpec binomial_logit(Eigen::VectorXd y, Eigen::VectorXd m, std::optional<Eigen::MatrixXd> design = {}) {
    LossSpec l;
    l.kind = LossKind::binomial_logit;
    l.y = std::move(y);
    l.m = std::move(m);
    l.design = std::move(design);
    l.validate();
    return l;
  }

  int n() const { return static_cast<int>(y.size()); }
  int dim() const { return design ? static_cast<int>(design->cols()) : n(); }

  /// κ = 1 − 2q for the check loss, κ_i = y_i − m_i/2 for the logit; never set directly.
  Eigen::VectorXd kappa() const {
    switch (kind) {
      case LossKind::check: return Eigen::VectorXd::Constant(n(), 1.0 - 2.0 * q);
      case LossKind::binomial_logit: return y - 0.5 * m;
      default: return Eigen::VectorXd::Zero(n());
    }
  }

  Eigen::VectorXd predictor(const Eigen::VectorXd& beta) const {
    if (beta.size() != dim()) {
      throw RejectedInput("coefficient vector has length " + std::to_string(beta.size()) + ", expected " +
                          std::to_string(dim()));
    }
    return design ? Eigen::VectorXd(*design * beta) : beta;
  }

  Eigen::VectorXd transpose_apply(const Eigen::VectorXd& r) const {
    return design ? Eigen::VectorXd(design->transpose() * r) : r;
  }

  void validate() const {
    detail::require(y.size() > 0, "loss requires at least one observation");
    detail::require(y.allFinite(), "responses must be finite");
    if (design) detail::require(design->rows() == y.size(), "design rows must match responses");
    if (kind == LossKind::check) detail::require(q > 0.0 && q < 1.0, "quantile q must lie in (0, 1)");
    if (kind == LossKind::huber) detail::require(huber_threshold > 0.0, "huber threshold must be > 0");
    if (kind == LossKind::binomial_logit) {
      detail::require(m.size() == y.size(), "binomial trials must match responses");
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        detail::require(m[i] >= 1.0 && m[i] == std::floor(m[i]), "binomial trials must be positive integers");
        detail::require(y[i] >= 0.0 && y[i] <= m[i] && y[i] == std::floor(y[i]),
                        "binomial successes must be integers in [0, m]");
      }
    }
  }
};

// Scalar building blocks.

inline double huber(double r, double delta = 1.0) {
  const double ar = std::abs(r);
  return ar < delta ? 0.5 * r * r : delta * ar - 0.5 * delta * delta;
}

inline double huber_deriv(double r, double delta = 1.0) { return std::abs(r) < delta ? r : delta * sgn(r); }

inline double check_loss(double r, double q) { return std::abs(r) + (2.0 * q - 1.0) * r; }

/// Check loss with |r| replaced by min_{ω ≤ clamp} {(ω/2)r² + 1/(2ω)}; equals the
/// check loss whenever |r| ≥ 1/clamp.
inline double check_loss_smoothed(double r, double q, double clamp) {
  const double ar = std::abs(r);
  const double a = ar * clamp >= 1.0 ? ar : 0.5 * clamp * r * r + 0.5 / clamp;
  return a + (2.0 * q - 1.0) * r;
}

/// log cosh(t), overflow-free.
inline double log_cosh(double t) {
  const double at = std::abs(t);
  return at + std::log1p(std::exp(-2.0 * at)) - std::log(2.0);
}

/// log(1 + e^η), overflow-free.
inline double log1p_exp(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

inline double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// λ̂(x) = (m/2x) tanh(x/2), with the limit m/4 at x = 0.
inline double logit_scale_lambda(double x, double m) {
  if (std::abs(x) < 1e-4) return m * (0.25 - x * x / 48.0);
  return m * std::tanh(0.5 * x) / (2.0 * x);
}

/// Quantile envelope mode λ̂(x) = sgn(x)/x.
inline double quantile_lambda_hat(double x) { return sgn(x) / x; }

// Loss-level operations.

inline double loss_value(const LossSpec& l, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = l.predictor(beta);
  double total = 0.0;
  for (int i = 0; i < l.n(); ++i) {
    const double r = l.y[i] - eta[i];
    switch (l.kind) {
      case LossKind::gaussian: total += 0.5 * r * r; break;
      case LossKind::huber: total += huber(r, l.huber_threshold); break;
      case LossKind::check: total += check_loss(r, l.q); break;
      case LossKind::binomial_logit: total += l.m[i] * log1p_exp(eta[i]) - l.y[i] * eta[i]; break;
    }
  }
  return total;
}

/// Aᵀ r(β): the gradient of loss_value. The check loss is not differentiable at 0.
inline Eigen::VectorXd loss_grad(const LossSpec& l, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = l.predictor(beta);
  Eigen::VectorXd r(l.n());
  for (int i = 0; i < l.n(); ++i) {
    switch (l.kind) {
      case LossKind::gaussian: r[i] = eta[i] - l.y[i]; break;
      case LossKind::huber: r[i] = -huber_deriv(l.y[i] - eta[i], l.huber_threshold); break;
      case LossKind::binomial_logit: r[i] = l.m[i] * logistic(eta[i]) - l.y[i]; break;
      case LossKind::check: throw CapabilityError("check loss has no gradient");
    }
  }
  return l.transpose_apply(r);
}

/// Top eigenvalue of AᵀA by power iteration from a fixed-seed start vector.
inline double top_eigenvalue_gram(const Eigen::MatrixXd& a, double rel_tol = 1e-8, int max_iters = 100000) {
  const Eigen::Index d = a.cols();
  detail::require(d > 0, "design must have at least one column");
  std::mt19937_64 gen(0x5EEDCAFEULL);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Eigen::VectorXd v(d);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = unif(gen);
  v.normalize();
  double rho = (a * v).squaredNorm();
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = a.transpose() * (a * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = (a * v).squaredNorm();
    const bool done = std::abs(next - rho) <= rel_tol * next;
    rho = next;
    if (done) break;
  }
  return rho;
}

/// Gradient Lipschitz constant: l_d for gaussian/huber, (max m_i)·l_d/4 for the logit.
inline double lipschitz_bound(const LossSpec& l) {
  if (l.kind == LossKind::check) throw CapabilityError("check loss has no Lipschitz gradient");
  const double ld = l.design ? top_eigenvalue_gram(*l.design) : 1.0;
  if (l.kind == LossKind::binomial_logit) return l.m.maxCoeff() * ld / 4.0;
  return ld;
}

/// Huber location update û_i = û(y_i − β_i): 0 inside the threshold, r − δ·sgn(r) outside.
inline Eigen::VectorXd location_envelope_update(const LossSpec& l, const Eigen::VectorXd& beta) {
  if (l.kind != LossKind::huber) throw CapabilityError("location envelope update needs the huber loss");
  if (l.design) throw RejectedInput("location envelope update assumes the identity design");
  detail::require(beta.size() == l.n(), "coefficient vector has wrong length");
  Eigen::VectorXd u(l.n());
  const double delta = l.huber_threshold;
  for (int i = 0; i < l.n(); ++i) {
    const double r = l.y[i] - beta[i];
    u[i] = std::abs(r) < delta ? 0.0 : r - delta * sgn(r);
  }
  return u;
}

struct VarianceMeanWeights {
  Eigen::VectorXd omega;
  Eigen::VectorXd z;
};

inline constexpr double kDefaultQuantileClamp = 1e6;

/// ω_i = min(1/|r_i|, clamp), z_i = y_i − (1 − 2q)/ω_i.
inline VarianceMeanWeights variance_mean_update(const LossSpec& l, const Eigen::VectorXd& beta,
                                                double clamp = kDefaultQuantileClamp) {
  if (l.kind != LossKind::check) throw CapabilityError("variance-mean update needs the check loss");
  if (l.design) throw RejectedInput("variance-mean update assumes the identity design");
  detail::require(clamp > 0.0, "clamp must be > 0");
  detail::require(beta.size() == l.n(), "coefficient vector has wrong length");
  const double kappa = 1.0 - 2.0 * l.q;
  VarianceMeanWeights w{Eigen::VectorXd(l.n()), Eigen::VectorXd(l.n())};
  for (int i = 0; i < l.n(); ++i) {
    const double ar = std::abs(l.y[i] - beta[i]);
    w.omega[i] = ar * clamp > 1.0 ? 1.0 / ar : clamp;
    w.z[i] = l.y[i] - kappa / w.omega[i];
  }
  return w;
}

// Envelope targets for the loss catalog.

/// Huber loss as a Gaussian location envelope with ψ(λ) = θ⋆(λ) − λ²/2, θ(x) = x²/2 − H(x),
/// and θ⋆ computed numerically.
inline EnvelopeTarget huber_envelope(double delta = 1.0) {
  EnvelopeTarget t;
  t.name = "huber";
  t.family = EnvelopeFamily::gaussian_location();
  t.value = [delta](double x) { return huber(x, delta); };
  t.dual = [delta](double lam) {
    auto theta = [delta](double x) { return 0.5 * x * x - huber(x, delta); };
    const GridSpec g{lam - 3.0 * delta, lam + 3.0 * delta, 21, 10};
    return conjugate_numeric(theta, lam, g, ConjugateSense::convex) - 0.5 * lam * lam;
  };
  t.lambda_hat = [delta](double x) { return x - huber_deriv(x, delta); };
  return t;
}

/// Check loss |x| + (2q − 1)x as a variance-mean envelope with drift κ = 1 − 2q and
/// ψ(λ) = κ²/(2λ) − 1/(2λ).
inline EnvelopeTarget check_envelope(double q) {
  detail::require(q > 0.0 && q < 1.0, "quantile q must lie in (0, 1)");
  const double kappa = 1.0 - 2.0 * q;
  EnvelopeTarget t;
  t.name = "check(q=" + std::to_string(q).substr(0, 4) + ")";
  t.family = EnvelopeFamily::variance_mean(kappa);
  t.value = [q](double x) { return check_loss(x, q); };
  t.dual = [kappa](double lam) { return (kappa * kappa - 1.0) / (2.0 * lam); };
  t.lambda_hat = [](double x) { return quantile_lambda_hat(x); };
  t.dual_domain = {0.0, kInf};
  return t;
}

/// m log cosh(x/2) as a Gaussian scale envelope; θ(z) = m log cosh(√(2z)/2) and θ⋆ is
/// computed on z ∈ [0, max_abs_x² + 4].
inline EnvelopeTarget logcosh_scale_envelope(double m, double max_abs_x = 6.0) {
  EnvelopeTarget t;
  t.name = "logcosh-scale(m=" + std::to_string(static_cast<int>(m)) + ")";
  t.family = EnvelopeFamily::gaussian_scale();
  t.value = [m](double x) { return m * log_cosh(0.5 * x); };
  const double zmax = max_abs_x * max_abs_x + 4.0;
  t.dual = [m, zmax](double lam) {
    auto theta = [m](double z) { return m * log_cosh(0.5 * std::sqrt(2.0 * z)); };
    return conjugate_numeric(theta, lam, GridSpec{0.0, zmax, 21, 11}, ConjugateSense::concave);
  };
  t.lambda_hat = [m](double x) { return logit_scale_lambda(x, m); };
  t.dual_domain = {0.0, kInf};
  return t;
}

/// m log cosh(x/2) as a Gaussian location envelope (needs m ≤ 4 so that ½x² − m log cosh(x/2)
/// is convex); λ̂ = x − (m/2) tanh(x/2).
inline EnvelopeTarget logcosh_location_envelope(double m) {
  detail::require(m > 0.0 && m <= 4.0, "location envelope of m log cosh(x/2) needs 0 < m <= 4");
  EnvelopeTarget t;
  t.name = "logcosh-location(m=" + std::to_string(static_cast<int>(m)) + ")";
  t.family = EnvelopeFamily::gaussian_location();
  t.value = [m](double x) { return m * log_cosh(0.5 * x); };
  t.dual = [m](double lam) {
    auto theta = [m](double x) { return 0.5 * x * x - m * log_cosh(0.5 * x); };
    const GridSpec g{lam - 3.0, lam + 3.0, 21, 10};
    return conjugate_numeric(theta, lam, g, ConjugateSense::convex) - 0.5 * lam * lam;
  };
  t.lambda_hat = [m](double x) { return x - 0.5 * m * std::tanh(0.5 * x); };
  return t;
}

}  // namespace hierduals
