#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hierduals/duality.hpp"
#include "hierduals/errors.hpp"

namespace hierduals {

inline double sgn(double v) noexcept { return (v > 0.0) - (v < 0.0); }

/// S(y; λ) = sgn(y)·max(|y| − λ, 0).
inline double soft_threshold(double y, double lam) {
  if (!(lam >= 0.0)) throw RejectedInput("soft_threshold requires lam >= 0");
  const double m = std::abs(y) - lam;
  return m > 0.0 ? sgn(y) * m : 0.0;
}

/// inf_z { f(z) + (z − x)²/(2γ) } on a refined grid; +∞ values of f are skipped.
template <class F>
double moreau_envelope_numeric(F&& f, double gamma, double x, const GridSpec& grid) {
  if (!(gamma > 0.0)) throw RejectedInput("moreau envelope requires gamma > 0");
  return grid_minimize(
             [&](double z) {
               const double fz = f(z);
               if (fz == kInf) return kInf;
               return fz + (z - x) * (z - x) / (2.0 * gamma);
             },
             grid)
      .value;
}

/// Symmetric banded matrix stored by its lower band: entry (i, i−d) for d = 0..p.
class SymmetricBand {
 public:
  SymmetricBand() = default;
  SymmetricBand(int n, int half_bandwidth)
      : n_(n), p_(half_bandwidth), data_(static_cast<std::size_t>(n) * (half_bandwidth + 1), 0.0) {}

  int size() const noexcept { return n_; }
  int half_bandwidth() const noexcept { return p_; }

  /// Lower-band element (i, j) with j ≤ i and i − j ≤ p.
  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * (p_ + 1) + (i - j)]; }
  double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * (p_ + 1) + (i - j)]; }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
    for (int i = 0; i < n_; ++i) {
      for (int j = std::max(0, i - p_); j <= i; ++j) {
        m(i, j) = at(i, j);
        m(j, i) = at(i, j);
      }
    }
    return m;
  }

 private:
  int n_ = 0;
  int p_ = 0;
  std::vector<double> data_;
};

/// Cholesky factorization A = LLᵀ of a symmetric positive-definite band matrix, O(n p²).
class BandedCholesky {
 public:
  explicit BandedCholesky(const SymmetricBand& a) : l_(a) {
    const int n = l_.size();
    const int p = l_.half_bandwidth();
    for (int i = 0; i < n; ++i) {
      const int j0 = std::max(0, i - p);
      for (int j = j0; j <= i; ++j) {
        double s = l_.at(i, j);
        for (int k = std::max(j0, j - p); k < j; ++k) s -= l_.at(i, k) * l_.at(j, k);
        if (i == j) {
          if (!(s > 0.0)) throw DomainError("band matrix is not positive definite");
          l_.at(i, i) = std::sqrt(s);
        } else {
          l_.at(i, j) = s / l_.at(j, j);
        }
      }
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    const int n = l_.size();
    const int p = l_.half_bandwidth();
    detail::require(b.size() == n, "banded solve dimension mismatch");
    Eigen::VectorXd x = b;
    for (int i = 0; i < n; ++i) {
      double s = x[i];
      for (int k = std::max(0, i - p); k < i; ++k) s -= l_.at(i, k) * x[k];
      x[i] = s / l_.at(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = x[i];
      for (int k = i + 1; k <= std::min(n - 1, i + p); ++k) s -= l_.at(k, i) * x[k];
      x[i] = s / l_.at(i, i);
    }
    return x;
  }

 private:
  SymmetricBand l_;
};

/// Discrete difference operator D⁽ᵏ⁺¹⁾ on a regular grid of length n.
/// D⁽¹⁾ row i is e_i − e_{i+1}; higher orders follow D⁽ᵏ⁺¹⁾ = D⁽¹⁾D⁽ᵏ⁾.
/// Rows are stored as a (n − k − 1) × (k + 2) band: row i touches columns i..i+k+1.
class DifferenceOperator {
 public:
  DifferenceOperator(int n, int k) : n_(n), k_(k) {
    if (k < 0) throw RejectedInput("difference order k must be >= 0");
    if (n < k + 2) {
      throw RejectedInput("difference operator of order " + std::to_string(k + 1) + " needs n >= " +
                          std::to_string(k + 2));
    }
    std::vector<double> row{1.0, -1.0};
    for (int order = 1; order <= k; ++order) {
      std::vector<double> next(row.size() + 1, 0.0);
      for (std::size_t j = 0; j < next.size(); ++j) {
        if (j < row.size()) next[j] += row[j];
        if (j >= 1) next[j] -= row[j - 1];
      }
      row = std::move(next);
    }
    bands_.reserve(static_cast<std::size_t>(rows()) * width());
    for (int i = 0; i < rows(); ++i) bands_.insert(bands_.end(), row.begin(), row.end());
  }

  int order() const noexcept { return k_; }
  int cols() const noexcept { return n_; }
  int rows() const noexcept { return n_ - k_ - 1; }
  int width() const noexcept { return k_ + 2; }

  double coefficient(int row, int offset) const {
    return bands_[static_cast<std::size_t>(row) * width() + offset];
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    detail::require(v.size() == n_, "difference operator input has wrong length");
    Eigen::VectorXd out(rows());
    for (int i = 0; i < rows(); ++i) {
      double s = 0.0;
      for (int j = 0; j < width(); ++j) s += coefficient(i, j) * v[i + j];
      out[i] = s;
    }
    return out;
  }

  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& w) const {
    detail::require(w.size() == rows(), "transpose input has wrong length");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < rows(); ++i) {
      for (int j = 0; j < width(); ++j) out[i + j] += coefficient(i, j) * w[i];
    }
    return out;
  }

  /// diag(ω) + ρ DᵀD as a band of half-width k + 1.
  SymmetricBand weighted_gram(const Eigen::VectorXd& omega, double rho) const {
    detail::require(omega.size() == n_, "weight vector has wrong length");
    SymmetricBand g(n_, k_ + 1);
    for (int i = 0; i < n_; ++i) g.at(i, i) = omega[i];
    for (int r = 0; r < rows(); ++r) {
      for (int a = 0; a < width(); ++a) {
        for (int b = 0; b <= a; ++b) {
          g.at(r + a, r + b) += rho * coefficient(r, a) * coefficient(r, b);
        }
      }
    }
    return g;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows(), n_);
    for (int i = 0; i < rows(); ++i) {
      for (int j = 0; j < width(); ++j) d(i, i + j) = coefficient(i, j);
    }
    return d;
  }

 private:
  int n_;
  int k_;
  std::vector<double> bands_;
};

inline DifferenceOperator diff_matrix(int n, int k) { return DifferenceOperator(n, k); }

}  // namespace hierduals
