#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hierduals/solvers.hpp"
#include "test_support.hpp"

using namespace hierduals;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// Weighted polynomial least squares of degree k on i = 0..n−1.
Eigen::VectorXd weighted_poly_fit(const Eigen::VectorXd& z, const Eigen::VectorXd& omega, int k) {
  const int n = static_cast<int>(z.size());
  Eigen::MatrixXd x(n, k + 1);
  for (int i = 0; i < n; ++i) {
    const double t = (i - 0.5 * (n - 1)) / n;
    for (int j = 0; j <= k; ++j) x(i, j) = std::pow(t, j);
  }
  const Eigen::MatrixXd w = omega.asDiagonal();
  const Eigen::VectorXd c = (x.transpose() * w * x).ldlt().solve(x.transpose() * w * z);
  return x * c;
}

/// ‖subgradient selection‖ residual for Σ(ω/2)(z−β)² + lam‖Dβ‖₁: the least-squares
/// dual s solves λDᵀs = Ω(z − β); we report max of the stationarity misfit, the box
/// violation |s| − 1 and the sign mismatch on rows with (Dβ)_j away from zero.
double kkt_residual(const Eigen::VectorXd& z, const Eigen::VectorXd& omega, int k, double lam,
                    const Eigen::VectorXd& beta) {
  const Eigen::MatrixXd d = hdtest::dense_difference(static_cast<int>(z.size()), k);
  const Eigen::VectorXd g = omega.cwiseProduct(z - beta);
  const Eigen::VectorXd s = (lam * d * d.transpose()).ldlt().solve(d * g);
  double res = (lam * d.transpose() * s - g).lpNorm<Eigen::Infinity>();
  const Eigen::VectorXd db = d * beta;
  const double scale = std::max(1.0, beta.lpNorm<Eigen::Infinity>());
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    res = std::max(res, std::abs(s[j]) - 1.0);
    if (std::abs(db[j]) > 1e-7 * scale) res = std::max(res, std::abs(s[j] - sgn(db[j])));
  }
  return res;
}

}  // namespace

TEST(WeightedFusedLassoTest, ZeroEdgesDecouple) {
  const Eigen::VectorXd z = vec({3, -1, 2, 7});
  EXPECT_EQ(weighted_fused_lasso(z, vec({1, 2, 3, 4}), vec({0, 0, 0})), z);
}

TEST(WeightedFusedLassoTest, TwoPointsMatchBruteForce) {
  const Eigen::VectorXd beta = weighted_fused_lasso(vec({0, 2}), vec({1, 1}), vec({1}));
  auto f = [](double a, double b) { return 0.5 * a * a + 0.5 * (2 - b) * (2 - b) + std::abs(b - a); };
  const auto [a, b] = hdtest::grid_min_2d(f, -1.0, 3.0);
  EXPECT_NEAR(a, 1.0, 1e-6);
  EXPECT_NEAR(b, 1.0, 1e-6);
  EXPECT_NEAR(beta[0], 1.0, 1e-14);
  EXPECT_NEAR(beta[1], 1.0, 1e-14);
}

TEST(WeightedFusedLassoTest, FullFusionGivesWeightedMean) {
  const Eigen::VectorXd z = vec({1, 5, -2, 4, 0});
  const Eigen::VectorXd w = vec({0.5, 1, 2, 1.5, 3});
  const double big = w.sum() * (z.maxCoeff() - z.minCoeff());
  const Eigen::VectorXd beta = weighted_fused_lasso(z, w, Eigen::VectorXd::Constant(4, big));
  const double mean = w.dot(z) / w.sum();
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(beta[i], mean, 1e-12);
}

TEST(WeightedFusedLassoTest, Validation) {
  EXPECT_THROW(weighted_fused_lasso(vec({1, 2}), vec({1, 0}), vec({1})), RejectedInput);
  EXPECT_THROW(weighted_fused_lasso(vec({1, 2}), vec({1, 1}), vec({1, 1})), RejectedInput);
  EXPECT_THROW(weighted_fused_lasso(vec({1, 2}), vec({1, 1}), vec({-1})), RejectedInput);
  EXPECT_EQ(weighted_fused_lasso(vec({4}), vec({2}), Eigen::VectorXd(0)), vec({4}));
}

TEST(WeightedFusedLassoTest, AgreesWithLongRunAdmm) {
  std::mt19937_64 gen(1234);
  SolverConfig cfg;
  cfg.inner_max_iters = 100000;
  cfg.inner_tol = 1e-13;
  for (int t = 0; t < 50; ++t) {
    const int n = std::uniform_int_distribution<int>(2, 50)(gen);
    const Eigen::VectorXd z = hdtest::random_vector(gen, n, -3, 3);
    const Eigen::VectorXd w = hdtest::random_vector(gen, n, 0.2, 2.0);
    const Eigen::VectorXd u = hdtest::random_vector(gen, n - 1, 0.0, 1.5);
    const Eigen::VectorXd dp = weighted_fused_lasso(z, w, u);
    const Eigen::VectorXd admm = trend_filter_admm(z, w, 0, u, cfg, TrendSplitting::soft_threshold);
    EXPECT_LE((dp - admm).lpNorm<Eigen::Infinity>(), 1e-6) << "instance " << t << " n=" << n;
  }
}

TEST(WeightedTrendFilterTest, ZeroLambdaIsIdentity) {
  const Eigen::VectorXd z = vec({1, 4, 2, 8, 5});
  EXPECT_EQ(weighted_trend_filter(z, Eigen::VectorXd::Ones(5), 1, 0.0, SolverConfig{}), z);
  EXPECT_EQ(solve_trend_filter(z, Eigen::VectorXd::Ones(5), 2, 0.0, SolverConfig{}), z);
}

TEST(WeightedTrendFilterTest, LargeLambdaGivesWeightedPolynomialFit) {
  std::mt19937_64 gen(8);
  const int n = 15;
  const Eigen::VectorXd z = hdtest::random_vector(gen, n, -2, 2);
  const Eigen::VectorXd w = hdtest::random_vector(gen, n, 0.5, 2.0);
  SolverConfig cfg;
  cfg.inner_max_iters = 200000;
  cfg.inner_tol = 1e-12;
  for (int k : {1, 2}) {
    const Eigen::VectorXd ref = weighted_poly_fit(z, w, k);
    const Eigen::VectorXd admm = weighted_trend_filter(z, w, k, 1e4, cfg);
    EXPECT_LE((admm - ref).lpNorm<Eigen::Infinity>(), 1e-6) << "admm k=" << k;
    const Eigen::VectorXd ip = solve_trend_filter(z, w, k, 1e4, cfg);
    EXPECT_LE((ip - ref).lpNorm<Eigen::Infinity>(), 1e-6) << "interior point k=" << k;
  }
}

TEST(WeightedTrendFilterTest, KktResidualAtExit) {
  std::mt19937_64 gen(31);
  SolverConfig ip;
  ip.inner_tol = 1e-12;
  SolverConfig admm = ip;
  admm.trend_solver = TrendSolver::admm;
  admm.inner_max_iters = 100000;
  for (int t = 0; t < 20; ++t) {
    const int k = 1 + t % 2;
    const int n = std::uniform_int_distribution<int>(k + 3, 60)(gen);
    const Eigen::VectorXd z = hdtest::random_vector(gen, n, -3, 3);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const double lam = std::uniform_real_distribution<double>(0.1, 3.0)(gen);
    EXPECT_LE(kkt_residual(z, ones, k, lam, solve_trend_filter(z, ones, k, lam, ip)), 1e-6) << "ip t=" << t;
    EXPECT_LE(kkt_residual(z, ones, k, lam, solve_trend_filter(z, ones, k, lam, admm)), 1e-6) << "admm t=" << t;
  }
}

TEST(WeightedTrendFilterTest, AdmmWarmStateIsReused) {
  std::mt19937_64 gen(4);
  const Eigen::VectorXd z = hdtest::random_vector(gen, 40, -2, 2);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(40);
  SolverConfig cfg;
  AdmmState st;
  AdmmInfo cold, warm;
  const Eigen::VectorXd b1 = weighted_trend_filter(z, w, 1, 0.5, cfg, TrendSplitting::fused_lasso, &st, &cold);
  const Eigen::VectorXd b2 = weighted_trend_filter(z, w, 1, 0.5, cfg, TrendSplitting::fused_lasso, &st, &warm);
  EXPECT_TRUE(cold.converged);
  EXPECT_LE(warm.iters, cold.iters);
  EXPECT_LE((b1 - b2).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(WeightedTrendFilterTest, Validation) {
  EXPECT_THROW(weighted_trend_filter(vec({1, 2}), vec({1, 1}), 1, 1.0, SolverConfig{}), RejectedInput);
  EXPECT_THROW(weighted_trend_filter(vec({1, 2, 3}), vec({1, 1, 1}), 1, -1.0, SolverConfig{}), RejectedInput);
  EXPECT_THROW(weighted_trend_filter(vec({1, 2, 3}), vec({1, 0, 1}), 1, 1.0, SolverConfig{}), RejectedInput);
  SolverConfig bad;
  bad.tol = 0.0;
  EXPECT_THROW(weighted_trend_filter(vec({1, 2, 3}), vec({1, 1, 1}), 1, 1.0, bad), RejectedInput);
}

TEST(ProximalGradientTest, OneStepFromZeroIsSoftThreshold) {
  const Eigen::VectorXd y = vec({3, -0.5, 1.2, -4});
  SolverConfig cfg;
  cfg.max_iters = 1;
  const FitResult r = proximal_gradient(LossSpec::gaussian(y), PenaltySpec::l1(1.0), Eigen::VectorXd::Zero(4), cfg);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(r.beta[i], soft_threshold(y[i], 1.0));
  EXPECT_EQ(r.iters, 1);
  EXPECT_EQ(r.trace.size(), 2u);
}

TEST(ProximalGradientTest, GaussianLassoMatchesCoordinateDescent) {
  std::mt19937_64 gen(77);
  SolverConfig cfg;
  cfg.max_iters = 100000;
  cfg.tol = 1e-14;
  cfg.step_tol = 1e-10;
  for (int t = 0; t < 5; ++t) {
    const Eigen::MatrixXd a = hdtest::random_matrix(gen, 20, 10);
    const Eigen::VectorXd y = hdtest::random_vector(gen, 20, -3, 3);
    const double w = 1.5;
    const LossSpec loss = LossSpec::gaussian(y, a);
    const PenaltySpec pen = PenaltySpec::l1(w);
    const FitResult r = proximal_gradient(loss, pen, Eigen::VectorXd::Zero(10), cfg);
    const Eigen::VectorXd oracle = hdtest::lasso_coordinate_descent(a, y, w);
    const double f_oracle = 0.5 * (y - a * oracle).squaredNorm() + w * oracle.lpNorm<1>();
    EXPECT_LE(std::abs(r.objective - f_oracle), 1e-6);
    // Fixed-point condition x⋆ = prox(x⋆ − a∇l(x⋆)).
    const double lip = lipschitz_bound(loss);
    EXPECT_LE((proximal_gradient_step(loss, pen, r.beta, lip) - r.beta).lpNorm<Eigen::Infinity>(), 1e-8);
    // aux λ = x/a − ∇l(x).
    EXPECT_LE((r.aux.at("lambda") - (lip * r.beta - loss_grad(loss, r.beta))).norm(), 1e-12);
  }
}

TEST(ProximalGradientTest, DegenerateLogitFlagsNonConvergence) {
  const Eigen::VectorXd y = vec({0, 1, 1, 0, 1});
  const LossSpec loss = LossSpec::binomial_logit(y, Eigen::VectorXd::Ones(5));
  SolverConfig cfg;
  const FitResult r = proximal_gradient(loss, PenaltySpec::double_pareto(0.0, 1.0), Eigen::VectorXd::Zero(5), cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iters, cfg.max_iters);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(logistic(r.beta[i]), y[i], 0.01);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
}

TEST(ProximalGradientTest, CapabilityErrors) {
  const Eigen::VectorXd y = vec({1, 2});
  EXPECT_THROW(proximal_gradient(LossSpec::check(y, 0.5), PenaltySpec::l1(1.0), y, SolverConfig{}), CapabilityError);
  EXPECT_THROW(proximal_gradient(LossSpec::gaussian(y), PenaltySpec::psi_specified(), y, SolverConfig{}),
               CapabilityError);
}

TEST(MMDriverTest, ExactMinimizerStepSettlesAfterOneCycle) {
  double x = 5.0;
  std::function<double(const double&)> f = [](const double& v) { return (v - 2.0) * (v - 2.0); };
  std::vector<MMStep<double>> steps{{"exact", [](double& v) { v = 2.0; }}};
  const MMOutcome out = mm_driver(f, steps, x, SolverConfig{});
  EXPECT_TRUE(out.converged);
  ASSERT_GE(out.trace.size(), 2u);
  EXPECT_EQ(out.trace[1], 0.0);
  EXPECT_EQ(out.iters, 2);  // the second cycle confirms no change
  EXPECT_EQ(x, 2.0);
}

TEST(MMDriverTest, DoubleParetoScalarExample) {
  // y = 3, γ = a = 1: alternate x = S(y; λ) and λ = γ/(a + |x|).
  struct S {
    double x = 3.0, lam = 0.0;
  } st;
  std::function<double(const S&)> f = [](const S& s) { return 0.5 * (3.0 - s.x) * (3.0 - s.x) + std::log1p(std::abs(s.x)); };
  std::vector<MMStep<S>> steps{{"lambda", [](S& s) { s.lam = 1.0 / (1.0 + std::abs(s.x)); }},
                               {"x", [](S& s) { s.x = soft_threshold(3.0, s.lam); }}};
  SolverConfig cfg;
  cfg.tol = 1e-15;
  const MMOutcome out = mm_driver(f, steps, st, cfg);
  EXPECT_NEAR(st.x, 1.0 + std::sqrt(3.0), 1e-7);
  for (std::size_t i = 1; i < out.trace.size(); ++i) EXPECT_LE(out.trace[i], out.trace[i - 1] + 1e-10);
}

TEST(MMDriverTest, ConstantObjectiveIsFlat) {
  int state = 0;
  std::function<double(const int&)> f = [](const int&) { return 1.0; };
  std::vector<MMStep<int>> steps{{"noop", [](int& s) { ++s; }}};
  const MMOutcome out = mm_driver(f, steps, state, SolverConfig{});
  EXPECT_TRUE(out.converged);
  for (double v : out.trace) EXPECT_EQ(v, 1.0);
}

TEST(MMDriverTest, IncreaseNamesOffendingStep) {
  double x = 0.0;
  std::function<double(const double&)> f = [](const double& v) { return v; };
  std::vector<MMStep<double>> steps{{"down", [](double& v) { v -= 1.0; }}, {"up", [](double& v) { v += 2.0; }}};
  try {
    mm_driver(f, steps, x, SolverConfig{});
    FAIL() << "expected a monotonicity violation";
  } catch (const MonotonicityViolation& e) {
    EXPECT_EQ(e.step(), "up");
    EXPECT_EQ(e.before(), -1.0);
    EXPECT_EQ(e.after(), 1.0);
  }
}

TEST(MMDriverTest, SlackAllowsRoundoff) {
  double x = 1.0;
  std::function<double(const double&)> f = [](const double& v) { return v; };
  std::vector<MMStep<double>> steps{{"jitter", [](double& v) { v += 5e-11; }}};
  EXPECT_NO_THROW(mm_driver(f, steps, x, SolverConfig{}));
}

TEST(LogisticFusedLassoTest, HalfProportionsGiveZero) {
  const Eigen::VectorXd m = vec({10, 4, 6, 2});
  const FitResult r = logistic_fused_lasso(0.5 * m, m, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Constant(4, 1.0),
                                           SolverConfig{});
  EXPECT_LE(r.beta.lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST(LogisticFusedLassoTest, HugeEdgesGivePooledLogit) {
  const Eigen::VectorXd y = vec({2, 7, 1, 9, 4});
  const Eigen::VectorXd m = vec({10, 10, 5, 12, 8});
  SolverConfig cfg;
  cfg.tol = 1e-14;
  cfg.max_iters = 5000;
  const FitResult r = logistic_fused_lasso(y, m, Eigen::VectorXd::Constant(4, 1e4), Eigen::VectorXd::Zero(5), cfg);
  const double pooled = std::log(y.sum() / (m.sum() - y.sum()));
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(r.beta[i], pooled, 1e-6);
}

TEST(LogisticFusedLassoTest, TwoPointsMatchBruteForce) {
  const Eigen::VectorXd y = vec({3, 7});
  const Eigen::VectorXd m = vec({10, 10});
  SolverConfig cfg;
  cfg.tol = 1e-15;
  cfg.max_iters = 10000;
  const FitResult r = logistic_fused_lasso(y, m, vec({0.5}), Eigen::VectorXd::Zero(2), cfg);
  auto f = [&](double a, double b) {
    return 10 * log1p_exp(a) - 3 * a + 10 * log1p_exp(b) - 7 * b + 0.5 * std::abs(b - a);
  };
  const auto [a, b] = hdtest::grid_min_2d(f, -3.0, 3.0);
  EXPECT_NEAR(r.beta[0], a, 1e-5);
  EXPECT_NEAR(r.beta[1], b, 1e-5);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1] + 1e-10 * std::abs(r.trace[i - 1]));
}
