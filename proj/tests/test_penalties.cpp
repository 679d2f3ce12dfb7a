#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hierduals/penalties.hpp"
#include "hierduals/validation.hpp"
#include "test_support.hpp"

using namespace hierduals;

TEST(PenaltyValueTest, Examples) {
  EXPECT_EQ(penalty_value(PenaltySpec::double_pareto(1.0, 1.0), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(penalty_value(PenaltySpec::mcp(1.0, 3.0), 4.0), 1.5);
  EXPECT_DOUBLE_EQ(penalty_value(PenaltySpec::limited_translation(), 0.5), 0.125);
  EXPECT_DOUBLE_EQ(penalty_value(PenaltySpec::limited_translation(), 3.0), 1.0);
  EXPECT_DOUBLE_EQ(penalty_value(PenaltySpec::l1(2.0), -1.5), 3.0);
  EXPECT_DOUBLE_EQ(penalty_value(PenaltySpec::ridge(2.0), -1.5), 2.25);
}

TEST(PenaltyValueTest, ZeroAtOriginSymmetricAndNondecreasing) {
  const std::vector<PenaltySpec> kinds{PenaltySpec::l1(1.5), PenaltySpec::ridge(0.7),
                                       PenaltySpec::double_pareto(2.0, 0.5), PenaltySpec::mcp(1.0, 3.0),
                                       PenaltySpec::limited_translation()};
  for (const auto& p : kinds) {
    EXPECT_EQ(penalty_value(p, 0.0), 0.0) << to_string(p.kind);
    double prev = 0.0;
    for (int i = 1; i <= 200; ++i) {
      const double x = 0.05 * i;
      const double v = penalty_value(p, x);
      EXPECT_EQ(v, penalty_value(p, -x)) << to_string(p.kind);
      EXPECT_GE(v, prev) << to_string(p.kind) << " x=" << x;
      prev = v;
    }
  }
}

TEST(PenaltyValueTest, PsiSpecifiedMatchesEnvelopeOracle) {
  const PenaltySpec p = PenaltySpec::psi_specified();
  for (double x : {0.0, 0.3, -1.0, 2.5}) {
    const auto r = hdtest::scan_min(
        [&](double lam) { return 0.5 * (std::abs(x) - lam) * (std::abs(x) - lam) + lam / (2.0 * (1.0 + lam)); }, 0.0,
        std::abs(x) + 2.0);
    EXPECT_NEAR(penalty_value(p, x), r.value, 1e-9) << "x=" << x;
  }
}

TEST(PenaltyDerivTest, Examples) {
  EXPECT_DOUBLE_EQ(penalty_deriv(PenaltySpec::double_pareto(1.0, 1.0), 1.0), 0.5);
  EXPECT_DOUBLE_EQ(penalty_deriv(PenaltySpec::mcp(1.0, 3.0), 1.5), 0.5);
  EXPECT_DOUBLE_EQ(penalty_deriv(PenaltySpec::mcp(1.0, 3.0), 4.0), 0.0);
}

TEST(PenaltyDerivTest, RightLimitAtZero) {
  EXPECT_DOUBLE_EQ(penalty_deriv(PenaltySpec::double_pareto(2.0, 4.0), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(penalty_deriv(PenaltySpec::mcp(1.5, 3.0), 0.0), 1.5);
  EXPECT_DOUBLE_EQ(penalty_deriv(PenaltySpec::l1(0.7), 0.0), 0.7);
  EXPECT_THROW(penalty_deriv(PenaltySpec::psi_specified(), 1.0), CapabilityError);
}

TEST(PenaltyDerivTest, FiniteDifferenceConsistency) {
  const std::vector<PenaltySpec> kinds{PenaltySpec::l1(1.5), PenaltySpec::ridge(0.7),
                                       PenaltySpec::double_pareto(2.0, 0.5), PenaltySpec::mcp(1.0, 3.0),
                                       PenaltySpec::limited_translation()};
  for (const auto& p : kinds) {
    std::vector<double> kinks{0.0};
    if (p.kind == PenaltyKind::mcp) kinks.push_back(p.a * p.gamma);
    if (p.kind == PenaltyKind::limited_translation) kinks.push_back(kSqrt2);
    for (int i = -400; i <= 400; ++i) {
      const double x = 0.0123 * i + 0.001;
      bool near_kink = false;
      for (double k : kinks) near_kink = near_kink || std::abs(std::abs(x) - k) < 1e-3;
      if (near_kink) continue;
      const double fd = hdtest::central_diff([&](double t) { return penalty_value(p, t); }, x);
      EXPECT_NEAR(fd, penalty_deriv(p, x), 1e-5) << to_string(p.kind) << " x=" << x;
    }
  }
}

TEST(PenaltyDualTest, Examples) {
  EXPECT_DOUBLE_EQ(penalty_dual(PenaltySpec::mcp(1.0, 3.0), 0.5), -0.375);
  EXPECT_EQ(penalty_dual(PenaltySpec::mcp(1.0, 3.0), 2.0), 0.0);
  EXPECT_NEAR(penalty_dual(PenaltySpec::double_pareto(1.0, 1.0), 1.0), 0.0, 1e-15);
  EXPECT_EQ(penalty_dual(PenaltySpec::l1(1.0), 1.5), 0.0);
  EXPECT_EQ(penalty_dual(PenaltySpec::l1(1.0), 0.5), -kInf);
  EXPECT_THROW(penalty_dual(PenaltySpec::mcp(1.0, 3.0), -0.1), DomainError);
  EXPECT_THROW(penalty_dual(PenaltySpec::psi_specified(), 1.0), CapabilityError);
}

TEST(PenaltyDualTest, McpAndDoubleParetoMatchScanOracle) {
  for (const PenaltySpec& p : {PenaltySpec::mcp(1.0, 3.0), PenaltySpec::mcp(0.5, 2.0),
                               PenaltySpec::double_pareto(1.0, 1.0), PenaltySpec::double_pareto(2.0, 0.5)}) {
    for (int i = 1; i <= 40; ++i) {
      const double lam = 2.0 * p.gamma * i / 40.0;
      const double hi = p.kind == PenaltyKind::mcp ? 2.0 * p.a * p.gamma + 1.0 : 4.0 * p.gamma / lam + 10.0;
      const auto r = hdtest::scan_min([&](double x) { return lam * x - penalty_value(p, x); }, 0.0, hi);
      EXPECT_NEAR(penalty_dual(p, lam), r.value, 1e-6) << to_string(p.kind) << " lam=" << lam;
    }
  }
}

TEST(PenaltyDualTest, LimitedTranslationDelegatesToOracle) {
  const PenaltySpec p = PenaltySpec::limited_translation();
  for (double lam : {0.1, 0.5, 1.0, 3.0}) {
    const auto r = hdtest::scan_min([&](double x) { return lam * x - penalty_value(p, x); }, 0.0,
                                    std::max(10.0, 10.0 / lam));
    EXPECT_NEAR(penalty_dual(p, lam), r.value, 1e-6) << "lam=" << lam;
  }
}

TEST(LambdaHatTest, Examples) {
  EXPECT_DOUBLE_EQ(lambda_hat(PenaltySpec::double_pareto(1.0, 1.0), 1.0, EnvelopeFamily::exponential()), 0.5);
  EXPECT_DOUBLE_EQ(lambda_hat(PenaltySpec::limited_translation(), 3.0, EnvelopeFamily::gaussian_location()), 3.0);
  EXPECT_DOUBLE_EQ(lambda_hat(PenaltySpec::ridge(0.7), 2.0, EnvelopeFamily::gaussian_scale()), 0.7);
  EXPECT_DOUBLE_EQ(lambda_hat(PenaltySpec::ridge(0.7), 0.0, EnvelopeFamily::gaussian_scale()), 0.7);
}

TEST(LambdaHatTest, GaussianScaleForms) {
  const PenaltySpec dp = PenaltySpec::double_pareto(1.0, 1.0);
  EXPECT_DOUBLE_EQ(lambda_hat(dp, 2.0, EnvelopeFamily::gaussian_scale()), (1.0 / 3.0) / 2.0);
  EXPECT_EQ(lambda_hat(PenaltySpec::l1(1.0), 0.0, EnvelopeFamily::gaussian_scale()), kLambdaCap);
  EXPECT_DOUBLE_EQ(lambda_hat(PenaltySpec::l1(1.0), 4.0, EnvelopeFamily::gaussian_scale()), 0.25);
}

TEST(LambdaHatTest, IncompatiblePairingsRaise) {
  EXPECT_THROW(lambda_hat(PenaltySpec::mcp(1.0, 3.0), 1.0, EnvelopeFamily::gaussian_location()), CapabilityError);
  EXPECT_THROW(lambda_hat(PenaltySpec::ridge(2.0), 1.0, EnvelopeFamily::gaussian_location()), CapabilityError);
  EXPECT_THROW(lambda_hat(PenaltySpec::l1(1.0), 1.0, EnvelopeFamily::variance_mean(0.1)), CapabilityError);
  EXPECT_THROW(lambda_hat(PenaltySpec::psi_specified(), 1.0, EnvelopeFamily::gaussian_scale()), CapabilityError);
}

TEST(ProxTest, Examples) {
  EXPECT_DOUBLE_EQ(prox(PenaltySpec::l1(2.0), 5.0, 1.0), 3.0);
  EXPECT_NEAR(prox(PenaltySpec::double_pareto(1.0, 1.0), 3.0, 1.0), 1.0 + std::sqrt(3.0), 1e-14);
  EXPECT_EQ(prox(PenaltySpec::double_pareto(1.0, 1.0), 0.0, 1.0), 0.0);
  EXPECT_NEAR(prox_double_pareto_closed_form(3.0, 1.0, 1.0, 1.0), 1.0 + std::sqrt(3.0), 1e-14);
  EXPECT_THROW(prox(PenaltySpec::psi_specified(), 1.0, 1.0), CapabilityError);
  EXPECT_THROW(prox(PenaltySpec::l1(1.0), 1.0, 0.0), RejectedInput);
}

TEST(ProxTest, McpTieGoesToLargerMagnitude) {
  // s = 1, γ = 1, a = 1: the objectives at 0 and at u tie when u²/2 = aγ²/2, i.e. u = 1.
  const PenaltySpec p = PenaltySpec::mcp(1.0, 1.0);
  EXPECT_DOUBLE_EQ(prox(p, 1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(prox(p, -1.0, 1.0), -1.0);
  EXPECT_EQ(prox(p, 0.9, 1.0), 0.0);
}

TEST(ProxTest, MatchesScanOracle) {
  std::mt19937_64 gen(4242);
  std::uniform_real_distribution<double> uu(-6.0, 6.0), us(0.2, 3.0), ug(0.1, 2.0), ua(0.5, 4.0);
  for (int t = 0; t < 200; ++t) {
    const PenaltySpec specs[] = {PenaltySpec::l1(ug(gen)), PenaltySpec::ridge(ug(gen)),
                                 PenaltySpec::double_pareto(ug(gen), ua(gen)), PenaltySpec::mcp(ug(gen), ua(gen)),
                                 PenaltySpec::limited_translation()};
    const PenaltySpec& p = specs[t % 5];
    const double u = uu(gen);
    const double s = us(gen);
    auto obj = [&](double x) { return 0.5 * s * (x - u) * (x - u) + penalty_value(p, x); };
    const auto r = hdtest::scan_min(obj, -std::abs(u) - 5.0, std::abs(u) + 5.0, 50001);
    const double x = prox(p, u, s);
    const bool ok = std::abs(x - r.x) <= 1e-4 || obj(x) <= r.value + 1e-8;
    EXPECT_TRUE(ok) << to_string(p.kind) << " u=" << u << " s=" << s << " prox=" << x << " oracle=" << r.x;
  }
}

TEST(ProxTest, MonotoneShrinkage) {
  const std::vector<PenaltySpec> kinds{PenaltySpec::l1(1.5), PenaltySpec::ridge(0.7),
                                       PenaltySpec::double_pareto(2.0, 0.5), PenaltySpec::mcp(1.0, 3.0)};
  for (const auto& p : kinds) {
    for (int i = -300; i <= 300; ++i) {
      const double u = 0.031 * i;
      for (double s : {0.3, 1.0, 4.0}) {
        const double x = prox(p, u, s);
        EXPECT_LE(std::abs(x), std::abs(u) + 1e-15) << to_string(p.kind);
        EXPECT_TRUE(x == 0.0 || sgn(x) == sgn(u)) << to_string(p.kind) << " u=" << u;
      }
    }
  }
}

TEST(PenaltyEnvelopeTest, DeclaredFamiliesPassIdentity) {
  const auto xs = envelope_x_grid();
  for (const PenaltySpec& p : {PenaltySpec::l1(1.0), PenaltySpec::ridge(1.0), PenaltySpec::double_pareto(1.0, 1.0),
                               PenaltySpec::mcp(1.0, 3.0), PenaltySpec::limited_translation()}) {
    const auto t = declared_envelope(p);
    ASSERT_TRUE(t) << to_string(p.kind);
    const auto rep = check_envelope_identity(*t, xs, 1e-6);
    EXPECT_TRUE(rep.passed) << to_string(p.kind) << " gap " << rep.max_gap << " lambda err " << rep.max_lambda_error;
  }
  EXPECT_FALSE(declared_envelope(PenaltySpec::psi_specified()));
}

TEST(PenaltySpecTest, ConfigRoundTrip) {
  const PenaltySpec p = PenaltySpec::mcp(0.3, 2.5);
  const PenaltySpec back = PenaltySpec::from_config(p.to_config());
  EXPECT_EQ(back.kind, p.kind);
  EXPECT_EQ(back.gamma, p.gamma);
  EXPECT_EQ(back.a, p.a);
  EXPECT_EQ(back.weight, p.weight);
  const auto cfg = PenaltySpec::l1(0.1).to_config();
  EXPECT_EQ(cfg.at("kind"), "l1");
  EXPECT_EQ(PenaltySpec::from_config(cfg).weight, 0.1);
  EXPECT_THROW(PenaltySpec::from_config({{"kind", "scad"}}), RejectedInput);
  EXPECT_THROW(PenaltySpec::from_config({{"kind", "mcp"}, {"gamma", "abc"}}), RejectedInput);
  EXPECT_THROW(PenaltySpec::from_config({{"gamma", "1"}}), RejectedInput);
}

TEST(PenaltySpecTest, Validation) {
  EXPECT_THROW(PenaltySpec::l1(-1.0), RejectedInput);
  EXPECT_THROW(PenaltySpec::double_pareto(1.0, 0.0), RejectedInput);
  EXPECT_THROW(PenaltySpec::mcp(-1.0, 3.0), RejectedInput);
  EXPECT_NO_THROW(PenaltySpec::double_pareto(0.0, 1.0));
}
