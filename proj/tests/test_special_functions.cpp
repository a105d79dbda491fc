#include <cmath>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <gtest/gtest.h>

#include "cirphylo/special_functions.hpp"

using namespace cirphylo;

namespace {

// log I_{1/2}(x) = log(sqrt(2/(pi x)) sinh x), written to survive large x.
double log_bessel_half(double x) {
  return 0.5 * std::log(2.0 / (std::numbers::pi * x)) + x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0);
}

// log I_{3/2}(x) = log(sqrt(2/(pi x)) (cosh x - sinh x / x)).
double log_bessel_three_halves(double x) {
  const auto e = std::exp(-2.0 * x);
  const auto bracket = (1.0 + e) - (1.0 - e) / x;  // 2 e^{-x} (cosh x - sinh x / x)
  return 0.5 * std::log(2.0 / (std::numbers::pi * x)) + x + std::log(bracket) - std::log(2.0);
}

// Poisson mixture of central chi-squared densities.  Far in the right tail the
// dominant terms sit at k near x/2, well past the Poisson mode, so the sum runs
// until both the weights and the terms are negligible.
double noncentral_chi2_series(double df, double nc, double x) {
  const auto lambda = 0.5 * nc;
  double sum = 0.0;
  for (double k = 0.0;; k += 1.0) {
    const auto log_w = -lambda + k * std::log(lambda) - std::lgamma(k + 1.0);
    const boost::math::chi_squared_distribution<double> chi{df + 2.0 * k};
    const auto term = std::exp(log_w) * boost::math::pdf(chi, x);
    sum += term;
    if (k > lambda && k > 0.5 * x && term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

TEST(BesselI, ZeroArgument) {
  EXPECT_EQ(bessel_i(0.0, 0.0), 1.0);
  EXPECT_EQ(bessel_i(1.5, 0.0), 0.0);
  EXPECT_EQ(log_bessel_i(2.0, 0.0), -std::numeric_limits<double>::infinity());
}

TEST(BesselI, HalfIntegerClosedForm) {
  EXPECT_NEAR(bessel_i(0.5, 1.0), std::sqrt(2.0 / std::numbers::pi) * std::sinh(1.0), 1e-12);
  for (double x : {1e-6, 1e-3, 0.1, 0.7, 1.0, 3.0, 10.0, 29.0, 31.0, 80.0, 500.0, 5000.0, 1e5}) {
    SCOPED_TRACE(x);
    EXPECT_NEAR(log_bessel_i(0.5, x), log_bessel_half(x), 1e-10 * std::max(1.0, 1.0));
    if (x > 1e-3) EXPECT_NEAR(log_bessel_i(1.5, x), log_bessel_three_halves(x), 1e-10);
  }
}

TEST(BesselI, MatchesBoostAcrossRegimes) {
  for (double nu : {-0.75, -0.5, 0.0, 0.3, 1.0, 2.5, 7.0, 19.5, 60.0, 250.0, 700.0}) {
    for (double x : {1e-4, 0.01, 0.5, 1.0, 4.0, 12.0, 25.0, 45.0, 120.0, 400.0, 650.0}) {
      const auto expected = boost::math::cyl_bessel_i(nu, x);
      if (!std::isfinite(expected) || expected <= std::numeric_limits<double>::min() * 1e10) continue;
      SCOPED_TRACE(testing::Message() << "nu=" << nu << " x=" << x);
      EXPECT_NEAR(bessel_i(nu, x) / expected, 1.0, 1e-10);
    }
  }
}

TEST(BesselI, RecurrenceHoldsBeyondDoubleRange) {
  // I_{nu-1}(x) - I_{nu+1}(x) = (2 nu / x) I_nu(x), checked in log space where
  // the values themselves overflow.
  for (double nu : {0.7, 3.2, 40.0, 600.0}) {
    for (double x : {800.0, 2000.0, 1e4}) {
      SCOPED_TRACE(testing::Message() << "nu=" << nu << " x=" << x);
      const auto lm = log_bessel_i(nu - 1.0, x);
      const auto l0 = log_bessel_i(nu, x);
      const auto lp = log_bessel_i(nu + 1.0, x);
      const auto lhs = std::exp(lm - l0) - std::exp(lp - l0);
      EXPECT_NEAR(lhs, 2.0 * nu / x, 1e-9 * std::max(1.0, std::exp(lm - l0)));
    }
  }
}

TEST(BesselI, PositiveAndIncreasing) {
  // Monotone for nonnegative orders; negative orders blow up at 0 and are only
  // checked for positivity.
  for (double x = 0.05; x < 2000.0; x *= 1.3) EXPECT_TRUE(std::isfinite(log_bessel_i(-0.9, x)));
  for (double nu : {0.0, 1.3, 15.0, 200.0}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double x = 0.05; x < 2000.0; x *= 1.3) {
      const auto l = log_bessel_i(nu, x);
      ASSERT_TRUE(std::isfinite(l)) << nu << " " << x;
      ASSERT_GT(l, prev) << nu << " " << x;
      prev = l;
    }
  }
}

TEST(BesselI, OrderBelowMinusOneRejected) {
  EXPECT_THROW(log_bessel_i(-1.5, 1.0), Domain_error);
  EXPECT_THROW(log_bessel_i(0.5, -1.0), Domain_error);
}

TEST(NoncentralChi2, CentralReduction) {
  EXPECT_NEAR(noncentral_chi2_pdf(2.0, 0.0, 1.0), 0.5 * std::exp(-0.5), 1e-15);
  const boost::math::chi_squared_distribution<double> chi{3.7};
  for (double x : {0.1, 1.0, 4.0, 12.0}) EXPECT_NEAR(noncentral_chi2_pdf(3.7, 0.0, x), boost::math::pdf(chi, x), 1e-14);
}

TEST(NoncentralChi2, MatchesPoissonMixtureSeries) {
  for (auto [df, nc] : {std::pair{3.0, 2.5}, {0.5, 1.0}, {4.0, 40.0}, {10.0, 200.0}, {1.2, 0.01}}) {
    for (double x : {0.05, 0.5, 2.0, 7.0, 30.0, 220.0}) {
      const auto expected = noncentral_chi2_series(df, nc, x);
      if (expected < 1e-250) continue;
      SCOPED_TRACE(testing::Message() << "df=" << df << " nc=" << nc << " x=" << x);
      EXPECT_NEAR(noncentral_chi2_pdf(df, nc, x) / expected, 1.0, 1e-9);
    }
  }
}

TEST(NoncentralChi2, MatchesBoost) {
  const boost::math::non_central_chi_squared_distribution<double> law{3.0, 2.5};
  for (double x : {0.2, 2.0, 5.0, 15.0}) EXPECT_NEAR(noncentral_chi2_pdf(3.0, 2.5, x) / boost::math::pdf(law, x), 1.0, 1e-9);
}

TEST(NoncentralChi2, IntegratesToOne) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (auto [df, nc] : {std::pair{3.0, 2.5}, {0.6, 3.0}, {8.0, 0.0}}) {
    const auto total = integrator.integrate([&](double x) { return noncentral_chi2_pdf(df, nc, x); }, 0.0,
                                            std::numeric_limits<double>::infinity());
    EXPECT_NEAR(total, 1.0, 1e-8) << df << " " << nc;
  }
}

TEST(NoncentralChi2, NegativeArgumentIsZero) {
  EXPECT_EQ(noncentral_chi2_pdf(3.0, 1.0, -0.5), 0.0);
}
