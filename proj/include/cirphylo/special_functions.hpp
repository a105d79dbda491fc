#pragma once

// Modified Bessel function of the first kind and the non-central chi-squared
// density, both evaluated in log space so that the huge/tiny magnitudes that
// appear in CIR transition densities do not overflow.

#include <cmath>
#include <limits>
#include <numbers>

#include "error.hpp"

namespace cirphylo {

namespace detail {

// Power series sum_k (x/2)^(2k+nu) / (k! Gamma(k+nu+1)).  All terms are positive
// for nu > -1, so the sum has no cancellation; it is accumulated relative to the
// largest term to stay in range.
inline double log_bessel_i_series(double nu, double x) {
  const auto half_x = 0.5 * x;
  const auto log_half_x = std::log(half_x);
  const auto q = half_x * half_x;

  // Index of the largest term: the ratio q / (k (k + nu)) crosses 1.
  auto peak = 0.0;
  if (q > 0.0) peak = std::max(0.0, std::ceil(0.5 * (-nu + std::sqrt(nu * nu + 4.0 * q))) - 1.0);
  const auto log_peak = (2.0 * peak + nu) * log_half_x - std::lgamma(peak + 1.0) - std::lgamma(peak + nu + 1.0);

  constexpr double tiny = 1e-17;
  double sum = 1.0, compensation = 0.0;
  auto add = [&](double v) {
    auto y = v - compensation;
    auto t = sum + y;
    compensation = (t - sum) - y;
    sum = t;
  };

  // Upward from the peak.
  double term = 1.0;
  for (double k = peak + 1.0;; k += 1.0) {
    term *= q / (k * (k + nu));
    add(term);
    if (term < tiny * sum) break;
  }
  // Downward from the peak.
  term = 1.0;
  for (double k = peak; k >= 1.0; k -= 1.0) {
    term *= k * (k + nu) / q;
    add(term);
    if (term < tiny * sum) break;
  }
  return log_peak + std::log(sum);
}

// Hankel expansion for x >> nu^2.  Returns NaN if the asymptotic series starts to
// diverge before reaching double precision.
inline double log_bessel_i_hankel(double nu, double x) {
  const auto mu = 4.0 * nu * nu;
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 200; ++k) {
    const auto odd = 2.0 * k - 1.0;
    const auto next = -term * (mu - odd * odd) / (8.0 * k * x);
    if (std::abs(next) >= std::abs(term)) return std::numeric_limits<double>::quiet_NaN();
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) {
      return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Debye uniform asymptotic expansion in 1/nu (terms u_0..u_4), for large orders.
inline double log_bessel_i_debye(double nu, double x) {
  const auto z = x / nu;
  const auto root = std::sqrt(1.0 + z * z);
  const auto p = 1.0 / root;
  const auto eta = root + std::log(z / (1.0 + root));
  const auto p2 = p * p;

  const auto u1 = p * (3.0 - 5.0 * p2) / 24.0;
  const auto u2 = p2 * (81.0 + p2 * (-462.0 + p2 * 385.0)) / 1152.0;
  const auto u3 = p * p2 * (30375.0 + p2 * (-369603.0 + p2 * (765765.0 + p2 * -425425.0))) / 414720.0;
  const auto u4 =
      p2 * p2 *
      (4465125.0 + p2 * (-94121676.0 + p2 * (349922430.0 + p2 * (-446185740.0 + p2 * 185910725.0)))) /
      39813120.0;
  const auto inv = 1.0 / nu;
  const auto series = 1.0 + inv * (u1 + inv * (u2 + inv * (u3 + inv * u4)));

  return nu * eta - 0.5 * std::log(2.0 * std::numbers::pi * nu) - 0.5 * std::log(root) + std::log(series);
}

}  // namespace detail

/// Natural log of I_nu(x), the modified Bessel function of the first kind, for
/// real order nu > -1 (or any negative integer order) and x >= 0.
///
/// Small and moderate arguments use the power series; large arguments use the
/// Hankel expansion when it converges and the Debye uniform expansion for large
/// orders. Relative accuracy of exp(result) is about 1e-12 over the CIR range.
inline double log_bessel_i(double nu, double x) {
  if (!(x >= 0.0) || !std::isfinite(nu)) throw Domain_error{"bessel_i: requires x >= 0 and finite order"};
  if (nu < 0.0 && nu == std::floor(nu)) nu = -nu;  // I_{-n} = I_n
  if (nu <= -1.0) throw Domain_error{"bessel_i: non-integer order must exceed -1"};

  if (x == 0.0) {
    if (nu == 0.0) return 0.0;
    return nu > 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  }
  if (std::isinf(x)) return std::numeric_limits<double>::infinity();

  const auto q = 0.25 * x * x;
  if (q < 25.0 * (nu + 1.0)) return detail::log_bessel_i_series(nu, x);
  if (x > 30.0) {
    if (auto h = detail::log_bessel_i_hankel(nu, x); !std::isnan(h)) return h;
  }
  if (nu >= 500.0) return detail::log_bessel_i_debye(nu, x);
  return detail::log_bessel_i_series(nu, x);
}

/// I_nu(x).  Overflows to +inf for arguments beyond ~700; use log_bessel_i there.
inline double bessel_i(double nu, double x) { return std::exp(log_bessel_i(nu, x)); }

/// Log density of the non-central chi-squared law with `df` degrees of freedom and
/// non-centrality `nc`.  Returns -inf outside the support.
inline double log_noncentral_chi2_pdf(double df, double nc, double x) {
  if (!(df > 0.0) || !(nc >= 0.0)) throw Domain_error{"noncentral_chi2_pdf: requires df > 0 and nc >= 0"};
  if (x < 0.0 || std::isinf(x)) return -std::numeric_limits<double>::infinity();

  if (x == 0.0) {
    if (df < 2.0) return std::numeric_limits<double>::infinity();
    if (df > 2.0) return -std::numeric_limits<double>::infinity();
    return -std::numbers::ln2 - 0.5 * nc;
  }

  const auto half_df = 0.5 * df;
  if (nc == 0.0) {
    return (half_df - 1.0) * std::log(x) - 0.5 * x - half_df * std::numbers::ln2 - std::lgamma(half_df);
  }
  return -std::numbers::ln2 - 0.5 * (x + nc) + (0.25 * df - 0.5) * std::log(x / nc) +
         log_bessel_i(half_df - 1.0, std::sqrt(nc * x));
}

inline double noncentral_chi2_pdf(double df, double nc, double x) {
  return std::exp(log_noncentral_chi2_pdf(df, nc, x));
}

}  // namespace cirphylo
