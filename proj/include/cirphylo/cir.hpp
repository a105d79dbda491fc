#pragma once

// The CIR square-root diffusion dR = b (a - R) dt + sigma sqrt(R) dB:
// parameters, transition and stationary laws, autocovariance, the index of
// dispersion of the Cox process it drives, and the two-statistic estimator.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>

#include "error.hpp"
#include "random.hpp"
#include "special_functions.hpp"

namespace cirphylo {

class Cir_params {
 public:
  // Throws Validation_error naming the offending field.
  Cir_params(double a, double b, double sigma2) : a_{a}, b_{b}, sigma2_{sigma2} {
    check("a", a);
    check("b", b);
    check("sigma2", sigma2);
  }

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double sigma2() const noexcept { return sigma2_; }

  // Stationary law: Gamma(shape 2ab/sigma2, scale sigma2/2b).
  double stationary_shape() const noexcept { return 2.0 * a_ * b_ / sigma2_; }
  double stationary_scale() const noexcept { return sigma2_ / (2.0 * b_); }
  double stationary_rate() const noexcept { return 2.0 * b_ / sigma2_; }
  double stationary_mean() const noexcept { return a_; }
  double stationary_variance() const noexcept { return a_ * sigma2_ / (2.0 * b_); }

  // Feller condition 2ab >= sigma2.  When it fails the boundary 0 is attainable;
  // the laws below remain valid, so this is reported rather than rejected.
  bool feller_satisfied() const noexcept { return 2.0 * a_ * b_ >= sigma2_; }
  bool boundary_attainable() const noexcept { return !feller_satisfied(); }

  friend bool operator==(const Cir_params&, const Cir_params&) = default;

 private:
  static void check(const char* name, double v) {
    if (!std::isfinite(v)) throw Validation_error{std::string{name} + " must be finite"};
    if (!(v > 0.0)) throw Validation_error{std::string{name} + " must be positive"};
  }

  double a_, b_, sigma2_;
};

inline Cir_params make_params(double a, double b, double sigma2) { return Cir_params{a, b, sigma2}; }

struct Mean_var {
  double mean;
  double variance;
};

namespace detail {

inline void require_positive_time(double t, const char* what) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Domain_error{std::string{what} + ": time must be positive"};
}

inline void require_rate(double r, const char* what) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw Domain_error{std::string{what} + ": rate must be nonnegative"};
}

}  // namespace detail

inline Mean_var transition_mean_var(const Cir_params& p, double r0, double t) {
  detail::require_positive_time(t, "transition_mean_var");
  detail::require_rate(r0, "transition_mean_var");
  const auto decay = std::exp(-p.b() * t);
  const auto one_minus = -std::expm1(-p.b() * t);
  return {
      .mean = r0 * decay + p.a() * one_minus,
      .variance = r0 * (p.sigma2() / p.b()) * decay * one_minus +
                  p.stationary_variance() * one_minus * one_minus,
  };
}

// R_t given R_0 = r0 is Y / (2c) with Y non-central chi-squared.
struct Transition_law {
  double c;   // 2b / (sigma2 (1 - e^{-bt}))
  double df;  // 4ab / sigma2
  double nc;  // 2 c r0 e^{-bt}
};

inline Transition_law transition_law(const Cir_params& p, double r0, double t) {
  detail::require_positive_time(t, "transition_law");
  detail::require_rate(r0, "transition_law");
  const auto one_minus = -std::expm1(-p.b() * t);
  const auto c = 2.0 * p.b() / (p.sigma2() * one_minus);
  return {.c = c, .df = 4.0 * p.a() * p.b() / p.sigma2(), .nc = 2.0 * c * r0 * std::exp(-p.b() * t)};
}

inline double log_transition_pdf(const Cir_params& p, double r0, double t, double r) {
  const auto law = transition_law(p, r0, t);
  if (r < 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(2.0 * law.c) + log_noncentral_chi2_pdf(law.df, law.nc, 2.0 * law.c * r);
}

/// Density of R_t at r given R_0 = r0.  Zero for r < 0.
inline double transition_pdf(const Cir_params& p, double r0, double t, double r) {
  return std::exp(log_transition_pdf(p, r0, t, r));
}

/// Exact draw from the transition law, as a Poisson mixture of gammas:
/// Y | N ~ chi2(df + 2N), N ~ Poisson(nc / 2).
template <typename Urbg>
double sample_transition(const Cir_params& p, double r0, double t, Urbg& rng) {
  const auto law = transition_law(p, r0, t);
  auto shape = 0.5 * law.df;
  if (law.nc > 0.0) {
    std::poisson_distribution<std::int64_t> poisson{0.5 * law.nc};
    shape += static_cast<double>(poisson(rng));
  }
  std::gamma_distribution<double> gamma{shape, 2.0};
  return gamma(rng) / (2.0 * law.c);
}

inline double stationary_pdf(const Cir_params& p, double r) {
  if (r < 0.0) return 0.0;
  const auto shape = p.stationary_shape();
  const auto rate = p.stationary_rate();
  if (r == 0.0) {
    if (shape < 1.0) return std::numeric_limits<double>::infinity();
    return shape == 1.0 ? rate : 0.0;
  }
  return std::exp(shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(r) - rate * r);
}

template <typename Urbg>
double stationary_sample(const Cir_params& p, Urbg& rng) {
  std::gamma_distribution<double> gamma{p.stationary_shape(), p.stationary_scale()};
  return gamma(rng);
}

/// Cov(R_0, R_t) of the stationary process: (a sigma2 / 2b) e^{-bt}.
inline double autocovariance(const Cir_params& p, double t) {
  if (!(t >= 0.0)) throw Domain_error{"autocovariance: time must be nonnegative"};
  return p.stationary_variance() * std::exp(-p.b() * t);
}

/// Var[N(t)] / E[N(t)] for the Cox process with stationary CIR intensity.
/// Pass t = +infinity for the long-run limit 1 + sigma2 / b^2.
inline double index_of_dispersion(const Cir_params& p, double t) {
  const auto b = p.b();
  if (t == std::numeric_limits<double>::infinity()) return 1.0 + p.sigma2() / (b * b);
  detail::require_positive_time(t, "index_of_dispersion");

  // bt - 1 + e^{-bt}, by Taylor series where the closed form cancels.
  const auto x = b * t;
  double excess;
  if (x < 1e-3) {
    excess = x * x * (0.5 + x * (-1.0 / 6.0 + x * (1.0 / 24.0 + x * (-1.0 / 120.0))));
  } else {
    excess = x + std::expm1(-x);
  }
  return 1.0 + p.sigma2() * excess / (b * b * b * t);
}

/// Inverts gamma_hat = sigma2 / b and I_inf = 1 + sigma2 / b^2 with a fixed at 1.
inline Cir_params estimate_from_stats(double gamma_hat, double i_inf_hat) {
  if (!(gamma_hat > 0.0) || !std::isfinite(gamma_hat)) throw Validation_error{"gamma must be positive"};
  if (!(i_inf_hat > 1.0) || !std::isfinite(i_inf_hat)) {
    throw Validation_error{"index of dispersion must exceed 1 under rate variation"};
  }
  const auto excess = i_inf_hat - 1.0;
  return Cir_params{1.0, gamma_hat / excess, gamma_hat * gamma_hat / excess};
}

struct Dispersion_estimate {
  double value;  // sample variance / sample mean
  std::size_t n;
  double mean_count;
  double var_count;  // unbiased (n - 1 denominator)
};

inline Dispersion_estimate empirical_dispersion(std::span<const std::int64_t> counts) {
  if (counts.size() < 2) throw Validation_error{"empirical_dispersion: need at least two counts"};
  double mean = 0.0;
  for (auto c : counts) {
    if (c < 0) throw Validation_error{"empirical_dispersion: counts must be nonnegative"};
    mean += static_cast<double>(c);
  }
  mean /= static_cast<double>(counts.size());
  if (mean == 0.0) throw Validation_error{"mean count is zero"};

  double ss = 0.0;
  for (auto c : counts) {
    const auto d = static_cast<double>(c) - mean;
    ss += d * d;
  }
  const auto var = ss / static_cast<double>(counts.size() - 1);
  return {.value = var / mean, .n = counts.size(), .mean_count = mean, .var_count = var};
}

}  // namespace cirphylo
