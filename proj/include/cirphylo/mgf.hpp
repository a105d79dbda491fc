#pragma once

// Moment generating functions of the integrated rate tau = int_0^t R_s ds.
//
// For the CIR process, conditioning on R_0 = x gives E[e^{eta tau}] = Psi e^{-x Xi}
// with bbar = sqrt(b^2 - 2 eta sigma2):
//
//   Psi = ( bbar e^{bt/2} / (bbar cosh(bbar t/2) + b sinh(bbar t/2)) )^{2ab/sigma2}
//   Xi  = -2 eta sinh(bbar t/2) / (bbar cosh(bbar t/2) + b sinh(bbar t/2))
//
// Xi carries a leading minus so that the mgf is below 1 for eta < 0.  Only real
// eta <= b^2 / (2 sigma2) is supported.

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "cir.hpp"
#include "error.hpp"
#include "matrix_exp.hpp"
#include "special_functions.hpp"

namespace cirphylo {

/// Largest eta for which bbar is real.
inline double eta_max(const Cir_params& p) { return p.b() * p.b() / (2.0 * p.sigma2()); }

namespace detail {

// Shared pieces of Psi and Xi, written with s = 1 - e^{-bbar t} and q = s / bbar so
// nothing overflows for large bbar t and the bbar -> 0 limit stays finite.
struct Mgf_terms {
  double bbar;
  double bbar_minus_b;  // computed without cancellation
  double s;
  double q;
  double den;  // (2 - s) + b q, i.e. 2 e^{-bbar t/2} (bbar cosh + b sinh) / bbar
};

inline Mgf_terms mgf_terms(const Cir_params& p, double eta, double t) {
  if (!std::isfinite(eta)) throw Domain_error{"mgf: eta must be finite"};
  if (eta > eta_max(p)) {
    throw Domain_error{"mgf: eta = " + std::to_string(eta) + " exceeds b^2/(2 sigma2) = " +
                       std::to_string(eta_max(p))};
  }
  require_positive_time(t, "mgf");
  const auto b = p.b();
  const auto bbar2 = b * b - 2.0 * eta * p.sigma2();
  const auto bbar = std::sqrt(std::max(bbar2, 0.0));
  const auto bbar_minus_b = -2.0 * eta * p.sigma2() / (bbar + b);
  const auto s = -std::expm1(-bbar * t);
  const auto q = bbar > 0.0 ? s / bbar : t;
  return {.bbar = bbar, .bbar_minus_b = bbar_minus_b, .s = s, .q = q, .den = (2.0 - s) + b * q};
}

}  // namespace detail

inline double log_psi(const Cir_params& p, double eta, double t) {
  const auto m = detail::mgf_terms(p, eta, t);
  return p.stationary_shape() * (std::log(2.0 / m.den) - 0.5 * m.bbar_minus_b * t);
}

inline double psi(const Cir_params& p, double eta, double t) { return std::exp(log_psi(p, eta, t)); }

inline double xi(const Cir_params& p, double eta, double t) {
  const auto m = detail::mgf_terms(p, eta, t);
  return -2.0 * eta * m.q / m.den;
}

inline double log_mgf_start(const Cir_params& p, double r0, double eta, double t) {
  detail::require_rate(r0, "mgf_start");
  return log_psi(p, eta, t) - r0 * xi(p, eta, t);
}

/// E[exp(eta tau) | R_0 = r0] over [0, t].
inline double mgf_start(const Cir_params& p, double r0, double eta, double t) {
  return std::exp(log_mgf_start(p, r0, eta, t));
}

/// log E[exp(eta tau) 1{R_t in dr_t}] / dr_t, i.e. the Feynman-Kac solution with a
/// delta initial condition at r_t, evaluated at x = r0.  At eta = 0 this is the
/// log transition density.
inline double log_mgf_bridge_kernel(const Cir_params& p, double r0, double rt, double eta, double t) {
  if (!(r0 > 0.0) || !(rt > 0.0) || !std::isfinite(r0) || !std::isfinite(rt)) {
    throw Domain_error{"mgf_bridge: endpoint rates must be positive"};
  }
  const auto m = detail::mgf_terms(p, eta, t);
  const auto s2 = p.sigma2();
  const auto b = p.b();
  const auto c = 2.0 / (s2 * m.q);
  const auto decay = std::exp(-m.bbar * t);
  const auto order = p.stationary_shape() - 1.0;

  return std::log(c) - p.a() * b * t / s2 * m.bbar_minus_b - m.bbar_minus_b / s2 * r0 -
         (b + m.bbar) / s2 * rt - c * (rt + r0) * decay +
         0.5 * order * (std::log(rt) - std::log(r0) + m.bbar * t) +
         log_bessel_i(order, 2.0 * c * std::sqrt(r0 * rt * decay));
}

inline double log_mgf_bridge(const Cir_params& p, double r0, double rt, double eta, double t) {
  const auto kernel = log_mgf_bridge_kernel(p, r0, rt, eta, t);
  const auto density = log_transition_pdf(p, r0, t, rt);
  if (!std::isfinite(density)) throw Numerical_error{"mgf_bridge: transition density underflows"};
  return kernel - density;
}

/// E[exp(eta tau) | R_0 = r0, R_t = rt].
inline double mgf_bridge(const Cir_params& p, double r0, double rt, double eta, double t) {
  return std::exp(log_mgf_bridge(p, r0, rt, eta, t));
}

/// Rate switching among values g_1..g_k by a continuous-time chain with generator G.
struct Covarion_spec {
  Eigen::MatrixXd switch_rates;  // G
  Eigen::VectorXd rates;         // g, the diagonal of D

  Covarion_spec(Eigen::MatrixXd g_matrix, Eigen::VectorXd g_rates)
      : switch_rates{std::move(g_matrix)}, rates{std::move(g_rates)} {
    const auto k = switch_rates.rows();
    if (k == 0 || switch_rates.cols() != k || rates.size() != k) {
      throw Validation_error{"covarion: G must be k x k and g of length k"};
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!(rates[i] >= 0.0) || !std::isfinite(rates[i])) throw Validation_error{"covarion: rates must be >= 0"};
      double row = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (i != j && !(switch_rates(i, j) >= 0.0)) {
          throw Validation_error{"covarion: off-diagonal switch rates must be >= 0"};
        }
        row += switch_rates(i, j);
      }
      if (std::abs(row) > 1e-9 * (1.0 + switch_rates.row(i).cwiseAbs().sum())) {
        throw Validation_error{"covarion: rows of G must sum to 0"};
      }
    }
  }

  Eigen::Index size() const noexcept { return rates.size(); }
};

namespace detail {

inline void check_state(const Covarion_spec& c, Eigen::Index i) {
  if (i < 0 || i >= c.size()) throw Validation_error{"covarion: state index out of range"};
}

inline Eigen::MatrixXd tilted_exp(const Covarion_spec& c, double eta, double t) {
  require_positive_time(t, "covarion_mgf");
  if (!std::isfinite(eta)) throw Domain_error{"covarion_mgf: eta must be finite"};
  Eigen::MatrixXd generator = c.switch_rates;
  generator.diagonal() += eta * c.rates;
  return expm(generator * t);
}

}  // namespace detail

/// M_{g_i}(eta) = sum_j [exp((G + eta D) t)]_{ij}.
inline double covarion_mgf_start(const Covarion_spec& c, Eigen::Index i, double eta, double t) {
  detail::check_state(c, i);
  return detail::tilted_exp(c, eta, t).row(i).sum();
}

/// M_{g_i,g_j}(eta) = [exp((G + eta D) t)]_{ij} / [exp(G t)]_{ij}.
inline double covarion_mgf_bridge(const Covarion_spec& c, Eigen::Index i, Eigen::Index j, double eta, double t) {
  detail::check_state(c, i);
  detail::check_state(c, j);
  const auto tilted = detail::tilted_exp(c, eta, t)(i, j);
  const auto plain = expm(c.switch_rates * t)(i, j);
  if (!(plain > 0.0)) throw Domain_error{"covarion_mgf_bridge: end state unreachable from start state"};
  return tilted / plain;
}

}  // namespace cirphylo
