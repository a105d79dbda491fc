#pragma once

// Reversible substitution rate matrices and their transition probabilities under
// constant, CIR start-conditioned, and CIR bridge-conditioned rates.  Every
// transition matrix here is a spectral function V f(Lambda) V^{-1} of Q.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cir.hpp"
#include "error.hpp"
#include "mgf.hpp"

namespace cirphylo {

/// Q = V diag(lambdas) V^{-1}, eigenvalues in descending order (lambdas[0] = 0).
struct Eigensystem {
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd right;  // V, eigenvectors as columns
  Eigen::MatrixXd left;   // V^{-1}, eigenvectors as rows
};

class Rate_matrix {
 public:
  /// Validates, normalizes so that sum_i pi_i (-Q_ii) = 1, and diagonalizes.
  /// `q` needs valid off-diagonals; its diagonal is recomputed from row sums.
  /// Throws Validation_error unless pi_i Q_ij = pi_j Q_ji.
  Rate_matrix(Eigen::MatrixXd q, Eigen::VectorXd pi) : q_{std::move(q)}, pi_{std::move(pi)} {
    const auto n = q_.rows();
    if (n < 2 || q_.cols() != n || pi_.size() != n) throw Validation_error{"rate matrix: Q must be n x n, pi length n"};
    if (!q_.allFinite() || !pi_.allFinite()) throw Validation_error{"rate matrix: non-finite entries"};
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(pi_[i] > 0.0)) throw Validation_error{"rate matrix: frequencies must be positive"};
    }
    if (std::abs(pi_.sum() - 1.0) > 1e-9) throw Validation_error{"rate matrix: frequencies must sum to 1"};
    pi_ /= pi_.sum();

    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        if (!(q_(i, j) >= 0.0)) throw Validation_error{"rate matrix: off-diagonal rates must be >= 0"};
        row += q_(i, j);
      }
      q_(i, i) = -row;
    }

    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) scale -= pi_[i] * q_(i, i);
    if (!(scale > 0.0)) throw Validation_error{"rate matrix: no substitutions at stationarity"};
    q_ /= scale;

    const auto max_flux = (pi_.asDiagonal() * q_).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (std::abs(pi_[i] * q_(i, j) - pi_[j] * q_(j, i)) > 1e-9 * max_flux) {
          throw Validation_error{"rate matrix: not reversible (pi_" + std::to_string(i) + " Q_" + std::to_string(i) +
                                 std::to_string(j) + " != pi_" + std::to_string(j) + " Q_" + std::to_string(j) +
                                 std::to_string(i) + ")"};
        }
      }
    }
    diagonalize();
  }

  Eigen::Index size() const noexcept { return q_.rows(); }
  const Eigen::MatrixXd& q() const noexcept { return q_; }
  const Eigen::VectorXd& pi() const noexcept { return pi_; }
  const Eigensystem& eigen() const noexcept { return eigen_; }

  /// V diag(f(lambda_k)) V^{-1}.  f is called once per distinct eigenvalue
  /// (eigenvalues within 1e-13 of their predecessor share its value).
  template <typename F>
  Eigen::MatrixXd spectral(F&& f) const {
    Eigen::VectorXd values(size());
    const auto tol = 1e-13 * std::max(1.0, std::abs(eigen_.lambdas[size() - 1]));
    for (Eigen::Index k = 0; k < size(); ++k) {
      if (k > 0 && std::abs(eigen_.lambdas[k] - eigen_.lambdas[k - 1]) <= tol) {
        values[k] = values[k - 1];
      } else {
        values[k] = f(eigen_.lambdas[k]);
      }
    }
    return eigen_.right * values.asDiagonal() * eigen_.left;
  }

 private:
  // The symmetrized form diag(sqrt pi) Q diag(1/sqrt pi) has an orthonormal
  // eigenbasis W; then V = diag(1/sqrt pi) W and V^{-1} = W^T diag(sqrt pi).
  void diagonalize() {
    const Eigen::VectorXd root = pi_.cwiseSqrt();
    Eigen::MatrixXd sym = root.asDiagonal() * q_ * root.cwiseInverse().asDiagonal();
    sym = 0.5 * (sym + sym.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver{sym};
    if (solver.info() != Eigen::Success) throw Numerical_error{"rate matrix: eigendecomposition failed"};

    const auto n = size();
    eigen_.lambdas.resize(n);
    eigen_.right.resize(n, n);
    eigen_.left.resize(n, n);
    // Eigen returns ascending order.
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto src = n - 1 - k;
      eigen_.lambdas[k] = solver.eigenvalues()[src];
      eigen_.right.col(k) = root.cwiseInverse().cwiseProduct(solver.eigenvectors().col(src));
      eigen_.left.row(k) = solver.eigenvectors().col(src).cwiseProduct(root).transpose();
    }
    // The stationary eigenvalue is zero exactly.
    eigen_.lambdas[0] = 0.0;

    const auto scale = std::max(1.0, eigen_.lambdas.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd rebuilt = eigen_.right * eigen_.lambdas.asDiagonal() * eigen_.left;
    const auto error = (rebuilt - q_).cwiseAbs().rowwise().sum().maxCoeff();
    if (error > 1e-10 * scale) throw Numerical_error{"rate matrix: eigendecomposition reconstruction error too large"};
    if (n > 1 && eigen_.lambdas[1] > -1e-12 * scale) {
      throw Validation_error{"rate matrix: Q is reducible (repeated zero eigenvalue)"};
    }
  }

  Eigen::MatrixXd q_;
  Eigen::VectorXd pi_;
  Eigensystem eigen_;
};

// Nucleotide order is A, C, G, T throughout.
inline Rate_matrix make_jc() {
  Eigen::MatrixXd q = Eigen::MatrixXd::Ones(4, 4);
  return Rate_matrix{q, Eigen::VectorXd::Constant(4, 0.25)};
}

inline Rate_matrix make_hky(double kappa, const Eigen::Vector4d& pi) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw Validation_error{"kappa must be positive"};
  Eigen::MatrixXd q(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const bool transition = (i + j == 2 && i != j) || (i + j == 4 && i != j);  // A<->G, C<->T
      q(i, j) = (transition ? kappa : 1.0) * pi[j];
    }
  }
  return Rate_matrix{q, pi};
}

inline Rate_matrix make_k2p(double kappa) { return make_hky(kappa, Eigen::Vector4d::Constant(0.25)); }

/// Exchangeabilities in the order AC, AG, AT, CG, CT, GT.
inline Rate_matrix make_gtr(const std::array<double, 6>& exchange, const Eigen::Vector4d& pi) {
  for (auto r : exchange) {
    if (!(r > 0.0) || !std::isfinite(r)) throw Validation_error{"GTR exchangeabilities must be positive"};
  }
  Eigen::Matrix4d s = Eigen::Matrix4d::Zero();
  s(0, 1) = s(1, 0) = exchange[0];
  s(0, 2) = s(2, 0) = exchange[1];
  s(0, 3) = s(3, 0) = exchange[2];
  s(1, 2) = s(2, 1) = exchange[3];
  s(1, 3) = s(3, 1) = exchange[4];
  s(2, 3) = s(3, 2) = exchange[5];
  Eigen::MatrixXd q = s * pi.asDiagonal();
  return Rate_matrix{q, pi};
}

enum class Model_family { jc, k2p, hky, gtr, custom };

inline Model_family parse_model_family(std::string_view name) {
  std::string lower{name};
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "jc" || lower == "jc69") return Model_family::jc;
  if (lower == "k2p" || lower == "k80") return Model_family::k2p;
  if (lower == "hky" || lower == "hky85") return Model_family::hky;
  if (lower == "gtr") return Model_family::gtr;
  if (lower == "custom") return Model_family::custom;
  throw Validation_error{"unknown model family '" + std::string{name} + "'"};
}

struct Model_spec {
  Model_family family = Model_family::jc;
  std::map<std::string, double> params;  // "kappa"; "ac","ag","at","cg","ct","gt"
  std::vector<double> frequencies;       // empty = uniform
  std::optional<Eigen::MatrixXd> custom_q;
};

inline Rate_matrix build_rate_matrix(const Model_spec& spec) {
  auto param = [&](const std::string& key, double fallback) {
    auto it = spec.params.find(key);
    return it == spec.params.end() ? fallback : it->second;
  };
  auto nucleotide_freqs = [&]() -> Eigen::Vector4d {
    if (spec.frequencies.empty()) return Eigen::Vector4d::Constant(0.25);
    if (spec.frequencies.size() != 4) throw Validation_error{"nucleotide models need 4 frequencies"};
    return Eigen::Vector4d{spec.frequencies[0], spec.frequencies[1], spec.frequencies[2], spec.frequencies[3]};
  };

  switch (spec.family) {
    case Model_family::jc:
      return make_jc();
    case Model_family::k2p:
      return make_k2p(param("kappa", 1.0));
    case Model_family::hky:
      return make_hky(param("kappa", 1.0), nucleotide_freqs());
    case Model_family::gtr:
      return make_gtr({param("ac", 1.0), param("ag", 1.0), param("at", 1.0), param("cg", 1.0), param("ct", 1.0),
                       param("gt", 1.0)},
                      nucleotide_freqs());
    case Model_family::custom: {
      if (!spec.custom_q) throw Validation_error{"custom model needs a rate matrix"};
      const auto n = spec.custom_q->rows();
      Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
      if (!spec.frequencies.empty()) {
        if (static_cast<Eigen::Index>(spec.frequencies.size()) != n) {
          throw Validation_error{"custom model: frequency count must match matrix size"};
        }
        pi = Eigen::Map<const Eigen::VectorXd>(spec.frequencies.data(), n);
      }
      return Rate_matrix{*spec.custom_q, pi};
    }
  }
  throw Validation_error{"unknown model family"};
}

/// e^{Q r0 t}.
inline Eigen::MatrixXd transition_constant_rate(const Rate_matrix& m, double r0, double t) {
  if (!(r0 >= 0.0) || !(t >= 0.0)) throw Domain_error{"transition_constant_rate: rate and time must be >= 0"};
  const auto tau = r0 * t;
  return m.spectral([tau](double lambda) { return std::exp(lambda * tau); });
}

/// E[e^{Q tau}] for a fixed integrated rate tau.
inline Eigen::MatrixXd transition_integrated(const Rate_matrix& m, double tau) {
  if (!(tau >= 0.0)) throw Domain_error{"transition_integrated: tau must be >= 0"};
  return m.spectral([tau](double lambda) { return std::exp(lambda * tau); });
}

/// Pr[X_t = j | X_0 = i, R_0 = r0] = V diag(M_{r0}(lambda_k, t)) V^{-1}.
inline Eigen::MatrixXd transition_cir_start(const Rate_matrix& m, const Cir_params& p, double r0, double t) {
  return m.spectral([&](double lambda) { return lambda == 0.0 ? 1.0 : mgf_start(p, r0, lambda, t); });
}

/// Pr[X_t = j | X_0 = i, R_0 = r0, R_t = rt] = V diag(M_{r0,rt}(lambda_k, t)) V^{-1}.
inline Eigen::MatrixXd transition_cir_bridge(const Rate_matrix& m, const Cir_params& p, double r0, double rt,
                                             double t) {
  const auto log_density = log_transition_pdf(p, r0, t, rt);
  if (!std::isfinite(log_density)) throw Numerical_error{"transition_cir_bridge: transition density underflows"};
  return m.spectral([&](double lambda) {
    return lambda == 0.0 ? 1.0 : std::exp(log_mgf_bridge_kernel(p, r0, rt, lambda, t) - log_density);
  });
}

struct Joint_transition {
  Eigen::MatrixXd matrix;  // rows sum to 1: character transition given both rates
  double rate_density;     // density of R_t = rt given R_0 = r0

  /// Pr[X_t = j, R_t in drt | X_0 = i, R_0 = r0] / drt.
  Eigen::MatrixXd joint() const { return matrix * rate_density; }
};

inline Joint_transition transition_cir_joint(const Rate_matrix& m, const Cir_params& p, double r0, double rt,
                                             double t) {
  return {transition_cir_bridge(m, p, r0, rt, t), transition_pdf(p, r0, t, rt)};
}

}  // namespace cirphylo
