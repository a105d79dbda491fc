#pragma once

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "error.hpp"

namespace cirphylo {

namespace detail {

template <std::size_t N>
Eigen::MatrixXd pade_pair_solve(const Eigen::MatrixXd& a, const std::array<double, N>& coef) {
  // Degrees 3..9: U = A * sum odd, V = sum even, built from explicit powers.
  const auto n = a.rows();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd a2 = a * a;
  Eigen::MatrixXd power = identity;
  Eigen::MatrixXd odd = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd even = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k + 1 < N; k += 2) {
    even += coef[k] * power;
    odd += coef[k + 1] * power;
    power = power * a2;
  }
  const Eigen::MatrixXd u = a * odd;
  return (even - u).partialPivLu().solve(even + u);
}

}  // namespace detail

/// Matrix exponential by scaling and squaring with a [m/m] Pade approximant,
/// m chosen from {3, 5, 7, 9, 13} by the 1-norm (Higham 2005).
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw Validation_error{"expm: matrix must be square"};
  if (!a.allFinite()) throw Numerical_error{"expm: non-finite input"};
  const auto n = a.rows();
  if (n == 0) return a;

  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();

  static constexpr std::array<double, 4> b3{120.0, 60.0, 12.0, 1.0};
  static constexpr std::array<double, 6> b5{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
  static constexpr std::array<double, 8> b7{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                            25200.0,    1512.0,    56.0,      1.0};
  static constexpr std::array<double, 10> b9{17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                             2162160.0,     110880.0,     3960.0,       90.0,        1.0};

  if (norm <= 1.495585217958292e-2) return detail::pade_pair_solve(a, b3);
  if (norm <= 2.539398330063230e-1) return detail::pade_pair_solve(a, b5);
  if (norm <= 9.504178996162932e-1) return detail::pade_pair_solve(a, b7);
  if (norm <= 2.097847961257068e0) return detail::pade_pair_solve(a, b9);

  constexpr double theta13 = 5.371920351148152;
  int squarings = 0;
  if (norm > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
  const Eigen::MatrixXd s = a / std::ldexp(1.0, squarings);

  static constexpr std::array<double, 14> b{64764752532480000.0,
                                            32382376266240000.0,
                                            7771770303897600.0,
                                            1187353796428800.0,
                                            129060195264000.0,
                                            10559470521600.0,
                                            670442572800.0,
                                            33522128640.0,
                                            1323241920.0,
                                            40840800.0,
                                            960960.0,
                                            16380.0,
                                            182.0,
                                            1.0};
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd s2 = s * s;
  const Eigen::MatrixXd s4 = s2 * s2;
  const Eigen::MatrixXd s6 = s4 * s2;
  const Eigen::MatrixXd u =
      s * (s6 * (b[13] * s6 + b[11] * s4 + b[9] * s2) + b[7] * s6 + b[5] * s4 + b[3] * s2 + b[1] * identity);
  const Eigen::MatrixXd v =
      s6 * (b[12] * s6 + b[10] * s4 + b[8] * s2) + b[6] * s6 + b[4] * s4 + b[2] * s2 + b[0] * identity;
  Eigen::MatrixXd result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

}  // namespace cirphylo
