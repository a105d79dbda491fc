#pragma once

// Site likelihoods under per-site CIR rates: the exact three-taxon star formula,
// and a Monte-Carlo estimator for general trees.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "alignment.hpp"
#include "cir.hpp"
#include "error.hpp"
#include "mgf.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "substitution.hpp"
#include "tree.hpp"

namespace cirphylo {

namespace detail {

// Leaf partial vector: indicator of the observed state, all ones when unknown.
inline Eigen::VectorXd leaf_vector(Eigen::Index n, int state) {
  if (state < 0) return Eigen::VectorXd::Ones(n);
  if (state >= n) throw Validation_error{"likelihood: state " + std::to_string(state) + " outside the alphabet"};
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[state] = 1.0;
  return v;
}

// Per-root-state likelihoods L(x1, x2, x3 | x0) of the three-taxon star, with the
// root rate integrated against the stationary gamma law:
//
//   sum_{ijk} B_ijk Psi_i(t1) Psi_j(t2) Psi_k(t3) (w / (w + Xi_i(t1) + Xi_j(t2) + Xi_k(t3)))^shape
//
// where B_ijk collects eigenvector entries at the root and leaf states.
inline Eigen::VectorXd three_taxa_conditional(const Rate_matrix& m, const Cir_params& p,
                                              const std::array<double, 3>& times,
                                              const std::array<int, 3>& states) {
  const auto n = m.size();
  const auto& eig = m.eigen();
  for (auto t : times) require_positive_time(t, "three_taxa_likelihood");

  std::array<Eigen::VectorXd, 3> psis, xis, weights;
  for (std::size_t b = 0; b < 3; ++b) {
    psis[b].resize(n);
    xis[b].resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto lambda = eig.lambdas[i];
      psis[b][i] = lambda == 0.0 ? 1.0 : psi(p, lambda, times[b]);
      xis[b][i] = lambda == 0.0 ? 0.0 : xi(p, lambda, times[b]);
    }
    weights[b] = eig.left * leaf_vector(n, states[b]);  // sum_x V^{-1}_{i x} e_b(x)
  }

  const auto rate = p.stationary_rate();
  const auto shape = p.stationary_shape();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto root_integral = psis[0][i] * psis[1][j] * psis[2][k] *
                                   std::pow(rate / (rate + xis[0][i] + xis[1][j] + xis[2][k]), shape);
        const auto leaf_part = weights[0][i] * weights[1][j] * weights[2][k] * root_integral;
        if (leaf_part == 0.0) continue;
        for (Eigen::Index x0 = 0; x0 < n; ++x0) {
          out[x0] += eig.right(x0, i) * eig.right(x0, j) * eig.right(x0, k) * leaf_part;
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// L(x1, x2, x3 | x0): leaf states x_b (or -1 for unknown) at branch lengths t_b
/// from a root in state x0 whose rate is drawn from the stationary law.
inline double three_taxa_likelihood_given_root(const Rate_matrix& m, const Cir_params& p,
                                               const std::array<double, 3>& times, const std::array<int, 3>& states,
                                               int root_state) {
  if (root_state < 0 || root_state >= m.size()) throw Validation_error{"three_taxa_likelihood: bad root state"};
  return detail::three_taxa_conditional(m, p, times, states)[root_state];
}

/// Exact pattern probability on the three-taxon star, root state marginalized
/// against pi.
inline double three_taxa_likelihood(const Rate_matrix& m, const Cir_params& p, const std::array<double, 3>& times,
                                    const std::array<int, 3>& states) {
  return m.pi().dot(detail::three_taxa_conditional(m, p, times, states));
}

struct Site_estimate {
  double likelihood;  // Monte-Carlo mean
  double se;          // standard error of the mean
  std::size_t rejected = 0;
};

struct Mc_options {
  std::size_t samples = 10000;
  std::uint64_t seed = default_seed;
  unsigned workers = 0;
};

struct Mc_result {
  std::vector<Site_estimate> sites;
  std::size_t rejected = 0;

  double log_likelihood() const {
    double total = 0.0;
    for (const auto& s : sites) total += std::log(s.likelihood);
    return total;
  }
};

/// Leaf state per tree node (index = node id; internal entries ignored) for
/// alignment column `site`.
inline std::vector<int> site_states(const Tree& tree, const std::vector<int>& leaf_row, const std::vector<std::vector<int>>& encoded,
                                    std::size_t site) {
  std::vector<int> states(static_cast<std::size_t>(tree.size()), -1);
  for (int v = 0; v < tree.size(); ++v) {
    if (leaf_row[static_cast<std::size_t>(v)] >= 0) {
      states[static_cast<std::size_t>(v)] = encoded[static_cast<std::size_t>(leaf_row[static_cast<std::size_t>(v)])][site];
    }
  }
  return states;
}

/// Maps each tree leaf to its alignment row (-1 for internal nodes).  Throws when
/// the taxon sets differ.
inline std::vector<int> match_taxa(const Tree& tree, const Alignment& aln) {
  std::unordered_map<std::string, int> rows;
  for (std::size_t r = 0; r < aln.names.size(); ++r) rows.emplace(aln.names[r], static_cast<int>(r));
  std::vector<int> leaf_row(static_cast<std::size_t>(tree.size()), -1);
  std::size_t matched = 0;
  for (int v = 0; v < tree.size(); ++v) {
    const auto& node = tree.node(v);
    if (!node.is_leaf()) continue;
    auto it = rows.find(node.label);
    if (it == rows.end()) throw Validation_error{"taxon mismatch: tree leaf '" + node.label + "' not in alignment"};
    leaf_row[static_cast<std::size_t>(v)] = it->second;
    ++matched;
  }
  if (matched != aln.names.size()) throw Validation_error{"taxon mismatch: alignment has taxa not in the tree"};
  return leaf_row;
}

/// Monte-Carlo likelihood of one site: averages, over node rates drawn from the
/// stationary law at the root and the exact transition law down each branch, the
/// pruning likelihood with bridge-conditioned branch matrices.  Samples whose
/// rates make a bridge degenerate (an endpoint at 0) are redrawn and counted.
template <typename Urbg>
Site_estimate mc_site_likelihood(const Rate_matrix& m, const Cir_params& p, const Tree& tree,
                                 const std::vector<int>& states, std::size_t samples, Urbg& rng) {
  if (samples < 100) throw Validation_error{"mc_tree_likelihood: need at least 100 samples"};
  const auto n = m.size();
  const auto node_count = static_cast<std::size_t>(tree.size());
  std::vector<double> rate(node_count);
  std::vector<Eigen::VectorXd> partial(node_count);
  std::vector<Eigen::VectorXd> leaves(node_count);
  for (std::size_t v = 0; v < node_count; ++v) {
    if (tree.node(static_cast<int>(v)).is_leaf()) leaves[v] = detail::leaf_vector(n, states[v]);
  }

  double mean = 0.0, m2 = 0.0;
  std::size_t rejected = 0, consecutive = 0;
  for (std::size_t s = 0; s < samples;) {
    rate[0] = stationary_sample(p, rng);
    bool degenerate = !(rate[0] > 0.0);
    for (std::size_t v = 1; v < node_count && !degenerate; ++v) {
      const auto& node = tree.node(static_cast<int>(v));
      const auto up = rate[static_cast<std::size_t>(node.parent)];
      if (node.branch_length == 0.0) {
        rate[v] = up;
        continue;
      }
      rate[v] = sample_transition(p, up, node.branch_length, rng);
      degenerate = !(rate[v] > 0.0);
    }

    double value = std::numeric_limits<double>::quiet_NaN();
    if (!degenerate) {
      try {
        for (auto v = node_count; v-- > 0;) {
          const auto& node = tree.node(static_cast<int>(v));
          if (node.is_leaf()) {
            partial[v] = leaves[v];
          } else {
            partial[v] = Eigen::VectorXd::Ones(n);
            for (auto c : node.children) {
              const auto& child = tree.node(c);
              const auto cu = static_cast<std::size_t>(c);
              if (child.branch_length == 0.0) {
                partial[v] = partial[v].cwiseProduct(partial[cu]);
              } else {
                const Eigen::MatrixXd bridge = transition_cir_bridge(m, p, rate[v], rate[cu], child.branch_length);
                partial[v] = partial[v].cwiseProduct(bridge * partial[cu]);
              }
            }
          }
        }
        value = m.pi().dot(partial[0]);
      } catch (const Numerical_error&) {
        value = std::numeric_limits<double>::quiet_NaN();
      }
    }

    if (!std::isfinite(value)) {
      ++rejected;
      if (++consecutive > 10000) throw Numerical_error{"mc_tree_likelihood: rate samples keep degenerating"};
      continue;
    }
    consecutive = 0;
    ++s;
    const auto delta = value - mean;
    mean += delta / static_cast<double>(s);
    m2 += delta * (value - mean);
  }
  const auto var = m2 / static_cast<double>(samples - 1);
  return {.likelihood = mean, .se = std::sqrt(var / static_cast<double>(samples)), .rejected = rejected};
}

/// Per-site Monte-Carlo likelihoods; site s uses make_stream(seed, s), so results
/// do not depend on the worker count.
inline Mc_result mc_tree_likelihood(const Rate_matrix& m, const Cir_params& p, const Tree& tree, const Alignment& aln,
                                    const Mc_options& opts = {}, const Alphabet& alphabet = Alphabet::dna()) {
  if (alphabet.size() != m.size()) throw Validation_error{"mc_tree_likelihood: alphabet size != model size"};
  validate_alignment(aln, alphabet);
  if (opts.samples < 100) throw Validation_error{"mc_tree_likelihood: need at least 100 samples"};
  const auto leaf_row = match_taxa(tree, aln);
  const auto encoded = aln.encode(alphabet);

  Mc_result result;
  result.sites.resize(aln.site_count());
  parallel_for(aln.site_count(), opts.workers, [&](std::size_t site) {
    auto rng = make_stream(opts.seed, site);
    result.sites[site] = mc_site_likelihood(m, p, tree, site_states(tree, leaf_row, encoded, site), opts.samples, rng);
  });
  for (const auto& s : result.sites) result.rejected += s.rejected;
  return result;
}

}  // namespace cirphylo
