#pragma once

// Forward simulation: CIR rate paths, Cox-process substitution counts, and
// heterotachous sequence evolution down a tree.  These are the independent
// oracles for the closed forms elsewhere in the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "alignment.hpp"
#include "cir.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "substitution.hpp"
#include "tree.hpp"

namespace cirphylo {

enum class Path_mode {
  exact,  // grid values drawn from the exact transition law
  euler,  // full-truncation Euler-Maruyama
};

struct Path_options {
  double dt = 1e-3;
  Path_mode mode = Path_mode::exact;
};

// Rates on the uniform grid k * step, k = 0..steps; tau is their trapezoid.
struct Rate_path {
  double step;
  std::vector<double> rates;
  double tau;

  double time(std::size_t k) const noexcept { return step * static_cast<double>(k); }
  double end_rate() const { return rates.back(); }
};

struct Integrated_rate {
  double tau;
  double end_rate;
};

namespace detail {

inline std::size_t step_count(double t, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Domain_error{"simulate: dt must be positive"};
  if (!(t >= 0.0) || !std::isfinite(t)) throw Domain_error{"simulate: time must be >= 0"};
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t / dt - 1e-9)));
}

// One path step of length h.  `state` is the Euler auxiliary value (may be
// negative); the returned rate is the observable nonnegative value.
template <typename Urbg>
double advance(const Cir_params& p, Path_mode mode, double& state, double h, Urbg& rng) {
  if (mode == Path_mode::exact) {
    state = sample_transition(p, std::max(state, 0.0), h, rng);
    return state;
  }
  boost::random::normal_distribution<double> normal;
  const auto positive = std::max(state, 0.0);
  state += p.b() * (p.a() - positive) * h + std::sqrt(p.sigma2() * positive * h) * normal(rng);
  return std::max(state, 0.0);
}

}  // namespace detail

/// Rate path from R_0 = r0 over [0, t] on a grid of ceil(t/dt) equal steps.
template <typename Urbg>
Rate_path simulate_path(const Cir_params& p, double r0, double t, const Path_options& opts, Urbg& rng) {
  detail::require_rate(r0, "simulate_path");
  const auto steps = detail::step_count(t, opts.dt);
  const auto h = t / static_cast<double>(steps);
  Rate_path path{.step = h, .rates = {}, .tau = 0.0};
  path.rates.reserve(steps + 1);
  path.rates.push_back(r0);
  double state = r0;
  for (std::size_t k = 0; k < steps; ++k) {
    const auto prev = path.rates.back();
    const auto next = detail::advance(p, opts.mode, state, h, rng);
    path.tau += 0.5 * h * (prev + next);
    path.rates.push_back(next);
  }
  return path;
}

/// tau over [0, t] and R_t, without storing the path.  t = 0 gives (0, r0).
template <typename Urbg>
Integrated_rate integrate_rate(const Cir_params& p, double r0, double t, const Path_options& opts, Urbg& rng) {
  detail::require_rate(r0, "integrate_rate");
  if (t == 0.0) return {0.0, r0};
  const auto steps = detail::step_count(t, opts.dt);
  const auto h = t / static_cast<double>(steps);
  double state = r0, prev = r0, tau = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const auto next = detail::advance(p, opts.mode, state, h, rng);
    tau += 0.5 * h * (prev + next);
    prev = next;
  }
  return {tau, prev};
}

/// tau for `n_paths` independent paths from R_0 = r0.  Paths are simulated in
/// blocks, block k using make_stream(seed, k), so the output is independent of
/// `workers`.  Euler mode advances eight paths in lockstep.
inline std::vector<double> simulate_integrated_rates(const Cir_params& p, double r0, double t, std::size_t n_paths,
                                                     const Path_options& opts, std::uint64_t seed,
                                                     unsigned workers = 0) {
  detail::require_rate(r0, "simulate_integrated_rates");
  if (!(t > 0.0)) throw Domain_error{"simulate_integrated_rates: time must be positive"};
  const auto steps = detail::step_count(t, opts.dt);
  const auto h = t / static_cast<double>(steps);
  constexpr std::size_t block = 4096;
  constexpr std::size_t lanes = 8;
  std::vector<double> taus(n_paths);
  const auto blocks = (n_paths + block - 1) / block;

  parallel_for(blocks, workers, [&](std::size_t k) {
    auto rng = make_stream(seed, k);
    const auto begin = k * block;
    const auto end = std::min(n_paths, begin + block);
    if (opts.mode == Path_mode::exact) {
      for (auto i = begin; i < end; ++i) taus[i] = integrate_rate(p, r0, t, opts, rng).tau;
      return;
    }
    boost::random::normal_distribution<double> normal;
    const auto drift = p.b() * h;
    const auto target = p.a() * drift;
    const auto vol = std::sqrt(p.sigma2() * h);
    for (auto i = begin; i < end; i += lanes) {
      std::array<double, lanes> x, z, tau;
      x.fill(r0);
      tau.fill(0.0);
      for (std::size_t s = 0; s < steps; ++s) {
        for (auto& v : z) v = normal(rng);
        for (std::size_t l = 0; l < lanes; ++l) {
          const auto pos = x[l] > 0.0 ? x[l] : 0.0;
          x[l] = x[l] + (target - drift * pos) + vol * std::sqrt(pos) * z[l];
          const auto next = x[l] > 0.0 ? x[l] : 0.0;
          tau[l] += 0.5 * h * (pos + next);
        }
      }
      for (std::size_t l = 0; l < lanes && i + l < end; ++l) taus[i + l] = tau[l];
    }
  });
  return taus;
}

struct Thinning_options {
  Path_options path{};
  // Dominating intensity is this factor times the largest grid rate in a block.
  double bound_factor = 1.5;
  std::size_t block_steps = 16;
};

/// Number of events in [0, t] of a Poisson process with intensity R_s, R_0 = r0.
/// The intensity between grid points is the linear interpolation of the path,
/// so counts are Poisson(tau) given the path.  Events are drawn by thinning a
/// homogeneous process whose rate is refreshed per block of grid steps.
template <typename Urbg>
std::int64_t simulate_substitutions(const Cir_params& p, double r0, double t, Urbg& rng,
                                    const Thinning_options& opts = {}) {
  detail::require_rate(r0, "simulate_substitutions");
  detail::require_positive_time(t, "simulate_substitutions");
  if (!(opts.bound_factor >= 1.0)) throw Validation_error{"simulate_substitutions: bound factor must be >= 1"};
  if (opts.block_steps == 0) throw Validation_error{"simulate_substitutions: block size must be positive"};

  const auto steps = detail::step_count(t, opts.path.dt);
  const auto h = t / static_cast<double>(steps);
  std::uniform_real_distribution<double> uniform{0.0, 1.0};
  std::vector<double> grid;
  grid.reserve(opts.block_steps + 1);

  std::int64_t count = 0;
  double state = r0, rate = r0;
  for (std::size_t start = 0; start < steps; start += opts.block_steps) {
    const auto n = std::min(opts.block_steps, steps - start);
    grid.assign(1, rate);
    for (std::size_t k = 0; k < n; ++k) grid.push_back(detail::advance(p, opts.path.mode, state, h, rng));
    rate = grid.back();

    // Linear interpolation never exceeds the largest grid value, so the bound
    // holds on the whole block.
    const auto bound = opts.bound_factor * *std::max_element(grid.begin(), grid.end());
    if (bound <= 0.0) continue;
    std::exponential_distribution<double> gap{bound};
    const auto length = h * static_cast<double>(n);
    for (double s = gap(rng); s < length; s += gap(rng)) {
      const auto pos = s / h;
      const auto k = std::min(static_cast<std::size_t>(pos), n - 1);
      const auto frac = pos - static_cast<double>(k);
      const auto intensity = grid[k] + frac * (grid[k + 1] - grid[k]);
      if (uniform(rng) * bound < intensity) ++count;
    }
  }
  return count;
}

/// As above with R_0 drawn from the stationary law.
template <typename Urbg>
std::int64_t simulate_substitutions(const Cir_params& p, double t, Urbg& rng, const Thinning_options& opts = {}) {
  const auto r0 = stationary_sample(p, rng);
  return simulate_substitutions(p, r0, t, rng, opts);
}

/// Counts from `replicates` stationary Cox-process runs (replicate i on
/// make_stream(seed, i)).
inline std::vector<std::int64_t> simulate_counts(const Cir_params& p, double t, std::size_t replicates,
                                                 std::uint64_t seed, const Thinning_options& opts = {},
                                                 unsigned workers = 0) {
  std::vector<std::int64_t> counts(replicates);
  parallel_for(replicates, workers, [&](std::size_t i) {
    auto rng = make_stream(seed, i);
    counts[i] = simulate_substitutions(p, t, rng, opts);
  });
  return counts;
}

inline Dispersion_estimate dispersion_experiment(const Cir_params& p, double t, std::size_t replicates,
                                                 std::uint64_t seed, const Thinning_options& opts = {},
                                                 unsigned workers = 0) {
  if (replicates < 100) throw Validation_error{"dispersion_experiment: need at least 100 replicates"};
  const auto counts = simulate_counts(p, t, replicates, seed, opts, workers);
  return empirical_dispersion(counts);
}

struct Sequence_options {
  Path_options path{};
  Alphabet alphabet = Alphabet::dna();
  bool record_tau = false;
  unsigned workers = 0;
};

struct Simulated_alignment {
  Alignment alignment;  // one row per leaf, in tree index order
  // tau[site][node] for the branch above each node (0 at the root); empty unless
  // Sequence_options::record_tau.
  std::vector<std::vector<double>> tau;
};

namespace detail {

template <typename Urbg>
int draw_state(const Eigen::Ref<const Eigen::VectorXd>& probs, Urbg& rng) {
  std::uniform_real_distribution<double> uniform{0.0, 1.0};
  double total = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) total += std::max(probs[k], 0.0);
  auto u = uniform(rng) * total;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    u -= std::max(probs[k], 0.0);
    if (u < 0.0) return static_cast<int>(k);
  }
  for (auto k = probs.size() - 1; k > 0; --k) {
    if (probs[k] > 0.0) return static_cast<int>(k);
  }
  return 0;
}

}  // namespace detail

/// Each site gets its own CIR path down the tree, continuous across internal
/// nodes and stationary at the root; characters change by e^{Q tau} on each
/// branch.  Site s uses make_stream(seed, s).
inline Simulated_alignment simulate_sequences(const Tree& tree, const Rate_matrix& m, const Cir_params& p,
                                              std::size_t n_sites, std::uint64_t seed,
                                              const Sequence_options& opts = {}) {
  if (n_sites == 0) throw Validation_error{"simulate_sequences: need at least one site"};
  if (tree.size() == 0) throw Validation_error{"simulate_sequences: empty tree"};
  if (opts.alphabet.size() != m.size()) throw Validation_error{"simulate_sequences: alphabet size != model size"};

  const auto leaves = tree.leaves();
  const auto node_count = static_cast<std::size_t>(tree.size());
  std::vector<std::vector<int>> states(n_sites);
  std::vector<std::vector<double>> taus(opts.record_tau ? n_sites : 0);

  parallel_for(n_sites, opts.workers, [&](std::size_t site) {
    auto rng = make_stream(seed, site);
    std::vector<double> rate(node_count), tau(node_count, 0.0);
    std::vector<int> state(node_count);
    rate[0] = stationary_sample(p, rng);
    state[0] = detail::draw_state(m.pi(), rng);
    for (std::size_t v = 1; v < node_count; ++v) {
      const auto& node = tree.node(static_cast<int>(v));
      const auto parent = static_cast<std::size_t>(node.parent);
      const auto step = integrate_rate(p, rate[parent], node.branch_length, opts.path, rng);
      rate[v] = step.end_rate;
      tau[v] = step.tau;
      if (step.tau == 0.0) {
        state[v] = state[parent];
      } else {
        const Eigen::MatrixXd probs = transition_integrated(m, step.tau);
        state[v] = detail::draw_state(probs.row(state[parent]).transpose(), rng);
      }
    }
    states[site] = std::move(state);
    if (opts.record_tau) taus[site] = std::move(tau);
  });

  Simulated_alignment out;
  for (auto leaf : leaves) {
    out.alignment.names.push_back(tree.node(leaf).label);
    std::string seq(n_sites, '?');
    for (std::size_t s = 0; s < n_sites; ++s) seq[s] = opts.alphabet.decode(states[s][static_cast<std::size_t>(leaf)]);
    out.alignment.sequences.push_back(std::move(seq));
  }
  out.tau = std::move(taus);
  return out;
}

}  // namespace cirphylo
