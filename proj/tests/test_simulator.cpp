#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <gtest/gtest.h>

#include "cirphylo/likelihood.hpp"
#include "cirphylo/simulator.hpp"
#include "test_util.hpp"

using namespace cirphylo;
namespace ts = cirphylo::test_support;

namespace {

// Pearson statistic for two samples of counts sharing bins; sparse tail values
// are pooled into the last bin so every bin expects at least 5.
std::pair<double, int> two_sample_chi2(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::map<std::int64_t, std::pair<double, double>> table;
  for (auto x : a) table[x].first += 1;
  for (auto x : b) table[x].second += 1;
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::vector<std::pair<double, double>> bins;
  std::pair<double, double> pending{0, 0};
  for (const auto& [value, counts] : table) {
    pending.first += counts.first;
    pending.second += counts.second;
    const auto total = pending.first + pending.second;
    if (total * std::min(na, nb) / (na + nb) >= 5.0) {
      bins.push_back(pending);
      pending = {0, 0};
    }
  }
  if (pending.first + pending.second > 0) {
    bins.back().first += pending.first;
    bins.back().second += pending.second;
  }
  double stat = 0.0;
  for (auto [x, y] : bins) {
    const auto total = x + y;
    const auto ex = total * na / (na + nb), ey = total * nb / (na + nb);
    stat += (x - ex) * (x - ex) / ex + (y - ey) * (y - ey) / ey;
  }
  return {stat, static_cast<int>(bins.size()) - 1};
}

double chi2_critical(int df, double alpha) {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared_distribution<double>{double(df)}, alpha));
}

}  // namespace

TEST(SimulatePath, DeterministicLimit) {
  const auto p = make_params(1, 1, 1e-12);
  // Euler carries O(dt) error on the ODE itself, so it needs the finer grid.
  for (auto [mode, dt] : {std::pair{Path_mode::exact, 1e-3}, {Path_mode::euler, 1e-4}}) {
    Rng rng{1};
    const auto path = simulate_path(p, 3.0, 2.0, {.dt = dt, .mode = mode}, rng);
    double worst = 0.0;
    for (std::size_t k = 0; k < path.rates.size(); ++k) {
      worst = std::max(worst, std::abs(path.rates[k] - (1.0 + 2.0 * std::exp(-path.time(k)))));
    }
    EXPECT_LT(worst, 1e-4);
    EXPECT_NEAR(path.tau, 2.0 + 2.0 * (1.0 - std::exp(-2.0)), 1e-4);
  }
}

TEST(SimulatePath, GridAndTrapezoid) {
  const auto p = make_params(1, 1, 1);
  Rng rng{2};
  const auto path = simulate_path(p, 1.0, 1.0, {.dt = 0.01}, rng);
  ASSERT_EQ(path.rates.size(), 101u);
  EXPECT_DOUBLE_EQ(path.time(100), 1.0);
  double tau = 0.0;
  for (std::size_t k = 1; k < path.rates.size(); ++k) tau += 0.5 * path.step * (path.rates[k - 1] + path.rates[k]);
  EXPECT_NEAR(path.tau, tau, 1e-14);
  EXPECT_TRUE(std::all_of(path.rates.begin(), path.rates.end(), [](double r) { return r >= 0.0; }));
  EXPECT_THROW(simulate_path(p, 1.0, 1.0, {.dt = 0.0}, rng), Domain_error);
}

TEST(SimulatePath, ExactModeMeanTau) {
  const auto p = make_params(1, 1, 1);
  Rng rng{3};
  ts::Moments m;
  for (int i = 0; i < 100000; ++i) m.add(integrate_rate(p, 1.0, 1.0, {.dt = 0.01}, rng).tau);
  EXPECT_LT(std::abs(m.mean - 1.0), 3 * m.se());
}

TEST(SimulatePath, EulerMgf) {
  const auto p = make_params(1, 1, 1);
  const auto taus = simulate_integrated_rates(p, 1.0, 1.0, 100000, {.dt = 1e-3, .mode = Path_mode::euler}, 4, 1);
  ts::Moments m;
  for (auto tau : taus) m.add(std::exp(-tau));
  EXPECT_LT(std::abs(m.mean - mgf_start(p, 1.0, -1.0, 1.0)), 3 * m.se());
}

TEST(SimulatePath, MgfGrid) {
  const auto p = make_params(1, 1, 1);
  for (double r0 : {0.5, 1.0, 2.0}) {
    for (double t : {0.5, 1.0, 2.0}) {
      const auto taus = simulate_integrated_rates(p, r0, t, 20000, {.dt = 2e-3, .mode = Path_mode::euler}, 5, 1);
      for (double eta : {-2.0, -1.0, -0.5}) {
        ts::Moments m;
        for (auto tau : taus) m.add(std::exp(eta * tau));
        EXPECT_LT(std::abs(m.mean - mgf_start(p, r0, eta, t)), 3 * m.se()) << r0 << " " << t << " " << eta;
      }
    }
  }
}

TEST(SimulatePath, IntegratedRatesIndependentOfWorkers) {
  const auto p = make_params(1, 1, 1);
  for (auto mode : {Path_mode::exact, Path_mode::euler}) {
    const auto one = simulate_integrated_rates(p, 1.0, 0.5, 9000, {.dt = 0.01, .mode = mode}, 6, 1);
    const auto three = simulate_integrated_rates(p, 1.0, 0.5, 9000, {.dt = 0.01, .mode = mode}, 6, 3);
    EXPECT_EQ(one, three);
  }
}

TEST(SimulatePath, ExactMarginalMatchesTransitionLaw) {
  const auto p = make_params(1, 1, 1);
  const auto law = transition_law(p, 0.5, 1.0);
  const boost::math::non_central_chi_squared_distribution<double> chi{law.df, law.nc};
  Rng rng{7};
  std::vector<double> ends(100000);
  for (auto& r : ends) r = integrate_rate(p, 0.5, 1.0, {.dt = 0.1}, rng).end_rate;
  const auto d = ts::ks_statistic(ends, [&](double r) { return boost::math::cdf(chi, 2 * law.c * r); });
  EXPECT_LT(d, ts::ks_threshold(ends.size(), ts::ks_critical_001));
}

TEST(SimulatePath, LongRunMatchesStationaryLaw) {
  // Grid spacing 5 / b leaves lag correlation e^{-5}, close enough to
  // independent for the KS threshold.
  const auto p = make_params(1, 1, 1);
  Rng rng{8};
  const auto path = simulate_path(p, 4.0, 5.0 * 100000, {.dt = 5.0}, rng);
  std::vector<double> values(path.rates.begin() + 1, path.rates.end());
  const boost::math::gamma_distribution<double> g{p.stationary_shape(), p.stationary_scale()};
  const auto d = ts::ks_statistic(values, [&](double r) { return boost::math::cdf(g, r); });
  EXPECT_LT(d, ts::ks_threshold(values.size(), ts::ks_critical_001));
}

TEST(Substitutions, ConstantRateIsPoisson) {
  const auto p = make_params(1, 1, 1e-10);
  const auto est = dispersion_experiment(p, 10.0, 10000, 11, {.path = {.dt = 1e-2}});
  EXPECT_NEAR(est.value, 1.0, 0.05);
  EXPECT_NEAR(est.mean_count, 10.0, 3 * std::sqrt(10.0 / 10000));
}

TEST(Substitutions, MeanCountAndDispersion) {
  const auto p = make_params(1, 1, 1);
  const auto counts = simulate_counts(p, 10.0, 10000, 12, {.path = {.dt = 1e-2}});
  const auto m = ts::moments_of(counts);
  EXPECT_LT(std::abs(m.mean - 10.0), 3 * m.se());
  const auto est = empirical_dispersion(counts);
  EXPECT_NEAR(est.value / index_of_dispersion(p, 10.0), 1.0, 0.05);
  EXPECT_NEAR(index_of_dispersion(p, 10.0), 1.900005, 1e-6);
}

TEST(Substitutions, DispersionGrowsWithTime) {
  const auto p = make_params(1, 1, 1);
  EXPECT_LT(index_of_dispersion(p, 1.0), index_of_dispersion(p, 10.0));
  EXPECT_LT(index_of_dispersion(p, 10.0), 2.0);
  const auto short_run = dispersion_experiment(p, 1.0, 10000, 13, {.path = {.dt = 1e-2}});
  EXPECT_NEAR(short_run.value / index_of_dispersion(p, 1.0), 1.0, 0.05);
  EXPECT_THROW(dispersion_experiment(p, 1.0, 99, 13), Validation_error);
}

TEST(Substitutions, ThinningBoundDoesNotMatter) {
  const auto p = make_params(1, 1, 1);
  const auto base = simulate_counts(p, 5.0, 10000, 14, {.path = {.dt = 1e-2}, .bound_factor = 1.5});
  const auto loose = simulate_counts(p, 5.0, 10000, 15, {.path = {.dt = 1e-2}, .bound_factor = 3.0});
  const auto [stat, df] = two_sample_chi2(base, loose);
  EXPECT_LT(stat, chi2_critical(df, 0.01)) << "df " << df;
}

TEST(Substitutions, DeterministicPerSeed) {
  const auto p = make_params(1, 1, 1);
  const auto a = simulate_counts(p, 2.0, 500, 16, {.path = {.dt = 1e-2}}, 1);
  const auto b = simulate_counts(p, 2.0, 500, 16, {.path = {.dt = 1e-2}}, 4);
  EXPECT_EQ(a, b);
}

TEST(Sequences, ZeroLengthBranchesCopy) {
  const auto tree = parse_newick("(A:0,B:0);");
  const auto sim = simulate_sequences(tree, make_jc(), make_params(1, 1, 1), 500, 17);
  EXPECT_EQ(sim.alignment.sequences[0], sim.alignment.sequences[1]);
}

TEST(Sequences, LongBranchesSaturate) {
  const auto tree = parse_newick("(A:50,B:50);");
  Sequence_options opts;
  opts.path.dt = 0.5;
  const auto sim = simulate_sequences(tree, make_jc(), make_params(1, 1, 1), 10000, 18, opts);
  const auto& a = sim.alignment.sequences[0];
  const auto& b = sim.alignment.sequences[1];
  const auto same = std::inner_product(a.begin(), a.end(), b.begin(), 0, std::plus<>{}, std::equal_to<>{});
  EXPECT_NEAR(static_cast<double>(same) / 10000, 0.25, 0.01);
}

TEST(Sequences, StarPatternsMatchExactLikelihood) {
  const auto m = make_hky(2.0, Eigen::Vector4d{0.1, 0.2, 0.3, 0.4});
  const auto p = make_params(1, 1, 1);
  const auto tree = parse_newick("(A:0.1,B:0.2,C:0.3);");
  constexpr std::size_t sites = 20000;
  const auto sim = simulate_sequences(tree, m, p, sites, 19);
  const auto enc = sim.alignment.encode(Alphabet::dna());
  std::array<double, 64> observed{};
  for (std::size_t s = 0; s < sites; ++s) observed[static_cast<std::size_t>(16 * enc[0][s] + 4 * enc[1][s] + enc[2][s])] += 1;

  // Goodness of fit, pooling patterns expected fewer than 5 times.
  double stat = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
  int bins = 0;
  for (int k = 0; k < 64; ++k) {
    const auto expected = sites * three_taxa_likelihood(m, p, {0.1, 0.2, 0.3}, {k / 16, (k / 4) % 4, k % 4});
    if (expected < 5.0) {
      pooled_obs += observed[static_cast<std::size_t>(k)];
      pooled_exp += expected;
      continue;
    }
    stat += std::pow(observed[static_cast<std::size_t>(k)] - expected, 2) / expected;
    ++bins;
  }
  if (pooled_exp > 0.0) {
    stat += std::pow(pooled_obs - pooled_exp, 2) / pooled_exp;
    ++bins;
  }
  EXPECT_LT(stat, chi2_critical(bins - 1, 0.001));
}

TEST(Sequences, TauRecordAndDeterminism) {
  const auto tree = parse_newick("((A:0.1,B:0.2):0.05,C:0.3);");
  Sequence_options opts;
  opts.record_tau = true;
  opts.workers = 1;
  const auto a = simulate_sequences(tree, make_jc(), make_params(1, 1, 1), 300, 20, opts);
  opts.workers = 3;
  const auto b = simulate_sequences(tree, make_jc(), make_params(1, 1, 1), 300, 20, opts);
  EXPECT_EQ(a.alignment.sequences, b.alignment.sequences);
  EXPECT_EQ(a.tau, b.tau);
  ASSERT_EQ(a.tau.size(), 300u);
  for (const auto& row : a.tau) {
    EXPECT_EQ(row[0], 0.0);
    for (auto x : row) EXPECT_GE(x, 0.0);
  }
  EXPECT_EQ(a.alignment.names, (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_THROW(simulate_sequences(tree, make_jc(), make_params(1, 1, 1), 0, 20), Validation_error);
}
