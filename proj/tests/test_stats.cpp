// Copyright 2026 The decouple Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "decouple/stats.hpp"

#include <gtest/gtest.h>

#include "decouple/decoupling.hpp"

using namespace decouple;

namespace {

SampleSeries uniform_series(std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return {v, seed, "uniform"};
}

struct HaarFixture {
  DecouplingInstance inst;
  DecouplingWeights w;
  SampleSeries g;
};

HaarFixture haar_g_series(std::size_t samples) {
  auto rng = make_rng(150);
  DecouplingInstance inst({random_density(8, rng), SystemShape{{"A", 4}, {"R", 2}}}, random_channel(4, 2, 2, rng));
  auto w = compute_weights(inst);
  SampleSeries g(g_samples(inst, w, haar_ensemble(4, 151), samples), 151, "haar_g");
  return {inst, w, g};
}

}  // namespace

TEST(stats, series_rejects_non_finite) {
  EXPECT_THROW(SampleSeries({1.0, std::nan("")}), Error);
  EXPECT_THROW(empirical_tail(SampleSeries{}, 0.1), Error);
}

TEST(stats, empirical_tail_examples) {
  const SampleSeries zeros(std::vector<double>(100, 0.0));
  EXPECT_EQ(empirical_tail(zeros, 0.1).fraction, 0.0);
  const SampleSeries ones(std::vector<double>(100, 1.0));
  EXPECT_EQ(empirical_tail(ones, 0.5).fraction, 1.0);
  const auto u = empirical_tail(uniform_series(10000, 1), 0.5);
  EXPECT_LE(u.interval.lo, 0.5);
  EXPECT_GE(u.interval.hi, 0.5);
}

TEST(stats, wilson_interval_contains_estimate) {
  for (std::size_t n : {1u, 7u, 100u, 1000u})
    for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 7)) {
      const auto iv = wilson_interval(k, n);
      const double p = double(k) / double(n);
      EXPECT_LE(iv.lo, p);
      EXPECT_GE(iv.hi, p);
      EXPECT_GE(iv.lo, 0.0);
      EXPECT_LE(iv.hi, 1.0);
    }
  // k = 0 still leaves room above zero
  EXPECT_GT(wilson_interval(0, 100).hi, 0.02);
  // textbook value: 8 of 20 → (0.2188, 0.6134)
  const auto iv = wilson_interval(8, 20);
  EXPECT_NEAR(iv.lo, 0.2188, 1e-4);
  EXPECT_NEAR(iv.hi, 0.6134, 1e-4);
}

TEST(stats, centralized_moment_examples) {
  EXPECT_EQ(centralized_moment(SampleSeries({3.0, 3.0, 3.0}), 3.0, 4), 0.0);
  EXPECT_DOUBLE_EQ(centralized_moment(SampleSeries({1.0, -1.0, 1.0, -1.0}), 0.0, 2), 1.0);
  EXPECT_THROW(centralized_moment(SampleSeries({1.0}), 0.0, 3), Error);
  EXPECT_THROW(centralized_moment(SampleSeries({1.0}), 0.0, 18), Error);
}

TEST(stats, moment_transfer_regimes) {
  const auto degenerate = moment_transfer_check(1, 1, 2.0, 3, 1000, 1, true);
  EXPECT_EQ(degenerate.centered.empirical, 0.0);
  EXPECT_TRUE(degenerate.holds());

  const auto small = moment_transfer_check(1, 1, 10.0, 1, 1000000, 2);
  EXPECT_TRUE(small.small_m_regime);
  EXPECT_NEAR(small.squared.bound, 2 * 9 * 100, 1e-9);
  EXPECT_TRUE(small.holds());

  const auto large = moment_transfer_check(1, 1, 0.1, 4, 1000000, 3);
  EXPECT_FALSE(large.small_m_regime);
  EXPECT_NEAR(large.squared.bound, 2 * std::pow(64.0 * 16, 4), 1e-3);
  EXPECT_TRUE(large.holds());

  // the split sits at m = (9/64) a μ²
  EXPECT_TRUE(moment_transfer_check(1, 64, 1.0, 8, 10, 4, true).small_m_regime);
  EXPECT_FALSE(moment_transfer_check(1, 64, 0.9, 8, 10, 4, true).small_m_regime);
  EXPECT_THROW(moment_transfer_check(1, 1, 1.0, 9, 10, 4), Error);
}

TEST(stats, moment_transfer_sweep) {
  for (double a : {0.5, 2.0, 10.0})
    for (double mu : {0.0, 0.3, 3.0})
      for (int m : {1, 2, 4, 8}) {
        const auto r = moment_transfer_check(1, a, mu, m, 100000, 7);
        EXPECT_TRUE(r.holds()) << a << " " << mu << " " << m;
      }
}

TEST(stats, tail_from_moment_examples) {
  const SampleSeries constant(std::vector<double>(50, 2.0));
  EXPECT_EQ(tail_from_moment(constant, 2.0, 1, 0.1).markov_bound, 0.0);
  const auto u = uniform_series(5000, 5);
  for (double k : {0.1, 0.25, 0.4}) {
    const auto t = tail_from_moment(u, 0.5, 1, k);
    EXPECT_GE(t.markov_bound, t.empirical.fraction);
    EXPECT_FALSE(t.violated);
  }
}

TEST(stats, markov_bound_dominates_for_every_order) {
  const auto u = uniform_series(2000, 6);
  for (int m = 1; m <= 8; ++m)
    for (double k : {0.05, 0.2, 0.45, 0.6}) EXPECT_FALSE(tail_from_moment(u, 0.3, m, k).violated);
}

TEST(stats, haar_g_moments_below_lemma_bound) {
  const auto f = haar_g_series(2000);
  const double mu = mean(f.g);
  for (int m : {1, 2}) {
    const double empirical = centralized_moment(f.g, mu, 2 * m);
    const double bound = haar_g_moment_bound(m, f.w.hmax.value, f.w.h2.value, 0.0, 4);
    EXPECT_LE(empirical, bound) << m;
  }
}

TEST(stats, haar_g_squared_tail_from_moment) {
  const auto f = haar_g_series(2000);
  const double mu = mean(f.g);
  std::vector<double> sq;
  for (double x : f.g.values) sq.push_back(x * x);
  const SampleSeries g2(sq, f.g.seed, "haar_g_squared");
  for (double kappa : {0.02, 0.05, 0.1}) {
    const auto t = tail_from_moment(g2, mu * mu, 2, 2 * mu * kappa);
    EXPECT_FALSE(t.violated) << kappa;
  }
}

TEST(stats, levy_consistency) {
  const auto f = haar_g_series(2000);
  const double lip = lipschitz_bound(f.inst, f.w);
  for (double kappa : {0.01, 0.05, 0.1, 0.3}) EXPECT_FALSE(levy_check(f.g, lip, 4, kappa).violated) << kappa;
}

TEST(stats, clifford_second_moment_equals_haar) {
  // Clifford(2) is an exact 2-design on |A| = 4, so E[g²] matches the Haar
  // closed form exactly
  const auto f = haar_g_series(1);
  const auto& group = clifford_group_cached(2);
  const auto g = parallel_map(group.size(), [&](std::size_t i) { return g_value(f.inst, f.w, group.members[i]); });
  double second = 0;
  for (double x : g) second += x * x / double(g.size());
  EXPECT_NEAR(second, haar_expected_g_squared(f.inst, f.w).expected_g_squared, 1e-10);
}

TEST(stats, report_json_shape) {
  const auto j = levy_check(uniform_series(10, 1), 1.0, 2, 0.1).to_json();
  for (const char* k : {"bound", "empirical", "interval", "violated"}) EXPECT_TRUE(j.contains(k)) << k;
}
