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

/// \file stats.hpp
/// \brief Sample series, tail fractions with Wilson intervals, centralized
/// moments and the moment-to-tail checks.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "decouple/error.hpp"
#include "decouple/random.hpp"

namespace decouple {

/// Highest centralized moment order accepted (2m ≤ 16).
inline constexpr int kMaxMomentOrder = 16;

struct SampleSeries {
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::string generator_tag;

  SampleSeries() = default;
  SampleSeries(std::vector<double> v, std::uint64_t s = 0, std::string tag = {})
      : values(std::move(v)), seed(s), generator_tag(std::move(tag)) {
    validate();
  }

  void validate() const {
    for (double x : values)
      if (!std::isfinite(x)) fail(ErrorKind::invalid_argument, "sample series '" + generator_tag + "' has a non-finite value");
  }

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
};

inline double mean(const SampleSeries& s) {
  if (s.empty()) fail(ErrorKind::invalid_argument, "mean of an empty series");
  double acc = 0;
  for (double x : s.values) acc += x;
  return acc / static_cast<double>(s.size());
}

/// Standard error of the mean (sample standard deviation / √n).
inline double standard_error(const SampleSeries& s) {
  if (s.size() < 2) return 0.0;
  const double m = mean(s);
  double acc = 0;
  for (double x : s.values) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(s.size() - 1) / static_cast<double>(s.size()));
}

struct Interval {
  double lo = 0, hi = 1;
};

/// 95% Wilson score interval for k successes out of n.
inline Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) fail(ErrorKind::invalid_argument, "Wilson interval of zero trials");
  const double nn = static_cast<double>(n), p = static_cast<double>(k) / nn, z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
  return {std::max(0.0, std::min(centre - half, p)), std::min(1.0, std::max(centre + half, p))};
}

struct TailEstimate {
  double fraction = 0;
  Interval interval;
  std::size_t count = 0, n = 0;

  double half_width() const { return 0.5 * (interval.hi - interval.lo); }
};

/// Fraction of values strictly above `threshold`.
inline TailEstimate empirical_tail(const SampleSeries& s, double threshold) {
  if (s.empty()) fail(ErrorKind::invalid_argument, "empirical_tail of an empty series");
  TailEstimate t;
  t.n = s.size();
  for (double x : s.values) t.count += x > threshold;
  t.fraction = static_cast<double>(t.count) / static_cast<double>(t.n);
  t.interval = wilson_interval(t.count, t.n);
  return t;
}

/// Mean of |x − center|^order for even order ≤ 16.
inline double centralized_moment(const SampleSeries& s, double center, int order) {
  if (order <= 0 || order % 2 != 0) fail(ErrorKind::invalid_argument, "moment order must be even and positive");
  if (order > kMaxMomentOrder) fail(ErrorKind::invalid_argument, "moment order above 16 is not supported");
  if (s.empty()) fail(ErrorKind::invalid_argument, "centralized_moment of an empty series");
  double acc = 0;
  for (double x : s.values) acc += std::pow(std::abs(x - center), order);
  return acc / static_cast<double>(s.size());
}

/// Common report shape: {bound, empirical, interval, violated}.
struct BoundCheck {
  double bound = 0;
  double empirical = 0;
  Interval interval{0, 0};
  bool violated = false;

  nlohmann::json to_json() const {
    return {{"bound", bound},
            {"empirical", empirical},
            {"interval", {interval.lo, interval.hi}},
            {"violated", violated}};
  }
};

struct MomentTransferReport {
  double c = 1, a = 1, mu = 0;
  int m = 1;
  std::size_t samples = 0;
  bool small_m_regime = false;  // 1 ≤ m ≤ (9/64) a μ²
  BoundCheck centered;          // E[(X − μ)^{2m}] ≤ C (m/a)^m
  BoundCheck squared;           // E[(X² − μ²)^{2m}] against the regime's bound

  bool holds() const { return !centered.violated && !squared.violated; }

  nlohmann::json to_json() const {
    return {{"c", c},   {"a", a},   {"mu", mu}, {"m", m}, {"samples", samples}, {"small_m_regime", small_m_regime},
            {"centered", centered.to_json()}, {"squared", squared.to_json()}};
  }
};

inline double moment_bound_centered(double c, double a, int m) { return c * std::pow(m / a, m); }

inline double moment_bound_squared(double c, double a, double mu, int m) {
  if (m >= 1 && m <= 9.0 / 64.0 * a * mu * mu) return 2 * c * std::pow(9 * m * mu * mu / a, m);
  return 2 * c * std::pow(64.0 * m * m / (a * a), m);
}

/// Checks both moment bounds on X = |μ + Z|, Z ~ N(0, 1/(2a)). Then
/// |X − μ| ≤ |Z| and P[|Z| > κ] = erfc(κ√a) ≤ exp(−aκ²), so the tail
/// hypothesis holds with C = 1 (any C ≥ 1 only loosens the bounds).
inline MomentTransferReport moment_transfer_check(double c, double a, double mu, int m, std::size_t oracle_samples,
                                                  std::uint64_t seed, bool degenerate = false) {
  if (!(a > 0)) fail(ErrorKind::invalid_argument, "moment_transfer_check needs a > 0");
  if (!(c >= 1)) fail(ErrorKind::invalid_argument, "the synthetic tail needs C >= 1");
  if (m < 1 || 2 * m > kMaxMomentOrder) fail(ErrorKind::invalid_argument, "m must satisfy 1 <= m <= 8");
  if (!(mu >= 0)) fail(ErrorKind::invalid_argument, "mu must be non-negative");
  MomentTransferReport r;
  r.c = c;
  r.a = a;
  r.mu = mu;
  r.m = m;
  r.samples = oracle_samples;
  r.small_m_regime = m <= 9.0 / 64.0 * a * mu * mu;
  auto rng = make_rng(seed, 0x6d6f6d);
  std::normal_distribution<double> z(0.0, std::sqrt(1 / (2 * a)));
  double acc1 = 0, acc2 = 0;
  for (std::size_t i = 0; i < oracle_samples; ++i) {
    const double x = degenerate ? mu : std::abs(mu + z(rng));
    acc1 += std::pow(x - mu, 2 * m);
    acc2 += std::pow(x * x - mu * mu, 2 * m);
  }
  const double n = static_cast<double>(std::max<std::size_t>(oracle_samples, 1));
  r.centered = {moment_bound_centered(c, a, m), acc1 / n, {acc1 / n, acc1 / n}, false};
  r.squared = {moment_bound_squared(c, a, mu, m), acc2 / n, {acc2 / n, acc2 / n}, false};
  r.centered.violated = r.centered.empirical > r.centered.bound;
  r.squared.violated = r.squared.empirical > r.squared.bound;
  return r;
}

struct TailFromMoment {
  int m = 1;
  double kappa = 0;
  double markov_bound = 0;  // E|x − c|^{2m} / κ^{2m}
  TailEstimate empirical;   // fraction with |x − c| ≥ κ
  bool violated = false;

  BoundCheck as_check() const { return {markov_bound, empirical.fraction, empirical.interval, violated}; }
};

inline TailFromMoment tail_from_moment(const SampleSeries& s, double center, int m, double kappa) {
  if (!(kappa > 0)) fail(ErrorKind::invalid_argument, "kappa must be positive");
  TailFromMoment t;
  t.m = m;
  t.kappa = kappa;
  t.markov_bound = centralized_moment(s, center, 2 * m) / std::pow(kappa, 2 * m);
  t.empirical.n = s.size();
  for (double x : s.values) t.empirical.count += std::abs(x - center) >= kappa;
  t.empirical.fraction = static_cast<double>(t.empirical.count) / static_cast<double>(t.empirical.n);
  t.empirical.interval = wilson_interval(t.empirical.count, t.empirical.n);
  t.violated = t.empirical.fraction > t.markov_bound * (1 + 1e-12) + 1e-15;
  return t;
}

/// 2 (m 2^{(1+δ)H'max − H₂ + 4} / |A|)^m, the Haar bound on E|g − μ|^{2m}.
inline double haar_g_moment_bound(int m, double hmax_prime, double h2, double delta, double dim_a) {
  return 2 * std::pow(m * std::exp2((1 + delta) * hmax_prime - h2 + 4) / dim_a, m);
}

/// Levy tail 2 exp(−nκ²/(4L²)) against P[|x − mean| ≥ κ]; a violation
/// needs the empirical fraction to exceed the bound by 3 Wilson half-widths.
inline BoundCheck levy_check(const SampleSeries& s, double lipschitz, double dim, double kappa) {
  const double mu = mean(s);
  std::size_t count = 0;
  for (double x : s.values) count += std::abs(x - mu) >= kappa;
  BoundCheck b;
  b.bound = 2 * std::exp(-dim * kappa * kappa / (4 * lipschitz * lipschitz));
  b.empirical = static_cast<double>(count) / static_cast<double>(s.size());
  b.interval = wilson_interval(count, s.size());
  b.violated = b.empirical > b.bound + 3 * 0.5 * (b.interval.hi - b.interval.lo);
  return b;
}

}  // namespace decouple
