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

/// \file typicality.hpp
/// \brief Types, strongly typical sets and tensor-power spectra aggregated
/// by type. Nothing here builds a |X|^n matrix except the dense mode of
/// `h2_prime_iid_bound_check`.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "decouple/entropy.hpp"
#include "decouple/quantum.hpp"
#include "decouple/random.hpp"

namespace decouple {

inline constexpr std::size_t kMaxTypes = 1000000;
/// (|A||B|)^n above this switches the Rényi-2 iid check to arithmetic only.
inline constexpr std::size_t kH2IidDenseCap = 256;

struct TypeVector {
  std::vector<std::size_t> counts;
  std::size_t n = 0;

  TypeVector() = default;
  TypeVector(std::vector<std::size_t> c, std::size_t total) : counts(std::move(c)), n(total) { validate(); }

  void validate() const {
    std::size_t s = 0;
    for (auto c : counts) s += c;
    if (s != n) fail(ErrorKind::invalid_argument, "type counts sum to " + std::to_string(s) + ", expected " + std::to_string(n));
  }

  auto operator<=>(const TypeVector&) const = default;
};

/// C(n + k − 1, k − 1), saturating at uint64 max.
inline std::uint64_t type_count(std::size_t n, std::size_t k) {
  if (k == 0) return n == 0 ? 1 : 0;
  unsigned __int128 c = 1;
  constexpr auto top = std::numeric_limits<std::uint64_t>::max();
  for (std::size_t i = 1; i < k; ++i) {
    c = c * (n + i) / i;
    if (c > top) return top;
  }
  return static_cast<std::uint64_t>(c);
}

namespace detail {

inline void compositions(std::size_t left, std::size_t parts, std::vector<std::size_t>& cur,
                         std::vector<std::vector<std::size_t>>& out) {
  if (parts == 1) {
    cur.push_back(left);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (std::size_t c = 0; c <= left; ++c) {
    cur.push_back(c);
    compositions(left - c, parts - 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace detail

/// All types of length n over k symbols, in ascending lexicographic order.
inline std::vector<TypeVector> enumerate_types(std::size_t n, std::size_t alphabet_size) {
  if (alphabet_size == 0) fail(ErrorKind::invalid_argument, "alphabet must be non-empty");
  const auto count = type_count(n, alphabet_size);
  if (count > kMaxTypes)
    fail(ErrorKind::memory_cap_exceeded,
         "n=" + std::to_string(n) + " over " + std::to_string(alphabet_size) + " symbols has more than " +
             std::to_string(kMaxTypes) + " types");
  if (alphabet_size == 1) return {TypeVector({n}, n)};
  // one block per leading count, concatenated in order
  auto blocks = parallel_map(n + 1, [&](std::size_t first) {
    std::vector<std::vector<std::size_t>> rest;
    std::vector<std::size_t> cur;
    detail::compositions(n - first, alphabet_size - 1, cur, rest);
    std::vector<TypeVector> out;
    out.reserve(rest.size());
    for (auto& r : rest) {
      r.insert(r.begin(), first);
      out.emplace_back(std::move(r), n);
    }
    return out;
  });
  std::vector<TypeVector> out;
  out.reserve(count);
  for (auto& b : blocks) std::move(b.begin(), b.end(), std::back_inserter(out));
  return out;
}

/// log₂ of n! / Π m_a!.
inline double log2_multinomial(const TypeVector& t) {
  double l = std::lgamma(static_cast<double>(t.n) + 1);
  for (auto c : t.counts) l -= std::lgamma(static_cast<double>(c) + 1);
  return l / std::log(2.0);
}

/// log₂ p^n(x^n) for any sequence of type t; −∞ if it uses a zero-probability symbol.
inline double log2_sequence_probability(const TypeVector& t, const std::vector<double>& p) {
  double l = 0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (t.counts[a] == 0) continue;
    if (!(p[a] > 0)) return -std::numeric_limits<double>::infinity();
    l += static_cast<double>(t.counts[a]) * std::log2(p[a]);
  }
  return l;
}

/// Every m_a within n p(a)(1 ± δ), closed interval.
inline bool is_strongly_typical(const TypeVector& t, const std::vector<double>& p, double delta) {
  if (t.counts.size() != p.size()) fail(ErrorKind::dimension_mismatch, "type and distribution lengths differ");
  const double n = static_cast<double>(t.n);
  for (std::size_t a = 0; a < p.size(); ++a) {
    const double m = static_cast<double>(t.counts[a]);
    const double lo = n * p[a] * (1 - delta), hi = n * p[a] * (1 + delta);
    const double tol = 1e-9 * std::max(1.0, hi);
    if (m < lo - tol || m > hi + tol) return false;
  }
  return true;
}

struct TypicalSpec {
  std::vector<double> base_distribution;
  std::size_t n = 1;
  double delta = 0.1;

  void validate() const {
    if (base_distribution.empty()) fail(ErrorKind::invalid_argument, "empty distribution");
    double s = 0;
    for (double x : base_distribution) {
      if (!(x >= 0)) fail(ErrorKind::invalid_argument, "probabilities must be non-negative");
      s += x;
    }
    if (std::abs(s - 1) > 1e-12) fail(ErrorKind::invalid_argument, "probabilities sum to " + std::to_string(s));
    if (n == 0) fail(ErrorKind::invalid_argument, "n must be positive");
    if (!(delta > 0 && delta < 1)) fail(ErrorKind::invalid_argument, "delta must lie in (0,1)");
  }
};

/// One eigenvalue class of ρ^{⊗n}: all sequences of a given type.
struct SpectralClass {
  TypeVector type;
  double log2_eigenvalue = 0;
  double log2_multiplicity = 0;
  double mass = 0;
  bool typical = false;
};

inline std::vector<SpectralClass> spectral_classes(const std::vector<double>& q, std::size_t n, double delta) {
  auto types = enumerate_types(n, q.size());
  std::vector<SpectralClass> out;
  out.reserve(types.size());
  for (auto& t : types) {
    SpectralClass c;
    c.log2_eigenvalue = log2_sequence_probability(t, q);
    c.log2_multiplicity = log2_multinomial(t);
    c.mass = std::isfinite(c.log2_eigenvalue) ? std::exp2(c.log2_eigenvalue + c.log2_multiplicity) : 0.0;
    c.typical = is_strongly_typical(t, q, delta);
    c.type = std::move(t);
    out.push_back(std::move(c));
  }
  return out;
}

/// (H'max)^ε of a distribution's n-fold power: zero the smallest eigenvalue
/// classes while their mass fits in ε; the value is −log₂ of the smallest
/// class left. A class only partly zeroed still sets the value.
inline double hmax_prime_types(const std::vector<double>& q, std::size_t n, double eps) {
  if (!(eps >= 0)) fail(ErrorKind::invalid_argument, "epsilon must be non-negative");
  auto classes = spectral_classes(q, n, 0.5);
  std::vector<std::pair<double, double>> levels;  // (log2 λ, mass)
  for (const auto& c : classes)
    if (std::isfinite(c.log2_eigenvalue)) levels.emplace_back(c.log2_eigenvalue, c.mass);
  std::sort(levels.begin(), levels.end());
  double budget = eps;
  for (std::size_t i = 0; i < levels.size();) {
    const double v = levels[i].first;
    double mass = 0;
    std::size_t j = i;
    for (; j < levels.size() && std::abs(levels[j].first - v) <= 1e-9 * std::max(1.0, std::abs(v)); ++j)
      mass += levels[j].second;
    if (mass > budget + 1e-12) return -v;
    budget -= mass;
    i = j;
  }
  fail(ErrorKind::infeasible, "hmax_prime_types: every eigenvalue was zeroed (epsilon too large)");
}

/// 4 q_min⁻¹ δ⁻² log₂(|X|/ε).
inline double aep_threshold(double q_min, double delta, std::size_t alphabet_size, double eps) {
  return 4.0 / q_min / (delta * delta) * std::log2(static_cast<double>(alphabet_size) / eps);
}

struct TypicalReport {
  std::string source = "distribution";
  std::size_t n = 0;
  double delta = 0, epsilon = 0;
  double entropy = 0;
  double q_min = 0;
  double threshold_n = 0;
  bool sub_threshold = false;
  std::size_t types_total = 0, typical_types = 0;
  double typical_mass = 0;
  double log2_typical_count = 0;  // log₂ |T| (= log₂ Tr Π)
  double log2_min_probability = 0, log2_max_probability = 0;
  bool mass_holds = false, sequence_holds = false, cardinality_lower_holds = false, cardinality_upper_holds = false;

  bool all_hold() const { return mass_holds && sequence_holds && cardinality_lower_holds && cardinality_upper_holds; }

  nlohmann::json to_json() const {
    return {{"source", source},
            {"n", n},
            {"delta", delta},
            {"epsilon", epsilon},
            {"entropy", entropy},
            {"q_min", q_min},
            {"threshold_n", threshold_n},
            {"sub_threshold", sub_threshold},
            {"types_total", types_total},
            {"typical_types", typical_types},
            {"typical_mass", typical_mass},
            {"log2_typical_count", log2_typical_count},
            {"log2_min_probability", log2_min_probability},
            {"log2_max_probability", log2_max_probability},
            {"mass_holds", mass_holds},
            {"sequence_holds", sequence_holds},
            {"cardinality_lower_holds", cardinality_lower_holds},
            {"cardinality_upper_holds", cardinality_upper_holds}};
  }
};

/// Sums over types for the three displays of the classical AEP at the given ε.
inline TypicalReport typical_report(const TypicalSpec& spec, double eps) {
  spec.validate();
  if (!(eps > 0 && eps < 1)) fail(ErrorKind::invalid_argument, "epsilon must lie in (0,1)");
  const auto& p = spec.base_distribution;
  TypicalReport r;
  r.n = spec.n;
  r.delta = spec.delta;
  r.epsilon = eps;
  r.entropy = shannon_entropy(p);
  r.q_min = std::exp2(-hmax_prime_types(p, 1, eps / 2));
  r.threshold_n = aep_threshold(r.q_min, spec.delta, p.size(), eps);
  r.sub_threshold = static_cast<double>(spec.n) < r.threshold_n;

  const auto classes = spectral_classes(p, spec.n, spec.delta);
  r.types_total = classes.size();
  const double nd = static_cast<double>(spec.n);
  const double lo = -nd * r.entropy * (1 + spec.delta), hi = -nd * r.entropy * (1 - spec.delta);
  double max_log_count = -std::numeric_limits<double>::infinity();
  for (const auto& c : classes)
    if (c.typical) max_log_count = std::max(max_log_count, c.log2_multiplicity);
  double count_scaled = 0;
  r.sequence_holds = true;
  r.log2_min_probability = std::numeric_limits<double>::infinity();
  r.log2_max_probability = -std::numeric_limits<double>::infinity();
  for (const auto& c : classes) {
    if (!c.typical) continue;
    ++r.typical_types;
    r.typical_mass += c.mass;
    count_scaled += std::exp2(c.log2_multiplicity - max_log_count);
    r.log2_min_probability = std::min(r.log2_min_probability, c.log2_eigenvalue);
    r.log2_max_probability = std::max(r.log2_max_probability, c.log2_eigenvalue);
    const double tol = 1e-9 * std::max(1.0, std::abs(c.log2_eigenvalue));
    if (c.log2_eigenvalue < lo - tol || c.log2_eigenvalue > hi + tol) r.sequence_holds = false;
  }
  r.log2_typical_count = r.typical_types ? max_log_count + std::log2(count_scaled) : -std::numeric_limits<double>::infinity();
  r.mass_holds = r.typical_mass >= 1 - eps - 1e-12;
  const double upper = nd * r.entropy * (1 + spec.delta);
  const double lower = nd * r.entropy * (1 - spec.delta) + std::log2(1 - eps);
  r.cardinality_upper_holds = r.log2_typical_count <= upper + 1e-9;
  r.cardinality_lower_holds = r.log2_typical_count >= lower - 1e-9;
  return r;
}

namespace detail {

inline std::vector<double> spectrum_as_distribution(const ComplexMatrix& m) {
  const auto ev = hermitian_eigenvalues(m);
  std::vector<double> q(ev.size());
  double s = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) s += (q[i] = std::max(ev(i), 0.0));
  for (auto& x : q) x /= s;
  return q;
}

}  // namespace detail

/// The classical report on ρ's eigenvalues; Π is diagonal in the eigenbasis
/// tensor power, so Tr ρ^{⊗n}Π, the eigenvalue sandwich and Tr Π follow.
inline TypicalReport quantum_typical_report(const DensitySystem& rho, std::size_t n, double delta, double eps) {
  validate_density(rho, 1.0, "quantum_typical_report");
  auto r = typical_report({detail::spectrum_as_distribution(rho.matrix), n, delta}, eps);
  r.source = "eigenvalues";
  return r;
}

struct HmaxIidReport {
  std::size_t n = 0;
  double epsilon = 0, delta = 0;
  double entropy = 0;
  double value = 0;  // (H'max)^ε(B^n)
  double lower = 0, upper = 0;
  double q_min = 0, threshold_n = 0;
  bool sub_threshold = false;
  bool parameters_in_range = false;  // ε, δ < 1/3
  bool holds = false;

  nlohmann::json to_json() const {
    return {{"n", n},         {"epsilon", epsilon},   {"delta", delta},
            {"entropy", entropy}, {"value", value},   {"lower", lower},
            {"upper", upper}, {"q_min", q_min},       {"threshold_n", threshold_n},
            {"sub_threshold", sub_threshold}, {"parameters_in_range", parameters_in_range}, {"holds", holds}};
  }
};

/// n(1−δ)H(B) ≤ (H'max)^ε(B^n) ≤ n(1+δ)H(B), evaluated over eigenvalue classes.
inline HmaxIidReport hmax_prime_iid_check(const DensitySystem& rho, std::size_t n, double eps, double delta) {
  validate_density(rho, 1.0, "hmax_prime_iid_check");
  if (n == 0) fail(ErrorKind::invalid_argument, "n must be positive");
  if (!(eps > 0 && eps < 1) || !(delta > 0 && delta < 1))
    fail(ErrorKind::invalid_argument, "epsilon and delta must lie in (0,1)");
  const auto q = detail::spectrum_as_distribution(rho.matrix);
  HmaxIidReport r;
  r.n = n;
  r.epsilon = eps;
  r.delta = delta;
  r.entropy = shannon_entropy(q);
  r.value = hmax_prime_types(q, n, eps);
  const double nd = static_cast<double>(n);
  r.lower = nd * (1 - delta) * r.entropy;
  r.upper = nd * (1 + delta) * r.entropy;
  r.q_min = std::exp2(-hmax_prime_types(q, 1, eps / 2));
  r.threshold_n = aep_threshold(r.q_min, delta, q.size(), eps);
  r.sub_threshold = nd < r.threshold_n;
  r.parameters_in_range = eps < 1.0 / 3 && delta < 1.0 / 3;
  r.holds = r.value >= r.lower - 1e-9 && r.value <= r.upper + 1e-9;
  return r;
}

enum class IidMode { automatic, full, arithmetic };

struct H2IidReport {
  std::size_t n = 0, dim_a = 0, dim_b = 0;
  double epsilon = 0, delta = 0;
  double h_ab = 0, h_b = 0, h_a_given_b = 0;
  double eps_prime = 0;
  bool eps_prime_below_one = false;
  double lower_bound = 0;  // nH(A|B) − nδ(3H(AB) + 7H(B))
  double upper_side = 0;   // nH(A|B) + 32n√ε' log|A| + log(1/ε')
  double q_min = 0, p_min = 0, n_required = 0;
  std::string basis_convention = "descending eigenvalues, first non-negligible entry real positive";
  std::string mode;
  std::optional<double> value;  // (H₂')^{ε',5δ}(A^n|B^n), full mode only
  std::optional<bool> holds;
  std::optional<bool> below_upper_side;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"n", n},
                        {"dim_a", dim_a},
                        {"dim_b", dim_b},
                        {"epsilon", epsilon},
                        {"delta", delta},
                        {"h_ab", h_ab},
                        {"h_b", h_b},
                        {"h_a_given_b", h_a_given_b},
                        {"eps_prime", eps_prime},
                        {"eps_prime_below_one", eps_prime_below_one},
                        {"lower_bound", lower_bound},
                        {"upper_side", upper_side},
                        {"q_min", q_min},
                        {"p_min", p_min},
                        {"n_required", n_required},
                        {"basis_convention", basis_convention},
                        {"mode", mode}};
    j["value"] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
    j["holds"] = holds ? nlohmann::json(*holds) : nlohmann::json(nullptr);
    j["below_upper_side"] = below_upper_side ? nlohmann::json(*below_upper_side) : nlohmann::json(nullptr);
    return j;
  }
};

/// ω^{⊗n} with every copy of `a_label` gathered into "A" and of `b_label` into "B".
inline DensitySystem iid_power(const DensitySystem& omega, const std::string& a_label, const std::string& b_label,
                               std::size_t n) {
  const DensitySystem ab = omega.permuted({a_label, b_label});
  const std::size_t a = ab.shape[0].dim, b = ab.shape[1].dim;
  std::vector<Subsystem> parts;
  std::vector<std::string> order_a, order_b;
  for (std::size_t k = 0; k < n; ++k) {
    parts.push_back({"A" + std::to_string(k), a});
    parts.push_back({"B" + std::to_string(k), b});
    order_a.push_back("A" + std::to_string(k));
    order_b.push_back("B" + std::to_string(k));
  }
  order_a.insert(order_a.end(), order_b.begin(), order_b.end());
  const SystemShape interleaved(std::move(parts));
  std::size_t an = 1, bn = 1;
  for (std::size_t k = 0; k < n; ++k) an *= a, bn *= b;
  return {permute_systems(tensor_power(ab.matrix, n), interleaved, order_a), SystemShape{{"A", an}, {"B", bn}}};
}

/// Lower bound on (H₂')^{ε',5δ}(A^n|B^n) for ω^{⊗n}. Full mode evaluates
/// the canonical feasible point on the dense power; arithmetic mode only
/// evaluates the formulas.
inline H2IidReport h2_prime_iid_bound_check(const DensitySystem& omega, const std::string& a_label,
                                            const std::string& b_label, std::size_t n, double eps, double delta,
                                            IidMode mode = IidMode::automatic) {
  validate_density(omega, 1.0, "h2_prime_iid_bound_check");
  if (omega.shape.size() != 2) fail(ErrorKind::invalid_argument, "omega must have exactly two subsystems");
  if (n == 0) fail(ErrorKind::invalid_argument, "n must be positive");
  if (!(eps > 0 && eps < 1) || !(delta > 0 && delta < 1))
    fail(ErrorKind::invalid_argument, "epsilon and delta must lie in (0,1)");
  const DensitySystem ab = omega.permuted({a_label, b_label});
  H2IidReport r;
  r.n = n;
  r.epsilon = eps;
  r.delta = delta;
  r.dim_a = ab.shape[0].dim;
  r.dim_b = ab.shape[1].dim;
  const double nd = static_cast<double>(n);
  const double d = static_cast<double>(r.dim_a * r.dim_b);
  r.h_ab = shannon(ab);
  const DensitySystem b_marg = ab.marginal({b_label});
  r.h_b = shannon(b_marg);
  r.h_a_given_b = r.h_ab - r.h_b;
  r.eps_prime = 8 * std::pow(nd + d, d) * std::pow(eps, 0.25);
  r.eps_prime_below_one = r.eps_prime < 1;
  r.lower_bound = nd * r.h_a_given_b - nd * delta * (3 * r.h_ab + 7 * r.h_b);
  r.upper_side = nd * r.h_a_given_b + 32 * nd * std::sqrt(r.eps_prime) * std::log2(static_cast<double>(r.dim_a)) -
                 std::log2(r.eps_prime);

  r.q_min = std::exp2(-hmax_prime_types(detail::spectrum_as_distribution(ab.matrix), 1, eps / 2));
  const auto joint = hermitian_spectrum(ab.matrix);
  const auto marg = hermitian_spectrum(b_marg.matrix);
  r.p_min = 1;
  for (Eigen::Index j = 0; j < joint.eigenvectors.cols(); ++j) {
    const ComplexMatrix w = joint.eigenvectors.col(j) * joint.eigenvectors.col(j).adjoint();
    const ComplexMatrix theta = partial_trace(w, ab.shape, {a_label});
    std::vector<double> pj(r.dim_b);
    double s = 0;
    for (std::size_t k = 0; k < r.dim_b; ++k)
      s += (pj[k] = std::max(0.0, (marg.eigenvectors.col(k).adjoint() * theta * marg.eigenvectors.col(k))(0, 0).real()));
    for (auto& x : pj) x /= s;
    r.p_min = std::min(r.p_min, std::exp2(-hmax_prime_types(pj, 1, eps / 2)));
  }
  r.n_required = 32 / (r.q_min * r.p_min * delta * delta) * std::log2(d / eps);

  const double dense = std::pow(d, nd);
  const bool small = dense <= static_cast<double>(kH2IidDenseCap);
  if (mode == IidMode::full && !small)
    fail(ErrorKind::memory_cap_exceeded, "dense iid power of dimension " + std::to_string(static_cast<long long>(dense)) +
                                             " exceeds the cap of " + std::to_string(kH2IidDenseCap));
  if (mode == IidMode::arithmetic || (mode == IidMode::automatic && !small)) {
    r.mode = "arithmetic";
    return r;
  }
  if (!r.eps_prime_below_one)
    fail(ErrorKind::precondition_violated, "full mode needs eps' = " + std::to_string(r.eps_prime) + " below 1");
  if (!(5 * delta < 1)) fail(ErrorKind::precondition_violated, "full mode needs 5*delta below 1");
  r.mode = "full";
  const auto power = iid_power(ab, a_label, b_label, n);
  const auto h = h2_prime(power, "B", r.eps_prime, 5 * delta);
  r.value = h.value;
  r.holds = h.value >= r.lower_bound - 1e-9;
  r.below_upper_side = h.value <= r.upper_side + 1e-9;
  return r;
}

/// CSV of the type table: counts, log₂ multiplicity, class mass, typicality.
inline std::string type_table_csv(const TypicalSpec& spec) {
  spec.validate();
  std::ostringstream os;
  os.precision(17);
  os << "type,log2_multiplicity,mass,typical\n";
  for (const auto& c : spectral_classes(spec.base_distribution, spec.n, spec.delta)) {
    os << '"';
    for (std::size_t a = 0; a < c.type.counts.size(); ++a) os << (a ? "," : "") << c.type.counts[a];
    os << "\"," << c.log2_multiplicity << ',' << c.mass << ',' << (c.typical ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace decouple
