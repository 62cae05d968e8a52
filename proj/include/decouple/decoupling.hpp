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

/// \file decoupling.hpp
/// \brief Decoupling functions f and g, Haar moments, tail parameters and
/// the FQSW, thermalization and iid specializations.
///
/// Conventions: the input state carries one label for the system the
/// unitary acts on (default "A"); every other label is the reference R.
/// Channel outputs are labelled "B" and Choi states live on [A', B].

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "decouple/ensembles.hpp"
#include "decouple/entropy.hpp"
#include "decouple/quantum.hpp"

namespace decouple {

struct DecouplingInstance {
  DensitySystem rho;
  ChannelStinespring channel;
  SmoothingConfig cfg;
  WeightMode mode = WeightMode::fixed_marginal;
  std::string a_label = "A";

  DecouplingInstance() = default;
  DecouplingInstance(DensitySystem r, ChannelStinespring t, SmoothingConfig c = {},
                     WeightMode m = WeightMode::fixed_marginal, std::string a = "A")
      : rho(std::move(r)), channel(std::move(t)), cfg(c), mode(m), a_label(std::move(a)) {
    validate();
  }

  void validate() const {
    cfg.validate();
    validate_density(rho, 1.0, "decoupling input");
    if (!rho.shape.contains(a_label)) fail(ErrorKind::unknown_label, "input state has no label '" + a_label + "'");
    if (rho.shape.dim_of(a_label) != channel.a)
      fail(ErrorKind::dimension_mismatch, "channel input dimension " + std::to_string(channel.a) +
                                              " does not match |" + a_label + "| = " +
                                              std::to_string(rho.shape.dim_of(a_label)));
    channel.validate();
  }

  std::size_t dim_a() const { return channel.a; }
  std::size_t dim_b() const { return channel.b; }
  std::vector<std::string> r_labels() const { return rho.shape.without({a_label}).labels(); }
  SystemShape r_shape() const { return rho.shape.without({a_label}); }
};

namespace detail {

/// Tr_Z[(K ⊗ I_r) m (K ⊗ I_r)†] for m with the input system first.
inline ComplexMatrix apply_dilation_first(const ComplexMatrix& k, std::size_t b, std::size_t z, const ComplexMatrix& m,
                                          std::size_t r) {
  const ComplexMatrix kk = tensor(k, identity(r));
  return partial_trace(kk * m * kk.adjoint(), SystemShape{{"B", b}, {"Z", z}, {"R", r}}, {"Z"});
}

inline ComplexMatrix input_first(const DecouplingInstance& inst, const ComplexMatrix& m) {
  std::vector<std::string> order{inst.a_label};
  for (const auto& l : inst.r_labels()) order.push_back(l);
  return permute_systems(m, inst.rho.shape, order);
}

inline ComplexMatrix require_unitary_on_a(const DecouplingInstance& inst, const ComplexMatrix& u) {
  if (static_cast<std::size_t>(u.rows()) != inst.dim_a() || u.cols() != u.rows())
    fail(ErrorKind::dimension_mismatch, "unitary must act on the " + std::to_string(inst.dim_a()) +
                                            "-dimensional input system");
  return u;
}

}  // namespace detail

/// Everything g(U) needs, fixed once per instance.
struct DecouplingWeights {
  H2Result h2;                    // H₂^ε(A|R), its σ and weight ξ on R
  DensitySystem rho_tilde;        // (ξ^{-1/4}) σ (ξ^{-1/4}), labels as the input
  ComplexMatrix rho_tilde_r;      // its R marginal
  DensitySystem omega;            // Choi state on [A', B]
  HmaxPrimeResult hmax;           // (H'max)^ε(B)_ω
  H2PrimeResult h2p;              // (H₂')^{ε,δ}(A'|B)_ω, η and ω'''
  ComplexMatrix p_z;              // POVM element on Z reproducing η
  ComplexMatrix k_tilde;          // (ω'''^{-1/4} ⊗ I_Z)(I_B ⊗ P^Z) K
  DensitySystem omega_tilde;      // Choi state of the weighted map
  ComplexMatrix omega_tilde_b;    // weighted map applied to π^A
  double rho_tilde_r_sq = 0, rho_tilde_sq = 0, omega_tilde_b_sq = 0, omega_tilde_ab_sq = 0;
};

inline DecouplingWeights compute_weights(const DecouplingInstance& inst) {
  DecouplingWeights w;
  const auto r_labels = inst.r_labels();
  const auto& t = inst.channel;
  const double eps = inst.cfg.epsilon, delta = inst.cfg.delta;
  w.h2 = h2_conditional(inst.rho, r_labels, inst.cfg, inst.mode);
  w.rho_tilde = DensitySystem(tilde_conjugate(w.h2.sigma.matrix, inst.rho.shape, w.h2.weight, r_labels), inst.rho.shape);
  w.rho_tilde_r = partial_trace(w.rho_tilde.matrix, inst.rho.shape, {inst.a_label});

  w.omega = choi_state(t, "A'", "B");
  w.hmax = hmax_prime(w.omega.marginal({"B"}), eps);
  w.h2p = h2_prime(w.omega, "B", eps, delta);

  const ComplexMatrix k = t.isometry();
  if ((w.h2p.eta.matrix - w.omega.matrix).cwiseAbs().maxCoeff() < 1e-12) {
    w.p_z = identity(t.z);
  } else {
    // ψ = (K ⊗ I)|Φ⟩ ordered as (B A') ⊗ Z so the POVM lands on Z
    ComplexVector psi(t.b * t.a * t.z);
    const double norm = 1.0 / std::sqrt(static_cast<double>(t.a));
    for (std::size_t b = 0; b < t.b; ++b)
      for (std::size_t x = 0; x < t.a; ++x)
        for (std::size_t z = 0; z < t.z; ++z) psi((b * t.a + x) * t.z + z) = k(b * t.z + z, x) * norm;
    const ComplexMatrix eta_ba = permute_systems(w.h2p.eta.matrix, w.omega.shape, {"B", "A'"});
    w.p_z = povm_completion(psi, t.b * t.a, t.z, eta_ba);
  }
  const ComplexMatrix inv_quarter = pseudo_inverse_power(w.h2p.omega_triple_prime, -0.25);
  w.k_tilde = tensor(inv_quarter, identity(t.z)) * tensor(identity(t.b), w.p_z) * k;

  const auto phi = epr_state(t.a, "A'", "__in");
  const ComplexMatrix choi = detail::apply_dilation_first(
      w.k_tilde, t.b, t.z, permute_systems(phi.matrix, phi.shape, {"__in", "A'"}), t.a);
  w.omega_tilde = DensitySystem(permute_systems(choi, SystemShape{{"B", t.b}, {"A'", t.a}}, {"A'", "B"}),
                                SystemShape{{"A'", t.a}, {"B", t.b}});
  w.omega_tilde_b = w.omega_tilde.marginal({"B"}).matrix;

  w.rho_tilde_r_sq = std::pow(hs_norm(w.rho_tilde_r), 2);
  w.rho_tilde_sq = std::pow(hs_norm(w.rho_tilde.matrix), 2);
  w.omega_tilde_b_sq = std::pow(hs_norm(w.omega_tilde_b), 2);
  w.omega_tilde_ab_sq = std::pow(hs_norm(w.omega_tilde.matrix), 2);
  return w;
}

/// ‖T(UρU†) − ω^B ⊗ ρ^R‖₁ with ω^B = T(π^A).
inline double f_value(const DecouplingInstance& inst, const ComplexMatrix& u) {
  detail::require_unitary_on_a(inst, u);
  const auto rest = inst.r_shape();
  const ComplexMatrix ua = tensor(u, identity(rest.dim()));
  const ComplexMatrix m = detail::input_first(inst, inst.rho.matrix);
  const ComplexMatrix out = apply_channel_first(inst.channel, ua * m * ua.adjoint(), rest.dim());
  const ComplexMatrix omega_b = apply_channel_first(inst.channel, maximally_mixed(inst.dim_a()), 1);
  const ComplexMatrix rho_r = partial_trace(inst.rho.matrix, inst.rho.shape, {inst.a_label});
  return trace_norm(out - tensor(omega_b, rho_r));
}

/// ‖T̃'(Uρ̃'U†) − ω̃'^B ⊗ ρ̃'^R‖₂ with the weighted map T̃'.
inline double g_value(const DecouplingInstance& inst, const DecouplingWeights& w, const ComplexMatrix& u) {
  detail::require_unitary_on_a(inst, u);
  const auto rest = inst.r_shape();
  const ComplexMatrix ua = tensor(u, identity(rest.dim()));
  const ComplexMatrix m = detail::input_first(inst, w.rho_tilde.matrix);
  const ComplexMatrix out =
      detail::apply_dilation_first(w.k_tilde, inst.dim_b(), inst.channel.z, ua * m * ua.adjoint(), rest.dim());
  return hs_norm(out - tensor(w.omega_tilde_b, w.rho_tilde_r));
}

/// f and g over seeded ensemble draws, in stream order.
inline std::vector<double> f_samples(const DecouplingInstance& inst, const UnitaryEnsemble& e, std::size_t samples) {
  return parallel_map(samples, [&](std::size_t i) { return f_value(inst, draw(e, i)); });
}

inline std::vector<double> g_samples(const DecouplingInstance& inst, const DecouplingWeights& w,
                                     const UnitaryEnsemble& e, std::size_t samples) {
  return parallel_map(samples, [&](std::size_t i) { return g_value(inst, w, draw(e, i)); });
}

struct HaarMoments {
  double alpha = 0, beta = 0, eta = 0;
  double expected_g_squared = 0;
  double mu_upper = 0;  // √E[g²] ≥ E[g]

  nlohmann::json to_json() const {
    return {{"alpha", alpha}, {"beta", beta}, {"eta", eta}, {"expected_g_squared", expected_g_squared},
            {"mu_upper", mu_upper}};
  }
};

inline HaarMoments haar_expected_g_squared(const DecouplingInstance& inst, const DecouplingWeights& w) {
  const double d = static_cast<double>(inst.dim_a());
  if (inst.dim_a() < 2) fail(ErrorKind::invalid_argument, "Haar moments need |A| >= 2");
  if (!(w.omega_tilde_b_sq > 0)) fail(ErrorKind::infeasible, "weighted channel output vanishes");
  HaarMoments h;
  h.eta = w.omega_tilde_ab_sq / w.omega_tilde_b_sq;
  h.alpha = w.omega_tilde_b_sq * (d * d - d * h.eta) / (d * d - 1);
  h.beta = w.omega_tilde_ab_sq * (d * d - d / h.eta) / (d * d - 1);
  h.expected_g_squared =
      h.alpha * w.rho_tilde_r_sq + h.beta * w.rho_tilde_sq - w.omega_tilde_b_sq * w.rho_tilde_r_sq;
  h.mu_upper = std::sqrt(std::max(h.expected_g_squared, 0.0));
  return h;
}

inline HaarMoments haar_expected_g_squared(const DecouplingInstance& inst) {
  return haar_expected_g_squared(inst, compute_weights(inst));
}

/// 2^{−½H₂(A|R)_ρ − ½H₂(A'|B)_ω}, both entropies at the fixed marginal weight.
inline double dupuis_expectation_bound(const DecouplingInstance& inst) {
  if (inst.cfg.epsilon != 0)
    fail(ErrorKind::precondition_violated, "the expectation bound is evaluated at epsilon = 0 only");
  SmoothingConfig zero;
  const double h_ar = h2_conditional(inst.rho, inst.r_labels(), zero, WeightMode::fixed_marginal).value;
  const double h_ab = h2_conditional(choi_state(inst.channel), {"B"}, zero, WeightMode::fixed_marginal).value;
  return std::exp2(-0.5 * h_ar - 0.5 * h_ab);
}

inline double lipschitz_bound(const DecouplingInstance& inst, const DecouplingWeights& w) {
  return 2.0 * std::exp2(0.5 * (1 + inst.cfg.delta) * w.hmax.value - 0.5 * w.h2.value);
}

inline double max_g_bound(const DecouplingInstance& inst, const DecouplingWeights& w) {
  return std::sqrt(2.0 * inst.dim_a()) * std::exp2(0.5 * (1 + inst.cfg.delta) * w.hmax.value - 0.5 * w.h2.value);
}

/// Concentration tail 2 exp(−|A| d² / 2^{Hmin + 4}) at deviation d, under
/// both readings of the smooth min-entropy: the smoothed spectral norm
/// itself and its negative logarithm.
struct ConcentrationTail {
  double deviation = 0;
  double hmin_norm = 0;       // min ‖σ‖_∞ over the ε-ball
  double hmin_log = 0;        // −log₂ of the same
  double prob_norm_reading = 0;
  double prob_log_reading = 0;
  double threshold = 0;       // 2^{−½H₂ − ½H₂} + 16ε + d at ε = 0 entropies

  nlohmann::json to_json() const {
    return {{"deviation", deviation},       {"hmin_norm", hmin_norm},
            {"hmin_log", hmin_log},         {"prob_norm_reading", prob_norm_reading},
            {"prob_log_reading", prob_log_reading}, {"threshold", threshold}};
  }
};

inline ConcentrationTail dupuis_concentration_tail(const DecouplingInstance& inst, double deviation) {
  ConcentrationTail c;
  c.deviation = deviation;
  const ComplexMatrix rho_a = inst.rho.marginal({inst.a_label}).matrix;
  c.hmin_log = hmin_smooth(rho_a, inst.cfg.epsilon).value_bits;
  c.hmin_norm = std::exp2(-c.hmin_log);
  const double ad2 = static_cast<double>(inst.dim_a()) * deviation * deviation;
  c.prob_norm_reading = 2 * std::exp(-ad2 / std::exp2(c.hmin_norm + 4));
  c.prob_log_reading = 2 * std::exp(-ad2 / std::exp2(c.hmin_log + 4));
  SmoothingConfig zero;
  const double h_ar = h2_conditional(inst.rho, inst.r_labels(), zero, WeightMode::fixed_marginal).value;
  const double h_ab = h2_conditional(choi_state(inst.channel), {"B"}, zero, WeightMode::fixed_marginal).value;
  c.threshold = std::exp2(-0.5 * h_ar - 0.5 * h_ab) + 16 * inst.cfg.epsilon + deviation;
  return c;
}

struct TailParameters {
  double mu = std::numeric_limits<double>::quiet_NaN();
  std::string mu_source;
  double a = 0;
  double log2_a = 0;
  double t_raw = 0;  // 8aκ²
  std::uint64_t t = 0;
  double lambda_required = std::numeric_limits<double>::quiet_NaN();
  double log2_lambda_required = std::numeric_limits<double>::quiet_NaN();
  double kappa = 0, epsilon = 0, delta = 0;
  double threshold = 0;
  double bound = 0;
  bool vacuous = false;  // aκ² < log₂5, so the bound exceeds 1
  // E[g²] ≤ 8μ² refinement, reported only
  double expected_g_squared = std::numeric_limits<double>::quiet_NaN();
  std::optional<bool> refinement_holds;
  double h2 = 0, h2_prime = 0, hmax_prime = 0;

  nlohmann::json to_json() const {
    auto num = [](double x) -> nlohmann::json { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); };
    nlohmann::json j{{"mu", num(mu)},
                     {"mu_source", mu_source},
                     {"a", num(a)},
                     {"log2_a", num(log2_a)},
                     {"t_raw", num(t_raw)},
                     {"t", t},
                     {"lambda_required", num(lambda_required)},
                     {"log2_lambda_required", num(log2_lambda_required)},
                     {"kappa", kappa},
                     {"epsilon", epsilon},
                     {"delta", delta},
                     {"threshold", num(threshold)},
                     {"bound", num(bound)},
                     {"vacuous", vacuous},
                     {"expected_g_squared", num(expected_g_squared)},
                     {"h2", h2},
                     {"h2_prime", h2_prime},
                     {"hmax_prime", hmax_prime}};
    j["refinement_holds"] = refinement_holds ? nlohmann::json(*refinement_holds) : nlohmann::json();
    return j;
  }
};

namespace detail {

inline void fill_t_and_bound(TailParameters& p) {
  if (!(p.kappa > 0)) fail(ErrorKind::invalid_argument, "kappa must be positive");
  p.a = std::exp2(p.log2_a);
  p.t_raw = 8 * p.a * p.kappa * p.kappa;
  if (!(p.t_raw < 1e18)) fail(ErrorKind::invalid_argument, "design order 8 a kappa^2 overflows");
  p.t = static_cast<std::uint64_t>(std::ceil(p.t_raw - 1e-12 * std::max(1.0, p.t_raw)));
  if (p.t == 0) p.t = 1;
  const double exponent = p.a * p.kappa * p.kappa;
  p.bound = 5 * std::exp2(-exponent);
  p.vacuous = exponent < std::log2(5.0);
}

inline void fill_lambda(TailParameters& p, double dim_a, double dim_b) {
  if (!std::isfinite(p.mu)) return;
  if (!(p.mu < 1)) fail(ErrorKind::precondition_violated, "the tail bound requires mu < 1, got " + std::to_string(p.mu));
  if (!(p.mu > 0)) {
    p.log2_lambda_required = -std::numeric_limits<double>::infinity();
    p.lambda_required = 0;
    return;
  }
  p.log2_lambda_required =
      static_cast<double>(p.t) * (-8 * std::log2(dim_a) - 6 * std::log2(dim_b) + 2 * std::log2(p.mu));
  p.lambda_required = std::exp2(p.log2_lambda_required);
}

}  // namespace detail

/// Tail parameters at concentration margin κ. μ defaults to the certified
/// √E_Haar[g²]; pass a Monte Carlo mean to use that instead.
inline TailParameters tail_parameters(const DecouplingInstance& inst, const DecouplingWeights& w, double kappa,
                                      std::optional<double> mu = std::nullopt) {
  TailParameters p;
  p.kappa = kappa;
  p.epsilon = inst.cfg.epsilon;
  p.delta = inst.cfg.delta;
  p.h2 = w.h2.value;
  p.h2_prime = w.h2p.value;
  p.hmax_prime = w.hmax.value;
  const auto haar = haar_expected_g_squared(inst, w);
  p.expected_g_squared = haar.expected_g_squared;
  p.mu = mu ? *mu : haar.mu_upper;
  p.mu_source = mu ? "supplied" : "haar_second_moment";
  p.log2_a = std::log2(static_cast<double>(inst.dim_a())) - (1 + p.delta) * p.hmax_prime + p.h2 - 9;
  detail::fill_t_and_bound(p);
  detail::fill_lambda(p, inst.dim_a(), inst.dim_b());
  p.threshold = std::exp2(-0.5 * p.h2 - 0.5 * p.h2_prime + 1) + 14 * std::sqrt(p.epsilon) + 2 * kappa;
  p.refinement_holds = p.expected_g_squared <= 8 * p.mu * p.mu + 1e-12;
  return p;
}

// FQSW: A = A1 ⊗ A2, channel Tr_{A2}.

struct FqswReport {
  std::size_t a1 = 0, a2 = 0;
  double norm_ratio_lhs = 0, norm_ratio_rhs = 0;  // ‖ρ̃'^R‖² vs 0.9|A1||A2|‖ρ̃'‖²
  bool norm_ratio_holds = false;
  bool a1_at_least_two = false;
  bool a2_exceeds_a1 = false;
  double log_promise_lhs = 0;  // |A2| 2^{H₂ − 8} − 4
  double result_form_rhs = 0;  // 2 log|A1| + 3 log|A2|
  double theorem_form_rhs = 0; // −H₂ + log|A1| + 2 log|A2|
  bool result_form_holds = false;
  bool theorem_form_holds = false;
  double h2 = 0;
  double log2_a = 0, a = 0;  // a = |A2| 2^{H₂ − 9}
  double alpha_closed = 0, eta_closed = 0;
  double expected_g_squared = 0, lower = 0, upper = 0;
  bool expectation_in_range = false;

  bool promises_hold() const {
    return norm_ratio_holds && a1_at_least_two && a2_exceeds_a1 && result_form_holds && theorem_form_holds;
  }
  double threshold(double eps, double kappa) const {
    return std::sqrt(double(a1) / double(a2)) * std::exp2(-0.5 * h2 + 1) + 14 * std::sqrt(eps) + 2 * kappa;
  }

  nlohmann::json to_json() const {
    return {{"a1", a1},
            {"a2", a2},
            {"norm_ratio_lhs", norm_ratio_lhs},
            {"norm_ratio_rhs", norm_ratio_rhs},
            {"norm_ratio_holds", norm_ratio_holds},
            {"a1_at_least_two", a1_at_least_two},
            {"a2_exceeds_a1", a2_exceeds_a1},
            {"log_promise_lhs", log_promise_lhs},
            {"result_form_rhs", result_form_rhs},
            {"theorem_form_rhs", theorem_form_rhs},
            {"result_form_holds", result_form_holds},
            {"theorem_form_holds", theorem_form_holds},
            {"h2", h2},
            {"a", a},
            {"alpha_closed", alpha_closed},
            {"eta_closed", eta_closed},
            {"expected_g_squared", expected_g_squared},
            {"expected_g_squared_lower", lower},
            {"expected_g_squared_upper", upper},
            {"expectation_in_range", expectation_in_range}};
  }
};

struct FqswInstance {
  DecouplingInstance inst;
  DecouplingWeights weights;
  FqswReport report;
};

/// ρ must carry labels A1, A2 and a reference; A1 A2 are merged into "A".
inline FqswInstance fqsw_instance(std::size_t a1, std::size_t a2, const DensitySystem& rho, const SmoothingConfig& cfg,
                                  WeightMode mode = WeightMode::fixed_marginal) {
  if (rho.shape.dim_of("A1") != a1 || rho.shape.dim_of("A2") != a2)
    fail(ErrorKind::dimension_mismatch, "FQSW input must carry A1 and A2 of the stated dimensions");
  const auto rest = rho.shape.without({"A1", "A2"});
  std::vector<std::string> order{"A1", "A2"};
  for (const auto& l : rest.labels()) order.push_back(l);
  const ComplexMatrix m = permute_systems(rho.matrix, rho.shape, order);
  const SystemShape merged = SystemShape({{"A", a1 * a2}}).concat(rest);

  FqswInstance f{DecouplingInstance(DensitySystem(m, merged), partial_trace_channel(a1, a2), cfg, mode), {}, {}};
  f.weights = compute_weights(f.inst);
  auto& r = f.report;
  const auto& w = f.weights;
  const double d1 = a1, d2 = a2;
  r.a1 = a1;
  r.a2 = a2;
  r.h2 = w.h2.value;
  r.norm_ratio_lhs = w.rho_tilde_r_sq;
  r.norm_ratio_rhs = 0.9 * d1 * d2 * w.rho_tilde_sq;
  r.norm_ratio_holds = r.norm_ratio_lhs < r.norm_ratio_rhs;
  r.a1_at_least_two = a1 >= 2;
  r.a2_exceeds_a1 = a2 > a1;
  r.log_promise_lhs = d2 * std::exp2(r.h2 - 8) - 4;
  r.result_form_rhs = 2 * std::log2(d1) + 3 * std::log2(d2);
  r.theorem_form_rhs = -r.h2 + std::log2(d1) + 2 * std::log2(d2);
  r.result_form_holds = r.log_promise_lhs > r.result_form_rhs;
  r.theorem_form_holds = r.log_promise_lhs > r.theorem_form_rhs;
  r.log2_a = std::log2(d2) + r.h2 - 9;
  r.a = std::exp2(r.log2_a);
  const double n = d1 * d1 * d2 * d2;
  r.alpha_closed = (n - d1 * d1) / (n - 1);
  r.eta_closed = d1 / d2;
  r.expected_g_squared = haar_expected_g_squared(f.inst, w).expected_g_squared;
  r.lower = 0.07 * d1 / d2 * w.rho_tilde_sq;
  r.upper = d1 / d2 * w.rho_tilde_sq;
  r.expectation_in_range = r.expected_g_squared >= r.lower - 1e-12 && r.expected_g_squared <= r.upper + 1e-12;
  return f;
}

/// FQSW tail parameters with a = |A2| 2^{H₂ − 9}.
inline TailParameters fqsw_tail_parameters(const FqswInstance& f, double kappa, std::optional<double> mu = std::nullopt) {
  TailParameters p = tail_parameters(f.inst, f.weights, kappa, mu);
  p.log2_a = f.report.log2_a;
  detail::fill_t_and_bound(p);
  p.lambda_required = p.log2_lambda_required = std::numeric_limits<double>::quiet_NaN();
  detail::fill_lambda(p, f.inst.dim_a(), f.inst.dim_b());
  p.threshold = f.report.threshold(p.epsilon, kappa);
  return p;
}

// Relative thermalization.

struct ThermalizationReport {
  std::vector<double> distances;  // ‖σ^{SR} − ω^S ⊗ σ^R‖₁ per draw
  double kappa = 0;
  double thermalized_fraction = 0;
  TailParameters tail;  // a = |Ω||S|⁻¹ 2^{H₂ − 9}
  double expectation_lhs = 0;  // 2^{−½H₂ − ½H₂'}, H₂' at δ = 0
  bool expectation_promise = false;   // ≤ κ/4
  bool h2_prime_promise = false;      // H₂' ≤ log|Ω| − log|S|
  bool system_size_promise = false;   // |S| > 2
  double hmax_ratio = 0;              // (H'max)^ε(S) / log|S|, reported
  bool norm_ratio_promise = false;    // ‖ρ̃'^R‖² < 0.9|Ω|‖ρ̃'‖²
  double final_promise_lhs = 0;       // 2^{−14}|Ω||S|⁻¹2^{H₂} − H₂'
  bool final_promise = false;         // > 2 log|Ω|
  bool fraction_consistent = true;    // fraction ≥ 1 − bound when bound ≤ 1

  bool promises_hold() const {
    return expectation_promise && h2_prime_promise && system_size_promise && norm_ratio_promise && final_promise;
  }

  nlohmann::json to_json() const {
    return {{"kappa", kappa},
            {"samples", distances.size()},
            {"thermalized_fraction", thermalized_fraction},
            {"tail", tail.to_json()},
            {"expectation_lhs", expectation_lhs},
            {"expectation_promise", expectation_promise},
            {"h2_prime_promise", h2_prime_promise},
            {"system_size_promise", system_size_promise},
            {"hmax_ratio", hmax_ratio},
            {"norm_ratio_promise", norm_ratio_promise},
            {"final_promise_lhs", final_promise_lhs},
            {"final_promise", final_promise},
            {"fraction_consistent", fraction_consistent}};
  }
};

/// ρ lives on Ω ⊗ R with Ω labelled `omega_label`. The embedding Ω → S ⊗ E
/// defaults to the identity, which needs |Ω| = |S||E|.
inline ThermalizationReport thermalization_check(std::size_t omega_dim, std::size_t s_dim, std::size_t e_dim,
                                                 const DensitySystem& rho, double kappa, const SmoothingConfig& cfg,
                                                 const UnitaryEnsemble& ensemble, std::size_t samples,
                                                 const std::optional<ComplexMatrix>& embedding = std::nullopt,
                                                 const std::string& omega_label = "A") {
  if (rho.shape.dim_of(omega_label) != omega_dim)
    fail(ErrorKind::dimension_mismatch, "state dimension on '" + omega_label + "' differs from |Omega|");
  if (ensemble.dim != omega_dim) fail(ErrorKind::dimension_mismatch, "ensemble must act on Omega");
  ChannelStinespring t;
  if (embedding) {
    if (static_cast<std::size_t>(embedding->cols()) != omega_dim ||
        static_cast<std::size_t>(embedding->rows()) != s_dim * e_dim)
      fail(ErrorKind::dimension_mismatch, "embedding must map Omega into S (x) E");
    if ((embedding->adjoint() * *embedding - identity(omega_dim)).cwiseAbs().maxCoeff() > 1e-9)
      fail(ErrorKind::invalid_argument, "embedding is not an isometry");
    t = channel_from_isometry(*embedding, s_dim, e_dim);
  } else {
    if (omega_dim != s_dim * e_dim) fail(ErrorKind::dimension_mismatch, "|Omega| must equal |S||E| without an embedding");
    t = partial_trace_channel(s_dim, e_dim);
  }
  SmoothingConfig c = cfg;
  c.delta = 0;
  const DecouplingInstance inst(rho, t, c, WeightMode::fixed_marginal, omega_label);
  const auto w = compute_weights(inst);

  ThermalizationReport r;
  r.kappa = kappa;
  r.distances = f_samples(inst, ensemble, samples);
  std::size_t ok = 0;
  for (double d : r.distances) ok += d <= kappa;
  r.thermalized_fraction = samples ? double(ok) / double(samples) : 0.0;

  r.tail = tail_parameters(inst, w, kappa);
  r.tail.log2_a = std::log2(double(omega_dim)) - std::log2(double(s_dim)) + w.h2.value - 9;
  detail::fill_t_and_bound(r.tail);
  r.tail.lambda_required = r.tail.log2_lambda_required = std::numeric_limits<double>::quiet_NaN();
  if (r.tail.mu < 1) detail::fill_lambda(r.tail, omega_dim, s_dim);

  const double h2 = w.h2.value, h2p = w.h2p.value;
  r.expectation_lhs = std::exp2(-0.5 * h2 - 0.5 * h2p);
  r.expectation_promise = r.expectation_lhs <= kappa / 4;
  r.h2_prime_promise = h2p <= std::log2(double(omega_dim)) - std::log2(double(s_dim));
  r.system_size_promise = s_dim > 2;
  r.hmax_ratio = s_dim > 1 ? w.hmax.value / std::log2(double(s_dim)) : 0.0;
  r.norm_ratio_promise = w.rho_tilde_r_sq < 0.9 * double(omega_dim) * w.rho_tilde_sq;
  r.final_promise_lhs = std::exp2(-14.0) * double(omega_dim) / double(s_dim) * std::exp2(h2) - h2p;
  r.final_promise = r.final_promise_lhs > 2 * std::log2(double(omega_dim));
  if (r.tail.bound <= 1 && samples > 0) r.fraction_consistent = r.thermalized_fraction >= 1 - r.tail.bound;
  return r;
}

// iid parameters.

struct IidParameters {
  std::size_t n = 0;
  TailParameters tail;  // a, t = ⌈8aκ²⌉, threshold and bound at block length n
  double eps_prime = 0;
  double threshold_exponent = 0;
  double log2_corollary_t = 0;  // log₂ of the closed-form i.i.d. design order
  double corollary_t = 0;
  double n_required = 0;        // 2^5 q_min⁻¹ p_min⁻¹ δ⁻² log(|A||B|/ε)
  double h_a_given_r = 0, h_ar = 0, h_r = 0, h_ap_given_b = 0, h_apb = 0, h_b = 0;

  nlohmann::json to_json() const {
    auto num = [](double x) -> nlohmann::json { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); };
    return {{"n", n},
            {"tail", tail.to_json()},
            {"eps_prime", num(eps_prime)},
            {"threshold_exponent", threshold_exponent},
            {"log2_corollary_t", num(log2_corollary_t)},
            {"corollary_t", num(corollary_t)},
            {"n_required", num(n_required)},
            {"H(A|R)", h_a_given_r},
            {"H(AR)", h_ar},
            {"H(R)", h_r},
            {"H(A'|B)", h_ap_given_b},
            {"H(A'B)", h_apb},
            {"H(B)", h_b}};
  }
};

/// Parameters for n copies from single-copy Shannon entropies; no n-fold
/// operator is ever built.
inline IidParameters iid_parameters(const DecouplingInstance& single, std::size_t n, double kappa,
                                    std::optional<double> mu = std::nullopt) {
  if (n == 0) fail(ErrorKind::invalid_argument, "n must be positive");
  const double eps = single.cfg.epsilon, delta = single.cfg.delta;
  const double da = single.dim_a(), db = single.dim_b(), nn = static_cast<double>(n);
  IidParameters p;
  p.n = n;
  const auto r_labels = single.r_labels();
  p.h_ar = shannon(single.rho);
  p.h_r = shannon(single.rho.marginal(r_labels));
  p.h_a_given_r = p.h_ar - p.h_r;
  const auto omega = choi_state(single.channel);
  p.h_apb = shannon(omega);
  p.h_b = shannon(omega.marginal({"B"}));
  p.h_ap_given_b = p.h_apb - p.h_b;

  const double rate_ar = p.h_a_given_r - delta * (3 * p.h_ar + 7 * p.h_r);
  const double rate_ab = p.h_ap_given_b - delta * (3 * p.h_apb + 7 * p.h_b);
  p.threshold_exponent = -nn / 2 * rate_ar - nn / 2 * rate_ab;
  p.eps_prime = 8 * std::pow(nn + da * db, da * db) * std::pow(eps, 0.25);

  auto& t = p.tail;
  t.kappa = kappa;
  t.epsilon = eps;
  t.delta = delta;
  t.log2_a = nn * std::log2(da) + nn * rate_ar - nn * p.h_b * (1 + 7 * delta) - 9;
  detail::fill_t_and_bound(t);
  if (mu) {
    t.mu = *mu;
    t.mu_source = "supplied";
    detail::fill_lambda(t, std::pow(da, nn), std::pow(db, nn));
  }
  t.threshold = std::exp2(p.threshold_exponent) + 28 * std::pow(p.eps_prime, 0.25) + 2 * kappa;

  p.log2_corollary_t = nn * std::log2(da) + 2 * std::log2(kappa) + nn * (p.h_a_given_r + 32 * std::sqrt(p.eps_prime)) -
                       std::log2(p.eps_prime) - nn * p.h_b * (1 - 5 * delta) - 6;
  p.corollary_t = std::exp2(p.log2_corollary_t);

  // q_min from ω^{A'B}; p_min from each eigenvector measured in ω^B's eigenbasis
  const double q_min = std::exp2(-hmax_prime(omega, eps / 2).value);
  const auto omega_spec = hermitian_spectrum(omega.matrix);
  const auto b_spec = hermitian_spectrum(omega.marginal({"B"}).matrix);
  double p_min = 1;
  for (Eigen::Index j = 0; j < omega_spec.eigenvectors.cols(); ++j) {
    const ComplexVector wj = omega_spec.eigenvectors.col(j);
    const ComplexMatrix theta = partial_trace(wj * wj.adjoint(), omega.shape, {"A'"});
    std::vector<double> probs(b_spec.eigenvectors.cols());
    for (Eigen::Index y = 0; y < b_spec.eigenvectors.cols(); ++y)
      probs[y] = std::max(0.0, (b_spec.eigenvectors.col(y).adjoint() * theta * b_spec.eigenvectors.col(y))(0, 0).real());
    ComplexMatrix diag_p = ComplexMatrix::Zero(probs.size(), probs.size());
    for (std::size_t y = 0; y < probs.size(); ++y) diag_p(y, y) = probs[y];
    p_min = std::min(p_min, std::exp2(-hmax_prime(diag_p, eps / 2).value));
  }
  p.n_required = 32 / (q_min * p_min * delta * delta) * std::log2(da * db / eps);
  return p;
}

// Swap identities for CP maps.

struct SwapNormReport {
  double forward = 0;   // ‖(T ⊗ T)(F^{A1A2})‖₂
  double adjoint = 0;   // ‖(T† ⊗ T†)(F^{B1B2})‖₂
  double bound = 0;     // ‖V‖₂⁴ of the Stinespring operator
  bool equal = false;
  bool holds = false;

  nlohmann::json to_json() const {
    return {{"forward", forward}, {"adjoint", adjoint}, {"bound", bound}, {"equal", equal}, {"holds", holds}};
  }
};

inline SwapNormReport swap_norm_check(const ChannelStinespring& t, double tol = 1e-8) {
  SwapNormReport r;
  const DensitySystem fa(swap_operator(t.a), SystemShape{{"A1", t.a}, {"A2", t.a}});
  const auto ta = apply_channel(t, apply_channel(t, fa, "A1", "B1"), "A2", "B2");
  r.forward = hs_norm(ta.matrix);
  const DensitySystem fb(swap_operator(t.b), SystemShape{{"B1", t.b}, {"B2", t.b}});
  const auto tb = apply_adjoint(t, apply_adjoint(t, fb, "B1", "A1"), "B2", "A2");
  r.adjoint = hs_norm(tb.matrix);
  r.bound = std::pow(hs_norm(t.v), 4);
  r.equal = std::abs(r.forward - r.adjoint) <= tol * std::max(1.0, r.forward);
  r.holds = r.equal && r.forward <= r.bound * (1 + tol);
  return r;
}

}  // namespace decouple
