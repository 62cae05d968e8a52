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

/// \file quantum.hpp
/// \brief States, Stinespring channels, Choi states, purifications and the
/// operator-dominance constructions.

#pragma once

#include <string>
#include <vector>

#include "decouple/linalg.hpp"
#include "decouple/random.hpp"

namespace decouple {

/// A PSD operator together with the labels of its tensor factors.
struct DensitySystem {
  ComplexMatrix matrix;
  SystemShape shape;

  DensitySystem() = default;
  DensitySystem(ComplexMatrix m, SystemShape s) : matrix(std::move(m)), shape(std::move(s)) {
    detail::require_square(matrix, shape.dim(), "DensitySystem");
  }

  std::size_t dim() const { return shape.dim(); }
  double trace() const { return matrix.trace().real(); }

  DensitySystem traced_out(const std::vector<std::string>& labels) const {
    return {partial_trace(matrix, shape, labels), shape.without(labels)};
  }

  DensitySystem marginal(const std::vector<std::string>& kept) const {
    return {decouple::marginal(matrix, shape, kept), shape.select(kept)};
  }

  DensitySystem permuted(const std::vector<std::string>& order) const {
    return {permute_systems(matrix, shape, order), shape.select(order)};
  }
};

/// Checks Hermiticity, eigenvalues ≥ −1e−10 and, when mass ≥ 0, the trace.
inline void validate_density(const DensitySystem& d, double mass = 1.0, const char* what = "state") {
  if (!is_hermitian(d.matrix, 1e-10))
    fail(ErrorKind::not_positive_semidefinite, std::string(what) + " is not Hermitian");
  const auto ev = hermitian_eigenvalues(d.matrix);
  if (ev(ev.size() - 1) < -1e-10)
    fail(ErrorKind::not_positive_semidefinite,
         std::string(what) + " has eigenvalue " + std::to_string(ev(ev.size() - 1)));
  if (mass >= 0 && std::abs(d.trace() - mass) > 1e-10)
    fail(ErrorKind::invalid_argument,
         std::string(what) + " has trace " + std::to_string(d.trace()) + ", expected " + std::to_string(mass));
}

/// Stinespring form of a CP map A → B: |A⟩ ⊗ |0⟩^C, then V, then Tr_Z.
struct ChannelStinespring {
  ComplexMatrix v;  // (b·z) × (a·c)
  std::size_t a = 1, c = 1, b = 1, z = 1;
  bool trace_preserving = true;

  ChannelStinespring() : v(ComplexMatrix::Identity(1, 1)) {}
  ChannelStinespring(ComplexMatrix v_op, std::size_t a_, std::size_t c_, std::size_t b_, std::size_t z_, bool tp)
      : v(std::move(v_op)), a(a_), c(c_), b(b_), z(z_), trace_preserving(tp) {
    validate();
  }

  void validate() const {
    if (a == 0 || b == 0 || c == 0 || z == 0) fail(ErrorKind::invalid_argument, "channel dimensions must be positive");
    if (a * c != b * z)
      fail(ErrorKind::dimension_mismatch, "channel needs |A||C| = |B||Z|, got " + std::to_string(a * c) + " vs " +
                                              std::to_string(b * z));
    if (static_cast<std::size_t>(v.rows()) != b * z || static_cast<std::size_t>(v.cols()) != a * c)
      fail(ErrorKind::dimension_mismatch, "channel operator has the wrong size");
    if (trace_preserving) {
      if (!is_unitary(v, 1e-9)) fail(ErrorKind::invalid_argument, "trace-preserving channel needs a unitary V");
    } else if (operator_norm(v) > 1.0 + 1e-9) {
      fail(ErrorKind::invalid_argument, "channel operator norm exceeds 1");
    }
  }

  /// V restricted to C = |0⟩, a (b·z) × a operator.
  ComplexMatrix isometry() const {
    ComplexMatrix k(b * z, a);
    for (std::size_t x = 0; x < a; ++x) k.col(x) = v.col(x * c);
    return k;
  }
};

/// Applies the channel to an operator whose first tensor factor is A and whose
/// remaining factors have total dimension r. The result has B first.
inline ComplexMatrix apply_channel_first(const ChannelStinespring& t, const ComplexMatrix& m, std::size_t r) {
  detail::require_square(m, t.a * r, "apply_channel");
  const ComplexMatrix k = tensor(t.isometry(), identity(r));
  const ComplexMatrix out = k * m * k.adjoint();
  const SystemShape s{{"B", t.b}, {"Z", t.z}, {"R", r}};
  return partial_trace(out, s, {"Z"});
}

/// Adjoint map B → A applied to an operator with B first: K†(Y ⊗ I_Z)K.
inline ComplexMatrix apply_adjoint_first(const ChannelStinespring& t, const ComplexMatrix& y, std::size_t r) {
  detail::require_square(y, t.b * r, "apply_adjoint");
  const SystemShape s{{"B", t.b}, {"Z", t.z}, {"R", r}};
  const ComplexMatrix k = tensor(t.isometry(), identity(r));
  return k.adjoint() * embed(y, s, {"B", "R"}) * k;
}

namespace detail {

inline DensitySystem map_labelled(const ChannelStinespring& t, const DensitySystem& m, const std::string& in,
                                  const std::string& out, std::size_t in_dim, std::size_t out_dim, bool adjoint) {
  if (m.shape.dim_of(in) != in_dim)
    fail(ErrorKind::dimension_mismatch, "subsystem '" + in + "' has dimension " + std::to_string(m.shape.dim_of(in)) +
                                            ", channel expects " + std::to_string(in_dim));
  std::vector<std::string> order{in};
  for (const auto& l : m.shape.labels())
    if (l != in) order.push_back(l);
  const auto rest = m.shape.without({in});
  const ComplexMatrix first = permute_systems(m.matrix, m.shape, order);
  const ComplexMatrix mapped =
      adjoint ? apply_adjoint_first(t, first, rest.dim()) : apply_channel_first(t, first, rest.dim());
  const SystemShape mapped_shape = SystemShape({{out, out_dim}}).concat(rest);
  auto final_order = m.shape.labels();
  for (auto& l : final_order)
    if (l == in) l = out;
  return {permute_systems(mapped, mapped_shape, final_order), mapped_shape.select(final_order)};
}

}  // namespace detail

/// (T ⊗ I_rest)(m) with T acting on `input`; the output factor is named
/// `output` (defaults to the input name) and keeps its position.
inline DensitySystem apply_channel(const ChannelStinespring& t, const DensitySystem& m, const std::string& input,
                                   std::string output = {}) {
  if (output.empty()) output = input;
  return detail::map_labelled(t, m, input, output, t.a, t.b, false);
}

inline DensitySystem apply_adjoint(const ChannelStinespring& t, const DensitySystem& y, const std::string& input,
                                   std::string output = {}) {
  if (output.empty()) output = input;
  return detail::map_labelled(t, y, input, output, t.b, t.a, true);
}

// Channel constructors.

inline ChannelStinespring identity_channel(std::size_t d) { return {identity(d), d, 1, d, 1, true}; }

/// Tr_{A2} on A1 ⊗ A2: V = I with B = A1, Z = A2.
inline ChannelStinespring partial_trace_channel(std::size_t kept, std::size_t traced) {
  return {identity(kept * traced), kept * traced, 1, kept, traced, true};
}

/// T(M) = Tr_E[J M J†] for J: A → B ⊗ E. With C = |B||E| and Z = |E||A| the
/// column x·|C| of V is J|x⟩ ⊗ |0⟩; the rest of V is a unitary completion
/// when J is an isometry and zero otherwise.
inline ChannelStinespring channel_from_isometry(const ComplexMatrix& j, std::size_t b, std::size_t e) {
  const std::size_t a = j.cols();
  if (static_cast<std::size_t>(j.rows()) != b * e)
    fail(ErrorKind::dimension_mismatch, "isometry rows must equal |B||E|");
  const std::size_t c = b * e, z = e * a, n = a * c;
  const bool tp = (j.adjoint() * j - identity(a)).cwiseAbs().maxCoeff() < 1e-9;
  ComplexMatrix cols = ComplexMatrix::Zero(n, a);
  for (std::size_t x = 0; x < a; ++x)
    for (std::size_t be = 0; be < b * e; ++be) cols(be * a, x) = j(be, x);  // B⊗E⊗(extra a) = B⊗Z
  std::vector<std::size_t> slots;
  for (std::size_t x = 0; x < a; ++x) slots.push_back(x * c);
  if (tp) return {complete_to_unitary(cols, slots), a, c, b, z, true};
  ComplexMatrix v = ComplexMatrix::Zero(n, n);
  for (std::size_t x = 0; x < a; ++x) v.col(x * c) = cols.col(x);
  return {v, a, c, b, z, false};
}

/// ρ ↦ (1−p)ρ + p·Tr[ρ]·π.
inline ChannelStinespring depolarizing_channel(std::size_t d, double p) {
  if (p < 0 || p > 1) fail(ErrorKind::invalid_argument, "depolarizing probability must lie in [0,1]");
  const std::size_t e = 1 + d * d;
  ComplexMatrix j = ComplexMatrix::Zero(d * e, d);
  for (std::size_t x = 0; x < d; ++x) {
    j(x * e, x) = std::sqrt(1 - p);
    for (std::size_t i = 0; i < d; ++i) j(i * e + 1 + i * d + x, x) = std::sqrt(p / d);
  }
  return channel_from_isometry(j, d, e);
}

/// Random CPTP map from a Haar isometry A → B ⊗ E.
inline ChannelStinespring random_channel(std::size_t a, std::size_t b, std::size_t e, Rng& rng) {
  if (b * e < a) fail(ErrorKind::invalid_argument, "random_channel needs |B||E| >= |A|");
  const ComplexMatrix u = haar_unitary(b * e, rng);
  return channel_from_isometry(u.leftCols(a), b, e);
}

// States.

/// Normalized EPR state on [first, second].
inline DensitySystem epr_state(std::size_t d, const std::string& first = "A", const std::string& second = "A'") {
  if (d == 0) fail(ErrorKind::invalid_argument, "epr_state needs d >= 1");
  ComplexVector v = ComplexVector::Zero(d * d);
  for (std::size_t i = 0; i < d; ++i) v(i * d + i) = 1.0 / std::sqrt(static_cast<double>(d));
  return {v * v.adjoint(), SystemShape{{first, d}, {second, d}}};
}

/// ω^{A'B} = (I ⊗ T)(Φ^{A'A}).
inline DensitySystem choi_state(const ChannelStinespring& t, const std::string& ref = "A'",
                                const std::string& out = "B") {
  return apply_channel(t, epr_state(t.a, ref, "__in"), "__in", out);
}

/// Purification Σ_k √λ_k |v_k⟩|k⟩ on system ⊗ reference (dimension of m).
inline ComplexVector purify(const ComplexMatrix& m) {
  const auto s = hermitian_spectrum(m);
  const auto d = m.rows();
  ComplexVector psi = ComplexVector::Zero(d * d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double l = std::max(s.eigenvalues(k), 0.0);
    if (l == 0) continue;
    for (Eigen::Index i = 0; i < d; ++i) psi(i * d + k) += std::sqrt(l) * s.eigenvectors(i, k);
  }
  return psi;
}

/// Purification with a reference of dimension `ref_dim` ≥ rank(m).
inline ComplexVector purify(const ComplexMatrix& m, std::size_t ref_dim) {
  const auto s = hermitian_spectrum(m);
  const auto d = static_cast<std::size_t>(m.rows());
  const double lmax = std::max(s.eigenvalues.size() ? s.eigenvalues(0) : 0.0, 0.0);
  ComplexVector psi = ComplexVector::Zero(d * ref_dim);
  std::size_t slot = 0;
  for (std::size_t k = 0; k < d; ++k) {
    const double l = s.eigenvalues(k);
    if (l <= 1e-14 * std::max(lmax, 1e-300) || l <= 0) continue;
    if (slot >= ref_dim) fail(ErrorKind::dimension_mismatch, "reference too small for the rank of the operator");
    for (std::size_t i = 0; i < d; ++i) psi(i * ref_dim + slot) = std::sqrt(l) * s.eigenvectors(i, k);
    ++slot;
  }
  return psi;
}

/// Returns P^B with 0 ≤ P ≤ I and Tr_B[(I ⊗ P)ψ(I ⊗ P)] = ρ^A, for |ψ⟩ on
/// A ⊗ B (A first) and ρ^A ≤ ψ^A.
inline ComplexMatrix povm_completion(const ComplexVector& psi, std::size_t dim_a, std::size_t dim_b,
                                     const ComplexMatrix& rho_a) {
  if (static_cast<std::size_t>(psi.size()) != dim_a * dim_b)
    fail(ErrorKind::dimension_mismatch, "povm_completion: vector length does not match |A||B|");
  detail::require_square(rho_a, dim_a, "povm_completion");
  const ComplexMatrix psi_mat = vec_inverse(psi, dim_a, dim_b);
  const ComplexMatrix psi_a = psi_mat * psi_mat.adjoint();
  const ComplexMatrix sigma = hermitian_part(psi_a - rho_a);
  const auto sig_ev = hermitian_eigenvalues(sigma);
  const double scale = std::max(1.0, operator_norm(psi_a));
  if (sig_ev(sig_ev.size() - 1) < -1e-9 * scale)
    fail(ErrorKind::precondition_violated, "povm_completion needs rho <= psi^A");
  if (hermitian_eigenvalues(rho_a)(dim_a - 1) < -1e-9 * scale)
    fail(ErrorKind::not_positive_semidefinite, "povm_completion target is not PSD");

  const std::size_t bq = 2 * dim_b;
  // θ = |ρ⟩|0⟩ + |σ⟩|1⟩ and |ψ⟩|0⟩ as |A| × |BQ| matrices.
  const ComplexMatrix rho_p = vec_inverse(purify(hermitian_part(rho_a), dim_b), dim_a, dim_b);
  const ComplexMatrix sig_p = vec_inverse(purify(sigma, dim_b), dim_a, dim_b);
  ComplexMatrix theta = ComplexMatrix::Zero(dim_a, bq);
  ComplexMatrix big_psi = ComplexMatrix::Zero(dim_a, bq);
  for (std::size_t y = 0; y < dim_b; ++y) {
    theta.col(2 * y) = rho_p.col(y);
    theta.col(2 * y + 1) = sig_p.col(y);
    big_psi.col(2 * y) = psi_mat.col(y);
  }
  Eigen::JacobiSVD<ComplexMatrix> svd(big_psi, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RealVector& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  std::vector<std::size_t> keep;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > 1e-12 * std::max(smax, 1e-300) && s(i) > 0) keep.push_back(i);
  ComplexMatrix r_in(bq, keep.size()), r_out(bq, keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    r_in.col(k) = svd.matrixV().col(keep[k]);
    r_out.col(k) = theta.adjoint() * svd.matrixU().col(keep[k]) / s(keep[k]);
    // tiny numerical drift in the target frame
    r_out.col(k) /= r_out.col(k).norm();
  }
  std::vector<std::size_t> slots(keep.size());
  std::iota(slots.begin(), slots.end(), 0);
  // orthonormalize r_out against rounding before completion
  Eigen::HouseholderQR<ComplexMatrix> qr(r_out);
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(bq, keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Complex ph = q.col(k).dot(r_out.col(k));
    if (std::abs(ph) > 0) q.col(k) *= ph / std::abs(ph);
  }
  const ComplexMatrix full_in = complete_to_unitary(r_in, slots);
  const ComplexMatrix full_out = complete_to_unitary(q, slots);
  // W'† maps r_i to r'_i; U = W'ᵀ acts on B ⊗ Q.
  const ComplexMatrix w_dag = full_out * full_in.adjoint();
  const ComplexMatrix u = w_dag.adjoint().transpose();
  ComplexMatrix m(dim_b, dim_b);
  for (std::size_t y = 0; y < dim_b; ++y)
    for (std::size_t y2 = 0; y2 < dim_b; ++y2) m(y, y2) = u(2 * y, 2 * y2);
  return hermitian_part(polar_decompose(m).psd);
}

/// Tr_B[(I ⊗ P)|ψ⟩⟨ψ|(I ⊗ P)] for |ψ⟩ on A ⊗ B.
inline ComplexMatrix povm_reconstruction(const ComplexVector& psi, std::size_t dim_a, std::size_t dim_b,
                                         const ComplexMatrix& p) {
  const ComplexMatrix x = vec_inverse(psi, dim_a, dim_b) * p.transpose();
  return x * x.adjoint();
}

// Dominance and gentle-measurement checks.

struct DominanceReport {
  double trace_norm_lhs = 0;  // ‖ρ' − σ‖₁
  double trace_norm_rhs = 0;  // 2‖ρ − σ‖₁
  bool trace_norm_holds = false;
  double partial_trace_min_eigenvalue = 0;  // of ρ^A − Tr_B[(P⊗I)ρ(P⊗I)]
  bool partial_trace_holds = false;

  bool holds() const { return trace_norm_holds && partial_trace_holds; }
};

struct DominanceInputs {
  ComplexMatrix rho, rho_prime, sigma;  // ρ ≤ ρ', Tr ρ' ≤ Tr σ
  ComplexMatrix rho_ab;                 // PSD on A ⊗ B
  std::size_t dim_a = 1, dim_b = 1;
  ComplexMatrix p_b;  // 0 ≤ P ≤ I on B
};

inline DominanceReport dominance_lemmas_check(const DominanceInputs& in, double tol = 1e-9) {
  DominanceReport r;
  r.trace_norm_lhs = trace_norm(in.rho_prime - in.sigma);
  r.trace_norm_rhs = 2 * trace_norm(in.rho - in.sigma);
  r.trace_norm_holds = r.trace_norm_lhs <= r.trace_norm_rhs + tol;
  const SystemShape s{{"A", in.dim_a}, {"B", in.dim_b}};
  const ComplexMatrix pe = embed(in.p_b, s, {"B"});
  const ComplexMatrix lhs = partial_trace(pe * in.rho_ab * pe, s, {"B"});
  const ComplexMatrix rhs = partial_trace(in.rho_ab, s, {"B"});
  const auto ev = hermitian_eigenvalues(rhs - lhs);
  r.partial_trace_min_eigenvalue = ev(ev.size() - 1);
  r.partial_trace_holds = r.partial_trace_min_eigenvalue >= -tol;
  return r;
}

/// Random operator with spectrum in [0, 1].
inline ComplexMatrix random_effect(std::size_t d, Rng& rng) {
  const ComplexMatrix u = haar_unitary(d, rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RealVector p(d);
  for (std::size_t i = 0; i < d; ++i) p(i) = unif(rng);
  return hermitian_part(u * p.cast<Complex>().asDiagonal() * u.adjoint());
}

inline DominanceInputs random_dominance_inputs(std::size_t dim, std::size_t dim_a, std::size_t dim_b, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DominanceInputs in;
  in.rho = random_density(dim, rng) * unif(rng);
  in.rho_prime = in.rho + random_density(dim, rng) * unif(rng) * 0.5;
  in.sigma = random_density(dim, rng) * (in.rho_prime.trace().real() + unif(rng));
  in.dim_a = dim_a;
  in.dim_b = dim_b;
  in.rho_ab = random_density(dim_a * dim_b, rng) * (0.5 + unif(rng));
  in.p_b = random_effect(dim_b, rng);
  return in;
}

struct GentleReport {
  double epsilon = 0;  // 1 − Tr[PρP]
  double distance = 0;
  double bound = 0;
  bool holds = false;
};

inline GentleReport gentle_measurement_check(const ComplexMatrix& rho, const ComplexMatrix& p, double tol = 1e-9) {
  GentleReport r;
  const ComplexMatrix prp = p * rho * p;
  r.epsilon = std::max(0.0, 1.0 - prp.trace().real());
  r.distance = trace_norm(rho - prp);
  r.bound = 2 * std::sqrt(r.epsilon);
  r.holds = r.distance <= r.bound + tol;
  return r;
}

// JSON: {dims: {a, c, b, z}, v: matrix, tp: bool}.

inline nlohmann::json channel_to_json(const ChannelStinespring& t) {
  return {{"dims", {{"a", t.a}, {"c", t.c}, {"b", t.b}, {"z", t.z}}},
          {"v", matrix_to_json(t.v)},
          {"tp", t.trace_preserving}};
}

inline ChannelStinespring channel_from_json(const nlohmann::json& j) {
  const auto& d = j.at("dims");
  return {matrix_from_json(j.at("v")), d.at("a").get<std::size_t>(), d.at("c").get<std::size_t>(),
          d.at("b").get<std::size_t>(), d.at("z").get<std::size_t>(), j.at("tp").get<bool>()};
}

}  // namespace decouple
