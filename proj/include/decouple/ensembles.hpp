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

/// \file ensembles.hpp
/// \brief Unitary ensembles and design diagnostics.
///
/// Moment operators use the row-major vec convention, so the t-fold twirl
/// M ↦ U^{⊗t} M U^{†⊗t} has matrix U^{⊗t} ⊗ conj(U)^{⊗t}.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "decouple/linalg.hpp"
#include "decouple/random.hpp"

namespace decouple {

enum class EnsembleKind { enumerated, haar, circuit };

inline const char* to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::enumerated: return "enumerated";
    case EnsembleKind::haar: return "haar";
    case EnsembleKind::circuit: return "circuit";
  }
  return "?";
}

/// Default cap on d^{2t}, the side length of the t-th moment operator.
inline constexpr std::size_t kMomentCap = 4096;

struct UnitaryEnsemble {
  EnsembleKind kind = EnsembleKind::haar;
  std::string name = "haar";
  std::size_t dim = 1;
  std::vector<ComplexMatrix> members;  // uniform weights
  std::size_t n_qubits = 0;
  std::size_t circuit_depth = 0;
  std::uint64_t seed = 0;
  std::size_t iterations = 1;  // each draw multiplies this many independent members

  std::size_t size() const { return members.size(); }
  bool enumerated() const { return kind == EnsembleKind::enumerated; }

  nlohmann::json to_json() const {
    nlohmann::json j{{"kind", to_string(kind)}, {"name", name},       {"dim", dim},
                     {"seed", seed},            {"iterations", iterations}};
    if (kind == EnsembleKind::enumerated) j["members"] = members.size();
    if (n_qubits) j["n_qubits"] = n_qubits;
    if (kind == EnsembleKind::circuit) j["depth"] = circuit_depth;
    return j;
  }
};

inline ComplexMatrix haar_sample(std::size_t dim, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return haar_unitary(dim, rng);
}

inline UnitaryEnsemble haar_ensemble(std::size_t dim, std::uint64_t seed) {
  UnitaryEnsemble e;
  e.kind = EnsembleKind::haar;
  e.name = "haar";
  e.dim = dim;
  e.seed = seed;
  return e;
}

namespace detail {

inline std::size_t qubit_dim(std::size_t n) {
  if (n >= 16) fail(ErrorKind::memory_cap_exceeded, "more than 15 qubits requested");
  return std::size_t{1} << n;
}

inline SystemShape qubit_shape(std::size_t n) {
  std::vector<Subsystem> parts;
  for (std::size_t i = 0; i < n; ++i) parts.push_back({"q" + std::to_string(i), 2});
  return SystemShape(std::move(parts));
}

/// Neighbor pairs acted on by layer `parity` on a ring of n qubits.
inline std::vector<std::pair<std::size_t, std::size_t>> layer_pairs(std::size_t n, std::size_t parity) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = parity; i + 1 < n; i += 2) pairs.emplace_back(i, i + 1);
  if (parity == 1 && n > 2 && n % 2 == 0) pairs.emplace_back(n - 1, 0);
  if (pairs.empty()) pairs.emplace_back(0, 1);
  return pairs;
}

inline ComplexMatrix draw_circuit(std::size_t n, std::size_t depth, Rng& rng) {
  const auto shape = qubit_shape(n);
  ComplexMatrix u = identity(shape.dim());
  for (std::size_t layer = 0; layer < depth; ++layer) {
    ComplexMatrix l = identity(shape.dim());
    for (auto [i, j] : layer_pairs(n, layer % 2)) {
      const ComplexMatrix g = haar_unitary(4, rng);
      l = embed(g, shape, {"q" + std::to_string(i), "q" + std::to_string(j)}) * l;
    }
    u = l * u;
  }
  return u;
}

inline ComplexMatrix draw_one(const UnitaryEnsemble& e, Rng& rng) {
  switch (e.kind) {
    case EnsembleKind::enumerated: {
      std::uniform_int_distribution<std::size_t> pick(0, e.members.size() - 1);
      return e.members[pick(rng)];
    }
    case EnsembleKind::haar: return haar_unitary(e.dim, rng);
    case EnsembleKind::circuit: return draw_circuit(e.n_qubits, e.circuit_depth, rng);
  }
  fail(ErrorKind::invalid_argument, "unknown ensemble kind");
}

}  // namespace detail

/// Member number `stream` of the ensemble's seeded draw sequence.
inline ComplexMatrix draw(const UnitaryEnsemble& e, std::uint64_t stream) {
  if (e.enumerated() && e.members.empty()) fail(ErrorKind::invalid_argument, "empty enumerated ensemble");
  auto rng = make_rng(e.seed, stream);
  ComplexMatrix u = detail::draw_one(e, rng);
  for (std::size_t k = 1; k < e.iterations; ++k) u = detail::draw_one(e, rng) * u;
  return u;
}

inline UnitaryEnsemble random_circuit_ensemble(std::size_t n_qubits, std::size_t depth, std::uint64_t seed) {
  if (n_qubits < 2) fail(ErrorKind::invalid_argument, "random circuits need at least 2 qubits");
  UnitaryEnsemble e;
  e.kind = EnsembleKind::circuit;
  e.name = "circuit";
  e.n_qubits = n_qubits;
  e.dim = detail::qubit_dim(n_qubits);
  e.circuit_depth = depth;
  e.seed = seed;
  return e;
}

/// k-fold product ensemble.
inline UnitaryEnsemble iterate_ensemble(UnitaryEnsemble e, std::size_t k) {
  if (k == 0) fail(ErrorKind::invalid_argument, "iterate_ensemble needs k >= 1");
  e.iterations *= k;
  return e;
}

/// Fixes the global phase: the first entry (row-major) with modulus above
/// 1e−9 is made real positive.
inline ComplexMatrix strip_phase(const ComplexMatrix& u) {
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    for (Eigen::Index j = 0; j < u.cols(); ++j)
      if (std::abs(u(i, j)) > 1e-9) return u * (std::conj(u(i, j)) / std::abs(u(i, j)));
  return u;
}

namespace detail {

inline std::vector<std::int64_t> matrix_key(const ComplexMatrix& u) {
  std::vector<std::int64_t> key;
  key.reserve(2 * u.size());
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
      key.push_back(std::llround(u(i, j).real() * 1e6));
      key.push_back(std::llround(u(i, j).imag() * 1e6));
    }
  return key;
}

inline std::vector<ComplexMatrix> closure(const std::vector<ComplexMatrix>& generators) {
  const auto d = generators.front().rows();
  std::map<std::vector<std::int64_t>, std::size_t> seen;
  std::vector<ComplexMatrix> out{ComplexMatrix::Identity(d, d)};
  seen.emplace(matrix_key(out[0]), 0);
  for (std::size_t head = 0; head < out.size(); ++head) {
    for (const auto& g : generators) {
      ComplexMatrix next = strip_phase(g * out[head]);
      auto key = matrix_key(next);
      if (seen.emplace(std::move(key), out.size()).second) out.push_back(std::move(next));
    }
  }
  return out;
}

inline ComplexMatrix hadamard() {
  ComplexMatrix h(2, 2);
  h << 1, 1, 1, -1;
  return h / std::sqrt(2.0);
}

inline ComplexMatrix phase_gate() {
  ComplexMatrix s = ComplexMatrix::Zero(2, 2);
  s(0, 0) = 1;
  s(1, 1) = Complex(0, 1);
  return s;
}

inline ComplexMatrix cnot() {
  ComplexMatrix c = ComplexMatrix::Zero(4, 4);
  c(0, 0) = c(1, 1) = c(2, 3) = c(3, 2) = 1;
  return c;
}

inline ComplexMatrix pauli(int k) {
  ComplexMatrix p = ComplexMatrix::Zero(2, 2);
  switch (k) {
    case 0: p(0, 0) = p(1, 1) = 1; break;
    case 1: p(0, 1) = p(1, 0) = 1; break;
    case 2: p(0, 1) = Complex(0, -1), p(1, 0) = Complex(0, 1); break;
    default: p(0, 0) = 1, p(1, 1) = -1; break;
  }
  return p;
}

inline UnitaryEnsemble make_enumerated(std::string name, std::size_t n, std::vector<ComplexMatrix> members) {
  UnitaryEnsemble e;
  e.kind = EnsembleKind::enumerated;
  e.name = std::move(name);
  e.n_qubits = n;
  e.dim = members.front().rows();
  e.members = std::move(members);
  return e;
}

inline UnitaryEnsemble build_clifford(std::size_t n) {
  std::vector<ComplexMatrix> gens;
  if (n == 1) {
    gens = {hadamard(), phase_gate()};
  } else {
    const auto i2 = identity(2);
    gens = {tensor(hadamard(), i2), tensor(i2, hadamard()), tensor(phase_gate(), i2), tensor(i2, phase_gate()),
            cnot()};
  }
  return make_enumerated("clifford", n, closure(gens));
}

}  // namespace detail

inline UnitaryEnsemble pauli_group(std::size_t n_qubits) {
  if (n_qubits < 1 || n_qubits > 2) fail(ErrorKind::invalid_argument, "pauli_group supports 1 or 2 qubits");
  std::vector<ComplexMatrix> members;
  if (n_qubits == 1) {
    for (int a = 0; a < 4; ++a) members.push_back(strip_phase(detail::pauli(a)));
  } else {
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) members.push_back(strip_phase(tensor(detail::pauli(a), detail::pauli(b))));
  }
  return detail::make_enumerated("pauli", n_qubits, std::move(members));
}

/// Clifford group modulo phases (24 elements for one qubit, 11520 for two).
/// The closure is computed once per process and shared read-only.
inline const UnitaryEnsemble& clifford_group_cached(std::size_t n_qubits) {
  if (n_qubits < 1 || n_qubits > 2) fail(ErrorKind::invalid_argument, "clifford_group supports 1 or 2 qubits");
  static std::once_flag flags[2];
  static UnitaryEnsemble groups[2];
  std::call_once(flags[n_qubits - 1], [n_qubits] { groups[n_qubits - 1] = detail::build_clifford(n_qubits); });
  return groups[n_qubits - 1];
}

inline UnitaryEnsemble clifford_group(std::size_t n_qubits, std::uint64_t seed = 0) {
  UnitaryEnsemble e = clifford_group_cached(n_qubits);
  e.seed = seed;
  return e;
}

// Binary fixtures: "DCPLENS" magic, version byte, then kind/name length,
// name, n_qubits, member count and dim as little-endian u64, then the
// members' (re, im) pairs in row-major order.

inline constexpr std::uint8_t kFixtureVersion = 1;

inline void save_fixture(const UnitaryEnsemble& e, const std::string& path) {
  if (!e.enumerated()) fail(ErrorKind::invalid_argument, "only enumerated ensembles can be cached");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_argument, "cannot write fixture " + path);
  out.write("DCPLENS", 7);
  out.put(static_cast<char>(kFixtureVersion));
  auto put64 = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xff));
  };
  put64(e.name.size());
  out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
  put64(e.n_qubits);
  put64(e.members.size());
  put64(e.dim);
  for (const auto& m : e.members)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double re = m(i, j).real(), im = m(i, j).imag();
        out.write(reinterpret_cast<const char*>(&re), sizeof re);
        out.write(reinterpret_cast<const char*>(&im), sizeof im);
      }
}

/// Loads a fixture if it exists and matches (name, n_qubits) and the
/// current version; returns nullopt otherwise.
inline std::optional<UnitaryEnsemble> load_fixture(const std::string& path, const std::string& name,
                                                   std::size_t n_qubits) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[7];
  in.read(magic, 7);
  if (!in || std::memcmp(magic, "DCPLENS", 7) != 0) return std::nullopt;
  if (in.get() != kFixtureVersion) return std::nullopt;
  auto get64 = [&]() {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in.get())) << (8 * b);
    return v;
  };
  std::string stored(get64(), '\0');
  in.read(stored.data(), static_cast<std::streamsize>(stored.size()));
  const auto n = get64(), count = get64(), dim = get64();
  if (!in || stored != name || n != n_qubits || count == 0 || dim == 0 || dim > 64) return std::nullopt;
  std::vector<ComplexMatrix> members;
  for (std::uint64_t k = 0; k < count; ++k) {
    ComplexMatrix m(dim, dim);
    for (std::uint64_t i = 0; i < dim; ++i)
      for (std::uint64_t j = 0; j < dim; ++j) {
        double re, im;
        in.read(reinterpret_cast<char*>(&re), sizeof re);
        in.read(reinterpret_cast<char*>(&im), sizeof im);
        m(i, j) = Complex(re, im);
      }
    if (!in) return std::nullopt;
    members.push_back(std::move(m));
  }
  return detail::make_enumerated(name, n_qubits, std::move(members));
}

// Moment operators.

namespace detail {

inline void check_moment_cap(std::size_t dim, std::size_t t, std::size_t cap) {
  if (t == 0) fail(ErrorKind::invalid_argument, "moment order t must be positive");
  double side = 1;
  for (std::size_t k = 0; k < 2 * t; ++k) side *= static_cast<double>(dim);
  if (side > static_cast<double>(cap))
    fail(ErrorKind::memory_cap_exceeded, "moment operator side d^{2t} = " + std::to_string(side) +
                                             " exceeds the cap of " + std::to_string(cap));
}

inline ComplexMatrix twirl_matrix(const ComplexMatrix& u, std::size_t t) {
  const ComplexMatrix ut = tensor_power(u, t);
  return tensor(ut, ComplexMatrix(ut.conjugate()));
}

/// Permutation operator on (C^d)^{⊗t}: |i_1 … i_t⟩ ↦ |i_{p(1)} … i_{p(t)}⟩.
inline ComplexMatrix permutation_operator(std::size_t d, const std::vector<std::size_t>& p) {
  const std::size_t t = p.size();
  std::size_t n = 1;
  for (std::size_t k = 0; k < t; ++k) n *= d;
  ComplexMatrix op = ComplexMatrix::Zero(n, n);
  std::vector<std::size_t> digits(t);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rest = idx;
    for (std::size_t k = t; k-- > 0;) digits[k] = rest % d, rest /= d;
    std::size_t out = 0;
    for (std::size_t k = 0; k < t; ++k) out = out * d + digits[p[k]];
    op(out, idx) = 1.0;
  }
  return op;
}

inline std::vector<std::vector<std::size_t>> all_permutations(std::size_t t) {
  std::vector<std::size_t> p(t);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<std::size_t>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace detail

/// Gram matrix G_{πσ} = Tr[P_π† P_σ] of the permutation operators.
inline RealVector permutation_gram_eigenvalues(std::size_t d, std::size_t t) {
  const auto perms = detail::all_permutations(t);
  ComplexMatrix g(perms.size(), perms.size());
  std::vector<ComplexMatrix> ops;
  for (const auto& p : perms) ops.push_back(detail::permutation_operator(d, p));
  for (std::size_t a = 0; a < ops.size(); ++a)
    for (std::size_t b = 0; b < ops.size(); ++b) g(a, b) = (ops[a].adjoint() * ops[b]).trace();
  return hermitian_eigenvalues(g);
}

/// Haar moment operator Σ W_{πσ} vec(P_π) vec(P_σ)†, W the pseudo-inverse of
/// the permutation Gram matrix.
inline ComplexMatrix haar_moment_operator(std::size_t d, std::size_t t, std::size_t cap = kMomentCap) {
  detail::check_moment_cap(d, t, cap);
  const auto perms = detail::all_permutations(t);
  ComplexMatrix vecs(0, 0);
  std::vector<ComplexVector> v;
  for (const auto& p : perms) v.push_back(vec(detail::permutation_operator(d, p)));
  const auto n = v.front().size();
  ComplexMatrix basis(n, v.size());
  for (std::size_t k = 0; k < v.size(); ++k) basis.col(k) = v[k];
  const ComplexMatrix gram = basis.adjoint() * basis;
  const ComplexMatrix w = pseudo_inverse_power(gram, -1.0);
  return basis * w * basis.adjoint();
}

/// Average twirl matrix. Enumerated ensembles are averaged exactly (then
/// raised to the iteration count); samplers use `samples` seeded draws.
inline ComplexMatrix moment_operator(const UnitaryEnsemble& e, std::size_t t, std::size_t samples = 0,
                                     std::size_t cap = kMomentCap) {
  detail::check_moment_cap(e.dim, t, cap);
  std::size_t side = 1;
  for (std::size_t k = 0; k < 2 * t; ++k) side *= e.dim;
  if (e.enumerated()) {
    if (e.members.empty()) fail(ErrorKind::invalid_argument, "empty enumerated ensemble");
    constexpr std::size_t chunks = 16;
    const std::size_t m = e.members.size();
    auto parts = parallel_map(std::min(chunks, m), [&](std::size_t c) {
      ComplexMatrix acc = ComplexMatrix::Zero(side, side);
      for (std::size_t i = c; i < m; i += chunks) acc += detail::twirl_matrix(e.members[i], t);
      return acc;
    });
    ComplexMatrix g = ComplexMatrix::Zero(side, side);
    for (const auto& p : parts) g += p;
    g /= static_cast<double>(m);
    ComplexMatrix out = g;
    for (std::size_t k = 1; k < e.iterations; ++k) out = out * g;
    return out;
  }
  if (samples == 0) fail(ErrorKind::invalid_argument, "sampled moment operator needs samples > 0");
  constexpr std::size_t chunks = 16;
  auto parts = parallel_map(std::min(chunks, samples), [&](std::size_t c) {
    ComplexMatrix acc = ComplexMatrix::Zero(side, side);
    for (std::size_t i = c; i < samples; i += chunks) acc += detail::twirl_matrix(draw(e, i), t);
    return acc;
  });
  ComplexMatrix g = ComplexMatrix::Zero(side, side);
  for (const auto& p : parts) g += p;
  return g / static_cast<double>(samples);
}

struct DesignReport {
  std::size_t t = 1;
  std::size_t dim = 1;
  double lambda = 0;             // ‖Ĝ − Î‖_∞
  double moment_deviation = 0;   // d^t · max |E_ν[m] − E_Haar[m]| over tested monomials
  std::size_t monomials_tested = 0;
  bool monomials_exhaustive = false;

  nlohmann::json to_json() const {
    return {{"t", t},
            {"dim", dim},
            {"lambda", lambda},
            {"moment_deviation", moment_deviation},
            {"monomials_tested", monomials_tested},
            {"monomials_exhaustive", monomials_exhaustive}};
  }
};

/// Largest deviation of balanced monomials of degree s from their Haar
/// values, scaled by d^s. A monomial's expectation is an entry of the moment
/// operator. All entries are checked when d^{4s} ≤ 4096, else 256 sampled.
inline double monomial_deviation(const ComplexMatrix& g, const ComplexMatrix& haar, std::size_t d, std::size_t s,
                                 Rng& rng, std::size_t& tested, bool& exhaustive) {
  const auto n = g.rows();
  double ds = 1;
  for (std::size_t k = 0; k < s; ++k) ds *= static_cast<double>(d);
  double worst = 0;
  if (static_cast<std::size_t>(n * n) <= 4096) {
    worst = (g - haar).cwiseAbs().maxCoeff();
    tested += n * n;
  } else {
    exhaustive = false;
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (int k = 0; k < 256; ++k) {
      const auto r = pick(rng), c = pick(rng);
      worst = std::max(worst, std::abs(g(r, c) - haar(r, c)));
    }
    tested += 256;
  }
  return ds * worst;
}

inline DesignReport qtpe_lambda(const UnitaryEnsemble& e, std::size_t t, std::size_t samples = 0,
                                std::uint64_t monomial_seed = 0, std::size_t cap = kMomentCap) {
  DesignReport r;
  r.t = t;
  r.dim = e.dim;
  r.monomials_exhaustive = true;
  auto rng = make_rng(monomial_seed, 0x6d6f6e6f);
  for (std::size_t s = 1; s <= t; ++s) {
    const ComplexMatrix g = moment_operator(e, s, samples, cap);
    const ComplexMatrix h = haar_moment_operator(e.dim, s, cap);
    r.moment_deviation =
        std::max(r.moment_deviation, monomial_deviation(g, h, e.dim, s, rng, r.monomials_tested, r.monomials_exhaustive));
    if (s == t) r.lambda = operator_norm(g - h);
  }
  return r;
}

/// Frame potential ‖Ĝ‖₂² = E_{U,V}|Tr U†V|^{2t}. Enumerated ensembles are
/// summed over all pairs; samplers use distinct pairs of `samples` draws.
inline double frame_potential(const UnitaryEnsemble& e, std::size_t t, std::size_t samples = 0) {
  std::vector<ComplexMatrix> us;
  if (e.enumerated() && e.iterations == 1) {
    us = e.members;
  } else {
    if (samples < 2) fail(ErrorKind::invalid_argument, "frame potential needs at least 2 samples");
    us = parallel_map(samples, [&](std::size_t i) { return draw(e, i); });
  }
  const std::size_t m = us.size();
  auto rows = parallel_map(m, [&](std::size_t i) {
    double acc = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!e.enumerated() && i == j) continue;
      acc += std::pow(std::norm((us[i].adjoint() * us[j]).trace()), static_cast<double>(t));
    }
    return acc;
  });
  double total = 0;
  for (double x : rows) total += x;
  const double pairs = e.enumerated() && e.iterations == 1 ? double(m) * m : double(m) * (m - 1);
  return total / pairs;
}

/// Haar frame potential: the rank of the permutation Gram matrix (t! for d ≥ t).
inline double haar_frame_potential(std::size_t d, std::size_t t) {
  const auto ev = permutation_gram_eigenvalues(d, t);
  double rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) rank += ev(i) > 1e-9 * ev.maxCoeff();
  return rank;
}

}  // namespace decouple
