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

#include "decouple/linalg.hpp"

#include <gtest/gtest.h>

#include "decouple/random.hpp"
#include "oracles.hpp"

using namespace decouple;

TEST(linalg, tensor_identity_and_diagonal) {
  EXPECT_LT((tensor(identity(2), identity(2)) - identity(4)).cwiseAbs().maxCoeff(), 1e-15);
  const auto d = tensor(diagonal({1, 2}), diagonal({3, 4}));
  EXPECT_LT((d - diagonal({3, 4, 6, 8})).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(linalg, tensor_matches_index_loop) {
  auto rng = make_rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_matrix(2, 2, rng);
    const auto b = random_matrix(2, 3, rng);
    EXPECT_LT(oracle::max_abs(tensor(a, b) - oracle::kron(a, b)), 1e-12);
  }
}

TEST(linalg, shape_rejects_duplicates_and_zero_dims) {
  EXPECT_THROW((SystemShape{{"A", 2}, {"A", 3}}), Error);
  EXPECT_THROW((SystemShape{{"A", 0}}), Error);
  SystemShape s{{"A", 2}, {"B", 3}, {"R", 4}};
  EXPECT_EQ(s.dim(), 24u);
  EXPECT_EQ(s.without({"B"}).labels(), (std::vector<std::string>{"A", "R"}));
  EXPECT_EQ(s.strides(), (std::vector<std::size_t>{12, 4, 1}));
}

TEST(linalg, partial_trace_defining_property) {
  auto rng = make_rng(12);
  const auto rho = random_density(3, rng);
  const auto sigma = random_matrix(2, 2, rng);
  SystemShape s{{"A", 3}, {"B", 2}};
  const auto out = partial_trace(tensor(rho, sigma), s, {"B"});
  EXPECT_LT((out - sigma.trace() * rho).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(linalg, partial_trace_of_epr_is_maximally_mixed) {
  ComplexVector v = ComplexVector::Zero(4);
  v(0) = v(3) = 1 / std::sqrt(2.0);
  const ComplexMatrix phi = v * v.adjoint();
  const auto out = partial_trace(phi, SystemShape{{"A", 2}, {"A'", 2}}, {"A'"});
  EXPECT_LT((out - maximally_mixed(2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(linalg, partial_trace_matches_double_index_sum) {
  auto rng = make_rng(13);
  const auto rho = random_density(12, rng);
  SystemShape s{{"A", 4}, {"B", 3}};
  EXPECT_LT(oracle::max_abs(partial_trace(rho, s, {"B"}) - oracle::trace_second(rho, 4, 3)), 1e-12);
  EXPECT_LT(oracle::max_abs(partial_trace(rho, s, {"A"}) - oracle::trace_first(rho, 4, 3)), 1e-12);
}

TEST(linalg, partial_trace_unknown_label) {
  SystemShape s{{"A", 2}, {"B", 2}};
  try {
    partial_trace(identity(4), s, {"Q"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unknown_label);
  }
  EXPECT_THROW(partial_trace(identity(3), s, {"A"}), Error);
}

TEST(linalg, partial_trace_order_independent) {
  auto rng = make_rng(14);
  SystemShape s{{"A", 2}, {"B", 3}, {"C", 2}};
  const auto m = random_matrix(12, 12, rng);
  const auto both = partial_trace(m, s, {"A", "C"});
  const auto ac = partial_trace(partial_trace(m, s, {"A"}), s.without({"A"}), {"C"});
  const auto ca = partial_trace(partial_trace(m, s, {"C"}), s.without({"C"}), {"A"});
  EXPECT_LT((both - ac).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((both - ca).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(linalg, permute_and_embed) {
  auto rng = make_rng(15);
  const auto a = random_matrix(2, 2, rng);
  const auto b = random_matrix(3, 3, rng);
  SystemShape s{{"A", 2}, {"B", 3}};
  EXPECT_LT((permute_systems(tensor(a, b), s, {"B", "A"}) - tensor(b, a)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((embed(b, s, {"B"}) - tensor(identity(2), b)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((embed(a, s, {"A"}) - tensor(a, identity(3))).cwiseAbs().maxCoeff(), 1e-14);
  SystemShape t{{"A", 2}, {"B", 3}, {"C", 2}};
  const auto c = random_matrix(2, 2, rng);
  const auto op = tensor(c, a);  // acts on C then A
  const auto expected = permute_systems(tensor(identity(3), op), SystemShape{{"B", 3}, {"C", 2}, {"A", 2}},
                                        {"A", "B", "C"});
  EXPECT_LT((embed(op, t, {"C", "A"}) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(linalg, schatten_norm_known_values) {
  for (std::size_t d : {1u, 2u, 5u}) {
    EXPECT_NEAR(schatten_norm(identity(d), 1), d, 1e-12);
    EXPECT_NEAR(schatten_norm(identity(d), 3), std::pow(d, 1.0 / 3), 1e-12);
    EXPECT_NEAR(operator_norm(identity(d)), 1.0, 1e-12);
  }
  EXPECT_NEAR(schatten_norm(diagonal({3, -4}), 2), 5.0, 1e-12);
  EXPECT_NEAR(schatten_norm(diagonal({3, -4}), 1), 7.0, 1e-12);
  EXPECT_THROW(schatten_norm(identity(2), 0.5), Error);
}

TEST(linalg, schatten_norm_matches_svd_oracle) {
  auto rng = make_rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_matrix(5, 3, rng);
    const auto n = random_matrix(3, 3, rng);
    for (double p : {1.0, 1.5, 2.0, 4.0}) EXPECT_NEAR(schatten_norm(m, p), oracle::schatten(m, p), 1e-10);
    EXPECT_LE(trace_norm(m), std::sqrt(3.0) * hs_norm(m) + 1e-12);
    for (double p : {1.0, 2.0, 3.0})
      EXPECT_LE(schatten_norm(m * n, p), operator_norm(m) * schatten_norm(n, p) + 1e-10);
  }
}

TEST(linalg, norm_ordering_properties) {
  auto rng = make_rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + trial % 5;
    const auto m = random_matrix(d, d, rng);
    EXPECT_LE(std::abs(m.trace()), trace_norm(m) + 1e-12);
    EXPECT_LE(trace_norm(m), std::sqrt(double(d)) * hs_norm(m) + 1e-12);
    EXPECT_LE(schatten_norm(m, 3), hs_norm(m) + 1e-12);
    EXPECT_LE(operator_norm(m), schatten_norm(m, 3) + 1e-12);
  }
}

TEST(linalg, marginal_purity_ratio_sandwich) {
  auto rng = make_rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t da = 1 + trial % 4, db = 1 + (trial / 4) % 3;
    const auto rho = random_density(da * db, rng, 1 + trial % (da * db));
    const auto rb = partial_trace(rho, SystemShape{{"A", da}, {"B", db}}, {"A"});
    const double ratio = rho.squaredNorm() / rb.squaredNorm();
    EXPECT_GE(ratio, 1.0 / da - 1e-12);
    EXPECT_LE(ratio, da + 1e-12);
  }
}

TEST(linalg, weighted_cauchy_schwarz) {
  auto rng = make_rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + trial % 4;
    const auto m = random_matrix(d, d, rng);
    const auto sigma = random_density(d, rng);
    const auto w = pseudo_inverse_power(sigma, -0.25);
    EXPECT_LE(trace_norm(m), hs_norm(w * m * w) + 1e-10);
  }
}

TEST(linalg, pseudo_inverse_power_examples) {
  const auto p = pseudo_inverse_power(maximally_mixed(4), -0.25);
  EXPECT_LT((p - std::pow(4.0, 0.25) * identity(4)).cwiseAbs().maxCoeff(), 1e-12);
  const auto q = pseudo_inverse_power(diagonal({4, 0}), -0.5);
  EXPECT_LT((q - diagonal({0.5, 0})).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(pseudo_inverse_power(diagonal({1, -0.5}), -0.5), Error);
}

TEST(linalg, pseudo_inverse_power_spectral_oracle) {
  auto rng = make_rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 3 + trial % 3;
    const auto m = random_density(d, rng, 1 + trial % d);
    const auto q = pseudo_inverse_power(m, -0.25);
    const auto proj = oracle::spectral(m, [](double l) { return l > 1e-9 ? 1.0 : 0.0; });
    EXPECT_LT(oracle::max_abs(q * q * q * q * m - proj), 1e-9);
    EXPECT_LT(oracle::max_abs(proj * m - m), 1e-9);
    const auto sq = oracle::spectral(m, [](double l) { return l > 1e-9 ? std::pow(l, -0.25) : 0.0; });
    EXPECT_LT(oracle::max_abs(q - sq), 1e-6);
  }
}

TEST(linalg, vec_inverse_examples) {
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t z = 0; z < 2; ++z) {
      const ComplexVector v = tensor(ComplexVector(ComplexVector::Unit(3, a)), ComplexVector(ComplexVector::Unit(2, z)));
      ComplexMatrix expected = ComplexMatrix::Zero(3, 2);
      expected(a, z) = 1;
      EXPECT_LT((vec_inverse(v, 3, 2) - expected).cwiseAbs().maxCoeff(), 1e-15);
    }
  EXPECT_THROW(vec_inverse(ComplexVector::Zero(5), 3, 2), Error);
}

TEST(linalg, vec_partial_trace_identity) {
  auto rng = make_rng(21);
  SystemShape s{{"A", 3}, {"Z", 2}};
  for (int trial = 0; trial < 50; ++trial) {
    const ComplexVector x = random_matrix(6, 1, rng).col(0);
    const ComplexVector y = random_matrix(6, 1, rng).col(0);
    EXPECT_NEAR(vec_inverse(x, s).norm(), x.norm(), 1e-12);
    const ComplexMatrix lhs = oracle::trace_second(x * y.adjoint(), 3, 2);
    EXPECT_LT(oracle::max_abs(lhs - vec_inverse(x, s) * vec_inverse(y, s).adjoint()), 1e-12);
  }
  EXPECT_LT((vec_inverse(vec(identity(3)), 3, 3) - identity(3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(linalg, swap_operator_properties) {
  EXPECT_EQ(swap_operator(1), identity(1));
  for (std::size_t d : {2u, 3u}) {
    const auto f = swap_operator(d);
    EXPECT_LT((f * f - identity(d * d)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((f - f.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
  }
  auto rng = make_rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_matrix(2, 2, rng);
    const auto n = random_matrix(2, 2, rng);
    EXPECT_LT(std::abs((m * n).trace() - (tensor(m, n) * swap_operator(2)).trace()), 1e-12);
  }
}

TEST(linalg, swap_partial_trace_bound) {
  auto rng = make_rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t da = 1 + trial % 3, dr = 1 + (trial / 3) % 3;
    const auto m = random_matrix(da * dr, da * dr, rng);
    SystemShape s{{"A1", da}, {"R1", dr}, {"A2", da}, {"R2", dr}};
    const auto prod = tensor(m, ComplexMatrix(m.adjoint()));
    const auto fr = embed(swap_operator(dr), s, {"R1", "R2"});
    const auto out = partial_trace(fr * prod, s, {"R1", "R2"});
    EXPECT_LE(trace_norm(out), da * m.squaredNorm() * (1 + 1e-12));
  }
}

TEST(linalg, polar_decomposition) {
  auto rng = make_rng(24);
  const auto u = haar_unitary(3, rng);
  auto pu = polar_decompose(u);
  EXPECT_LT((pu.unitary - u).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((pu.psd - identity(3)).cwiseAbs().maxCoeff(), 1e-10);
  const auto psd = random_density(3, rng, 2);
  auto pp = polar_decompose(psd);
  EXPECT_LT((pp.psd - psd).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE(is_unitary(pp.unitary));
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_matrix(4, 4, rng);
    auto p = polar_decompose(m);
    EXPECT_TRUE(is_unitary(p.unitary));
    EXPECT_LT((m - p.unitary * p.psd).norm(), 1e-9 * std::max(1.0, m.norm()));
    const auto sq = oracle::spectral(m.adjoint() * m, [](double l) { return std::sqrt(std::max(l, 0.0)); });
    EXPECT_LT(oracle::max_abs(p.psd - sq), 1e-9);
  }
}

TEST(linalg, spectrum_reconstruction_and_order) {
  auto rng = make_rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = random_hermitian(5, rng);
    const auto s = hermitian_spectrum(h);
    for (int i = 0; i + 1 < 5; ++i) EXPECT_GE(s.eigenvalues(i), s.eigenvalues(i + 1));
    const ComplexMatrix rec = s.eigenvectors * s.eigenvalues.cast<Complex>().asDiagonal() * s.eigenvectors.adjoint();
    EXPECT_LT((rec - h).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, std::abs(s.eigenvalues(0))));
  }
}

TEST(linalg, json_round_trip) {
  auto rng = make_rng(26);
  const auto m = random_matrix(2, 3, rng);
  const auto j = matrix_to_json(m);
  EXPECT_EQ(j["rows"], 2);
  EXPECT_EQ(j["re"].size(), 6u);
  EXPECT_EQ(j["re"][1].get<double>(), m(0, 1).real());
  EXPECT_EQ(matrix_from_json(j), m);
  auto bad = j;
  bad["re"].push_back(1.0);
  EXPECT_THROW(matrix_from_json(bad), Error);
}
