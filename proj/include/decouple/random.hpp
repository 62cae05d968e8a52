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

/// \file random.hpp
/// \brief Seed streams, Gaussian matrices, Haar unitaries, ordered parallel map.
///
/// Every stochastic quantity is drawn from a generator seeded by the pair
/// (root, stream). Draw i of an experiment uses stream i, so results do not
/// depend on how work is distributed over threads.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "decouple/linalg.hpp"

namespace decouple {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t root, std::uint64_t stream) {
  return splitmix64(splitmix64(root) ^ splitmix64(stream ^ 0x5851f42d4c957f2dULL));
}

inline Rng make_rng(std::uint64_t root, std::uint64_t stream = 0) { return Rng(stream_seed(root, stream)); }

/// Standard complex normal: real and imaginary parts N(0, 1/2).
inline Complex complex_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline ComplexMatrix ginibre(std::size_t rows, std::size_t cols, Rng& rng) {
  ComplexMatrix g(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) g(i, j) = complex_normal(rng);
  return g;
}

inline ComplexVector random_unit_vector(std::size_t d, Rng& rng) {
  ComplexVector v = ginibre(d, 1, rng).col(0);
  return v / v.norm();
}

/// Haar unitary: QR of a Ginibre matrix with R's diagonal phases moved into Q.
inline ComplexMatrix haar_unitary(std::size_t d, Rng& rng) {
  if (d == 0) fail(ErrorKind::invalid_argument, "haar_unitary needs d >= 1");
  const ComplexMatrix z = ginibre(d, d, rng);
  Eigen::HouseholderQR<ComplexMatrix> qr(z);
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(d, d);
  const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (std::size_t k = 0; k < d; ++k) {
    const Complex rkk = r(k, k);
    const double m = std::abs(rkk);
    if (m > 0) q.col(k) *= rkk / m;
  }
  return q;
}

/// Random density matrix G G†/Tr from a d×rank Ginibre factor.
inline ComplexMatrix random_density(std::size_t d, Rng& rng, std::size_t rank = 0) {
  if (rank == 0) rank = d;
  const ComplexMatrix g = ginibre(d, rank, rng);
  ComplexMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return hermitian_part(rho);
}

inline ComplexMatrix random_pure_density(std::size_t d, Rng& rng) {
  const ComplexVector v = random_unit_vector(d, rng);
  return v * v.adjoint();
}

inline ComplexMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) { return ginibre(rows, cols, rng); }

inline ComplexMatrix random_hermitian(std::size_t d, Rng& rng) { return hermitian_part(ginibre(d, d, rng)); }

inline std::size_t worker_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

/// out[i] = fn(i) for i < count, evaluated on a thread pool; output order is
/// index order regardless of scheduling. The first exception is rethrown.
template <typename Fn>
auto parallel_map(std::size_t count, Fn&& fn, std::size_t threads = 0) {
  using T = decltype(fn(std::size_t{0}));
  std::vector<T> out(count);
  if (threads == 0) threads = worker_count();
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          out[i] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace decouple
