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

/// \file linalg.hpp
/// \brief Dense complex linear algebra: Kronecker products, label-driven
/// partial traces and permutations, Schatten norms, spectral functions.
///
/// Matrices are Eigen dynamic complex matrices. Subsystem bookkeeping is done
/// with SystemShape, an ordered list of named dimensions; the first label is
/// the most significant digit of the tensor index.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "decouple/error.hpp"

namespace decouple {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Tolerance for Hermiticity and small-imaginary-part checks.
inline constexpr double kHermitianTolerance = 1e-12;
/// Default relative cutoff separating the kernel from the support.
inline constexpr double kDefaultPinvCutoff = 1e-10;

struct Subsystem {
  std::string name;
  std::size_t dim = 1;

  bool operator==(const Subsystem&) const = default;
};

class SystemShape {
 public:
  SystemShape() = default;
  SystemShape(std::initializer_list<Subsystem> parts) : parts_(parts) { validate(); }
  explicit SystemShape(std::vector<Subsystem> parts) : parts_(std::move(parts)) { validate(); }

  std::size_t size() const { return parts_.size(); }
  bool empty() const { return parts_.empty(); }
  const std::vector<Subsystem>& parts() const { return parts_; }
  const Subsystem& operator[](std::size_t i) const { return parts_[i]; }

  /// Product of all subsystem dimensions (1 for the empty shape).
  std::size_t dim() const {
    std::size_t d = 1;
    for (const auto& p : parts_) d *= p.dim;
    return d;
  }

  bool contains(const std::string& name) const {
    return std::any_of(parts_.begin(), parts_.end(), [&](const Subsystem& p) { return p.name == name; });
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < parts_.size(); ++i)
      if (parts_[i].name == name) return i;
    fail(ErrorKind::unknown_label, "no subsystem labelled '" + name + "' in shape " + to_string());
  }

  std::size_t dim_of(const std::string& name) const { return parts_[index_of(name)].dim; }

  std::size_t dim_of(const std::vector<std::string>& names) const {
    std::size_t d = 1;
    for (const auto& n : names) d *= dim_of(n);
    return d;
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& p : parts_) out.push_back(p.name);
    return out;
  }

  /// Shape with the given labels removed, order of the rest preserved.
  SystemShape without(const std::vector<std::string>& names) const {
    for (const auto& n : names) (void)index_of(n);
    std::vector<Subsystem> kept;
    for (const auto& p : parts_)
      if (std::find(names.begin(), names.end(), p.name) == names.end()) kept.push_back(p);
    return SystemShape(std::move(kept));
  }

  /// Shape restricted to the given labels, in the given order.
  SystemShape select(const std::vector<std::string>& names) const {
    std::vector<Subsystem> out;
    for (const auto& n : names) out.push_back(parts_[index_of(n)]);
    return SystemShape(std::move(out));
  }

  SystemShape replaced(const std::string& old_name, Subsystem replacement) const {
    auto parts = parts_;
    parts[index_of(old_name)] = std::move(replacement);
    return SystemShape(std::move(parts));
  }

  SystemShape concat(const SystemShape& other) const {
    auto parts = parts_;
    parts.insert(parts.end(), other.parts_.begin(), other.parts_.end());
    return SystemShape(std::move(parts));
  }

  /// Row-major stride of every subsystem.
  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(parts_.size(), 1);
    for (std::size_t i = parts_.size(); i-- > 1;) s[i - 1] = s[i] * parts_[i].dim;
    return s;
  }

  std::string to_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      if (i) s += ", ";
      s += parts_[i].name + ":" + std::to_string(parts_[i].dim);
    }
    return s + "]";
  }

  bool operator==(const SystemShape&) const = default;

 private:
  void validate() const {
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      if (parts_[i].dim == 0)
        fail(ErrorKind::invalid_argument, "subsystem '" + parts_[i].name + "' has zero dimension");
      for (std::size_t j = 0; j < i; ++j)
        if (parts_[i].name == parts_[j].name)
          fail(ErrorKind::invalid_argument, "duplicate subsystem label '" + parts_[i].name + "'");
    }
  }

  std::vector<Subsystem> parts_;
};

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
struct Spectrum {
  RealVector eigenvalues;
  ComplexMatrix eigenvectors;  // columns
};

namespace detail {

/// For every row-major multi-index over `positions` of `shape`, the linear
/// offset it contributes to the full index. Full indices are separable sums
/// of such offsets over a partition of the positions.
inline std::vector<std::size_t> offsets(const SystemShape& shape, const std::vector<std::size_t>& positions) {
  const auto strides = shape.strides();
  std::vector<std::size_t> out{0};
  for (std::size_t pos : positions) {
    std::vector<std::size_t> next;
    next.reserve(out.size() * shape[pos].dim);
    for (std::size_t base : out)
      for (std::size_t k = 0; k < shape[pos].dim; ++k) next.push_back(base + k * strides[pos]);
    out = std::move(next);
  }
  return out;
}

inline std::vector<std::size_t> positions_of(const SystemShape& shape, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) {
    auto p = shape.index_of(n);
    if (std::find(out.begin(), out.end(), p) != out.end())
      fail(ErrorKind::invalid_argument, "label '" + n + "' listed twice");
    out.push_back(p);
  }
  return out;
}

inline std::vector<std::size_t> complement(const SystemShape& shape, const std::vector<std::size_t>& positions) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (std::find(positions.begin(), positions.end(), i) == positions.end()) out.push_back(i);
  return out;
}

inline void require_square(const ComplexMatrix& m, std::size_t dim, const char* what) {
  if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim)
    fail(ErrorKind::dimension_mismatch, std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x" +
                                            std::to_string(m.cols()) + ", shape expects " + std::to_string(dim));
}

}  // namespace detail

inline ComplexMatrix hermitian_part(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

inline bool is_hermitian(const ComplexMatrix& m, double tol = kHermitianTolerance) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

inline Complex trace(const ComplexMatrix& m) { return m.trace(); }

/// Spectrum of (m + m†)/2. Each eigenvector's first non-negligible component
/// is made real positive so results are reproducible.
inline Spectrum hermitian_spectrum(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) fail(ErrorKind::dimension_mismatch, "spectrum of a non-square matrix");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hermitian_part(m));
  const auto n = m.rows();
  Spectrum s{RealVector(n), ComplexMatrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    s.eigenvalues(k) = solver.eigenvalues()(n - 1 - k);
    ComplexVector v = solver.eigenvectors().col(n - 1 - k);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(v(i)) > 1e-10) {
        v *= std::conj(v(i)) / std::abs(v(i));
        break;
      }
    }
    s.eigenvectors.col(k) = v;
  }
  return s;
}

inline RealVector hermitian_eigenvalues(const ComplexMatrix& m) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hermitian_part(m), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().reverse();
}

/// Kronecker product: (a⊗b)[(i,k),(j,l)] = a[i,j]·b[k,l].
inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline ComplexVector tensor(const ComplexVector& a, const ComplexVector& b) {
  ComplexVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline ComplexMatrix tensor_power(const ComplexMatrix& m, std::size_t n) {
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (std::size_t k = 0; k < n; ++k) out = tensor(out, m);
  return out;
}

inline ComplexMatrix identity(std::size_t d) { return ComplexMatrix::Identity(d, d); }

inline ComplexMatrix maximally_mixed(std::size_t d) { return identity(d) / static_cast<double>(d); }

inline ComplexMatrix diagonal(const std::vector<double>& entries) {
  ComplexMatrix m = ComplexMatrix::Zero(entries.size(), entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
  return m;
}

/// Partial trace over `traced`; the result lives on shape.without(traced).
inline ComplexMatrix partial_trace(const ComplexMatrix& m, const SystemShape& shape,
                                   const std::vector<std::string>& traced) {
  detail::require_square(m, shape.dim(), "partial_trace");
  const auto tpos = detail::positions_of(shape, traced);
  const auto kpos = detail::complement(shape, tpos);
  const auto ko = detail::offsets(shape, kpos);
  const auto to = detail::offsets(shape, tpos);
  ComplexMatrix out = ComplexMatrix::Zero(ko.size(), ko.size());
  for (std::size_t j = 0; j < ko.size(); ++j)
    for (std::size_t i = 0; i < ko.size(); ++i) {
      Complex acc = 0;
      for (std::size_t t : to) acc += m(ko[i] + t, ko[j] + t);
      out(i, j) = acc;
    }
  return out;
}

/// Reduced operator on `kept` (in the order given).
inline ComplexMatrix marginal(const ComplexMatrix& m, const SystemShape& shape, const std::vector<std::string>& kept) {
  auto traced = shape.without(kept).labels();
  auto reduced_shape = shape.without(traced);
  ComplexMatrix r = partial_trace(m, shape, traced);
  if (reduced_shape.labels() == kept) return r;
  // reorder to the requested order
  const auto pos = detail::positions_of(reduced_shape, kept);
  const auto perm = detail::offsets(reduced_shape, pos);
  ComplexMatrix out(r.rows(), r.cols());
  for (std::size_t j = 0; j < perm.size(); ++j)
    for (std::size_t i = 0; i < perm.size(); ++i) out(i, j) = r(perm[i], perm[j]);
  return out;
}

/// Reorders the tensor factors of `m` to `order` (a permutation of the labels).
inline ComplexMatrix permute_systems(const ComplexMatrix& m, const SystemShape& shape,
                                     const std::vector<std::string>& order) {
  detail::require_square(m, shape.dim(), "permute_systems");
  if (order.size() != shape.size())
    fail(ErrorKind::invalid_argument, "permutation must list every label of " + shape.to_string());
  const auto perm = detail::offsets(shape, detail::positions_of(shape, order));
  ComplexMatrix out(m.rows(), m.cols());
  for (std::size_t j = 0; j < perm.size(); ++j)
    for (std::size_t i = 0; i < perm.size(); ++i) out(i, j) = m(perm[i], perm[j]);
  return out;
}

inline ComplexVector permute_systems(const ComplexVector& v, const SystemShape& shape,
                                     const std::vector<std::string>& order) {
  if (static_cast<std::size_t>(v.size()) != shape.dim())
    fail(ErrorKind::dimension_mismatch, "permute_systems: vector length does not match shape");
  const auto perm = detail::offsets(shape, detail::positions_of(shape, order));
  ComplexVector out(v.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out(i) = v(perm[i]);
  return out;
}

/// I ⊗ op with op acting on `labels` (in the given order) of `shape`.
inline ComplexMatrix embed(const ComplexMatrix& op, const SystemShape& shape, const std::vector<std::string>& labels) {
  const auto pos = detail::positions_of(shape, labels);
  const auto so = detail::offsets(shape, pos);
  const auto ro = detail::offsets(shape, detail::complement(shape, pos));
  detail::require_square(op, so.size(), "embed");
  ComplexMatrix out = ComplexMatrix::Zero(shape.dim(), shape.dim());
  for (std::size_t r : ro)
    for (std::size_t b = 0; b < so.size(); ++b)
      for (std::size_t a = 0; a < so.size(); ++a) out(r + so[a], r + so[b]) = op(a, b);
  return out;
}

inline RealVector singular_values(const ComplexMatrix& m) {
  if (m.size() == 0) return RealVector();
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues();
}

/// Schatten p-norm; p = +infinity gives the operator norm.
inline double schatten_norm(const ComplexMatrix& m, double p) {
  if (!(p >= 1.0)) fail(ErrorKind::invalid_argument, "Schatten norm needs p >= 1, got " + std::to_string(p));
  if (p == 2.0) return m.norm();
  const RealVector s = (m.rows() == m.cols() && is_hermitian(m)) ? RealVector(hermitian_eigenvalues(m).cwiseAbs())
                                                                 : singular_values(m);
  if (std::isinf(p)) return s.size() ? s.maxCoeff() : 0.0;
  if (p == 1.0) return s.sum();
  double acc = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) acc += std::pow(s(i), p);
  return std::pow(acc, 1.0 / p);
}

inline double trace_norm(const ComplexMatrix& m) { return schatten_norm(m, 1.0); }
inline double hs_norm(const ComplexMatrix& m) { return m.norm(); }
inline double operator_norm(const ComplexMatrix& m) { return schatten_norm(m, std::numeric_limits<double>::infinity()); }

/// Applies f to the eigenvalues above cutoff·λ_max and zeroes the rest.
/// Throws if m has an eigenvalue below −1e−9·λ_max.
template <typename F>
ComplexMatrix psd_function(const ComplexMatrix& m, F&& f, double cutoff = kDefaultPinvCutoff) {
  const auto s = hermitian_spectrum(m);
  const double lmax = s.eigenvalues.size() ? std::max(s.eigenvalues(0), 0.0) : 0.0;
  const double lmin = s.eigenvalues.size() ? s.eigenvalues(s.eigenvalues.size() - 1) : 0.0;
  if (lmin < -1e-9 * std::max(lmax, 1e-300) && lmin < -1e-14)
    fail(ErrorKind::not_positive_semidefinite, "eigenvalue " + std::to_string(lmin) + " below tolerance");
  ComplexMatrix out = ComplexMatrix::Zero(m.rows(), m.cols());
  if (lmax <= 0) return out;
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
    const double l = s.eigenvalues(k);
    if (l > cutoff * lmax) out += f(l) * s.eigenvectors.col(k) * s.eigenvectors.col(k).adjoint();
  }
  return out;
}

/// Moore–Penrose style power of a PSD matrix: eigenvalues on the support are
/// raised to `exponent`, the kernel is mapped to zero.
inline ComplexMatrix pseudo_inverse_power(const ComplexMatrix& m, double exponent,
                                          double cutoff = kDefaultPinvCutoff) {
  return psd_function(m, [exponent](double l) { return std::pow(l, exponent); }, cutoff);
}

/// Orthogonal projector onto the support of a PSD matrix.
inline ComplexMatrix support_projector(const ComplexMatrix& m, double cutoff = kDefaultPinvCutoff) {
  return psd_function(m, [](double) { return 1.0; }, cutoff);
}

inline ComplexMatrix psd_sqrt(const ComplexMatrix& m) { return pseudo_inverse_power(m, 0.5, 0.0); }

/// vec(|a⟩⟨z|) = |a⟩⊗|z⟩, row-major.
inline ComplexVector vec(const ComplexMatrix& m) {
  ComplexVector v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

/// Inverse of vec for a vector on A⊗Z: X[a,z] = v[(a,z)].
inline ComplexMatrix vec_inverse(const ComplexVector& v, std::size_t dim_a, std::size_t dim_z) {
  if (static_cast<std::size_t>(v.size()) != dim_a * dim_z)
    fail(ErrorKind::dimension_mismatch, "vec_inverse: vector length " + std::to_string(v.size()) + " != " +
                                            std::to_string(dim_a) + "*" + std::to_string(dim_z));
  ComplexMatrix x(dim_a, dim_z);
  for (std::size_t a = 0; a < dim_a; ++a)
    for (std::size_t z = 0; z < dim_z; ++z) x(a, z) = v(a * dim_z + z);
  return x;
}

inline ComplexMatrix vec_inverse(const ComplexVector& v, const SystemShape& shape) {
  if (shape.size() != 2) fail(ErrorKind::invalid_argument, "vec_inverse needs a two-label shape");
  return vec_inverse(v, shape[0].dim, shape[1].dim);
}

/// Swap F on C^d ⊗ C^d: F(|i⟩⊗|j⟩) = |j⟩⊗|i⟩.
inline ComplexMatrix swap_operator(std::size_t d) {
  if (d == 0) fail(ErrorKind::invalid_argument, "swap_operator needs d >= 1");
  ComplexMatrix f = ComplexMatrix::Zero(d * d, d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) f(j * d + i, i * d + j) = 1.0;
  return f;
}

struct PolarDecomposition {
  ComplexMatrix unitary;
  ComplexMatrix psd;
};

/// Left polar decomposition m = U·Q, Q = (m†m)^{1/2}; U is completed to a
/// unitary on the null space through the full SVD.
inline PolarDecomposition polar_decompose(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) fail(ErrorKind::dimension_mismatch, "polar decomposition of a non-square matrix");
  Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const ComplexMatrix& w = svd.matrixU();
  const ComplexMatrix& v = svd.matrixV();
  PolarDecomposition out;
  out.unitary = w * v.adjoint();
  out.psd = v * svd.singularValues().cast<Complex>().asDiagonal() * v.adjoint();
  return out;
}

/// Completes the orthonormal columns of `partial` (n×k) to an n×n unitary
/// whose columns listed in `slots` are the given ones, in order.
inline ComplexMatrix complete_to_unitary(const ComplexMatrix& partial, const std::vector<std::size_t>& slots) {
  const auto n = partial.rows();
  if (static_cast<std::size_t>(partial.cols()) != slots.size())
    fail(ErrorKind::dimension_mismatch, "complete_to_unitary: slot count mismatch");
  ComplexMatrix basis(n, 0);
  auto add_if_independent = [&](ComplexVector v) {
    for (Eigen::Index k = 0; k < basis.cols(); ++k) v -= basis.col(k).dot(v) * basis.col(k);
    for (Eigen::Index k = 0; k < basis.cols(); ++k) v -= basis.col(k).dot(v) * basis.col(k);
    const double nv = v.norm();
    if (nv < 1e-8) return false;
    basis.conservativeResize(n, basis.cols() + 1);
    basis.col(basis.cols() - 1) = v / nv;
    return true;
  };
  for (Eigen::Index k = 0; k < partial.cols(); ++k) basis.conservativeResize(n, k + 1), basis.col(k) = partial.col(k);
  for (Eigen::Index e = 0; e < n && basis.cols() < n; ++e) add_if_independent(ComplexVector::Unit(n, e));
  ComplexMatrix u(n, n);
  std::vector<bool> used(n, false);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    u.col(slots[k]) = basis.col(k);
    used[slots[k]] = true;
  }
  Eigen::Index next = partial.cols();
  for (Eigen::Index c = 0; c < n; ++c)
    if (!used[c]) u.col(c) = basis.col(next++);
  return u;
}

inline bool is_unitary(const ComplexMatrix& u, double tol = 1e-9) {
  if (u.rows() != u.cols()) return false;
  return (u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= tol;
}

/// Hilbert–Schmidt inner product Tr[a† b].
inline Complex hs_inner(const ComplexMatrix& a, const ComplexMatrix& b) { return (a.adjoint() * b).trace(); }

// JSON: {rows, cols, re: [...], im: [...]} with entries in row-major order.

inline nlohmann::json matrix_to_json(const ComplexMatrix& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> re, im;
  re.reserve(m.size());
  im.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      re.push_back(m(r, c).real());
      im.push_back(m(r, c).imag());
    }
  j["re"] = re;
  j["im"] = im;
  return j;
}

inline ComplexMatrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  if (rows == 0 || cols == 0) fail(ErrorKind::invalid_argument, "matrix JSON needs positive rows and cols");
  if (re.size() != rows * cols || im.size() != rows * cols)
    fail(ErrorKind::dimension_mismatch, "matrix JSON entry count does not equal rows*cols");
  ComplexMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = Complex(re[r * cols + c], im[r * cols + c]);
  return m;
}

}  // namespace decouple
