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

/// \file entropy.hpp
/// \brief Shannon, Rényi-2, smooth max/min and modified one-shot entropies.
///
/// All logarithms are base 2. Smooth quantities are evaluated at explicit
/// feasible points, so each returned value is a certified one-sided bound on
/// the underlying optimum; `certified_side` records which side.

#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "decouple/linalg.hpp"
#include "decouple/quantum.hpp"

namespace decouple {

struct SmoothingConfig {
  double epsilon = 0.0;
  double delta = 0.0;
  int minimizer_iterations = 200;
  double minimizer_tolerance = 1e-8;

  void validate() const {
    if (!(epsilon >= 0 && epsilon < 1)) fail(ErrorKind::invalid_argument, "epsilon must lie in [0,1)");
    if (!(delta >= 0 && delta < 1)) fail(ErrorKind::invalid_argument, "delta must lie in [0,1)");
    if (minimizer_iterations <= 0) fail(ErrorKind::invalid_argument, "minimizer_iterations must be positive");
    if (!(minimizer_tolerance > 0)) fail(ErrorKind::invalid_argument, "minimizer_tolerance must be positive");
  }
};

enum class CertifiedSide { exact, lower, upper };

inline const char* to_string(CertifiedSide s) {
  switch (s) {
    case CertifiedSide::exact: return "exact";
    case CertifiedSide::lower: return "lower";
    case CertifiedSide::upper: return "upper";
  }
  return "?";
}

struct EntropyReport {
  std::string name;
  double value_bits = 0;
  std::string mode;
  CertifiedSide certified_side = CertifiedSide::exact;

  nlohmann::json to_json() const {
    return {{"name", name}, {"value_bits", value_bits}, {"mode", mode}, {"certified_side", to_string(certified_side)}};
  }
};

inline double xlog2x(double p) { return p > 0 ? p * std::log2(p) : 0.0; }

/// −Σ p log p over the entries (negative entries within rounding are ignored).
inline double shannon_entropy(const std::vector<double>& p) {
  double h = 0;
  for (double x : p) h -= xlog2x(x);
  return h;
}

inline double shannon_entropy(const RealVector& p) {
  double h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) h -= xlog2x(p(i));
  return h;
}

/// von Neumann entropy −Tr[ρ log ρ].
inline double shannon(const ComplexMatrix& rho) { return shannon_entropy(hermitian_eigenvalues(rho)); }

inline double shannon(const DensitySystem& rho) { return shannon(rho.matrix); }

/// H(rest | conditioned_on) = H(all) − H(conditioned_on).
inline double shannon(const DensitySystem& rho, const std::vector<std::string>& conditioned_on) {
  if (conditioned_on.empty()) return shannon(rho.matrix);
  return shannon(rho.matrix) - shannon(rho.marginal(conditioned_on).matrix);
}

/// (I ⊗ w)^{-1/4} m (I ⊗ w)^{-1/4} with w acting on `labels`.
inline ComplexMatrix tilde_conjugate(const ComplexMatrix& m, const SystemShape& shape, const ComplexMatrix& weight,
                                     const std::vector<std::string>& labels, double cutoff = kDefaultPinvCutoff) {
  detail::require_square(m, shape.dim(), "tilde_conjugate");
  const ComplexMatrix w = embed(pseudo_inverse_power(weight, -0.25, cutoff), shape, labels);
  return w * m * w;
}

inline DensitySystem tilde_conjugate(const DensitySystem& m, const ComplexMatrix& weight, const std::string& which) {
  return {tilde_conjugate(m.matrix, m.shape, weight, {which}), m.shape};
}

/// −2 log ‖(I ⊗ w)^{-1/4} σ (I ⊗ w)^{-1/4}‖₂.
inline double h2_objective(const ComplexMatrix& sigma, const SystemShape& shape, const ComplexMatrix& weight,
                           const std::vector<std::string>& weight_labels) {
  const double n = hs_norm(tilde_conjugate(sigma, shape, weight, weight_labels));
  if (!(n > 0)) fail(ErrorKind::infeasible, "weighted operator vanishes");
  return -2.0 * std::log2(n);
}

// Spectral smoothing helpers. Spectra are ascending copies so "smallest"
// means lowest index; ties keep eigensolver order.

namespace detail {

inline ComplexMatrix rebuild(const Spectrum& s, const RealVector& values) {
  return s.eigenvectors * values.cast<Complex>().asDiagonal() * s.eigenvectors.adjoint();
}

/// Number of smallest eigenvalues (descending storage: taken from the back)
/// whose running sum stays within budget.
inline std::size_t truncation_count(const RealVector& desc, double budget) {
  double acc = 0;
  std::size_t k = 0;
  for (Eigen::Index i = desc.size(); i-- > 0;) {
    const double l = std::max(desc(i), 0.0);
    if (acc + l > budget + 1e-12) break;
    acc += l;
    ++k;
  }
  return k;
}

/// Removes total mass ε from the bottom of the spectrum: zero the smallest
/// eigenvalues, then lower the next one.
inline RealVector remove_bottom_mass(RealVector desc, double eps) {
  double left = eps;
  for (Eigen::Index i = desc.size(); i-- > 0 && left > 0;) {
    const double l = std::max(desc(i), 0.0);
    const double take = std::min(l, left);
    desc(i) = l - take;
    left -= take;
  }
  return desc;
}

/// Clips the top of the spectrum to a level L with Σ (λ − L)₊ = ε.
inline RealVector clip_top_mass(RealVector desc, double eps) {
  const auto n = desc.size();
  for (Eigen::Index i = 0; i < n; ++i) desc(i) = std::max(desc(i), 0.0);
  double level = 0;
  double prefix = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    prefix += desc(k);
    const double next = (k + 1 < n) ? desc(k + 1) : 0.0;
    // with the top k+1 clipped to L: prefix − (k+1)L = ε
    const double l = (prefix - eps) / static_cast<double>(k + 1);
    if (l >= next) {
      level = std::max(l, 0.0);
      break;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) desc(i) = std::min(desc(i), level);
  return desc;
}

inline void require_psd(const RealVector& desc, const char* what) {
  const double lmax = desc.size() ? std::max(desc(0), 0.0) : 0.0;
  if (desc.size() && desc(desc.size() - 1) < -1e-9 * std::max(1.0, lmax))
    fail(ErrorKind::not_positive_semidefinite, std::string(what) + ": input is not PSD");
}

}  // namespace detail

/// Smooth max-entropy 2 log Tr√σ at σ = ρ with ε mass removed from the
/// bottom of its spectrum. Upper bound on the minimum over the trace ball.
inline EntropyReport hmax_smooth(const ComplexMatrix& rho, double eps) {
  if (!(eps >= 0 && eps < 1)) fail(ErrorKind::invalid_argument, "epsilon must lie in [0,1)");
  const auto ev = hermitian_eigenvalues(rho);
  detail::require_psd(ev, "hmax_smooth");
  const RealVector s = detail::remove_bottom_mass(ev, eps);
  double tr = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) tr += std::sqrt(std::max(s(i), 0.0));
  return {"hmax_smooth", 2.0 * std::log2(tr), "bottom_mass_removal",
          eps == 0 ? CertifiedSide::exact : CertifiedSide::upper};
}

/// Smooth min-entropy, −log of the smallest operator norm reachable in the
/// trace ball; attained by clipping the top of the spectrum.
inline EntropyReport hmin_smooth(const ComplexMatrix& rho, double eps) {
  if (!(eps >= 0 && eps < 1)) fail(ErrorKind::invalid_argument, "epsilon must lie in [0,1)");
  const auto ev = hermitian_eigenvalues(rho);
  detail::require_psd(ev, "hmin_smooth");
  const RealVector s = detail::clip_top_mass(ev, eps);
  if (!(s(0) > 0)) fail(ErrorKind::infeasible, "smoothing removes the whole spectrum");
  return {"hmin_smooth", -std::log2(s(0)), "top_clipping", CertifiedSide::exact};
}

struct HmaxPrimeResult {
  double value = 0;
  ComplexMatrix truncated;  // ω''
  std::size_t zeroed = 0;
  double zeroed_mass = 0;
};

/// Modified max-entropy log ‖(ω'')^{-1}‖_∞, ω'' being ω with its smallest
/// eigenvalues of total mass ≤ ε zeroed.
inline HmaxPrimeResult hmax_prime(const ComplexMatrix& omega, double eps) {
  if (!(eps >= 0)) fail(ErrorKind::invalid_argument, "epsilon must be non-negative");
  const auto s = hermitian_spectrum(omega);
  detail::require_psd(s.eigenvalues, "hmax_prime");
  const double lmax = std::max(s.eigenvalues(0), 0.0);
  RealVector kept = s.eigenvalues;
  for (Eigen::Index i = 0; i < kept.size(); ++i)
    if (kept(i) <= kDefaultPinvCutoff * lmax) kept(i) = 0;
  HmaxPrimeResult r;
  r.zeroed = detail::truncation_count(kept, eps);
  for (std::size_t k = 0; k < r.zeroed; ++k) {
    const auto i = kept.size() - 1 - k;
    r.zeroed_mass += kept(i);
    kept(i) = 0;
  }
  if (r.zeroed >= static_cast<std::size_t>(kept.size()) || !(kept(0) > 0))
    fail(ErrorKind::infeasible, "hmax_prime: every eigenvalue was zeroed (epsilon too large)");
  double smallest = kept(0);
  for (Eigen::Index i = 0; i < kept.size(); ++i)
    if (kept(i) > 0) smallest = std::min(smallest, kept(i));
  r.value = -std::log2(smallest);
  r.truncated = detail::rebuild(s, kept);
  return r;
}

inline HmaxPrimeResult hmax_prime(const DensitySystem& omega, double eps) { return hmax_prime(omega.matrix, eps); }

/// ω with eigenvalues below 2^{−(1+δ)(H'max)^ε} zeroed.
inline ComplexMatrix omega_triple_prime(const ComplexMatrix& omega, double eps, double delta) {
  const auto hp = hmax_prime(omega, eps);
  const double threshold = std::exp2(-(1.0 + delta) * hp.value);
  const auto s = hermitian_spectrum(omega);
  RealVector kept = s.eigenvalues;
  for (Eigen::Index i = 0; i < kept.size(); ++i)
    if (kept(i) < threshold * (1 - 1e-10)) kept(i) = 0;
  return detail::rebuild(s, kept);
}

struct H2PrimeResult {
  double value = 0;  // lower bound on the modified Rényi-2 entropy
  DensitySystem eta;
  ComplexMatrix omega_triple_prime;  // on the conditioning system
  double dropped_mass = 0;
  double min_support_overlap = 1;  // min over unit vectors in supp(η)
};

/// Canonical feasible point of the modified conditional Rényi-2 entropy of
/// ω on A'⊗B conditioned on `b_label`.
inline H2PrimeResult h2_prime(const DensitySystem& omega, const std::string& b_label, double eps, double delta) {
  if (!(eps >= 0 && eps < 1) || !(delta >= 0 && delta < 1))
    fail(ErrorKind::invalid_argument, "h2_prime needs epsilon, delta in [0,1)");
  const auto& shape = omega.shape;
  H2PrimeResult r;
  const ComplexMatrix omega_b = omega.marginal({b_label}).matrix;
  r.omega_triple_prime = omega_triple_prime(omega_b, eps, delta);
  const ComplexMatrix proj = embed(support_projector(r.omega_triple_prime), shape, {b_label});

  const auto s = hermitian_spectrum(omega.matrix);
  detail::require_psd(s.eigenvalues, "h2_prime");
  const double lmax = std::max(s.eigenvalues(0), 0.0);
  const auto n = s.eigenvalues.size();
  std::vector<bool> kept(n, false);
  std::vector<double> overlap(n, 0.0);
  double dropped = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (s.eigenvalues(k) <= kDefaultPinvCutoff * lmax) continue;
    overlap[k] = (proj * s.eigenvectors.col(k)).squaredNorm();
    if (overlap[k] >= 1 - eps - 1e-12) {
      kept[k] = true;
    } else {
      dropped += s.eigenvalues(k);
    }
  }
  if (dropped > eps + 1e-12)
    fail(ErrorKind::infeasible, "h2_prime: eigenvectors outside the weight support carry mass above epsilon");
  for (Eigen::Index k = n; k-- > 0;) {
    if (!kept[k]) continue;
    if (dropped + s.eigenvalues(k) > eps + 1e-12) break;
    dropped += s.eigenvalues(k);
    kept[k] = false;
  }
  auto min_overlap = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index k = 0; k < n; ++k)
      if (kept[k]) idx.push_back(k);
    if (idx.empty()) return 1.0;
    ComplexMatrix basis(s.eigenvectors.rows(), idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) basis.col(j) = s.eigenvectors.col(idx[j]);
    const ComplexMatrix compressed = basis.adjoint() * proj * basis;
    const auto ev = hermitian_eigenvalues(compressed);
    return ev(ev.size() - 1);
  };
  double mo = min_overlap();
  while (mo < 1 - eps - 1e-12) {
    Eigen::Index worst = -1;
    for (Eigen::Index k = 0; k < n; ++k)
      if (kept[k] && (worst < 0 || overlap[k] < overlap[worst])) worst = k;
    if (worst < 0 || dropped + s.eigenvalues(worst) > eps + 1e-12)
      fail(ErrorKind::infeasible, "h2_prime: support condition cannot be met within the epsilon budget");
    dropped += s.eigenvalues(worst);
    kept[worst] = false;
    mo = min_overlap();
  }
  RealVector vals = RealVector::Zero(n);
  bool any = false;
  for (Eigen::Index k = 0; k < n; ++k)
    if (kept[k]) vals(k) = s.eigenvalues(k), any = true;
  if (!any) fail(ErrorKind::infeasible, "h2_prime: no feasible eta remains");
  r.eta = DensitySystem(detail::rebuild(s, vals), shape);
  r.dropped_mass = dropped;
  r.min_support_overlap = mo;
  r.value = h2_objective(r.eta.matrix, shape, r.omega_triple_prime, {b_label});
  return r;
}

enum class WeightMode { fixed_marginal, minimized };

struct H2Result {
  double value = 0;           // certified lower bound
  ComplexMatrix weight;       // ω^R on the conditioning labels
  DensitySystem sigma;        // smoothed operator
  bool weight_rank_deficient = false;
  EntropyReport report;
};

namespace detail {

/// Maps r² reals to a Hermitian H and returns exp(H)/Tr exp(H).
inline ComplexMatrix gibbs_from_params(const double* x, std::size_t r) {
  ComplexMatrix h = ComplexMatrix::Zero(r, r);
  std::size_t p = 0;
  for (std::size_t i = 0; i < r; ++i) h(i, i) = x[p++];
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j) {
      h(i, j) = Complex(x[p], x[p + 1]);
      h(j, i) = std::conj(h(i, j));
      p += 2;
    }
  const auto s = hermitian_spectrum(h);
  const double top = s.eigenvalues(0);
  RealVector e(r);
  for (std::size_t i = 0; i < r; ++i) e(i) = std::exp(s.eigenvalues(i) - top);
  e /= e.sum();
  return rebuild(s, e);
}

inline std::vector<double> params_from_state(const ComplexMatrix& w) {
  const auto r = static_cast<std::size_t>(w.rows());
  const auto s = hermitian_spectrum(w);
  const double lmax = std::max(s.eigenvalues(0), 1e-300);
  RealVector logs(r);
  for (std::size_t i = 0; i < r; ++i) logs(i) = std::log(std::max(s.eigenvalues(i), 1e-8 * lmax));
  const ComplexMatrix h = rebuild(s, logs);
  std::vector<double> x;
  for (std::size_t i = 0; i < r; ++i) x.push_back(h(i, i).real());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j) {
      x.push_back(h(i, j).real());
      x.push_back(h(i, j).imag());
    }
  return x;
}

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0;
};

inline NelderMeadResult nelder_mead(const std::function<double(const double*)>& f, std::vector<double> x0,
                                    double step, int iterations, double tolerance) {
  const std::size_t n = x0.size();
  NelderMeadResult out{x0, f(x0.data())};
  if (n == 0) return out;
  struct Ctx {
    const std::function<double(const double*)>* f;
  } ctx{&f};
  gsl_multimin_function fn;
  fn.n = n;
  fn.params = &ctx;
  fn.f = [](const gsl_vector* v, void* p) {
    const auto* c = static_cast<Ctx*>(p);
    std::vector<double> x(v->size);
    for (std::size_t i = 0; i < v->size; ++i) x[i] = gsl_vector_get(v, i);
    const double y = (*c->f)(x.data());
    return std::isfinite(y) ? y : GSL_POSINF;
  };
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, x0[i]);
  gsl_vector_set_all(ss, step);
  gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(m, &fn, x, ss);
  for (int it = 0; it < iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), tolerance) == GSL_SUCCESS) break;
  }
  if (m->fval < out.value) {
    out.value = m->fval;
    for (std::size_t i = 0; i < n; ++i) out.x[i] = gsl_vector_get(m->x, i);
  }
  gsl_multimin_fminimizer_free(m);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return out;
}

}  // namespace detail

/// Conditional Rényi-2 entropy of ρ given the labels in `conditioning`.
/// fixed_marginal evaluates σ = ρ with weight ρ^R; minimized also searches
/// the weight and, for ε > 0, spectral smoothings of ρ. Both are lower bounds.
inline H2Result h2_conditional(const DensitySystem& rho, const std::vector<std::string>& conditioning,
                               const SmoothingConfig& cfg, WeightMode mode) {
  cfg.validate();
  const auto& shape = rho.shape;
  H2Result out;
  out.weight = rho.marginal(conditioning).matrix;
  const auto marg_ev = hermitian_eigenvalues(out.weight);
  out.weight_rank_deficient = marg_ev(marg_ev.size() - 1) <= kDefaultPinvCutoff * std::max(marg_ev(0), 1e-300);
  out.sigma = rho;
  out.value = h2_objective(rho.matrix, shape, out.weight, conditioning);
  out.report = {"h2_conditional", out.value, "fixed_marginal", CertifiedSide::lower};
  if (mode == WeightMode::fixed_marginal) return out;

  std::vector<ComplexMatrix> candidates{rho.matrix};
  if (cfg.epsilon > 0) {
    const auto s = hermitian_spectrum(rho.matrix);
    RealVector trunc = s.eigenvalues;
    const auto k = detail::truncation_count(trunc, cfg.epsilon);
    for (std::size_t i = 0; i < k; ++i) trunc(trunc.size() - 1 - i) = 0;
    candidates.push_back(detail::rebuild(s, trunc));
    candidates.push_back(detail::rebuild(s, detail::clip_top_mass(s.eigenvalues, cfg.epsilon)));
    candidates.push_back(rho.matrix * (1.0 - cfg.epsilon));
  }
  const std::size_t r = out.weight.rows();
  for (const auto& sigma : candidates) {
    if (!(hs_norm(sigma) > 0)) continue;
    auto objective = [&](const double* x) {
      return -h2_objective(sigma, shape, detail::gibbs_from_params(x, r), conditioning);
    };
    const auto start = detail::params_from_state(out.weight);
    const auto nm = detail::nelder_mead(objective, start, 0.5, cfg.minimizer_iterations, cfg.minimizer_tolerance);
    // re-evaluate at the returned weight so the value is exactly a feasible point
    const ComplexMatrix w = detail::gibbs_from_params(nm.x.data(), r);
    const double value = h2_objective(sigma, shape, w, conditioning);
    if (value > out.value) {
      out.value = value;
      out.weight = w;
      out.sigma = DensitySystem(sigma, shape);
      out.weight_rank_deficient = false;
    }
  }
  out.report = {"h2_conditional", out.value, "minimized", CertifiedSide::lower};
  return out;
}

struct H2UpperBoundReport {
  double lhs = 0;  // computed lower bound on the smooth Rényi-2 entropy
  double rhs = 0;
  bool holds = false;
};

/// Compares the Rényi-2 value against H(A|B) + 8ε log|A| + 2 + 2 log ε⁻¹.
inline H2UpperBoundReport h2_upper_bound_check(const DensitySystem& omega, const std::vector<std::string>& conditioning,
                                               double eps, WeightMode mode = WeightMode::minimized) {
  if (!(eps > 0)) fail(ErrorKind::invalid_argument, "h2_upper_bound_check needs epsilon > 0");
  SmoothingConfig cfg;
  cfg.epsilon = eps;
  H2UpperBoundReport r;
  r.lhs = h2_conditional(omega, conditioning, cfg, mode).value;
  const double dim_a = static_cast<double>(omega.dim() / omega.shape.dim_of(conditioning));
  r.rhs = shannon(omega, conditioning) + 8 * eps * std::log2(dim_a) + 2 + 2 * std::log2(1 / eps);
  r.holds = r.lhs <= r.rhs + 1e-9;
  return r;
}

}  // namespace decouple
