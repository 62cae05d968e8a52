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

/// \file experiment.hpp
/// \brief JSON-configured experiment runner. Each run writes results.csv,
/// summary.json and manifest.json into its own output directory.
///
/// Seed streams: the instance (state, channel) is drawn from
/// make_rng(seed, 0); the ensemble seed is stream_seed(seed, 1) and draw i
/// uses stream i of it; auxiliary randomness uses make_rng(seed, 2).

#pragma once

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "decouple/decoupling.hpp"
#include "decouple/ensembles.hpp"
#include "decouple/entropy.hpp"
#include "decouple/stats.hpp"
#include "decouple/typicality.hpp"

#ifndef DECOUPLE_VERSION
#define DECOUPLE_VERSION "0.0.0"
#endif

namespace decouple {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitComputation = 3;

using nlohmann::json;

namespace detail {

struct ExperimentSchema {
  std::vector<std::string> required_dims, optional_dims;
  std::vector<std::string> required, optional;
};

inline const std::map<std::string, ExperimentSchema>& schemas() {
  static const std::map<std::string, ExperimentSchema> s = {
      {"decouple-expect", {{"A", "R", "B"}, {"E"}, {"samples"}, {"ensemble"}}},
      {"decouple-tail", {{"A", "R", "B"}, {"E"}, {"samples", "kappa"}, {"ensemble", "epsilon", "delta"}}},
      {"fqsw", {{"A1", "A2", "R"}, {}, {"samples"}, {"ensemble", "kappa", "epsilon", "delta"}}},
      {"thermalize", {{"Omega", "S", "E", "R"}, {}, {"samples", "kappa"}, {"ensemble", "epsilon"}}},
      {"design-verify", {{}, {}, {"ensemble", "t"}, {"samples"}}},
      {"entropy", {{"A", "B"}, {}, {}, {"epsilon", "delta"}}},
      {"typicality", {{}, {}, {"distribution", "n", "delta"}, {"epsilon"}}},
      {"lipschitz", {{"A", "R", "B"}, {"E"}, {"samples"}, {"ensemble", "epsilon", "delta", "step"}}},
      {"moments", {{"A", "R", "B"}, {"E"}, {"samples"}, {"ensemble", "kappa"}}},
  };
  return s;
}

inline bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

inline bool is_positive_int(const json& j) {
  return (j.is_number_unsigned() && j.get<std::uint64_t>() > 0) || (j.is_number_integer() && j.get<std::int64_t>() > 0);
}

}  // namespace detail

/// Schema diagnostics for a parsed config; empty when valid.
inline std::vector<std::string> validate_config(const json& j) {
  std::vector<std::string> d;
  auto field = [&](const std::string& name, const std::string& msg) { d.push_back("field '" + name + "': " + msg); };
  if (!j.is_object()) return {"config must be a JSON object"};
  if (!j.contains("experiment") || !j["experiment"].is_string()) {
    field("experiment", "required string");
    return d;
  }
  const std::string exp = j["experiment"];
  const auto& all = detail::schemas();
  const auto it = all.find(exp);
  if (it == all.end()) {
    std::string names;
    for (const auto& [k, v] : all) names += (names.empty() ? "" : ", ") + k;
    field("experiment", "unknown experiment '" + exp + "' (expected one of " + names + ")");
    return d;
  }
  const auto& s = it->second;
  const bool wants_dims = !s.required_dims.empty();

  for (const auto& [k, v] : j.items()) {
    const bool known = k == "experiment" || k == "seed" || k == "output_dir" || (k == "dims" && wants_dims) ||
                       detail::contains(s.required, k) || detail::contains(s.optional, k);
    if (!known) field(k, "not accepted by experiment '" + exp + "'");
  }
  if (!j.contains("seed")) field("seed", "required");
  else if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0))
    field("seed", "must be a non-negative 64-bit integer");
  if (!j.contains("output_dir")) field("output_dir", "required");
  else if (!j["output_dir"].is_string() || j["output_dir"].get<std::string>().empty())
    field("output_dir", "must be a non-empty path string");
  for (const auto& k : s.required)
    if (!j.contains(k)) field(k, "required for experiment '" + exp + "'");

  if (wants_dims) {
    if (!j.contains("dims")) field("dims", "required for experiment '" + exp + "'");
    else if (!j["dims"].is_object()) field("dims", "must be an object of label: dimension");
    else {
      for (const auto& l : s.required_dims)
        if (!j["dims"].contains(l)) field("dims." + l, "required");
      for (const auto& [k, v] : j["dims"].items()) {
        if (!detail::contains(s.required_dims, k) && !detail::contains(s.optional_dims, k))
          field("dims." + k, "unknown label for experiment '" + exp + "'");
        else if (!detail::is_positive_int(v)) field("dims." + k, "must be a positive integer");
      }
    }
  }
  for (const char* k : {"samples", "t", "n", "step"}) {
    if (!j.contains(k)) continue;
    if (std::string(k) == "step") {
      if (!j[k].is_number() || !(j[k].get<double>() > 0)) field(k, "must be a positive number");
    } else if (!detail::is_positive_int(j[k])) {
      field(k, "must be a positive integer");
    }
  }
  if (j.contains("kappa") && (!j["kappa"].is_number() || !(j["kappa"].get<double>() > 0)))
    field("kappa", "must be a positive number");
  if (j.contains("epsilon")) {
    const bool ok = j["epsilon"].is_number() && j["epsilon"].get<double>() >= 0 && j["epsilon"].get<double>() < 1;
    if (!ok) field("epsilon", "must lie in [0, 1)");
  }
  if (j.contains("delta")) {
    const bool ok = j["delta"].is_number() && j["delta"].get<double>() >= 0 && j["delta"].get<double>() < 1;
    if (!ok) field("delta", "must lie in [0, 1)");
  }
  if (exp == "typicality") {
    if (j.contains("delta") && j["delta"].is_number() && !(j["delta"].get<double>() > 0))
      field("delta", "must be positive for typicality");
    if (j.contains("epsilon") && j["epsilon"].is_number() && !(j["epsilon"].get<double>() > 0))
      field("epsilon", "must be positive for typicality");
    if (j.contains("distribution")) {
      const auto& p = j["distribution"];
      bool ok = p.is_array() && !p.empty();
      double sum = 0;
      if (ok)
        for (const auto& x : p) {
          if (!x.is_number() || x.get<double>() < 0) ok = false;
          else sum += x.get<double>();
        }
      if (!ok) field("distribution", "must be a non-empty array of non-negative numbers");
      else if (std::abs(sum - 1) > 1e-12) field("distribution", "must sum to 1 (got " + std::to_string(sum) + ")");
    }
  }
  if (j.contains("ensemble")) {
    const auto& e = j["ensemble"];
    if (!e.is_object() || !e.contains("kind") || !e["kind"].is_string()) {
      field("ensemble", "must be an object with a string 'kind'");
    } else {
      const std::string kind = e["kind"];
      static const std::set<std::string> kinds{"haar", "clifford", "pauli", "circuit"};
      if (!kinds.count(kind)) field("ensemble.kind", "unknown ensemble '" + kind + "'");
      for (const auto& [k, v] : e.items()) {
        if (k != "kind" && k != "n_qubits" && k != "depth" && k != "iterations") field("ensemble." + k, "unknown key");
        else if (k != "kind" && !detail::is_positive_int(v) && !(k == "depth" && v.is_number_unsigned()))
          field("ensemble." + k, "must be a positive integer");
      }
      if (kind != "haar" && !e.contains("n_qubits")) field("ensemble.n_qubits", "required for '" + kind + "'");
      if (kind == "circuit" && !e.contains("depth")) field("ensemble.depth", "required for 'circuit'");
      if (kind == "haar" && exp == "design-verify" && !e.contains("n_qubits"))
        field("ensemble.n_qubits", "required for design-verify");
    }
  }
  return d;
}

struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, std::size_t> dims;
  json ensemble;  // descriptor, null for the default Haar ensemble
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::optional<double> epsilon, delta, kappa, step;
  std::optional<std::size_t> t, n;
  std::vector<double> distribution;
  std::string output_dir;
  json raw;

  std::size_t dim(const std::string& l, std::size_t fallback = 0) const {
    const auto it = dims.find(l);
    return it == dims.end() ? fallback : it->second;
  }
};

/// Validates and converts; throws a config Error listing every diagnostic.
inline ExperimentConfig parse_config(const json& j) {
  const auto diags = validate_config(j);
  if (!diags.empty()) {
    std::string msg;
    for (const auto& x : diags) msg += "\n  " + x;
    fail(ErrorKind::config, "invalid config:" + msg);
  }
  ExperimentConfig c;
  c.raw = j;
  c.experiment = j["experiment"];
  c.seed = j["seed"].get<std::uint64_t>();
  c.output_dir = j["output_dir"];
  if (j.contains("dims"))
    for (const auto& [k, v] : j["dims"].items()) c.dims[k] = v.get<std::size_t>();
  if (j.contains("ensemble")) c.ensemble = j["ensemble"];
  if (j.contains("samples")) c.samples = j["samples"].get<std::size_t>();
  if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
  if (j.contains("delta")) c.delta = j["delta"].get<double>();
  if (j.contains("kappa")) c.kappa = j["kappa"].get<double>();
  if (j.contains("step")) c.step = j["step"].get<double>();
  if (j.contains("t")) c.t = j["t"].get<std::size_t>();
  if (j.contains("n")) c.n = j["n"].get<std::size_t>();
  if (j.contains("distribution")) c.distribution = j["distribution"].get<std::vector<double>>();
  return c;
}

/// Reads a JSON file; syntax errors carry path:line:column.
inline json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::config, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line, col = 1;
      else ++col;
    }
    fail(ErrorKind::config, path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) out += hex[md[i] >> 4], out += hex[md[i] & 15];
  return out;
}

inline std::string sha256_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

/// RFC 4180: quote when the field holds a comma, quote, CR or LF.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string results_csv(const std::string& experiment, std::uint64_t seed, const std::vector<double>& values) {
  std::string out = "experiment,seed,sample_index,value\n";
  const std::string prefix = csv_field(experiment) + "," + std::to_string(seed) + ",";
  for (std::size_t i = 0; i < values.size(); ++i) out += prefix + std::to_string(i) + "," + format_double(values[i]) + "\n";
  return out;
}

struct ExperimentOutput {
  std::vector<double> values;
  json summary;
};

namespace detail {

inline json entropy_entry(const std::string& name, double bits, CertifiedSide side) {
  return {{"name", name}, {"value_bits", bits}, {"certified_side", to_string(side)}};
}

inline json weight_entropies(const DecouplingWeights& w) {
  return json::array({entropy_entry("H2(A|R)", w.h2.value, CertifiedSide::lower),
                      entropy_entry("Hmax'(B)", w.hmax.value, CertifiedSide::exact),
                      entropy_entry("H2'(A'|B)", w.h2p.value, CertifiedSide::lower)});
}

inline json claim(const std::string& text, const BoundCheck& b) {
  json j = b.to_json();
  j["claim"] = text;
  return j;
}

inline UnitaryEnsemble build_ensemble(const ExperimentConfig& c, std::size_t dim) {
  const std::uint64_t seed = stream_seed(c.seed, 1);
  if (c.ensemble.is_null()) return haar_ensemble(dim, seed);
  const std::string kind = c.ensemble["kind"];
  const std::size_t nq = c.ensemble.value("n_qubits", std::size_t{0});
  UnitaryEnsemble e;
  if (kind == "haar") e = haar_ensemble(nq ? qubit_dim(nq) : dim, seed);
  else if (kind == "clifford") e = clifford_group(nq, seed);
  else if (kind == "pauli") e = pauli_group(nq), e.seed = seed;
  else e = random_circuit_ensemble(nq, c.ensemble["depth"].get<std::size_t>(), seed);
  if (c.ensemble.contains("iterations")) e = iterate_ensemble(e, c.ensemble["iterations"].get<std::size_t>());
  if (dim && e.dim != dim)
    fail(ErrorKind::config, "ensemble acts on dimension " + std::to_string(e.dim) + " but the instance needs " +
                                std::to_string(dim));
  return e;
}

inline DecouplingInstance random_instance(const ExperimentConfig& c, const SmoothingConfig& cfg) {
  auto rng = make_rng(c.seed, 0);
  const std::size_t a = c.dim("A"), r = c.dim("R"), b = c.dim("B"), e = c.dim("E", std::max<std::size_t>(1, (a + b - 1) / b));
  if (b * e < a) fail(ErrorKind::config, "dims: |B||E| must be at least |A|");
  DensitySystem rho(random_density(a * r, rng), SystemShape{{"A", a}, {"R", r}});
  return DecouplingInstance(std::move(rho), random_channel(a, b, e, rng), cfg);
}

inline SmoothingConfig smoothing(const ExperimentConfig& c) {
  SmoothingConfig s;
  s.epsilon = c.epsilon.value_or(0.0);
  s.delta = c.delta.value_or(0.0);
  return s;
}

inline ExperimentOutput run_decouple_expect(const ExperimentConfig& c) {
  const auto inst = random_instance(c, {});
  const auto e = build_ensemble(c, inst.dim_a());
  const SampleSeries f(f_samples(inst, e, c.samples), c.seed, "f");
  const double bound = dupuis_expectation_bound(inst);
  const double m = mean(f), se = standard_error(f);
  const auto w = compute_weights(inst);
  BoundCheck b{bound, m, {m - 3 * se, m + 3 * se}, m - 3 * se > bound + 1e-12};
  return {f.values,
          {{"ensemble", e.to_json()},
           {"mean_f", m},
           {"standard_error", se},
           {"expectation_bound", bound},
           {"mean_f_le_bound", m <= bound},
           {"claims", json::array({claim("E[f] <= 2^{-H2(A|R)/2 - H2(A'|B)/2} at epsilon = 0", b)})},
           {"entropies", weight_entropies(w)}}};
}

inline ExperimentOutput run_decouple_tail(const ExperimentConfig& c) {
  const auto inst = random_instance(c, smoothing(c));
  const auto e = build_ensemble(c, inst.dim_a());
  const auto w = compute_weights(inst);
  const SampleSeries f(f_samples(inst, e, c.samples), c.seed, "f");
  const SampleSeries g(g_samples(inst, w, e, c.samples), c.seed, "g");
  const auto tail = tail_parameters(inst, w, *c.kappa);
  const auto over = empirical_tail(f, tail.threshold);
  BoundCheck b{tail.bound, over.fraction, over.interval, !tail.vacuous && over.interval.lo > tail.bound};
  const auto levy = levy_check(g, lipschitz_bound(inst, w), double(inst.dim_a()), *c.kappa);
  return {f.values,
          {{"ensemble", e.to_json()},
           {"tail", tail.to_json()},
           {"mean_f", mean(f)},
           {"mean_g", mean(g)},
           {"claims", json::array({claim("P[f > threshold] <= tail bound", b),
                                   claim("P[|g - E g| >= kappa] <= 2 exp(-|A| kappa^2 / (4 L^2))", levy)})},
           {"entropies", weight_entropies(w)}}};
}

inline ExperimentOutput run_fqsw(const ExperimentConfig& c) {
  auto rng = make_rng(c.seed, 0);
  const std::size_t a1 = c.dim("A1"), a2 = c.dim("A2"), r = c.dim("R");
  const DensitySystem rho(random_density(a1 * a2 * r, rng), SystemShape{{"A1", a1}, {"A2", a2}, {"R", r}});
  const auto fq = fqsw_instance(a1, a2, rho, smoothing(c));
  const auto e = build_ensemble(c, a1 * a2);
  const SampleSeries f(f_samples(fq.inst, e, c.samples), c.seed, "f");
  std::vector<double> g2 = g_samples(fq.inst, fq.weights, e, c.samples);
  for (auto& x : g2) x *= x;
  const SampleSeries g2s(g2, c.seed, "g_squared");
  const double bound = dupuis_expectation_bound(DecouplingInstance(fq.inst.rho, fq.inst.channel));
  const double m = mean(f), se = standard_error(f);
  const double g2m = mean(g2s), g2se = standard_error(g2s);
  const auto haar = haar_expected_g_squared(fq.inst, fq.weights);
  const BoundCheck expect{bound, m, {m - 3 * se, m + 3 * se}, m - 3 * se > bound + 1e-12};
  const BoundCheck moment{haar.expected_g_squared, g2m, {g2m - 3 * g2se, g2m + 3 * g2se},
                          std::abs(g2m - haar.expected_g_squared) > 3 * g2se + 1e-12};
  const auto tail = fqsw_tail_parameters(fq, c.kappa.value_or(0.1));
  return {f.values,
          {{"ensemble", e.to_json()},
           {"mean_f", m},
           {"standard_error", se},
           {"expectation_bound", bound},
           {"mean_f_le_bound", m <= bound},
           {"mean_g_squared", g2m},
           {"haar_moments", haar.to_json()},
           {"report", fq.report.to_json()},
           {"promises_hold", fq.report.promises_hold()},
           {"tail", tail.to_json()},
           {"claims", json::array({claim("E[f] <= 2^{-H2(A|R)/2 - H2(A'|B)/2} at epsilon = 0", expect),
                                   claim("Monte Carlo E[g^2] within 3 standard errors of the Haar closed form",
                                         moment)})},
           {"entropies", weight_entropies(fq.weights)}}};
}

inline ExperimentOutput run_thermalize(const ExperimentConfig& c) {
  auto rng = make_rng(c.seed, 0);
  const std::size_t om = c.dim("Omega"), s = c.dim("S"), env = c.dim("E"), r = c.dim("R");
  if (om != s * env) fail(ErrorKind::config, "dims: Omega must equal S * E");
  const DensitySystem rho(random_density(om * r, rng), SystemShape{{"A", om}, {"R", r}});
  SmoothingConfig cfg;
  cfg.epsilon = c.epsilon.value_or(0.0);
  const auto e = build_ensemble(c, om);
  const auto rep = thermalization_check(om, s, env, rho, *c.kappa, cfg, e, c.samples);
  const DecouplingInstance inst(rho, partial_trace_channel(s, env), cfg);
  const auto w = compute_weights(inst);
  const auto within = empirical_tail(SampleSeries(rep.distances), *c.kappa);
  const BoundCheck b{rep.tail.bound, within.fraction, within.interval,
                     rep.tail.bound <= 1 && within.interval.lo > rep.tail.bound};
  return {rep.distances,
          {{"ensemble", e.to_json()},
           {"report", rep.to_json()},
           {"promises_hold", rep.promises_hold()},
           {"claims", json::array({claim("P[distance > kappa] <= tail bound", b)})},
           {"entropies", weight_entropies(w)}}};
}

inline ExperimentOutput run_design_verify(const ExperimentConfig& c) {
  const auto e = build_ensemble(c, 0);
  const std::size_t t = *c.t;
  std::vector<double> lambdas;
  DesignReport last;
  for (std::size_t s = 1; s <= t; ++s) {
    last = qtpe_lambda(e, s, c.samples, stream_seed(c.seed, 2));
    lambdas.push_back(last.lambda);
  }
  const double fp = frame_potential(e, t, c.samples);
  return {lambdas,
          {{"ensemble", e.to_json()},
           {"t", t},
           {"lambda", last.lambda},
           {"design", last.to_json()},
           {"frame_potential", fp},
           {"haar_frame_potential", haar_frame_potential(e.dim, t)},
           {"claims", json::array()},
           {"entropies", json::array()}}};
}

inline ExperimentOutput run_entropy(const ExperimentConfig& c) {
  auto rng = make_rng(c.seed, 0);
  const std::size_t a = c.dim("A"), b = c.dim("B");
  const DensitySystem rho(random_density(a * b, rng), SystemShape{{"A", a}, {"B", b}});
  const auto cfg = smoothing(c);
  const double eps = cfg.epsilon;
  json ents = json::array();
  std::vector<double> values;
  auto add = [&](const std::string& name, double v, CertifiedSide side) {
    ents.push_back(entropy_entry(name, v, side));
    values.push_back(v);
  };
  add("H(AB)", shannon(rho), CertifiedSide::exact);
  add("H(A|B)", shannon(rho, {"B"}), CertifiedSide::exact);
  const auto hmax = hmax_smooth(rho.marginal({"A"}).matrix, eps);
  add("Hmax^eps(A)", hmax.value_bits, hmax.certified_side);
  const auto hmin = hmin_smooth(rho.marginal({"A"}).matrix, eps);
  add("Hmin^eps(A)", hmin.value_bits, hmin.certified_side);
  add("Hmax'^eps(B)", hmax_prime(rho.marginal({"B"}), eps).value, CertifiedSide::exact);
  add("H2(A|B) fixed marginal", h2_conditional(rho, {"B"}, cfg, WeightMode::fixed_marginal).value, CertifiedSide::lower);
  add("H2(A|B) minimized", h2_conditional(rho, {"B"}, cfg, WeightMode::minimized).value, CertifiedSide::lower);
  add("H2'(A|B)", h2_prime(rho, "B", eps, cfg.delta).value, CertifiedSide::lower);
  return {values, {{"claims", json::array()}, {"entropies", ents}}};
}

inline ExperimentOutput run_typicality(const ExperimentConfig& c) {
  const TypicalSpec spec{c.distribution, *c.n, *c.delta};
  const double eps = c.epsilon.value_or(0.1);
  const auto rep = typical_report(spec, eps);
  std::vector<double> masses;
  for (const auto& cl : spectral_classes(spec.base_distribution, spec.n, spec.delta)) masses.push_back(cl.mass);
  const DensitySystem rho(diagonal(c.distribution), SystemShape{{"B", c.distribution.size()}});
  const auto hmax = hmax_prime_iid_check(rho, spec.n, eps, spec.delta);
  return {masses,
          {{"report", rep.to_json()},
           {"all_hold", rep.all_hold()},
           {"hmax_iid", hmax.to_json()},
           {"claims", json::array()},
           {"entropies", json::array({entropy_entry("H(X)", rep.entropy, CertifiedSide::exact),
                                      entropy_entry("Hmax'^eps(X^n)", hmax.value, CertifiedSide::exact)})}}};
}

/// exp(i s H) for a Hermitian H.
inline ComplexMatrix unitary_step(const ComplexMatrix& h, double s) {
  const auto sp = hermitian_spectrum(h);
  ComplexVector phases(sp.eigenvalues.size());
  for (Eigen::Index k = 0; k < phases.size(); ++k) phases(k) = std::polar(1.0, s * sp.eigenvalues(k));
  return sp.eigenvectors * phases.asDiagonal() * sp.eigenvectors.adjoint();
}

inline ExperimentOutput run_lipschitz(const ExperimentConfig& c) {
  const auto inst = random_instance(c, smoothing(c));
  const auto w = compute_weights(inst);
  const auto e = build_ensemble(c, inst.dim_a());
  const double lip = lipschitz_bound(inst, w), gmax = max_g_bound(inst, w);
  const double step = c.step.value_or(0.1);
  const std::uint64_t aux = stream_seed(c.seed, 2);
  struct Pair { double ratio, g; };
  const auto pairs = parallel_map(c.samples, [&](std::size_t i) {
    auto rng = make_rng(aux, i);
    const ComplexMatrix u = draw(e, i);
    const ComplexMatrix h = hermitian_part(ginibre(inst.dim_a(), inst.dim_a(), rng));
    const ComplexMatrix v = u * unitary_step(h, step);
    const double gu = g_value(inst, w, u), gv = g_value(inst, w, v);
    const double dist = (u - v).norm();
    return Pair{dist > 0 ? std::abs(gu - gv) / dist : 0.0, gu};
  });
  std::vector<double> ratios;
  std::size_t over_l = 0, over_g = 0;
  double worst = 0, gworst = 0;
  for (const auto& p : pairs) {
    ratios.push_back(p.ratio);
    worst = std::max(worst, p.ratio);
    gworst = std::max(gworst, p.g);
    over_l += p.ratio > lip + 1e-9;
    over_g += p.g > gmax + 1e-9;
  }
  const double n = std::max<double>(1, c.samples);
  return {ratios,
          {{"ensemble", e.to_json()},
           {"lipschitz_bound", lip},
           {"max_ratio", worst},
           {"max_g_bound", gmax},
           {"max_g", gworst},
           {"claims", json::array({claim("|g(U) - g(V)| <= L ||U - V||_2",
                                         {lip, worst, {0, 0}, over_l > 0}),
                                   claim("g(U) <= max g bound", {gmax, gworst, {0, 0}, over_g > 0})})},
           {"violations", {{"lipschitz", over_l}, {"max_g", over_g}}},
           {"pairs", n},
           {"entropies", weight_entropies(w)}}};
}

inline ExperimentOutput run_moments(const ExperimentConfig& c) {
  const auto inst = random_instance(c, {});
  const auto w = compute_weights(inst);
  const auto e = build_ensemble(c, inst.dim_a());
  const SampleSeries g(g_samples(inst, w, e, c.samples), c.seed, "g");
  const double mu = mean(g), kappa = c.kappa.value_or(0.05);
  json moments = json::array(), claims = json::array();
  for (int m = 1; m <= 4; ++m) {
    const double emp = centralized_moment(g, mu, 2 * m);
    const double bound = haar_g_moment_bound(m, w.hmax.value, w.h2.value, 0.0, double(inst.dim_a()));
    moments.push_back({{"m", m}, {"empirical", emp}, {"bound", bound}});
    claims.push_back(claim("E|g - mu|^{2m} <= Haar moment bound, m = " + std::to_string(m),
                           {bound, emp, {emp, emp}, emp > bound}));
    claims.push_back(claim("Markov tail from moment m = " + std::to_string(m),
                           tail_from_moment(g, mu, m, kappa).as_check()));
  }
  const auto small = moment_transfer_check(1, 64, 1.0, 8, c.samples, stream_seed(c.seed, 2));
  const auto large = moment_transfer_check(1, 1, 0.1, 4, c.samples, stream_seed(c.seed, 3));
  return {g.values,
          {{"ensemble", e.to_json()},
           {"mean_g", mu},
           {"moments", moments},
           {"moment_transfer", {small.to_json(), large.to_json()}},
           {"moment_transfer_holds", small.holds() && large.holds()},
           {"claims", claims},
           {"entropies", weight_entropies(w)}}};
}

}  // namespace detail

/// Runs the computation only; no files.
inline ExperimentOutput compute_experiment(const ExperimentConfig& c) {
  ExperimentOutput out;
  if (c.experiment == "decouple-expect") out = detail::run_decouple_expect(c);
  else if (c.experiment == "decouple-tail") out = detail::run_decouple_tail(c);
  else if (c.experiment == "fqsw") out = detail::run_fqsw(c);
  else if (c.experiment == "thermalize") out = detail::run_thermalize(c);
  else if (c.experiment == "design-verify") out = detail::run_design_verify(c);
  else if (c.experiment == "entropy") out = detail::run_entropy(c);
  else if (c.experiment == "typicality") out = detail::run_typicality(c);
  else if (c.experiment == "lipschitz") out = detail::run_lipschitz(c);
  else if (c.experiment == "moments") out = detail::run_moments(c);
  else fail(ErrorKind::config, "unknown experiment '" + c.experiment + "'");
  bool violated = false;
  for (const auto& cl : out.summary["claims"]) violated = violated || cl["violated"].get<bool>();
  out.summary["experiment"] = c.experiment;
  out.summary["seed"] = c.seed;
  out.summary["samples"] = out.values.size();
  out.summary["any_violation"] = violated;
  return out;
}

struct RunOutcome {
  int exit_code = kExitOk;
  std::string message;
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::invalid_argument, "cannot write '" + p.string() + "'");
  out << s;
}

inline void write_manifest(const std::filesystem::path& dir, const json& config, const RunOutcome& o) {
  json artifacts = json::object();
  for (const char* name : {"results.csv", "summary.json"}) {
    const auto p = dir / name;
    if (std::filesystem::exists(p))
      artifacts[name] = {{"sha256", sha256_file(p)}, {"bytes", std::filesystem::file_size(p)}};
  }
  json m = {{"config", config},
            {"version", DECOUPLE_VERSION},
            {"seed", config.value("seed", json())},
            {"seed_streams",
             {{"instance", "make_rng(seed, 0)"},
              {"ensemble", "draw i uses make_rng(stream_seed(seed, 1), i)"},
              {"auxiliary", "stream_seed(seed, 2) and up"}}},
            {"status", o.exit_code == kExitOk ? "ok" : (o.exit_code == kExitConfig ? "config_error" : "error")},
            {"exit_code", o.exit_code},
            {"message", o.message},
            {"artifacts", artifacts}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace detail

/// Validates, computes and writes the three artifacts. The manifest is
/// written whenever the output directory is known, failures included.
inline RunOutcome run_experiment(const json& config) {
  RunOutcome o;
  std::optional<std::filesystem::path> dir;
  if (config.is_object() && config.contains("output_dir") && config["output_dir"].is_string() &&
      !config["output_dir"].get<std::string>().empty())
    dir = config["output_dir"].get<std::string>();
  try {
    if (dir) {
      std::filesystem::create_directories(*dir);
      std::filesystem::remove(*dir / "results.csv");
      std::filesystem::remove(*dir / "summary.json");
    }
    const auto c = parse_config(config);
    const auto out = compute_experiment(c);
    detail::write_text(*dir / "results.csv", results_csv(c.experiment, c.seed, out.values));
    detail::write_text(*dir / "summary.json", out.summary.dump(2) + "\n");
  } catch (const Error& e) {
    o.exit_code = e.kind() == ErrorKind::config ? kExitConfig : kExitComputation;
    o.message = e.what();
  } catch (const std::exception& e) {
    o.exit_code = kExitComputation;
    o.message = e.what();
  }
  if (dir) {
    try {
      detail::write_manifest(*dir, config, o);
    } catch (const std::exception& e) {
      if (o.exit_code == kExitOk) o.exit_code = kExitComputation;
      o.message += (o.message.empty() ? "" : "; ") + std::string("manifest: ") + e.what();
    }
  }
  return o;
}

}  // namespace decouple
