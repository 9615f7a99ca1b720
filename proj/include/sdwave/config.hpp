#pragma once

// Run configuration documents (JSON) for the command-line front end.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdwave/error.hpp"
#include "sdwave/estimators.hpp"
#include "sdwave/functionals.hpp"
#include "sdwave/model.hpp"
#include "sdwave/simulator.hpp"

namespace sdwave {

struct RunConfig {
  SimPlan plan;
  std::vector<EstimatorSpec> estimators;
  std::string out_dir = "out";
  std::int64_t stride = 10000;
  Quadrature quadrature = Quadrature::left_riemann;
  std::size_t replications = 1;
  unsigned threads = 0;
};

constexpr std::string_view to_string(Scheme s) noexcept { return s == Scheme::exact ? "exact" : "euler"; }
constexpr std::string_view to_string(Quadrature q) noexcept {
  return q == Quadrature::trapezoid ? "trapezoid" : "left_riemann";
}

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::config_error, path + ": " + what);
}

inline const json& require_key(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) config_fail(path + key, "missing required key");
  return *it;
}

inline double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) config_fail(path, "expected a number");
  return v.get<double>();
}

inline std::uint64_t get_unsigned(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  config_fail(path, "expected a nonnegative integer");
}

inline std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) config_fail(path, "expected a string");
  return v.get<std::string>();
}

inline std::vector<double> get_vector(const json& v, const std::string& path) {
  if (!v.is_array()) config_fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.contains(key)) config_fail(path + key, "unknown key");
}

inline std::size_t get_mode(const json& obj, const char* key, std::size_t n_modes, const std::string& path) {
  const std::string where = path + "." + key;
  const std::uint64_t m = get_unsigned(require_key(obj, key, path + "."), where);
  if (m < 1 || m > n_modes) config_fail(where, "mode " + std::to_string(m) + " outside 1.." + std::to_string(n_modes));
  return static_cast<std::size_t>(m);
}

inline EstimatorSpec parse_estimator(const json& e, std::size_t n_modes, const std::string& path) {
  if (!e.is_object()) config_fail(path, "expected an object");
  reject_unknown(e, {"kind", "j", "k", "z1", "z2"}, path + ".");
  const std::string name = get_string(require_key(e, "kind", path + "."), path + ".kind");
  const auto kind = parse_estimator_kind(name);
  if (!kind) config_fail(path + ".kind", "unknown estimator kind '" + name + "'");

  const bool by_mode = e.contains("j") || e.contains("k");
  const bool by_window = e.contains("z1") || e.contains("z2");
  if (by_mode && by_window) config_fail(path, "give either mode indices or window vectors, not both");

  switch (*kind) {
    case EstimatorKind::abar_k:
      return EstimatorSpec::abar_k(n_modes, get_mode(e, "k", n_modes, path));
    case EstimatorKind::bbar_jk:
      return EstimatorSpec::bbar_jk(n_modes, get_mode(e, "j", n_modes, path), get_mode(e, "k", n_modes, path));
    case EstimatorKind::bbar_z1_a:
      if (by_mode) return EstimatorSpec::bbar_fj_a(n_modes, get_mode(e, "j", n_modes, path));
      break;
    default:
      if (by_mode) config_fail(path, "kind '" + name + "' needs z1/z2 window vectors");
      break;
  }

  const auto component = [&](const char* key) {
    if (!e.contains(key)) return std::vector<double>(n_modes, 0.0);
    std::vector<double> z = get_vector(e.at(key), path + "." + key);
    if (z.size() != n_modes)
      config_fail(path + "." + key, "expected " + std::to_string(n_modes) + " coordinates");
    return z;
  };
  EstimatorSpec spec;
  spec.kind = *kind;
  spec.window = Window(component("z1"), component("z2"));
  if (spec.window.is_zero()) config_fail(path, "window is zero");
  return spec;
}

}  // namespace detail

/// Validates a parsed JSON document. Defaults: scheme euler, quadrature
/// left_riemann, stride 10000, replications 1, u0 = v0 = 1.
inline RunConfig parse_config(const nlohmann::json& doc) {
  using detail::config_fail;
  using detail::get_number;
  if (!doc.is_object()) config_fail("<root>", "expected an object");
  detail::reject_unknown(doc,
                         {"a", "b", "n_modes", "alphas", "alpha_rule", "lambdas", "lambda_rule", "t_horizon", "dt",
                          "scheme", "quadrature", "seed", "replications", "stride", "estimators", "out_dir", "u0",
                          "v0", "threads"},
                         "");

  const double a = get_number(detail::require_key(doc, "a", ""), "a");
  const double b = get_number(detail::require_key(doc, "b", ""), "b");
  if (!(a > 0.0)) config_fail("a", "must be > 0");
  if (!(b > 0.0)) config_fail("b", "must be > 0");

  const std::uint64_t n = detail::get_unsigned(detail::require_key(doc, "n_modes", ""), "n_modes");
  if (n < 1 || n > 100000) config_fail("n_modes", "must be in 1..100000");
  const auto n_modes = static_cast<std::size_t>(n);

  const auto spectrum = [&](const char* list_key, const char* rule_key, const char* rule_name, auto rule) {
    const bool has_list = doc.contains(list_key);
    const bool has_rule = doc.contains(rule_key);
    if (has_list == has_rule) config_fail(list_key, std::string("give exactly one of ") + list_key + " or " + rule_key);
    if (has_rule) {
      const std::string r = detail::get_string(doc.at(rule_key), rule_key);
      if (r != rule_name) config_fail(rule_key, "unknown rule '" + r + "'");
      return rule(n_modes);
    }
    std::vector<double> v = detail::get_vector(doc.at(list_key), list_key);
    if (v.size() != n_modes) config_fail(list_key, "expected " + std::to_string(n_modes) + " entries");
    return v;
  };
  std::vector<double> alphas = spectrum("alphas", "alpha_rule", "dirichlet_1d", dirichlet_eigenvalues);
  std::vector<double> lambdas = spectrum("lambdas", "lambda_rule", "paper", paper_lambdas);

  const double horizon = get_number(detail::require_key(doc, "t_horizon", ""), "t_horizon");
  const double dt = get_number(detail::require_key(doc, "dt", ""), "dt");
  if (!(horizon > 0.0)) config_fail("t_horizon", "must be > 0");
  if (!(dt > 0.0)) config_fail("dt", "must be > 0");
  if (!(dt < horizon)) config_fail("dt", "must be < t_horizon");

  Scheme scheme = Scheme::euler;
  if (doc.contains("scheme")) {
    const std::string s = detail::get_string(doc.at("scheme"), "scheme");
    if (s == "exact") scheme = Scheme::exact;
    else if (s != "euler") config_fail("scheme", "expected 'euler' or 'exact'");
  }

  std::optional<SpectralConfig> cfg;
  try {
    cfg.emplace(std::move(alphas), std::move(lambdas));
  } catch (const Error& e) {
    config_fail("alphas/lambdas", e.what());
  }

  const auto initial = [&](const char* key) {
    if (!doc.contains(key)) return std::vector<double>(n_modes, 1.0);
    const auto& v = doc.at(key);
    if (v.is_number()) return std::vector<double>(n_modes, v.get<double>());
    std::vector<double> out = detail::get_vector(v, key);
    if (out.size() != n_modes) config_fail(key, "expected a number or " + std::to_string(n_modes) + " entries");
    return out;
  };

  RunConfig rc{SimPlan{ModelParams(a, b), *cfg, InitialCondition{initial("u0"), initial("v0")}, horizon, dt, scheme,
                       0, 0, {}},
               {}};
  if (doc.contains("seed")) rc.plan.seed = detail::get_unsigned(doc.at("seed"), "seed");

  if (doc.contains("quadrature")) {
    const std::string q = detail::get_string(doc.at("quadrature"), "quadrature");
    if (q == "trapezoid") rc.quadrature = Quadrature::trapezoid;
    else if (q != "left_riemann") config_fail("quadrature", "expected 'left_riemann' or 'trapezoid'");
  }
  if (doc.contains("replications")) {
    const std::uint64_t r = detail::get_unsigned(doc.at("replications"), "replications");
    if (r < 1) config_fail("replications", "must be >= 1");
    rc.replications = static_cast<std::size_t>(r);
  }
  if (doc.contains("stride")) {
    const std::uint64_t s = detail::get_unsigned(doc.at("stride"), "stride");
    if (s < 1 || s > static_cast<std::uint64_t>(INT64_MAX)) config_fail("stride", "must be >= 1");
    rc.stride = static_cast<std::int64_t>(s);
  }
  if (doc.contains("threads")) rc.threads = static_cast<unsigned>(detail::get_unsigned(doc.at("threads"), "threads"));
  if (doc.contains("out_dir")) rc.out_dir = detail::get_string(doc.at("out_dir"), "out_dir");

  if (doc.contains("estimators")) {
    const auto& list = doc.at("estimators");
    if (!list.is_array()) config_fail("estimators", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i)
      rc.estimators.push_back(detail::parse_estimator(list[i], n_modes, "estimators[" + std::to_string(i) + "]"));
  }
  return rc;
}

inline RunConfig parse_config(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::config_error, std::string("malformed document: ") + e.what());
  }
  return parse_config(doc);
}

/// The six-estimator experiment on ten Dirichlet modes: a = 1, b = 0.2,
/// T = 1000, dt = 1e-4, lambda_n = 1000 / n^2.
inline nlohmann::json paper_preset_json() {
  using nlohmann::json;
  return json{{"a", 1.0},
              {"b", 0.2},
              {"n_modes", 10},
              {"alpha_rule", "dirichlet_1d"},
              {"lambda_rule", "paper"},
              {"t_horizon", 1000.0},
              {"dt", 1e-4},
              {"scheme", "euler"},
              {"quadrature", "left_riemann"},
              {"seed", 20240101},
              {"replications", 100},
              {"stride", 10000},
              {"out_dir", "out"},
              {"estimators", json::array({json{{"kind", "abar_k"}, {"k", 1}}, json{{"kind", "abar_k"}, {"k", 10}},
                                          json{{"kind", "bbar_jk"}, {"j", 1}, {"k", 1}},
                                          json{{"kind", "bbar_jk"}, {"j", 10}, {"k", 10}},
                                          json{{"kind", "bbar_z1_a"}, {"j", 1}},
                                          json{{"kind", "bbar_z1_a"}, {"j", 10}}})}};
}

inline RunConfig paper_preset() { return parse_config(paper_preset_json()); }

}  // namespace sdwave
