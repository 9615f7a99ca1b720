#pragma once

// Minimum-contrast estimators of the damping a and the stiffness b.
//
// Every estimator matches an observed time average against its ergodic limit
//   lim J_T = Q1 / (4ab) + Q2 / (4a),   Q1 = sum lambda_k z1_k^2,  Q2 = sum lambda_k z2_k^2,
// so the estimators only consume accumulated scalars, never trajectories.

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdwave/error.hpp"
#include "sdwave/functionals.hpp"
#include "sdwave/model.hpp"

namespace sdwave {

enum class EstimatorKind { abar_general, bbar_general, abar_z2, bbar_z1z2, abar_k, bbar_jk, bbar_z1_a };

constexpr std::string_view to_string(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::abar_general: return "abar_general";
    case EstimatorKind::bbar_general: return "bbar_general";
    case EstimatorKind::abar_z2: return "abar_z2";
    case EstimatorKind::bbar_z1z2: return "bbar_z1z2";
    case EstimatorKind::abar_k: return "abar_k";
    case EstimatorKind::bbar_jk: return "bbar_jk";
    case EstimatorKind::bbar_z1_a: return "bbar_z1_a";
  }
  return "unknown";
}

inline std::optional<EstimatorKind> parse_estimator_kind(std::string_view name) noexcept {
  for (auto kind : {EstimatorKind::abar_general, EstimatorKind::bbar_general, EstimatorKind::abar_z2,
                    EstimatorKind::bbar_z1z2, EstimatorKind::abar_k, EstimatorKind::bbar_jk, EstimatorKind::bbar_z1_a})
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

/// True for the kinds that estimate the damping a.
constexpr bool estimates_damping(EstimatorKind kind) noexcept {
  return kind == EstimatorKind::abar_general || kind == EstimatorKind::abar_z2 || kind == EstimatorKind::abar_k;
}

inline double abar_general(double j_total, const Window& w, const SpectralConfig& cfg, double b_known) {
  detail::require(!w.is_zero(), ErrorKind::invalid_window, "window must be nonzero");
  detail::require(b_known > 0.0, ErrorKind::invalid_argument, "known b must be > 0");
  detail::require(j_total > 0.0, ErrorKind::degenerate_observation, "J_T must be > 0");
  const double q1 = q_norm2(cfg.lambdas(), w.z1);
  const double q2 = q_norm2(cfg.lambdas(), w.z2);
  return q1 / (4.0 * b_known * j_total) + q2 / (4.0 * j_total);
}

inline double bbar_general(double j_total, const Window& w, const SpectralConfig& cfg, double a_known) {
  detail::require(w.z1_nonzero(), ErrorKind::invalid_window, "z1 must be nonzero");
  detail::require(a_known > 0.0, ErrorKind::invalid_argument, "known a must be > 0");
  const double q1 = q_norm2(cfg.lambdas(), w.z1);
  const double q2 = q_norm2(cfg.lambdas(), w.z2);
  const double denom = 4.0 * a_known * j_total - q2;
  if (!(denom > 0.0)) throw Error(ErrorKind::unstable_estimate, "4 a J_T - <Q z2, z2> is not positive");
  return q1 / denom;
}

inline double abar_z2(double j2, std::span<const double> z2, const SpectralConfig& cfg) {
  const double q2 = q_norm2(cfg.lambdas(), z2);
  detail::require(q2 > 0.0, ErrorKind::invalid_window, "z2 must be nonzero");
  detail::require(j2 > 0.0, ErrorKind::degenerate_observation, "velocity average must be > 0");
  return q2 / (4.0 * j2);
}

inline double bbar_z1z2(double j1, double j2, std::span<const double> z1, std::span<const double> z2,
                        const SpectralConfig& cfg) {
  const double q1 = q_norm2(cfg.lambdas(), z1);
  const double q2 = q_norm2(cfg.lambdas(), z2);
  detail::require(q1 > 0.0 && q2 > 0.0, ErrorKind::invalid_window, "z1 and z2 must be nonzero");
  detail::require(j1 > 0.0, ErrorKind::degenerate_observation, "position average must be > 0");
  return (q1 / q2) * (j2 / j1);
}

inline double bbar_z1_a(double j1, std::span<const double> z1, const SpectralConfig& cfg, double a_known) {
  const double q1 = q_norm2(cfg.lambdas(), z1);
  detail::require(q1 > 0.0, ErrorKind::invalid_window, "z1 must be nonzero");
  detail::require(a_known > 0.0, ErrorKind::invalid_argument, "known a must be > 0");
  detail::require(j1 > 0.0, ErrorKind::degenerate_observation, "position average must be > 0");
  return q1 / (4.0 * a_known * j1);
}

/// abar on the coordinate window (0, e_k); `k` is 1-based.
inline double abar_k(double j2, const SpectralConfig& cfg, std::size_t k) {
  detail::require(k >= 1 && k <= cfg.n_modes(), ErrorKind::invalid_argument, "mode number out of range");
  detail::require(j2 > 0.0, ErrorKind::degenerate_observation, "velocity average must be > 0");
  return cfg.lambda(k - 1) / (4.0 * j2);
}

/// bbar on (f_j, 0) and (0, e_k); 1-based.
inline double bbar_jk(double j1, double j2, const SpectralConfig& cfg, std::size_t j, std::size_t k) {
  detail::require(j >= 1 && j <= cfg.n_modes() && k >= 1 && k <= cfg.n_modes(), ErrorKind::invalid_argument,
                  "mode number out of range");
  detail::require(j1 > 0.0, ErrorKind::degenerate_observation, "position average must be > 0");
  return cfg.lambda(j - 1) / cfg.lambda(k - 1) * (j2 / j1);
}

/// An estimator together with the window it observes. For the coordinate
/// kinds `j` and `k` are the 1-based mode numbers behind z1 = f_j and z2 = e_k.
struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::abar_k;
  Window window;
  std::size_t j = 0;
  std::size_t k = 0;

  static EstimatorSpec abar_k(std::size_t n_modes, std::size_t k) {
    return {EstimatorKind::abar_k, Window::velocity_mode(n_modes, k), 0, k};
  }
  static EstimatorSpec bbar_jk(std::size_t n_modes, std::size_t j, std::size_t k) {
    Window w = Window::position_mode(n_modes, j);
    detail::require(k >= 1 && k <= n_modes, ErrorKind::invalid_argument, "mode number out of range");
    w.z2[k - 1] = 1.0;
    return {EstimatorKind::bbar_jk, std::move(w), j, k};
  }
  static EstimatorSpec bbar_fj_a(std::size_t n_modes, std::size_t j) {
    return {EstimatorKind::bbar_z1_a, Window::position_mode(n_modes, j), j, 0};
  }

  /// Name used in reports and file names, e.g. `bbar_jk_j1_k1`.
  std::string label() const {
    std::string out(to_string(kind));
    if (j != 0) out += "_j" + std::to_string(j);
    if (k != 0) out += "_k" + std::to_string(k);
    return out;
  }

  /// Modes (1-based, ascending) the window touches.
  std::vector<std::size_t> support() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < window.size(); ++i)
      if (window.z1[i] != 0.0 || window.z2[i] != 0.0) out.push_back(i + 1);
    return out;
  }
};

struct Estimate {
  double value = 0.0;
  EstimatorKind kind = EstimatorKind::abar_k;
  std::string window_desc;
  double horizon = 0.0;
};

/// Applies the estimator formula of `spec.kind`. The "known" parameter of
/// abar_general (b), bbar_general and bbar_z1_a (a) is taken from `known`.
inline double evaluate(const EstimatorSpec& spec, const WindowAverages& avg, const SpectralConfig& cfg,
                       const ModelParams& known) {
  const Window& w = spec.window;
  switch (spec.kind) {
    case EstimatorKind::abar_general: return abar_general(avg.j_total(), w, cfg, known.b);
    case EstimatorKind::bbar_general: return bbar_general(avg.j_total(), w, cfg, known.a);
    case EstimatorKind::abar_z2:
    case EstimatorKind::abar_k: return abar_z2(avg.j2, w.z2, cfg);
    case EstimatorKind::bbar_z1z2:
    case EstimatorKind::bbar_jk: return bbar_z1z2(avg.j1, avg.j2, w.z1, w.z2, cfg);
    case EstimatorKind::bbar_z1_a: return bbar_z1_a(avg.j1, w.z1, cfg, known.a);
  }
  throw Error(ErrorKind::invalid_argument, "unknown estimator kind");
}

inline Estimate estimate(const EstimatorSpec& spec, const WindowAverages& avg, const SpectralConfig& cfg,
                         const ModelParams& known, double horizon) {
  detail::require(horizon > 0.0, ErrorKind::invalid_argument, "horizon must be > 0");
  const double value = evaluate(spec, avg, cfg, known);
  if (!std::isfinite(value)) throw Error(ErrorKind::unstable_estimate, "estimate is not finite");
  return {value, spec.kind, spec.label(), horizon};
}

struct SeriesPoint {
  double t = 0.0;
  std::optional<double> estimate;
};

/// Estimator value at every snapshot; points where the formula fails are
/// kept as missing.
inline std::vector<SeriesPoint> estimator_time_series(std::span<const Snapshot> snapshots, const EstimatorSpec& spec,
                                                      const SpectralConfig& cfg, const ModelParams& known) {
  std::vector<SeriesPoint> out;
  out.reserve(snapshots.size());
  for (const Snapshot& s : snapshots) {
    SeriesPoint point{s.t, std::nullopt};
    try {
      const double value = evaluate(spec, s.averages, cfg, known);
      if (std::isfinite(value)) point.estimate = value;
    } catch (const Error&) {
    }
    out.push_back(point);
  }
  return out;
}

/// `t,estimate,kind` rows; missing estimates are written as `nan`.
inline void write_estimate_csv(std::ostream& os, std::span<const SeriesPoint> series, EstimatorKind kind) {
  os << "t,estimate,kind\n";
  for (const SeriesPoint& p : series) {
    detail::write_double(os, p.t);
    os << ',';
    if (p.estimate) {
      detail::write_double(os, *p.estimate);
    } else {
      os << "nan";
    }
    os << ',' << to_string(kind) << '\n';
  }
}

}  // namespace sdwave
