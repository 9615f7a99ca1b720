#pragma once

// Limiting variances of sqrt(T) (estimate - truth) for the window estimators.
// The double series run over the configured modes; windows live on those
// modes, so the truncation is exact.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>

#include "sdwave/error.hpp"
#include "sdwave/estimators.hpp"
#include "sdwave/model.hpp"
#include "sdwave/numeric.hpp"

namespace sdwave {

struct LimitingVariance {
  double value = 0.0;
  EstimatorKind kind = EstimatorKind::abar_z2;
  std::size_t truncation_n = 0;
};

namespace detail {

inline void require_window(const SpectralConfig& cfg, std::span<const double> z) {
  require(z.size() == cfg.n_modes(), ErrorKind::invalid_argument, "window and spectrum differ in size");
  bool nonzero = false;
  for (double c : z) nonzero = nonzero || c != 0.0;
  require(nonzero, ErrorKind::invalid_window, "window component must be nonzero");
}

// sum_{k,n} lambda_k lambda_n z_k^2 z_n^2 w(k, n) / D_{k,n}, row-major.
template <class Weight>
double weighted_double_sum(const ModelParams& p, const SpectralConfig& cfg, std::span<const double> z, Weight weight) {
  const auto alphas = cfg.alphas();
  const auto lambdas = cfg.lambdas();
  CompensatedSum sum;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] == 0.0) continue;
    for (std::size_t n = 0; n < z.size(); ++n) {
      if (z[n] == 0.0) continue;
      const double d = d_denominator(p, alphas[k], alphas[n]);
      sum += lambdas[k] * lambdas[n] * z[k] * z[k] * z[n] * z[n] * weight(alphas[k], alphas[n]) / d;
    }
  }
  return sum.value();
}

}  // namespace detail

/// Limiting variance of abar_{T,z2}:
/// 8a^3 / Q2^2 * sum lambda_k lambda_n (alpha_k + alpha_n) z2_k^2 z2_n^2 / D_{k,n}.
inline double var_abar(const ModelParams& p, const SpectralConfig& cfg, std::span<const double> z2) {
  detail::require_window(cfg, z2);
  const double q2 = q_norm2(cfg.lambdas(), z2);
  const double series = detail::weighted_double_sum(p, cfg, z2, [](double ak, double an) { return ak + an; });
  return 8.0 * p.a * p.a * p.a / (q2 * q2) * series;
}

/// Limiting variance of bbar_{T,z1,z2}.
inline double var_bbar_z1z2(const ModelParams& p, const SpectralConfig& cfg, std::span<const double> z1,
                            std::span<const double> z2) {
  detail::require_window(cfg, z1);
  detail::require_window(cfg, z2);
  const double a = p.a;
  const double b = p.b;
  const double q1 = q_norm2(cfg.lambdas(), z1);
  const double q2 = q_norm2(cfg.lambdas(), z2);
  const double first = detail::weighted_double_sum(p, cfg, z1, [](double, double) { return 1.0; });

  const auto alphas = cfg.alphas();
  const auto lambdas = cfg.lambdas();
  CompensatedSum second;
  for (std::size_t k = 0; k < z1.size(); ++k) {
    for (std::size_t n = 0; n < z1.size(); ++n) {
      const double vel = q1 * z2[k] * z2[n];
      const double pos = q2 * z1[k] * z1[n];
      if (vel == 0.0 && pos == 0.0) continue;
      const double rk = std::sqrt(alphas[k]);
      const double rn = std::sqrt(alphas[n]);
      const double t1 = vel * rk - pos * rn;
      const double t2 = vel * rn - pos * rk;
      second += lambdas[k] * lambdas[n] * (t1 * t1 + t2 * t2) / d_denominator(p, alphas[k], alphas[n]);
    }
  }
  return 64.0 * a * a * a * b / (q1 * q1) * first + 8.0 * a * b * b / (q1 * q1 * q2 * q2) * second.value();
}

/// Limiting variance of bbar_{T,z1,a} (damping known).
inline double var_bbar_z1_a(const ModelParams& p, const SpectralConfig& cfg, std::span<const double> z1) {
  detail::require_window(cfg, z1);
  const double a = p.a;
  const double b = p.b;
  const double q1 = q_norm2(cfg.lambdas(), z1);
  const double first = detail::weighted_double_sum(p, cfg, z1, [](double, double) { return 1.0; });
  const double second = detail::weighted_double_sum(p, cfg, z1, [](double ak, double an) { return ak + an; });
  return 64.0 * a * a * a * b / (q1 * q1) * first + 8.0 * a * b * b / (q1 * q1) * second;
}

enum class ClosedFormKind { abar_k, bbar_jk, bbar_fj_a };

/// Coordinate-window variances: a; 4ab/alpha_j + 2b^2/a (j != k);
/// 4ab/alpha_j (j == k); 4ab/alpha_j + b^2/a.
inline double closed_form_variance(ClosedFormKind kind, const ModelParams& p, double alpha_j, bool same_mode = false) {
  detail::require(alpha_j > 0.0, ErrorKind::invalid_argument, "alpha must be > 0");
  const double a = p.a;
  const double b = p.b;
  switch (kind) {
    case ClosedFormKind::abar_k: return a;
    case ClosedFormKind::bbar_jk: return same_mode ? 4.0 * a * b / alpha_j : 4.0 * a * b / alpha_j + 2.0 * b * b / a;
    case ClosedFormKind::bbar_fj_a: return 4.0 * a * b / alpha_j + b * b / a;
  }
  throw Error(ErrorKind::invalid_argument, "unknown closed form");
}

/// Series variance for `spec`; empty for the general-window kinds, which have no
/// established limiting law.
inline std::optional<LimitingVariance> limiting_variance(const EstimatorSpec& spec, const ModelParams& p,
                                                         const SpectralConfig& cfg) {
  const Window& w = spec.window;
  switch (spec.kind) {
    case EstimatorKind::abar_z2:
    case EstimatorKind::abar_k: return LimitingVariance{var_abar(p, cfg, w.z2), spec.kind, cfg.n_modes()};
    case EstimatorKind::bbar_z1z2:
    case EstimatorKind::bbar_jk: return LimitingVariance{var_bbar_z1z2(p, cfg, w.z1, w.z2), spec.kind, cfg.n_modes()};
    case EstimatorKind::bbar_z1_a: return LimitingVariance{var_bbar_z1_a(p, cfg, w.z1), spec.kind, cfg.n_modes()};
    case EstimatorKind::abar_general:
    case EstimatorKind::bbar_general: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace sdwave
