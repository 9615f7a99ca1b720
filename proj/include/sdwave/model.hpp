#pragma once

// Parametric model of the strongly damped stochastic wave equation in
// spectral (diagonal) form.
//
// Each mode n evolves as the two-dimensional linear SDE
//
//   du_n = v_n dt
//   dv_n = (-b alpha_n u_n - 2 a v_n) dt + sqrt(lambda_n) dbeta_n
//
// where alpha_n are the eigenvalues of -A and lambda_n those of the noise
// covariance Q. The state space is V = Dom((-A)^{1/2}) x L^2; position
// coordinates of windows are stored in the f-basis f_n = e_n / sqrt(alpha_n).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "sdwave/error.hpp"
#include "sdwave/numeric.hpp"

namespace sdwave {

/// Unknown parameters: damping a (1/time) and stiffness b.
struct ModelParams {
  double a = 1.0;
  double b = 1.0;

  ModelParams() = default;
  ModelParams(double a_, double b_) : a(a_), b(b_) {
    detail::require(std::isfinite(a) && a > 0.0, ErrorKind::invalid_argument, "damping a must be > 0");
    detail::require(std::isfinite(b) && b > 0.0, ErrorKind::invalid_argument, "stiffness b must be > 0");
  }
};

/// Truncated spectral data: eigenvalues alpha_n of -A and lambda_n of Q.
class SpectralConfig {
 public:
  SpectralConfig(std::vector<double> alphas, std::vector<double> lambdas)
      : alphas_(std::move(alphas)), lambdas_(std::move(lambdas)) {
    detail::require(!alphas_.empty(), ErrorKind::invalid_argument, "at least one mode is required");
    detail::require(alphas_.size() == lambdas_.size(), ErrorKind::invalid_argument,
                    "alphas and lambdas differ in length");
    for (std::size_t n = 0; n < alphas_.size(); ++n) {
      detail::require(std::isfinite(alphas_[n]) && alphas_[n] > 0.0, ErrorKind::invalid_argument,
                      "alpha_n must be > 0");
      detail::require(n == 0 || alphas_[n] > alphas_[n - 1], ErrorKind::invalid_argument,
                      "alphas must be strictly increasing");
      detail::require(std::isfinite(lambdas_[n]) && lambdas_[n] > 0.0, ErrorKind::invalid_argument,
                      "lambda_n must be > 0");
    }
  }

  std::size_t n_modes() const noexcept { return alphas_.size(); }
  std::span<const double> alphas() const noexcept { return alphas_; }
  std::span<const double> lambdas() const noexcept { return lambdas_; }
  double alpha(std::size_t index) const { return alphas_.at(index); }
  double lambda(std::size_t index) const { return lambdas_.at(index); }

 private:
  std::vector<double> alphas_;
  std::vector<double> lambdas_;
};

/// Observation window z = (z1, z2). z1 holds f-basis coordinates, z2 holds
/// e-basis coordinates.
struct Window {
  std::vector<double> z1;
  std::vector<double> z2;

  Window() = default;
  Window(std::vector<double> z1_, std::vector<double> z2_) : z1(std::move(z1_)), z2(std::move(z2_)) {
    detail::require(z1.size() == z2.size(), ErrorKind::invalid_argument, "window components differ in length");
  }

  static Window zero(std::size_t n_modes) { return {std::vector<double>(n_modes), std::vector<double>(n_modes)}; }

  /// (f_mode, 0); `mode` is 1-based.
  static Window position_mode(std::size_t n_modes, std::size_t mode) {
    detail::require(mode >= 1 && mode <= n_modes, ErrorKind::invalid_argument, "mode number out of range");
    Window w = zero(n_modes);
    w.z1[mode - 1] = 1.0;
    return w;
  }

  /// (0, e_mode); `mode` is 1-based.
  static Window velocity_mode(std::size_t n_modes, std::size_t mode) {
    detail::require(mode >= 1 && mode <= n_modes, ErrorKind::invalid_argument, "mode number out of range");
    Window w = zero(n_modes);
    w.z2[mode - 1] = 1.0;
    return w;
  }

  std::size_t size() const noexcept { return z1.size(); }

  bool z1_nonzero() const noexcept {
    for (double c : z1)
      if (c != 0.0) return true;
    return false;
  }
  bool z2_nonzero() const noexcept {
    for (double c : z2)
      if (c != 0.0) return true;
    return false;
  }
  bool is_zero() const noexcept { return !z1_nonzero() && !z2_nonzero(); }

  /// L^2 coordinates of z1: z_{1,k} / sqrt(alpha_k).
  std::vector<double> z1_l2_coords(std::span<const double> alphas) const {
    detail::require(alphas.size() == z1.size(), ErrorKind::invalid_argument, "window and spectrum differ in size");
    std::vector<double> out(z1.size());
    for (std::size_t k = 0; k < z1.size(); ++k) out[k] = z1[k] / std::sqrt(alphas[k]);
    return out;
  }
};

/// Coordinates <u_1, e_n> and <u_2, e_n> of the initial state.
struct InitialCondition {
  std::vector<double> u0;
  std::vector<double> v0;

  static InitialCondition zero(std::size_t n_modes) { return {std::vector<double>(n_modes), std::vector<double>(n_modes)}; }
  static InitialCondition constant(std::size_t n_modes, double value) {
    return {std::vector<double>(n_modes, value), std::vector<double>(n_modes, value)};
  }
};

/// Square matrix in row-major storage; used for non-diagonal noise covariances.
class SquareMatrix {
 public:
  SquareMatrix(std::size_t n, std::vector<double> data) : n_(n), data_(std::move(data)) {
    detail::require(data_.size() == n_ * n_, ErrorKind::invalid_argument, "matrix storage must hold n*n entries");
  }

  static SquareMatrix diagonal(std::span<const double> d) {
    std::vector<double> data(d.size() * d.size());
    for (std::size_t i = 0; i < d.size(); ++i) data[i * d.size() + i] = d[i];
    return {d.size(), std::move(data)};
  }

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }

  bool is_symmetric(double rel_tol = 1e-12) const noexcept {
    double scale = 0.0;
    for (double v : data_) scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if (std::fabs((*this)(i, j) - (*this)(j, i)) > rel_tol * scale) return false;
    return true;
  }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

/// alpha_n = n^2 pi^2: Dirichlet Laplacian eigenvalues on (0, 1).
inline std::vector<double> dirichlet_eigenvalues(std::size_t n_modes) {
  detail::require(n_modes >= 1, ErrorKind::invalid_argument, "n_modes must be >= 1");
  std::vector<double> out(n_modes);
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  for (std::size_t n = 1; n <= n_modes; ++n) out[n - 1] = static_cast<double>(n * n) * pi2;
  return out;
}

/// lambda_n = 1000 / n^2.
inline std::vector<double> paper_lambdas(std::size_t n_modes) {
  detail::require(n_modes >= 1, ErrorKind::invalid_argument, "n_modes must be >= 1");
  std::vector<double> out(n_modes);
  for (std::size_t n = 1; n <= n_modes; ++n) out[n - 1] = 1000.0 / static_cast<double>(n * n);
  return out;
}

/// D_{k,l} = b (alpha_k - alpha_l)^2 + 8 a^2 (alpha_k + alpha_l).
inline double d_denominator(const ModelParams& p, double alpha_k, double alpha_l) noexcept {
  const double diff = alpha_k - alpha_l;
  return p.b * diff * diff + 8.0 * p.a * p.a * (alpha_k + alpha_l);
}

/// Sum_k lambda_k c_k^2 for a coordinate vector c: <Qz, z> in the matching basis.
inline double q_norm2(std::span<const double> lambdas, std::span<const double> coords) {
  detail::require(lambdas.size() == coords.size(), ErrorKind::invalid_argument, "window and spectrum differ in size");
  CompensatedSum s;
  for (std::size_t k = 0; k < coords.size(); ++k) s += lambdas[k] * coords[k] * coords[k];
  return s.value();
}

/// <Q_inf z, z>_V in the diagonal case: Q1 / (4ab) + Q2 / (4a).
inline double q_infinity_quadratic_form(const ModelParams& p, const SpectralConfig& cfg, const Window& w) {
  detail::require(w.size() == cfg.n_modes(), ErrorKind::invalid_argument, "window and spectrum differ in size");
  const double q1 = q_norm2(cfg.lambdas(), w.z1);
  const double q2 = q_norm2(cfg.lambdas(), w.z2);
  return q1 / (4.0 * p.a * p.b) + q2 / (4.0 * p.a);
}

/// <Q_inf z, z>_V from the general double series with an arbitrary symmetric
/// noise covariance q(n, k) = <Q e_n, e_k>, truncated at the configured modes.
inline double q_infinity_general_quadratic_form(const ModelParams& p, const SpectralConfig& cfg,
                                                const SquareMatrix& q, const Window& w) {
  const std::size_t n_modes = cfg.n_modes();
  detail::require(q.size() == n_modes && w.size() == n_modes, ErrorKind::invalid_argument,
                  "matrix, window and spectrum differ in size");
  detail::require(q.is_symmetric(), ErrorKind::invalid_argument, "noise covariance must be symmetric");

  const auto alphas = cfg.alphas();
  const std::vector<double> x1 = w.z1_l2_coords(alphas);
  const auto& x2 = w.z2;
  const double a = p.a;
  const double b = p.b;

  CompensatedSum total;
  for (std::size_t n = 0; n < n_modes; ++n) {
    for (std::size_t k = 0; k < n_modes; ++k) {
      const double qnk = q(n, k);
      if (qnk == 0.0) continue;
      const double an = alphas[n];
      const double ak = alphas[k];
      const double den = b * b * (an - ak) * (an - ak) + 8.0 * a * a * b * (an + ak);
      // First component is paired with z1 in Dom((-A)^{1/2}): <e_k, z1>_Dom = alpha_k x1_k.
      const double first = 4.0 * a * an * x1[n] + b * (ak - an) * x2[n];
      const double second = b * an * (an - ak) * x1[n] + 2.0 * a * b * (an + ak) * x2[n];
      total += qnk / den * (first * ak * x1[k] + second * x2[k]);
    }
  }
  return total.value();
}

/// Stationary covariance of (u_n, v_n): diag(lambda / (4 a b alpha), lambda / (4 a)).
inline Mat2 stationary_mode_covariance(const ModelParams& p, double alpha_n, double lambda_n) noexcept {
  return Mat2::diag(lambda_n / (4.0 * p.a * p.b * alpha_n), lambda_n / (4.0 * p.a));
}

/// Drift matrix [[0, 1], [-b alpha, -2a]] of one mode.
inline Mat2 mode_drift(const ModelParams& p, double alpha_n) noexcept {
  return {0.0, 1.0, -p.b * alpha_n, -2.0 * p.a};
}

}  // namespace sdwave
