#pragma once

// Time integration of the truncated mode system.
//
// Two schemes share one noise layout: every mode owns a primary Gaussian
// stream, which drives the velocity increment in both schemes, and an
// auxiliary stream, which only the exact scheme consumes. Running the same
// plan with either scheme therefore couples both trajectories to the same
// driving noise.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "sdwave/error.hpp"
#include "sdwave/model.hpp"
#include "sdwave/numeric.hpp"

namespace sdwave {

/// Coordinates u_n = <X_1, e_n>, v_n = <X_2, e_n> at model time t.
struct ModeState {
  std::vector<double> u;
  std::vector<double> v;
  double t = 0.0;

  std::size_t n_modes() const noexcept { return u.size(); }
};

enum class Scheme { euler, exact };

/// Exact one-step law of a single mode: x' = mean_matrix x + noise,
/// noise ~ N(0, noise_cov).
struct ExactTransition {
  Mat2 mean_matrix;
  Mat2 noise_cov;
  // Factor F with F F^T = noise_cov, ordered velocity-first: the first column
  // multiplies the primary Gaussian and is the only one that reaches v.
  Mat2 noise_factor;
};

/// exp(M h) for M = [[0, 1], [-b alpha, -2a]] in real closed form.
inline Mat2 transition_matrix(const ModelParams& p, double alpha, double h) {
  const double a = p.a;
  const double beta = p.b * alpha;
  const double disc = a * a - beta;
  // e^{-ah} * cosh-like and e^{-ah} * sinh-like / root factors.
  double c = 0.0;
  double s = 0.0;
  if (disc > 0.0) {
    const double delta = std::sqrt(disc);
    if (delta * h < 20.0) {
      const double damp = std::exp(-a * h);
      c = damp * std::cosh(delta * h);
      s = damp * std::sinh(delta * h) / delta;
    } else {
      const double slow = std::exp((delta - a) * h);
      const double fast = std::exp(-(delta + a) * h);
      c = 0.5 * (slow + fast);
      s = 0.5 * (slow - fast) / delta;
    }
  } else if (disc < 0.0) {
    const double omega = std::sqrt(-disc);
    const double damp = std::exp(-a * h);
    c = damp * std::cos(omega * h);
    s = damp * std::sin(omega * h) / omega;
  } else {
    const double damp = std::exp(-a * h);
    c = damp;
    s = damp * h;
  }
  return {c + a * s, s, -beta * s, c - a * s};
}

namespace detail {

// Integral of e^{Ms} diag(0, lambda) e^{M^T s} over [0, h]. A Taylor series
// on a short base step followed by doubling, C(2h) = C(h) + e^{Mh} C(h) e^{M^T h},
// keeps every diagonal entry a sum of non-negative terms.
inline Mat2 mode_noise_covariance(const ModelParams& p, double alpha, double lambda, double dt) {
  const Mat2 m = mode_drift(p, alpha);
  const double scale = 2.0 * m.max_abs();
  double h = dt;
  int doublings = 0;
  while (scale * h > 0.05) {
    h *= 0.5;
    ++doublings;
  }

  const Mat2 source = Mat2::diag(0.0, lambda);
  Mat2 term = source;
  double coef = h;
  Mat2 cov = h * source;
  for (int k = 1; k < 40; ++k) {
    Mat2 next = m * term + term * m.transpose();
    next.xy = next.yx = 0.5 * (next.xy + next.yx);
    term = next;
    coef *= h / static_cast<double>(k + 1);
    const Mat2 inc = coef * term;
    cov = cov + inc;
    if (inc.max_abs() <= 1e-20 * cov.max_abs() && k >= 2) break;
  }

  for (int i = 0; i < doublings; ++i) {
    cov = cov + congruence(transition_matrix(p, alpha, h), cov);
    h *= 2.0;
  }
  return cov;
}

}  // namespace detail

inline ExactTransition exact_transition(const ModelParams& p, double alpha_n, double lambda_n, double dt) {
  detail::require(dt > 0.0 && std::isfinite(dt), ErrorKind::invalid_argument, "dt must be > 0");
  ExactTransition tr;
  tr.mean_matrix = transition_matrix(p, alpha_n, dt);
  tr.noise_cov = detail::mode_noise_covariance(p, alpha_n, lambda_n, dt);

  const Mat2& c = tr.noise_cov;
  if (c.yy > 0.0) {
    const double fv = std::sqrt(c.yy);
    const double fu1 = c.xy / fv;
    const double schur = c.xx - c.xy * c.xy / c.yy;
    const double fu2 = schur > 0.0 ? std::sqrt(schur) : 0.0;
    tr.noise_factor = {fu1, fu2, fv, 0.0};
  }
  return tr;
}

namespace detail {

inline void check_finite(const ModeState& state) {
  for (std::size_t k = 0; k < state.u.size(); ++k)
    if (!std::isfinite(state.u[k]) || !std::isfinite(state.v[k]))
      throw Error(ErrorKind::integration_diverged, "non-finite state at t = " + std::to_string(state.t));
}

// Per-mode Euler coefficients: stiffness b alpha_n and noise scale sqrt(lambda_n dt).
struct EulerCoefficients {
  std::vector<double> stiffness;
  std::vector<double> noise_scale;
  double damping2 = 0.0;

  EulerCoefficients(const ModelParams& p, const SpectralConfig& cfg, double dt) : damping2(2.0 * p.a) {
    for (std::size_t k = 0; k < cfg.n_modes(); ++k) {
      stiffness.push_back(p.b * cfg.alpha(k));
      noise_scale.push_back(std::sqrt(cfg.lambda(k) * dt));
    }
  }
};

inline void advance_euler(ModeState& state, const EulerCoefficients& c, double dt, std::span<const double> g) {
  for (std::size_t k = 0; k < state.u.size(); ++k) {
    const double u = state.u[k];
    const double v = state.v[k];
    state.u[k] = u + v * dt;
    state.v[k] = v + (-c.stiffness[k] * u - c.damping2 * v) * dt + c.noise_scale[k] * g[k];
  }
  state.t += dt;
}

inline void advance_exact(ModeState& state, std::span<const ExactTransition> transitions, double dt,
                          std::span<const double> primary, std::span<const double> auxiliary) {
  for (std::size_t k = 0; k < state.u.size(); ++k) {
    const Mat2& m = transitions[k].mean_matrix;
    const Mat2& f = transitions[k].noise_factor;
    const double u = state.u[k];
    const double v = state.v[k];
    state.u[k] = m.xx * u + m.xy * v + f.xx * primary[k] + f.xy * auxiliary[k];
    state.v[k] = m.yx * u + m.yy * v + f.yx * primary[k];
  }
  state.t += dt;
}

}  // namespace detail

/// One Euler-Maruyama step for all modes. `gaussians` holds one standard
/// normal draw per mode.
inline ModeState euler_step(const ModeState& state, const ModelParams& p, const SpectralConfig& cfg, double dt,
                            std::span<const double> gaussians) {
  const std::size_t n = cfg.n_modes();
  detail::require(dt > 0.0, ErrorKind::invalid_argument, "dt must be > 0");
  detail::require(state.u.size() == n && state.v.size() == n && gaussians.size() == n,
                  ErrorKind::invalid_argument, "state, noise and spectrum differ in size");
  ModeState next = state;
  detail::advance_euler(next, detail::EulerCoefficients(p, cfg, dt), dt, gaussians);
  detail::check_finite(next);
  return next;
}

/// One exact step for all modes, with primary and auxiliary standard normal draws.
inline ModeState exact_step(const ModeState& state, std::span<const ExactTransition> transitions, double dt,
                            std::span<const double> primary, std::span<const double> auxiliary) {
  const std::size_t n = transitions.size();
  detail::require(state.u.size() == n && state.v.size() == n && primary.size() == n && auxiliary.size() == n,
                  ErrorKind::invalid_argument, "state, noise and transitions differ in size");
  ModeState next = state;
  detail::advance_exact(next, transitions, dt, primary, auxiliary);
  detail::check_finite(next);
  return next;
}

/// Standard normal stream keyed by (seed, replication, mode, channel).
class NoiseStream {
 public:
  enum Channel : std::uint32_t { primary = 0, auxiliary = 1 };

  NoiseStream(std::uint64_t seed, std::uint64_t replication, std::uint64_t mode, Channel channel) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replication), static_cast<std::uint32_t>(replication >> 32),
                      static_cast<std::uint32_t>(mode), static_cast<std::uint32_t>(mode >> 32),
                      static_cast<std::uint32_t>(channel)};
    engine_.seed(seq);
  }

  double operator()() { return normal_(engine_); }

 private:
  boost::random::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
};

struct SimPlan {
  ModelParams params;
  SpectralConfig cfg;
  InitialCondition x0;
  double horizon = 1.0;
  double dt = 1e-3;
  Scheme scheme = Scheme::euler;
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
  // Global mode number (1-based) behind each local mode; empty means 1..N.
  // Lets a plan reduced to a few modes reuse the noise those modes get in the full plan.
  std::vector<std::size_t> mode_numbers;

  std::size_t mode_number(std::size_t index) const {
    return mode_numbers.empty() ? index + 1 : mode_numbers.at(index);
  }

  std::int64_t n_steps() const {
    detail::require(std::isfinite(dt) && dt > 0.0, ErrorKind::invalid_argument, "dt must be > 0");
    detail::require(std::isfinite(horizon) && dt < horizon, ErrorKind::invalid_argument, "dt must be < horizon");
    const double steps = std::round(horizon / dt);
    detail::require(steps < 9.0e18, ErrorKind::invalid_argument, "step count overflows");
    return static_cast<std::int64_t>(steps);
  }

  void validate() const {
    (void)n_steps();
    const std::size_t n = cfg.n_modes();
    detail::require(x0.u0.size() == n && x0.v0.size() == n, ErrorKind::invalid_argument,
                    "initial condition and spectrum differ in size");
    for (std::size_t k = 0; k < n; ++k)
      detail::require(std::isfinite(x0.u0[k]) && std::isfinite(x0.v0[k]), ErrorKind::invalid_argument,
                      "initial condition must be finite");
    detail::require(mode_numbers.empty() || mode_numbers.size() == n, ErrorKind::invalid_argument,
                    "mode_numbers and spectrum differ in size");
  }
};

/// Keeps only the listed modes (1-based, ascending). Noise streams follow the
/// global mode number, so each kept mode sees the same noise as in `plan`.
inline SimPlan restrict_plan(const SimPlan& plan, std::span<const std::size_t> modes) {
  detail::require(!modes.empty(), ErrorKind::invalid_argument, "at least one mode must be kept");
  std::vector<double> alphas, lambdas, u0, v0;
  std::vector<std::size_t> numbers;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::size_t m = modes[i];
    detail::require(m >= 1 && m <= plan.cfg.n_modes(), ErrorKind::invalid_argument, "mode number out of range");
    detail::require(i == 0 || m > modes[i - 1], ErrorKind::invalid_argument, "modes must be ascending");
    alphas.push_back(plan.cfg.alpha(m - 1));
    lambdas.push_back(plan.cfg.lambda(m - 1));
    u0.push_back(plan.x0.u0.at(m - 1));
    v0.push_back(plan.x0.v0.at(m - 1));
    numbers.push_back(plan.mode_number(m - 1));
  }
  SimPlan out{plan.params, SpectralConfig(std::move(alphas), std::move(lambdas)), {std::move(u0), std::move(v0)},
              plan.horizon, plan.dt, plan.scheme, plan.seed, plan.replication, std::move(numbers)};
  return out;
}

/// Receives the state at t = 0 and after every step.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_start(const ModeState& state) = 0;
  virtual void on_step(const ModeState& state, double dt) = 0;
};

/// Advances plan.x0 from t = 0 to t = round(T/dt) * dt. Deterministic in the plan.
inline ModeState simulate(const SimPlan& plan, std::span<Observer* const> observers) {
  plan.validate();
  const std::size_t n = plan.cfg.n_modes();
  const std::int64_t steps = plan.n_steps();
  const double dt = plan.dt;

  std::vector<NoiseStream> primary_streams, auxiliary_streams;
  primary_streams.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    primary_streams.emplace_back(plan.seed, plan.replication, plan.mode_number(k), NoiseStream::primary);

  std::vector<ExactTransition> transitions;
  if (plan.scheme == Scheme::exact) {
    auxiliary_streams.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      auxiliary_streams.emplace_back(plan.seed, plan.replication, plan.mode_number(k), NoiseStream::auxiliary);
      transitions.push_back(exact_transition(plan.params, plan.cfg.alpha(k), plan.cfg.lambda(k), dt));
    }
  }

  ModeState state{plan.x0.u0, plan.x0.v0, 0.0};
  for (Observer* obs : observers) obs->on_start(state);

  const detail::EulerCoefficients euler(plan.params, plan.cfg, dt);
  std::vector<double> g1(n), g2(n);
  for (std::int64_t step = 1; step <= steps; ++step) {
    for (std::size_t k = 0; k < n; ++k) g1[k] = primary_streams[k]();
    if (plan.scheme == Scheme::exact) {
      for (std::size_t k = 0; k < n; ++k) g2[k] = auxiliary_streams[k]();
      detail::advance_exact(state, transitions, dt, g1, g2);
    } else {
      detail::advance_euler(state, euler, dt, g1);
    }
    state.t = static_cast<double>(step) * dt;
    detail::check_finite(state);
    for (Observer* obs : observers) obs->on_step(state, dt);
  }
  return state;
}

inline ModeState simulate(const SimPlan& plan, std::initializer_list<Observer*> observers = {}) {
  return simulate(plan, std::span<Observer* const>(observers.begin(), observers.size()));
}

namespace detail {

inline void write_double(std::ostream& os, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  os.write(buf, res.ptr - buf);
}

}  // namespace detail

/// Dumps `t,u_1..u_N,v_1..v_N` at t = 0 and every `stride` steps.
class TrajectoryCsvWriter final : public Observer {
 public:
  TrajectoryCsvWriter(std::ostream& os, std::int64_t stride) : os_(os), stride_(stride) {
    detail::require(stride >= 1, ErrorKind::invalid_argument, "stride must be >= 1");
  }

  void on_start(const ModeState& state) override {
    const std::size_t n = state.n_modes();
    os_ << 't';
    for (std::size_t k = 1; k <= n; ++k) os_ << ",u_" << k;
    for (std::size_t k = 1; k <= n; ++k) os_ << ",v_" << k;
    os_ << '\n';
    write_row(state);
  }

  void on_step(const ModeState& state, double) override {
    if (++step_ % stride_ == 0) write_row(state);
  }

 private:
  void write_row(const ModeState& state) {
    detail::write_double(os_, state.t);
    for (double x : state.u) {
      os_ << ',';
      detail::write_double(os_, x);
    }
    for (double x : state.v) {
      os_ << ',';
      detail::write_double(os_, x);
    }
    os_ << '\n';
  }

  std::ostream& os_;
  std::int64_t stride_;
  std::int64_t step_ = 0;
};

}  // namespace sdwave
