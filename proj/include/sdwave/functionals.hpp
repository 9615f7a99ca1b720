#pragma once

// Streaming time averages of quadratic window functionals.
//
// For a window z = (z1, z2) the observed scalars are
//   p1(t) = <X_1(t), z1>_{Dom((-A)^{1/2})} = sum_k sqrt(alpha_k) u_k z1_k
//   p2(t) = <X_2(t), z2>_{L^2}             = sum_k v_k z2_k
// and J_T = (1/T) int_0^T (p1 + p2)^2 dt. All accumulators are mergeable
// over adjacent time spans.

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "sdwave/error.hpp"
#include "sdwave/model.hpp"
#include "sdwave/numeric.hpp"
#include "sdwave/simulator.hpp"

namespace sdwave {

enum class Quadrature { left_riemann, trapezoid };

/// (<X_1, z1>_{Dom((-A)^{1/2})}, <X_2, z2>_{L^2}).
inline std::pair<double, double> inner_products(const ModeState& state, const SpectralConfig& cfg, const Window& w) {
  const std::size_t n = cfg.n_modes();
  detail::require(state.u.size() == n && state.v.size() == n && w.size() == n, ErrorKind::invalid_argument,
                  "state, window and spectrum differ in size");
  double first = 0.0;
  double second = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    first += std::sqrt(cfg.alpha(k)) * state.u[k] * w.z1[k];
    second += state.v[k] * w.z2[k];
  }
  return {first, second};
}

/// Precomputed sparse form of a window for per-step projection.
class WindowProjector {
 public:
  WindowProjector(const SpectralConfig& cfg, const Window& w) {
    detail::require(w.size() == cfg.n_modes(), ErrorKind::invalid_argument, "window and spectrum differ in size");
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w.z1[k] != 0.0) position_.push_back({k, std::sqrt(cfg.alpha(k)) * w.z1[k]});
      if (w.z2[k] != 0.0) velocity_.push_back({k, w.z2[k]});
    }
  }

  std::pair<double, double> operator()(const ModeState& state) const noexcept {
    double first = 0.0;
    double second = 0.0;
    for (const auto& [k, c] : position_) first += c * state.u[k];
    for (const auto& [k, c] : velocity_) second += c * state.v[k];
    return {first, second};
  }

 private:
  struct Term {
    std::size_t index;
    double coef;
  };
  std::vector<Term> position_;
  std::vector<Term> velocity_;
};

/// Time integral of a sampled scalar under a fixed quadrature rule. Forms a
/// monoid under `merge` with the default-constructed value as identity.
class ScalarIntegrator {
 public:
  ScalarIntegrator() = default;
  explicit ScalarIntegrator(Quadrature rule) : rule_(rule) {}

  void start(double value) noexcept {
    first_ = value;
    last_ = value;
    started_ = true;
  }

  /// Advances by dt to a new sample `value`.
  void step(double value, double dt) noexcept {
    const double weight = rule_ == Quadrature::left_riemann ? last_ : 0.5 * (last_ + value);
    integral_ += weight * dt;
    elapsed_ += dt;
    last_ = value;
  }

  double integral() const noexcept { return integral_.value(); }
  double elapsed() const noexcept { return elapsed_.value(); }
  double average() const noexcept { return integral() / elapsed(); }
  bool started() const noexcept { return started_; }
  Quadrature rule() const noexcept { return rule_; }

  /// Joins `b`, which must begin where `a` ends.
  friend ScalarIntegrator merge(const ScalarIntegrator& a, const ScalarIntegrator& b) {
    if (!b.started_) return a;
    if (!a.started_) return b;
    detail::require(a.rule_ == b.rule_, ErrorKind::invalid_argument, "quadrature rules differ");
    detail::require(a.last_ == b.first_, ErrorKind::invalid_argument, "spans are not adjacent");
    ScalarIntegrator out = a;
    out.integral_ += b.integral_;
    out.elapsed_ += b.elapsed_;
    out.last_ = b.last_;
    return out;
  }

 private:
  Quadrature rule_ = Quadrature::left_riemann;
  CompensatedSum integral_;
  CompensatedSum elapsed_;
  double first_ = 0.0;
  double last_ = 0.0;
  bool started_ = false;
};

/// Accumulates J_t = (1/t) int_0^t <X(s), z>_V^2 ds.
class QuadraticAccumulator final : public Observer {
 public:
  QuadraticAccumulator(const SpectralConfig& cfg, Window w, Quadrature rule = Quadrature::left_riemann)
      : window_(std::move(w)), projector_(cfg, window_), integrator_(rule) {}

  void on_start(const ModeState& state) override { integrator_.start(value(state)); }
  void on_step(const ModeState& state, double dt) override { integrator_.step(value(state), dt); }

  double running_integral() const noexcept { return integrator_.integral(); }
  double elapsed() const noexcept { return integrator_.elapsed(); }
  double average() const noexcept { return integrator_.average(); }
  const Window& window() const noexcept { return window_; }

  friend QuadraticAccumulator merge(const QuadraticAccumulator& a, const QuadraticAccumulator& b) {
    detail::require(a.window_.z1 == b.window_.z1 && a.window_.z2 == b.window_.z2, ErrorKind::invalid_argument,
                    "windows differ");
    QuadraticAccumulator out = a;
    out.integrator_ = merge(a.integrator_, b.integrator_);
    return out;
  }

 private:
  double value(const ModeState& state) const noexcept {
    const auto [p1, p2] = projector_(state);
    const double s = p1 + p2;
    return s * s;
  }

  Window window_;
  WindowProjector projector_;
  ScalarIntegrator integrator_;
};

/// Time averages of p1^2, p2^2 and p1 p2. J = j1 + j2 + 2 cross.
struct WindowAverages {
  double j1 = 0.0;
  double j2 = 0.0;
  double cross = 0.0;

  double j_total() const noexcept { return j1 + j2 + 2.0 * cross; }
};

/// Separate accumulators for the two window components and their cross term.
class ComponentAccumulators final : public Observer {
 public:
  ComponentAccumulators(const SpectralConfig& cfg, Window w, Quadrature rule = Quadrature::left_riemann)
      : window_(std::move(w)), projector_(cfg, window_), j1_(rule), j2_(rule), cross_(rule) {}

  void on_start(const ModeState& state) override {
    const auto [p1, p2] = projector_(state);
    j1_.start(p1 * p1);
    j2_.start(p2 * p2);
    cross_.start(p1 * p2);
  }

  void on_step(const ModeState& state, double dt) override {
    const auto [p1, p2] = projector_(state);
    j1_.step(p1 * p1, dt);
    j2_.step(p2 * p2, dt);
    cross_.step(p1 * p2, dt);
  }

  WindowAverages averages() const noexcept { return {j1_.average(), j2_.average(), cross_.average()}; }
  double j1() const noexcept { return j1_.average(); }
  double j2() const noexcept { return j2_.average(); }
  double cross() const noexcept { return cross_.average(); }
  double elapsed() const noexcept { return j1_.elapsed(); }
  const Window& window() const noexcept { return window_; }

  friend ComponentAccumulators merge(const ComponentAccumulators& a, const ComponentAccumulators& b) {
    detail::require(a.window_.z1 == b.window_.z1 && a.window_.z2 == b.window_.z2, ErrorKind::invalid_argument,
                    "windows differ");
    ComponentAccumulators out = a;
    out.j1_ = merge(a.j1_, b.j1_);
    out.j2_ = merge(a.j2_, b.j2_);
    out.cross_ = merge(a.cross_, b.cross_);
    return out;
  }

 private:
  Window window_;
  WindowProjector projector_;
  ScalarIntegrator j1_, j2_, cross_;
};

/// Time-average of the product of two arbitrary scalar projections,
/// used for cross terms between distinct windows.
class ProductAverager final : public Observer {
 public:
  ProductAverager(const SpectralConfig& cfg, const Window& left, const Window& right,
                  Quadrature rule = Quadrature::left_riemann)
      : left_(cfg, left), right_(cfg, right), product_(rule), left_sq_(rule), right_sq_(rule) {}

  void on_start(const ModeState& state) override {
    const double l = total(left_, state);
    const double r = total(right_, state);
    product_.start(l * r);
    left_sq_.start(l * l);
    right_sq_.start(r * r);
  }

  void on_step(const ModeState& state, double dt) override {
    const double l = total(left_, state);
    const double r = total(right_, state);
    product_.step(l * r, dt);
    left_sq_.step(l * l, dt);
    right_sq_.step(r * r, dt);
  }

  double product() const noexcept { return product_.average(); }
  double left_square() const noexcept { return left_sq_.average(); }
  double right_square() const noexcept { return right_sq_.average(); }

 private:
  static double total(const WindowProjector& proj, const ModeState& state) noexcept {
    const auto [p1, p2] = proj(state);
    return p1 + p2;
  }

  WindowProjector left_, right_;
  ScalarIntegrator product_, left_sq_, right_sq_;
};

struct Snapshot {
  double t = 0.0;
  WindowAverages averages;
};

/// Feeds a ComponentAccumulators and records its averages every `stride` steps.
class SnapshotRecorder final : public Observer {
 public:
  SnapshotRecorder(const SpectralConfig& cfg, Window w, std::int64_t stride, Quadrature rule = Quadrature::left_riemann)
      : acc_(cfg, std::move(w), rule), stride_(stride) {
    detail::require(stride >= 1, ErrorKind::invalid_argument, "stride must be >= 1");
  }

  void on_start(const ModeState& state) override { acc_.on_start(state); }

  void on_step(const ModeState& state, double dt) override {
    acc_.on_step(state, dt);
    if (++step_ % stride_ == 0) snapshots_.push_back({state.t, acc_.averages()});
  }

  const std::vector<Snapshot>& snapshots() const noexcept { return snapshots_; }
  const ComponentAccumulators& accumulators() const noexcept { return acc_; }

 private:
  ComponentAccumulators acc_;
  std::int64_t stride_;
  std::int64_t step_ = 0;
  std::vector<Snapshot> snapshots_;
};

/// `t,J_t` rows.
inline void write_j_csv(std::ostream& os, std::span<const Snapshot> snapshots) {
  os << "t,J_t\n";
  for (const Snapshot& s : snapshots) {
    detail::write_double(os, s.t);
    os << ',';
    detail::write_double(os, s.averages.j_total());
    os << '\n';
  }
}

}  // namespace sdwave
