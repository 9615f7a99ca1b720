#pragma once

// Monte Carlo replication harness and the statistics reported for it.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "sdwave/asymptotics.hpp"
#include "sdwave/error.hpp"
#include "sdwave/estimators.hpp"
#include "sdwave/functionals.hpp"
#include "sdwave/simulator.hpp"

namespace sdwave {

inline double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

/// Blom plotting position (i - 3/8) / (n + 1/4) for the 1-based order statistic i.
inline double blom_position(std::size_t i, std::size_t n) {
  return (static_cast<double>(i) - 0.375) / (static_cast<double>(n) + 0.25);
}

struct ShapiroWilk {
  double w = 0.0;
  double p_value = 0.0;
};

/// Shapiro-Wilk W and its p-value, following Royston's (1995) approximation
/// for the coefficients and the null distribution. Valid for 3 <= n <= 5000.
inline ShapiroWilk shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3) throw Error(ErrorKind::insufficient_sample, "Shapiro-Wilk needs at least 3 observations");
  detail::require(n <= 5000, ErrorKind::invalid_argument, "Shapiro-Wilk approximation is valid up to n = 5000");

  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 0.0)) throw Error(ErrorKind::insufficient_sample, "sample has zero range");

  const auto poly = [](std::span<const double> c, double t) {
    double r = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) r = r * t + c[i];
    return r;
  };

  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = normal_quantile(blom_position(i + 1, n));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first_rest = 1;
    double fac = 0.0;
    if (n > 5) {
      first_rest = 2;
      const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first_rest; i < half; ++i) a[i] = -m[i] / fac;
  }

  // Scale by the range to keep the sums well conditioned.
  double mean = 0.0;
  for (double v : x) mean += v / range;
  mean /= an;
  double ssq = 0.0;
  for (double v : x) {
    const double d = v / range - mean;
    ssq += d * d;
  }
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]) / range;
  double w = num * num / ssq;
  w = std::min(w, 1.0);

  ShapiroWilk out;
  out.w = w;
  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;  // 6 / pi
    constexpr double stqr = 1.04719755119660;  // pi / 3
    out.p_value = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
    return out;
  }

  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  double y = std::log(1.0 - w);
  double mu = 0.0;
  double sigma = 0.0;
  if (n <= 11) {
    const double gamma = poly(g, an);
    if (y >= gamma) {
      out.p_value = 1e-99;
      return out;
    }
    y = -std::log(gamma - y);
    mu = poly(c3, an);
    sigma = std::exp(poly(c4, an));
  } else {
    const double xx = std::log(an);
    mu = poly(c5, xx);
    sigma = std::exp(poly(c6, xx));
  }
  out.p_value = boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(mu, sigma), y));
  return out;
}

struct QqPoint {
  double theoretical = 0.0;
  double empirical = 0.0;
};

/// Sorted sample paired with standard-normal quantiles at Blom positions.
inline std::vector<QqPoint> qq_points(std::span<const double> sample) {
  if (sample.empty()) throw Error(ErrorKind::insufficient_sample, "Q-Q plot needs a nonempty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  std::vector<QqPoint> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = {normal_quantile(blom_position(i + 1, x.size())), x[i]};
  return out;
}

/// Linear-interpolation quantile of a sample (the usual "type 7" definition).
inline double sample_quantile(std::span<const double> sample, double q) {
  if (sample.empty()) throw Error(ErrorKind::insufficient_sample, "quantile of an empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

struct McPlan {
  SimPlan base;
  std::size_t replications = 1;
  std::vector<EstimatorSpec> estimators;
  std::uint64_t seed_base = 0;
  Quadrature quadrature = Quadrature::left_riemann;
  // 0 picks the hardware concurrency.
  unsigned threads = 0;
};

struct EstimatorReport {
  EstimatorSpec spec;
  double truth = 0.0;
  std::size_t n_valid = 0;
  double mean = 0.0;
  std::optional<double> var;              // of sqrt(T) (estimate - truth)
  std::optional<double> var_theoretical;
  double rel_err_max = 0.0;
  double rel_err_p75 = 0.0;
  std::optional<ShapiroWilk> normality;
  std::vector<double> estimates;          // by replication; NaN where the formula failed
  std::vector<double> scaled;             // sqrt(T) (estimate - truth), valid entries only
};

struct McReport {
  double horizon = 0.0;
  std::size_t replications = 0;
  std::vector<EstimatorReport> estimators;
};

namespace detail {

// Final estimates of one replication on a plan restricted to the observed modes.
inline std::vector<double> run_replication(const SimPlan& reduced, std::span<const EstimatorSpec> specs,
                                           const ModelParams& known, Quadrature rule) {
  std::vector<ComponentAccumulators> accs;
  accs.reserve(specs.size());
  for (const EstimatorSpec& s : specs) accs.emplace_back(reduced.cfg, s.window, rule);
  std::vector<Observer*> observers;
  for (auto& acc : accs) observers.push_back(&acc);
  simulate(reduced, observers);

  std::vector<double> out(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      out[i] = evaluate(specs[i], accs[i].averages(), reduced.cfg, known);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::integration_diverged) throw;
      out[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

inline EstimatorReport summarize(const EstimatorSpec& spec, double truth, double horizon,
                                 std::vector<double> estimates) {
  EstimatorReport r;
  r.spec = spec;
  r.truth = truth;
  r.estimates = std::move(estimates);
  std::vector<double> valid, rel;
  for (double e : r.estimates) {
    if (!std::isfinite(e)) continue;
    valid.push_back(e);
    rel.push_back(std::fabs(e - truth) / truth);
    r.scaled.push_back(std::sqrt(horizon) * (e - truth));
  }
  r.n_valid = valid.size();
  if (valid.empty()) {
    r.mean = std::numeric_limits<double>::quiet_NaN();
    r.rel_err_max = r.rel_err_p75 = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  CompensatedSum sum;
  for (double e : valid) sum += e;
  r.mean = sum.value() / static_cast<double>(valid.size());
  if (r.scaled.size() >= 2) {
    CompensatedSum s1;
    for (double x : r.scaled) s1 += x;
    const double m = s1.value() / static_cast<double>(r.scaled.size());
    CompensatedSum s2;
    for (double x : r.scaled) s2 += (x - m) * (x - m);
    r.var = s2.value() / static_cast<double>(r.scaled.size() - 1);
  }
  r.rel_err_max = *std::max_element(rel.begin(), rel.end());
  r.rel_err_p75 = sample_quantile(rel, 0.75);
  if (r.scaled.size() >= 3) {
    try {
      r.normality = shapiro_wilk(r.scaled);
    } catch (const Error&) {
    }
  }
  return r;
}

}  // namespace detail

struct ReducedRun {
  SimPlan plan;
  std::vector<EstimatorSpec> estimators;
};

/// Restricts `plan` to the modes some estimator window touches and remaps the
/// windows onto the kept modes. Final estimates are unchanged.
inline ReducedRun reduce_to_support(const SimPlan& plan, std::span<const EstimatorSpec> estimators) {
  const std::size_t n_modes = plan.cfg.n_modes();
  std::set<std::size_t> modes;
  for (const EstimatorSpec& s : estimators) {
    detail::require(s.window.size() == n_modes, ErrorKind::invalid_argument, "window and spectrum differ in size");
    for (std::size_t m : s.support()) modes.insert(m);
  }
  detail::require(!modes.empty(), ErrorKind::invalid_window, "all windows are zero");
  const std::vector<std::size_t> kept(modes.begin(), modes.end());

  ReducedRun out{restrict_plan(plan, kept), {}};
  for (const EstimatorSpec& s : estimators) {
    EstimatorSpec r = s;
    r.window = Window::zero(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      r.window.z1[i] = s.window.z1[kept[i] - 1];
      r.window.z2[i] = s.window.z2[kept[i] - 1];
    }
    out.estimators.push_back(std::move(r));
  }
  return out;
}

/// Runs `replications` independent trajectories and aggregates every
/// estimator at the plan horizon. Replication r draws its noise from
/// (seed_base, r); results are folded in replication order, so the report
/// does not depend on the thread count. Only the modes some window touches
/// are integrated.
inline McReport run_monte_carlo(const McPlan& plan) {
  detail::require(plan.replications >= 1, ErrorKind::invalid_argument, "replications must be >= 1");
  detail::require(!plan.estimators.empty(), ErrorKind::invalid_argument, "no estimators configured");
  plan.base.validate();

  ReducedRun reduced_run = reduce_to_support(plan.base, plan.estimators);
  SimPlan& reduced = reduced_run.plan;
  reduced.seed = plan.seed_base;
  const std::vector<EstimatorSpec>& reduced_specs = reduced_run.estimators;

  const std::size_t reps = plan.replications;
  std::vector<std::vector<double>> results(reps);
  std::vector<std::exception_ptr> errors(reps);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      try {
        SimPlan p = reduced;
        p.replication = r;
        results[r] = detail::run_replication(p, reduced_specs, plan.base.params, plan.quadrature);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  unsigned threads = plan.threads != 0 ? plan.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, reps));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (std::size_t r = 0; r < reps; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const Error& e) {
      throw Error(e.kind(), "replication " + std::to_string(r) + ": " + e.what());
    }
  }

  const double horizon = static_cast<double>(reduced.n_steps()) * reduced.dt;
  McReport report;
  report.horizon = horizon;
  report.replications = reps;
  for (std::size_t i = 0; i < plan.estimators.size(); ++i) {
    const EstimatorSpec& spec = plan.estimators[i];
    const double truth = estimates_damping(spec.kind) ? plan.base.params.a : plan.base.params.b;
    std::vector<double> column(reps);
    for (std::size_t r = 0; r < reps; ++r) column[r] = results[r][i];
    EstimatorReport er = detail::summarize(spec, truth, horizon, std::move(column));
    if (auto lv = limiting_variance(spec, plan.base.params, plan.base.cfg)) er.var_theoretical = lv->value;
    report.estimators.push_back(std::move(er));
  }
  return report;
}

namespace detail {

inline void write_optional(std::ostream& os, const std::optional<double>& v) {
  if (v) {
    write_double(os, *v);
  } else {
    os << "nan";
  }
}

}  // namespace detail

/// `estimator,mean,var,var_theoretical,rel_err_max,rel_err_p75,sw_w,sw_p`.
inline void write_report_csv(std::ostream& os, const McReport& report) {
  os << "estimator,mean,var,var_theoretical,rel_err_max,rel_err_p75,sw_w,sw_p\n";
  for (const EstimatorReport& e : report.estimators) {
    os << e.spec.label() << ',';
    detail::write_double(os, e.mean);
    os << ',';
    detail::write_optional(os, e.var);
    os << ',';
    detail::write_optional(os, e.var_theoretical);
    os << ',';
    detail::write_double(os, e.rel_err_max);
    os << ',';
    detail::write_double(os, e.rel_err_p75);
    os << ',';
    detail::write_optional(os, e.normality ? std::optional<double>(e.normality->w) : std::nullopt);
    os << ',';
    detail::write_optional(os, e.normality ? std::optional<double>(e.normality->p_value) : std::nullopt);
    os << '\n';
  }
}

/// `theoretical,empirical`.
inline void write_qq_csv(std::ostream& os, std::span<const QqPoint> points) {
  os << "theoretical,empirical\n";
  for (const QqPoint& p : points) {
    detail::write_double(os, p.theoretical);
    os << ',';
    detail::write_double(os, p.empirical);
    os << '\n';
  }
}

/// `replication,estimate,scaled` with scaled = sqrt(T) (estimate - truth).
inline void write_samples_csv(std::ostream& os, const EstimatorReport& e, double horizon) {
  os << "replication,estimate,scaled\n";
  for (std::size_t r = 0; r < e.estimates.size(); ++r) {
    os << r << ',';
    detail::write_double(os, e.estimates[r]);
    os << ',';
    detail::write_double(os, std::sqrt(horizon) * (e.estimates[r] - e.truth));
    os << '\n';
  }
}

/// Reads the `scaled` column of a samples file, skipping missing values.
inline std::vector<double> read_scaled_samples(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "replication,estimate,scaled")
    throw Error(ErrorKind::io_error, "not a samples file (bad header)");
  std::vector<double> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto pos = line.rfind(',');
    if (pos == std::string::npos) throw Error(ErrorKind::io_error, "malformed samples row: " + line);
    const std::string field = line.substr(pos + 1);
    double value = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
      throw Error(ErrorKind::io_error, "malformed number: " + field);
    if (std::isfinite(value)) out.push_back(value);
  }
  return out;
}

}  // namespace sdwave
