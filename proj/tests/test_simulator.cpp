#include <cfloat>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <gtest/gtest.h>

#include "sdwave/simulator.hpp"

namespace {

using namespace sdwave;

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

Eigen::Matrix2d to_eigen(const Mat2& m) {
  Eigen::Matrix2d e;
  e << m.xx, m.xy, m.yx, m.yy;
  return e;
}

// Composite Simpson rule for int_0^h e^{Ms} diag(0, lambda) e^{M^T s} ds.
Eigen::Matrix2d simpson_noise_cov(const ModelParams& p, double alpha, double lambda, double h, int panels) {
  const Eigen::Matrix2d m = to_eigen(mode_drift(p, alpha));
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
  g(1, 1) = lambda;
  const double step = h / panels;
  Eigen::Matrix2d sum = Eigen::Matrix2d::Zero();
  for (int i = 0; i <= panels; ++i) {
    const Eigen::Matrix2d e = (m * (i * step)).exp();
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * e * g * e.transpose();
  }
  return sum * step / 3.0;
}

SimPlan paper_plan(double horizon, double dt, Scheme scheme, std::uint64_t seed) {
  SpectralConfig cfg(dirichlet_eigenvalues(10), paper_lambdas(10));
  return SimPlan{ModelParams(1.0, 0.2), cfg, InitialCondition::constant(10, 1.0), horizon, dt, scheme, seed, 0, {}};
}

class Recorder final : public Observer {
 public:
  void on_start(const ModeState& s) override { states.push_back(s); }
  void on_step(const ModeState& s, double) override { states.push_back(s); }
  std::vector<ModeState> states;
};

TEST(EulerStep, ZeroIsFixedPoint) {
  const SpectralConfig cfg({kPi2, 4 * kPi2}, {1.0, 1.0});
  const ModeState zero{{0.0, 0.0}, {0.0, 0.0}, 0.0};
  const std::vector<double> g{0.0, 0.0};
  const ModeState next = euler_step(zero, ModelParams(1.0, 0.2), cfg, 1e-3, g);
  EXPECT_EQ(next.u, zero.u);
  EXPECT_EQ(next.v, zero.v);
  EXPECT_DOUBLE_EQ(next.t, 1e-3);
}

TEST(EulerStep, HandArithmetic) {
  const SpectralConfig cfg({kPi2}, {1000.0});
  const ModeState s{{1.0}, {1.0}, 0.0};
  const std::vector<double> g{0.0};
  const ModeState next = euler_step(s, ModelParams(1.0, 0.2), cfg, 1e-4, g);
  EXPECT_DOUBLE_EQ(next.u[0], 1.0001);
  EXPECT_NEAR(next.v[0], 1.0 + (-0.2 * kPi2 - 2.0) * 1e-4, 1e-15);
  EXPECT_NEAR(next.v[0], 0.99960, 1e-5);

  const std::vector<double> g1{1.5};
  const ModeState noisy = euler_step(s, ModelParams(1.0, 0.2), cfg, 1e-4, g1);
  EXPECT_NEAR(noisy.v[0] - next.v[0], std::sqrt(1000.0 * 1e-4) * 1.5, 1e-14);
}

TEST(EulerStep, DeterministicPartDecays) {
  const SpectralConfig cfg({kPi2, 4 * kPi2}, {1.0, 1.0});
  const ModelParams p(1.0, 0.2);
  ModeState s{{1.0, -2.0}, {1.0, 0.5}, 0.0};
  const std::vector<double> g{0.0, 0.0};
  for (int i = 0; i < 1000000; ++i) s = euler_step(s, p, cfg, 1e-4, g);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_LT(std::fabs(s.u[k]), 1e-20);
    EXPECT_LT(std::fabs(s.v[k]), 1e-20);
  }
}

TEST(EulerStep, EnergyDissipatesUpToSecondOrder) {
  const ModelParams p(0.7, 0.3);
  const double alpha = 9.0;
  const SpectralConfig cfg({alpha}, {1.0});
  const double dt = 1e-3;
  const double k = std::pow(1.0 + p.b * alpha + 4.0 * p.a * p.a, 2);
  ModeState s{{1.0}, {-3.0}, 0.0};
  const std::vector<double> g{0.0};
  for (int i = 0; i < 20000; ++i) {
    const double e0 = p.b * alpha * s.u[0] * s.u[0] + s.v[0] * s.v[0];
    s = euler_step(s, p, cfg, dt, g);
    const double e1 = p.b * alpha * s.u[0] * s.u[0] + s.v[0] * s.v[0];
    ASSERT_LE(e1, e0 * (1.0 + k * dt * dt)) << "step " << i;
  }
}

TEST(EulerStep, NonFiniteStateIsDivergence) {
  const SpectralConfig cfg({1.0}, {1.0});
  const ModeState s{{DBL_MAX}, {DBL_MAX}, 0.0};
  const std::vector<double> g{0.0};
  try {
    euler_step(s, ModelParams(1.0, 1.0), cfg, 10.0, g);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::integration_diverged);
  }
  EXPECT_THROW(euler_step(s, ModelParams(1.0, 1.0), cfg, 1.0, std::vector<double>{}), Error);
}

TEST(TransitionMatrix, MatchesMatrixExponentialInAllRegimes) {
  struct Case {
    double a, b, alpha, h;
  };
  // Overdamped, critical (a^2 = b alpha) and oscillatory modes, plus a stiff long step.
  const Case cases[] = {{3.0, 0.5, 2.0, 0.1}, {1.0, 1.0, 1.0, 0.7}, {1.0, 0.2, kPi2, 0.3},
                        {1.0, 0.2, 100 * kPi2, 1e-4}, {10.0, 0.1, 1.0, 5.0}, {2.0, 1.0, 4.0 + 1e-9, 0.2}};
  for (const auto& c : cases) {
    const ModelParams p(c.a, c.b);
    const Eigen::Matrix2d expected = (to_eigen(mode_drift(p, c.alpha)) * c.h).exp();
    const Eigen::Matrix2d got = to_eigen(transition_matrix(p, c.alpha, c.h));
    EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, expected.cwiseAbs().maxCoeff()))
        << "a=" << c.a << " b=" << c.b << " alpha=" << c.alpha;
  }
}

TEST(ExactTransition, ShortTimeExpansion) {
  const ModelParams p(1.0, 0.2);
  const Mat2 m = mode_drift(p, kPi2);
  double previous = 0.0;
  for (double dt : {1e-2, 1e-3, 1e-4}) {
    const ExactTransition tr = exact_transition(p, kPi2, 1000.0, dt);
    const double err = (tr.mean_matrix - Mat2::identity() - dt * m).max_abs();
    EXPECT_LT(err, 2.0 * dt * dt * m.max_abs() * m.max_abs());
    if (previous > 0.0) {
      EXPECT_NEAR(previous / err, 100.0, 5.0);
    }
    previous = err;
    EXPECT_NEAR(tr.noise_cov.yy, 1000.0 * dt, 1000.0 * dt * dt * 5.0);
  }
}

TEST(ExactTransition, NoiseCovarianceMatchesQuadrature) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> par(0.1, 10.0);
  std::uniform_real_distribution<double> log_dt(std::log(1e-4), std::log(1.0));
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams p(par(rng), par(rng));
    const double alpha = par(rng);
    const double lambda = par(rng);
    const double dt = std::exp(log_dt(rng));
    const Eigen::Matrix2d expected = simpson_noise_cov(p, alpha, lambda, dt, 10000);
    const Eigen::Matrix2d got = to_eigen(exact_transition(p, alpha, lambda, dt).noise_cov);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double scale = std::sqrt(expected(i, i) * expected(j, j));
        EXPECT_LT(std::fabs(got(i, j) - expected(i, j)), 1e-8 * scale) << "trial " << trial;
      }
  }
}

TEST(ExactTransition, LongStepReachesStationaryCovariance) {
  const ModelParams p(1.0, 0.2);
  const ExactTransition tr = exact_transition(p, kPi2, 1000.0, 200.0);
  const Mat2 stationary = stationary_mode_covariance(p, kPi2, 1000.0);
  EXPECT_NEAR(tr.noise_cov.xx, stationary.xx, 1e-9 * stationary.xx);
  EXPECT_NEAR(tr.noise_cov.yy, stationary.yy, 1e-9 * stationary.yy);
  EXPECT_NEAR(tr.noise_cov.xy, 0.0, 1e-9 * stationary.yy);
  EXPECT_LT(tr.mean_matrix.max_abs(), 1e-50);
}

TEST(ExactTransition, FactorReproducesCovarianceAndIsStable) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> par(0.1, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const ModelParams p(par(rng), par(rng));
    const double alpha = par(rng) * 10.0;
    const ExactTransition tr = exact_transition(p, alpha, par(rng), par(rng) * 1e-3);
    const Mat2& f = tr.noise_factor;
    EXPECT_EQ(f.yy, 0.0);
    const Mat2 ffT = f * f.transpose();
    EXPECT_LT((ffT - tr.noise_cov).max_abs(), 1e-12 * tr.noise_cov.max_abs());
    EXPECT_GE(tr.noise_cov.xx, 0.0);
    EXPECT_GE(tr.noise_cov.xx * tr.noise_cov.yy - tr.noise_cov.xy * tr.noise_cov.xy, -1e-14 * tr.noise_cov.max_abs());
    const Eigen::Vector2cd eig = to_eigen(tr.mean_matrix).eigenvalues();
    EXPECT_LT(eig.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(ExactStep, MatchesTransitionLaw) {
  const ModelParams p(1.0, 0.2);
  const std::vector<ExactTransition> tr{exact_transition(p, kPi2, 1000.0, 0.01)};
  const ModeState s{{2.0}, {-1.0}, 0.5};
  const ModeState next = exact_step(s, tr, 0.01, std::vector<double>{0.3}, std::vector<double>{-0.7});
  const Mat2& m = tr[0].mean_matrix;
  const Mat2& f = tr[0].noise_factor;
  EXPECT_DOUBLE_EQ(next.u[0], m.xx * 2.0 - m.xy + f.xx * 0.3 - f.xy * 0.7);
  EXPECT_DOUBLE_EQ(next.v[0], m.yx * 2.0 - m.yy + f.yx * 0.3);
  EXPECT_DOUBLE_EQ(next.t, 0.51);
}

TEST(NoiseStream, KeyedAndDeterministic) {
  NoiseStream a(1, 2, 3, NoiseStream::primary);
  NoiseStream b(1, 2, 3, NoiseStream::primary);
  NoiseStream c(1, 2, 4, NoiseStream::primary);
  NoiseStream d(1, 2, 3, NoiseStream::auxiliary);
  NoiseStream e(1ull << 32, 2, 3, NoiseStream::primary);
  bool differs_c = false, differs_d = false, differs_e = false;
  for (int i = 0; i < 16; ++i) {
    const double x = a();
    EXPECT_EQ(x, b());
    differs_c = differs_c || x != c();
    differs_d = differs_d || x != d();
    differs_e = differs_e || x != e();
  }
  EXPECT_TRUE(differs_c && differs_d && differs_e);
}

TEST(NoiseStream, StandardNormalMoments) {
  NoiseStream s(42, 0, 1, NoiseStream::primary);
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s();
    m1 += x;
    m2 += x * x;
  }
  EXPECT_NEAR(m1 / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(m2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(SimPlan, Validation) {
  SimPlan plan = paper_plan(1.0, 1.0, Scheme::euler, 0);
  EXPECT_THROW(plan.validate(), Error);
  plan.dt = 1e-3;
  EXPECT_EQ(plan.n_steps(), 1000);
  plan.x0.u0.pop_back();
  EXPECT_THROW(plan.validate(), Error);
}

TEST(Simulate, ZeroStartWithNegligibleForcingStaysAtZero) {
  const SpectralConfig cfg({kPi2, 4 * kPi2}, {1e-300, 1e-300});
  SimPlan plan{ModelParams(1.0, 0.2), cfg, InitialCondition::zero(2), 1.0, 1e-3, Scheme::euler, 9, 0, {}};
  for (Scheme scheme : {Scheme::euler, Scheme::exact}) {
    plan.scheme = scheme;
    const ModeState end = simulate(plan);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_LT(std::fabs(end.u[k]), 1e-149);
      EXPECT_LT(std::fabs(end.v[k]), 1e-149);
    }
    EXPECT_DOUBLE_EQ(end.t, 1.0);
  }
}

TEST(Simulate, BitReproducible) {
  for (Scheme scheme : {Scheme::euler, Scheme::exact}) {
    const SimPlan plan = paper_plan(0.5, 1e-4, scheme, 77);
    Recorder r1, r2;
    simulate(plan, {&r1});
    simulate(plan, {&r2});
    ASSERT_EQ(r1.states.size(), 5001u);
    for (std::size_t i = 0; i < r1.states.size(); ++i) {
      ASSERT_EQ(r1.states[i].u, r2.states[i].u);
      ASSERT_EQ(r1.states[i].v, r2.states[i].v);
      ASSERT_EQ(r1.states[i].t, r2.states[i].t);
    }
    SimPlan other = plan;
    other.seed = 78;
    EXPECT_NE(simulate(other).u, r1.states.back().u);
  }
}

TEST(Simulate, ObserversSeeEveryStepInOrder) {
  const SimPlan plan = paper_plan(0.01, 1e-3, Scheme::euler, 1);
  Recorder r;
  const ModeState end = simulate(plan, {&r});
  ASSERT_EQ(r.states.size(), 11u);
  EXPECT_EQ(r.states.front().u, plan.x0.u0);
  for (std::size_t i = 1; i < r.states.size(); ++i) EXPECT_DOUBLE_EQ(r.states[i].t, 1e-3 * static_cast<double>(i));
  EXPECT_EQ(end.u, r.states.back().u);
}

TEST(Simulate, RestrictedPlanReproducesKeptModes) {
  for (Scheme scheme : {Scheme::euler, Scheme::exact}) {
    const SimPlan full = paper_plan(0.2, 1e-4, scheme, 5);
    const std::vector<std::size_t> kept{2, 7};
    const SimPlan reduced = restrict_plan(full, kept);
    EXPECT_EQ(reduced.cfg.n_modes(), 2u);
    EXPECT_EQ(reduced.mode_number(1), 7u);
    const ModeState a = simulate(full);
    const ModeState b = simulate(reduced);
    EXPECT_EQ(a.u[1], b.u[0]);
    EXPECT_EQ(a.v[6], b.v[1]);
    const std::vector<std::size_t> again{2};
    EXPECT_EQ(simulate(restrict_plan(reduced, again)).u[0], b.u[1]);
  }
  const SimPlan full = paper_plan(0.2, 1e-4, Scheme::euler, 5);
  EXPECT_THROW(restrict_plan(full, std::vector<std::size_t>{3, 2}), Error);
  EXPECT_THROW(restrict_plan(full, std::vector<std::size_t>{11}), Error);
}

TEST(Simulate, EulerAndExactShareNoise) {
  // Preset spectrum over T = 10: pathwise gap of order dt.
  const ModeState euler = simulate(paper_plan(10.0, 1e-4, Scheme::euler, 2024));
  const ModeState exact = simulate(paper_plan(10.0, 1e-4, Scheme::exact, 2024));
  double gap = 0.0;
  for (std::size_t k = 0; k < 10; ++k)
    gap = std::max({gap, std::fabs(euler.u[k] - exact.u[k]), std::fabs(euler.v[k] - exact.v[k])});
  EXPECT_LT(gap, 0.05);
  EXPECT_GT(gap, 0.0);
}

TEST(Simulate, EulerBlowsUpLoudlyWhenStiff) {
  SimPlan plan = paper_plan(300.0, 0.1, Scheme::euler, 1);
  try {
    simulate(plan);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::integration_diverged);
  }
  plan.scheme = Scheme::exact;
  EXPECT_NO_THROW(simulate(plan));
}

class SecondMoments final : public Observer {
 public:
  explicit SecondMoments(std::size_t n) : uu(n), vv(n), uv(n) {}
  void on_start(const ModeState&) override {}
  void on_step(const ModeState& s, double dt) override {
    for (std::size_t k = 0; k < uu.size(); ++k) {
      uu[k] += s.u[k] * s.u[k] * dt;
      vv[k] += s.v[k] * s.v[k] * dt;
      uv[k] += s.u[k] * s.v[k] * dt;
    }
    elapsed += dt;
  }
  std::vector<double> uu, vv, uv;
  double elapsed = 0.0;
};

TEST(Simulate, ExactSchemeIsMeanSquareStationary) {
  const ModelParams p(10.0, 10.0);
  const SpectralConfig cfg({50.0, 200.0, 400.0}, {4.0, 1.0, 0.5});
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  InitialCondition x0 = InitialCondition::zero(3);
  for (std::size_t k = 0; k < 3; ++k) {
    const Mat2 c = stationary_mode_covariance(p, cfg.alpha(k), cfg.lambda(k));
    x0.u0[k] = std::sqrt(c.xx) * normal(rng);
    x0.v0[k] = std::sqrt(c.yy) * normal(rng);
  }
  const SimPlan plan{p, cfg, x0, 200.0, 1e-3, Scheme::exact, 31, 0, {}};
  SecondMoments m(3);
  simulate(plan, {&m});
  for (std::size_t k = 0; k < 3; ++k) {
    const Mat2 c = stationary_mode_covariance(p, cfg.alpha(k), cfg.lambda(k));
    EXPECT_NEAR(m.uu[k] / m.elapsed, c.xx, 0.05 * c.xx) << "mode " << k;
    EXPECT_NEAR(m.vv[k] / m.elapsed, c.yy, 0.05 * c.yy) << "mode " << k;
    EXPECT_NEAR(m.uv[k] / m.elapsed, 0.0, 0.05 * std::sqrt(c.xx * c.yy)) << "mode " << k;
  }
}

TEST(Simulate, EulerTimeAverageConvergesToExact) {
  // Time average of v_1^2 over T = 50; Euler and exact share the primary noise
  // at each dt, so their difference is the discretization gap alone.
  const auto average_v2 = [](Scheme scheme, double dt) {
    const SpectralConfig cfg({kPi2}, {1000.0});
    const SimPlan plan{ModelParams(1.0, 0.2), cfg, InitialCondition::constant(1, 1.0), 50.0, dt, scheme, 8, 0, {}};
    SecondMoments m(1);
    simulate(plan, {&m});
    return m.vv[0] / m.elapsed;
  };
  const double gap_coarse = std::fabs(average_v2(Scheme::euler, 1e-3) - average_v2(Scheme::exact, 1e-3));
  const double gap_fine = std::fabs(average_v2(Scheme::euler, 1e-4) - average_v2(Scheme::exact, 1e-4));
  const double order = std::log10(gap_coarse / gap_fine);
  EXPECT_GE(order, 0.8) << "gaps " << gap_coarse << " " << gap_fine;
}

TEST(TrajectoryCsv, HeaderStrideAndRoundTrip) {
  const SimPlan plan = paper_plan(0.01, 1e-3, Scheme::exact, 4);
  std::ostringstream os;
  TrajectoryCsvWriter writer(os, 5);
  Recorder r;
  simulate(plan, {&writer, &r});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 14), "t,u_1,u_2,u_3,");
  EXPECT_NE(line.find(",u_10,v_1,"), std::string::npos);
  EXPECT_EQ(line.substr(line.size() - 5), ",v_10");
  std::vector<std::string> rows;
  while (std::getline(is, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u);  // t = 0, 0.005, 0.01
  std::istringstream last(rows.back());
  std::string cell;
  std::getline(last, cell, ',');
  EXPECT_EQ(std::stod(cell), r.states.back().t);
  for (std::size_t k = 0; k < 10; ++k) {
    std::getline(last, cell, ',');
    EXPECT_EQ(std::strtod(cell.c_str(), nullptr), r.states.back().u[k]);
  }
  EXPECT_THROW(TrajectoryCsvWriter(os, 0), Error);
}

}  // namespace
