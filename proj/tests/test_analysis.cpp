#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sonode/analysis.hpp"

using namespace sonode;

namespace {

constexpr double kOmega = 1.0;
constexpr double kGamma = 0.1667;

AccelLaw damped_law() { return AccelLaw::from_closed_form(ClosedForm::damped_oscillator(kOmega, kGamma)); }

Trajectory line(double x0, double y0, double x1, double y1) {
  Trajectory t;
  t.times = {0.0, 1.0};
  t.states = {Tensor::vector({x0, y0}), Tensor::vector({x1, y1})};
  return t;
}

}  // namespace

TEST(TwoFunction, PairReproducesDampedOscillator) {
  const auto times = linspace(0.0, 10.0, 101);
  for (double c : {1.0, -2.5}) {
    const FunctionalPair p = two_function_pair(c, kOmega, kGamma);
    const double x0 = 0.4, a0 = 0.3;
    const double v0 = c * a0 - (kOmega + kGamma) * x0 + kOmega;
    const Trajectory tr = integrate_pair(p, {x0}, {a0}, times, SolverConfig::tolerance(1e-11));
    const TimeSeries truth = gen_damped_osc(kOmega, kGamma, x0, v0, times);
    for (std::size_t i = 0; i < times.size(); ++i) EXPECT_NEAR(tr.states[i][0], truth.value(i, 0), 1e-8);
  }
  EXPECT_THROW(integrate_pair(two_function_pair(1.0, 1.0, 0.1), {0.0, 1.0}, {0.0}, times, SolverConfig{}),
               DimensionError);
}

TEST(ComputeG, IdentityCouplingReturnsAcceleration) {
  const AccelLaw law = damped_law();
  const Coupling F = Coupling::identity(1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    const double x = u(rng), a = u(rng);
    const Vec g = compute_G(F, law, Vec{x}, Vec{a}, 0.0);
    EXPECT_NEAR(g[0], law.f(Vec{x}, Vec{a}, 0.0)[0], 1e-12);
  }
}

TEST(ComputeG, RecoversTheClosedFormPair) {
  const FunctionalPair p = two_function_pair(1.0, kOmega, kGamma);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    const Vec x{u(rng)}, a{u(rng)};
    EXPECT_NEAR(compute_G(p.F, damped_law(), x, a, 0.0)[0], p.G(x, a, 0.0)[0], 1e-8);
  }
}

TEST(ComputeG, NonlinearCouplingStillReproducesMotion) {
  const Coupling F = Coupling::general(1, 1, [](std::span<const double> x, std::span<const double> a, double) {
    return Vec{a[0] + 0.3 * std::sin(x[0])};
  });
  const FunctionalPair p = make_pair(F, damped_law());
  const double x0 = 0.5, a0 = -0.2;
  const double v0 = a0 + 0.3 * std::sin(x0);
  const auto times = linspace(0.0, 5.0, 26);
  const Trajectory tr = integrate_pair(p, {x0}, {a0}, times, SolverConfig::tolerance(1e-10));
  const TimeSeries truth = gen_damped_osc(kOmega, kGamma, x0, v0, times);
  for (std::size_t i = 0; i < times.size(); ++i) EXPECT_NEAR(tr.states[i][0], truth.value(i, 0), 1e-6);
}

TEST(ComputeG, DimensionChecks) {
  const Coupling wide = Coupling::from_affine({Tensor({1, 1}), Tensor({1, 2}), Vec{0.0}, {}});
  EXPECT_THROW(compute_G(wide, damped_law(), Vec{0.0}, Vec{0.0, 0.0}, 0.0), DimensionError);
  EXPECT_THROW(compute_G(Coupling::identity(2), damped_law(), Vec{0.0, 0.0}, Vec{0.0, 0.0}, 0.0), DimensionError);
  EXPECT_THROW(Coupling::from_affine({Tensor({2, 2}), Tensor({1, 1}), Vec{0.0}, {}}), DimensionError);
}

TEST(Gauge, RealTrajectoryInvariantAugmentedChanges) {
  const FunctionalPair base = two_function_pair(1.0, kOmega, kGamma);
  const double x0 = 0.8, a0 = 0.1;
  const auto times = linspace(0.0, 8.0, 41);
  const SolverConfig cfg = SolverConfig::tolerance(1e-11);
  const Trajectory ref = integrate_pair(base, {x0}, {a0}, times, cfg);
  const GaugeSpec g = GaugeSpec::through(Tensor::matrix(1, 1, {0.7}), {x0});
  EXPECT_NEAR(g(Vec{x0})[0], 0.0, 1e-15);
  const FunctionalPair shifted = gauge_transform(base, damped_law(), g);
  const Trajectory tr = integrate_pair(shifted, {x0}, {a0}, times, cfg);
  double aug_diff = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    EXPECT_NEAR(tr.states[i][0], ref.states[i][0], 1e-7);
    aug_diff = std::max(aug_diff, std::abs(tr.states[i][1] - ref.states[i][1]));
  }
  EXPECT_GT(aug_diff, 1e-2);
}

TEST(Gauge, UnsupportedCases) {
  const FunctionalPair base = two_function_pair(1.0, kOmega, kGamma);
  AccelLaw nonlinear = damped_law();
  nonlinear.affine_in_velocity = false;
  const GaugeSpec g = GaugeSpec::through(Tensor::matrix(1, 1, {0.7}), {0.0});
  EXPECT_THROW(gauge_transform(base, nonlinear, g), UnsupportedCaseError);
  FunctionalPair narrow;
  narrow.F = Coupling::from_affine({Tensor({2, 2}), Tensor({2, 1}), Vec{0.0, 0.0}, {}});
  AccelLaw law2 = AccelLaw::from_closed_form(ClosedForm::zeros(Template::linear_osc, 2));
  EXPECT_THROW(gauge_transform(narrow, law2, GaugeSpec::through(Tensor::identity(2), {0.0, 0.0})),
               UnsupportedCaseError);
  EXPECT_THROW(GaugeSpec::through(Tensor::identity(2), {0.0}), DimensionError);
}

TEST(Crossings, DetectsTransversalIntersection) {
  const auto hits = crossing_check(line(0, 0, 1, 1), line(0, 1, 1, 0), CrossingSpace::phase);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_NEAR(hits[0].time_a, 0.5, 1e-12);
  EXPECT_NEAR(hits[0].angle_deg, 90.0, 1e-9);
  EXPECT_NEAR(hits[0].point[0], 0.5, 1e-12);
}

TEST(Crossings, IgnoresSeparatedAndParallelSegments) {
  EXPECT_TRUE(crossing_check(line(0, 0, 1, 0), line(0, 0.5, 1, 0.5), CrossingSpace::phase).empty());
  EXPECT_TRUE(crossing_check(line(0, 0, 1, 0), line(0.2, 0, 2, 0), CrossingSpace::phase).empty());
  EXPECT_TRUE(crossing_check(line(0, 0, 1, 1), line(2, 3, 3, 2), CrossingSpace::phase).empty());
}

TEST(Crossings, RealSpaceProjectionWithTimeAxis) {
  // x(t) = 1 - 2t and x(t) = 2t - 1 cross at t = 0.5 in (x, t).
  Trajectory a, b;
  a.times = b.times = linspace(0.0, 1.0, 11);
  for (double t : a.times) {
    a.states.push_back(Tensor::vector({1 - 2 * t, -2.0}));
    b.states.push_back(Tensor::vector({2 * t - 1, 2.0}));
  }
  CrossingOptions opt;
  opt.time_axis = true;
  const auto real = crossing_check(a, b, CrossingSpace::real, opt);
  ASSERT_FALSE(real.empty());
  EXPECT_NEAR(real[0].time_a, 0.5, 1e-9);
  EXPECT_TRUE(crossing_check(a, b, CrossingSpace::phase, opt).empty());
}

TEST(Crossings, DampedPairsNeverCrossInPhaseSpace) {
  const auto times = linspace(0.0, 10.0, 201);
  std::vector<Trajectory> trs;
  for (int k = 0; k < 4; ++k) {
    const TimeSeries ts = gen_damped_osc(kOmega, kGamma, 0.3 * k - 0.5, 0.2 * k, times);
    Trajectory t;
    t.times = times;
    for (std::size_t i = 0; i < times.size(); ++i) t.states.push_back(ts.at(i));
    trs.push_back(t);
  }
  CrossingOptions opt;
  opt.time_axis = true;
  for (std::size_t i = 0; i < trs.size(); ++i)
    for (std::size_t j = i + 1; j < trs.size(); ++j)
      EXPECT_TRUE(crossing_check(trs[i], trs[j], CrossingSpace::phase, opt).empty());
}

TEST(Homeo, CounterexampleCollapsesBothInputs) {
  const HomeoReport r = homeo_counterexample();
  EXPECT_NEAR(r.outputs[0], 2.0, 1e-8);
  EXPECT_NEAR(r.outputs[1], 2.0, 1e-8);
  EXPECT_TRUE(r.injectivity_violated);
  const HomeoReport still = homeo_counterexample([](double) { return 0.0; });
  EXPECT_FALSE(still.injectivity_violated);
  EXPECT_NEAR(still.outputs[1], 1.0, 1e-12);
}

TEST(Interpretability, ExactModelScoresZero) {
  const ClosedForm law(Template::linear_osc, 2, {{"k0", -1.01}, {"k1", -1.53}, {"c0", -0.2}, {"c1", -0.6}});
  InitMap g;
  g.kind = InitKind::fixed;
  g.fixed = Tensor::vector({2.9, 3.9});
  const Model m(sonode_spec(2), law, g);
  const TimeSeries truth = gen_2d_ode(linspace(0.0, 10.0, 50));
  const InterpretabilityMetrics r = interpretability_metrics(m, truth);
  EXPECT_LT(r.init_velocity_rel_err, 1e-14);
  EXPECT_LT(r.aug_vs_velocity_rmse, 1e-7);
  EXPECT_LT(r.force_field_rmse, 1e-12);

  g.fixed = Tensor::vector({0.0, 0.0});
  const InterpretabilityMetrics off = interpretability_metrics(Model(sonode_spec(2), law, g), truth);
  EXPECT_NEAR(off.init_velocity_rel_err, 1.0, 1e-12);
}

TEST(Interpretability, RequiresTwoDimensionalModel) {
  const TimeSeries truth = gen_2d_ode(linspace(0.0, 1.0, 5));
  EXPECT_THROW(interpretability_metrics(build_model(sonode_spec(1), {}, 0), truth), DimensionError);
  EXPECT_THROW(interpretability_metrics(build_model(node_spec(2), {}, 0), truth), ModelKindError);
}

TEST(LinearFit, RecoversKnownCoefficients) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t N = 30;
  Tensor x({N, 2}), v({N, 2}), acc({N, 2});
  for (auto* t : {&x, &v})
    for (auto& e : t->values()) e = n(rng);
  const double K[2][2] = {{-1.0, 0.2}, {0.0, -2.0}};
  const double C[2][2] = {{-0.1, 0.0}, {0.3, -0.5}};
  const double b[2] = {0.05, -0.4};
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t r = 0; r < 2; ++r)
      acc(i, r) = b[r] + K[r][0] * x(i, 0) + K[r][1] * x(i, 1) + C[r][0] * v(i, 0) + C[r][1] * v(i, 1);
  const Tensor coef = fit_linear_acceleration(x, v, acc);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_NEAR(coef(r, 0), K[r][0], 1e-10);
    EXPECT_NEAR(coef(r, 1), K[r][1], 1e-10);
    EXPECT_NEAR(coef(r, 2), C[r][0], 1e-10);
    EXPECT_NEAR(coef(r, 3), C[r][1], 1e-10);
    EXPECT_NEAR(coef(r, 4), b[r], 1e-10);
  }
  EXPECT_THROW(fit_linear_acceleration(x, Tensor({N, 1}), acc), DimensionError);
}
