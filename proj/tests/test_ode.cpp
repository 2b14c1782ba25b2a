#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <gtest/gtest.h>

#include "sonode/closed_form.hpp"
#include "sonode/ode.hpp"

using namespace sonode;

namespace {

auto growth = [](double, std::span<const double> z, std::span<double> dz) {
  for (std::size_t i = 0; i < z.size(); ++i) dz[i] = z[i];
};

auto zero_field = [](double, std::span<const double>, std::span<double> dz) {
  for (auto& v : dz) v = 0.0;
};

// x'' = -(w^2 + g^2) x - 2 g x'
struct Damped {
  double w = 1.0, g = 0.1;
  void operator()(double, std::span<const double> z, std::span<double> dz) const {
    dz[0] = z[1];
    dz[1] = -(w * w + g * g) * z[0] - 2.0 * g * z[1];
  }
};

double damped_closed_form(double w, double g, double x0, double v0, double t) {
  const double a = (v0 + g * x0) / w;
  return std::exp(-g * t) * (a * std::sin(w * t) + x0 * std::cos(w * t));
}

struct Vdp {
  void operator()(double t, std::span<const double> z, std::span<double> dz) const {
    dz[0] = z[1];
    dz[1] = 8.53 * (1.0 - z[0] * z[0]) * z[1] - z[0] + 1.2 * std::cos(0.2 * std::numbers::pi * t);
  }
};

}  // namespace

TEST(SolverConfig, ValidatesFields) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.rtol = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SolverConfig{};
  c.h_min = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SolverConfig{};
  c.max_steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Integrate, ZeroFieldKeepsState) {
  for (Method m : {Method::rk4, Method::dopri5}) {
    SolverConfig c;
    c.method = m;
    const auto r = integrate(zero_field, {1.5, -2.0}, 0.0, 7.0, c);
    EXPECT_EQ(r.state, (std::vector<double>{1.5, -2.0}));
  }
}

TEST(Integrate, ExponentialGrowth) {
  const auto r = integrate(growth, {1.0}, 0.0, 1.0, SolverConfig::tolerance(1e-8));
  EXPECT_NEAR(r.state[0], std::exp(1.0), 1e-6);
}

TEST(Integrate, DampedOscillatorMatchesClosedForm) {
  Damped f;
  const auto r = integrate(f, {1.0, 0.0}, 0.0, 10.0, SolverConfig::precise());
  EXPECT_NEAR(r.state[0], damped_closed_form(1.0, 0.1, 1.0, 0.0, 10.0), 1e-6);
}

TEST(Integrate, BackwardThenForwardReturnsToStart) {
  Damped f;
  const double rtol = 1e-8;
  const std::vector<double> z0{0.4, -0.3};
  const auto fwd = integrate(f, z0, 0.0, 5.0, SolverConfig::tolerance(rtol));
  const auto back = integrate(f, fwd.state, 5.0, 0.0, SolverConfig::tolerance(rtol));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE(std::abs(back.state[i] - z0[i]), 10 * rtol * (1.0 + std::abs(z0[i])));
}

TEST(Integrate, Rk4NfeIsFourPerStep) {
  const auto r = integrate(growth, {1.0}, 0.0, 1.0, SolverConfig::fixed_rk4(37));
  EXPECT_EQ(r.stats.nfe, 4u * 37u);
  EXPECT_EQ(r.stats.accepted, 37u);
}

TEST(Integrate, Rk4ConvergesWithFourthOrder) {
  std::vector<double> errs;
  for (std::size_t n : {10u, 20u, 40u, 80u}) {
    const auto r = integrate(growth, {1.0}, 0.0, 1.0, SolverConfig::fixed_rk4(n));
    errs.push_back(std::abs(r.state[0] - std::exp(1.0)));
  }
  for (std::size_t i = 1; i < errs.size(); ++i) EXPECT_GE(std::log2(errs[i - 1] / errs[i]), 3.9);
}

TEST(Integrate, Dopri5NfeCountsFsal) {
  Vdp f;
  const auto r = integrate(f, {0.1, 0.0}, 0.0, 10.0, SolverConfig::tolerance(1e-6));
  EXPECT_GT(r.stats.rejected, 0u);
  EXPECT_EQ(r.stats.nfe, 6 * (r.stats.accepted + r.stats.rejected) + 1);
}

TEST(Integrate, Dopri5AcceptedErrorWithinTolerance) {
  Vdp f;
  const auto r = integrate(f, {0.1, 0.0}, 0.0, 10.0, SolverConfig::tolerance(1e-7));
  EXPECT_LE(r.stats.max_accepted_error, 1.0);
}

TEST(Integrate, TighterToleranceCostsMoreEvaluations) {
  Vdp f;
  const auto loose = integrate(f, {0.1, 0.0}, 0.0, 20.0, SolverConfig::tolerance(1e-5));
  const auto tight = integrate(f, {0.1, 0.0}, 0.0, 20.0, SolverConfig::tolerance(1e-9));
  EXPECT_GT(tight.stats.nfe, loose.stats.nfe);
}

TEST(Integrate, MaxStepsRaisesNonconvergence) {
  SolverConfig c = SolverConfig::tolerance(1e-12);
  c.max_steps = 5;
  Damped f;
  EXPECT_THROW(integrate(f, {1.0, 0.0}, 0.0, 10.0, c), NonconvergenceError);
}

TEST(Integrate, NanFieldRaisesInstability) {
  auto bad = [](double, std::span<const double>, std::span<double> dz) {
    dz[0] = std::numeric_limits<double>::quiet_NaN();
  };
  EXPECT_THROW(integrate(bad, {1.0}, 0.0, 1.0, SolverConfig{}), InstabilityError);
  EXPECT_THROW(integrate(growth, {std::numeric_limits<double>::infinity()}, 0.0, 1.0, SolverConfig{}),
               InstabilityError);
}

TEST(IntegrateDense, ConstantFieldGivesIdenticalStates) {
  const Trajectory tr = integrate_dense(zero_field, Tensor::vector({2.0, 3.0}), {0.0, 1.0, 2.0}, SolverConfig{});
  ASSERT_EQ(tr.states.size(), 3u);
  for (const auto& s : tr.states) EXPECT_EQ(s.values(), (std::vector<double>{2.0, 3.0}));
}

TEST(IntegrateDense, ExponentialAtRequestedTimes) {
  const Trajectory tr = integrate_dense(growth, Tensor::vector({1.0}), {0.0, 0.5, 1.0}, SolverConfig::tolerance(1e-8));
  EXPECT_NEAR(tr.states[0][0], 1.0, 1e-15);
  EXPECT_NEAR(tr.states[1][0], 1.648721, 1e-6);
  EXPECT_NEAR(tr.states[2][0], 2.718282, 1e-6);
  EXPECT_GE(tr.nfe, 1u);
}

TEST(IntegrateDense, RejectsUnsortedTimes) {
  EXPECT_THROW(integrate_dense(growth, Tensor::vector({1.0}), {0.0, 1.0, 0.5}, SolverConfig{}), DimensionError);
}

TEST(Integrator, ResetAppliesJumpAtCurrentTime) {
  Integrator<decltype(growth)> integ(growth, SolverConfig::tolerance(1e-10), 0.0, {1.0});
  integ.advance_to(1.0);
  integ.reset({2.0});
  integ.advance_to(2.0);
  EXPECT_NEAR(integ.state()[0], 2.0 * std::exp(1.0), 1e-7);
}

TEST(Integrate, TensorFieldOverload) {
  auto f = [](double, const Tensor& z) { return -1.0 * z; };
  const auto [z, nfe] = integrate(f, Tensor::from_rows({{1.0, 2.0}}), 0.0, 1.0, SolverConfig::tolerance(1e-9));
  EXPECT_NEAR(z(0, 1), 2.0 * std::exp(-1.0), 1e-8);
  EXPECT_GT(nfe, 0u);
}
