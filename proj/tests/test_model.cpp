#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sonode/model.hpp"

using namespace sonode;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = n(rng);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double field_dot(const Model& m, const Tensor& z, double t, const Tensor& cot) {
  Tensor out(z.shape());
  m.field(t, z.data(), out.data());
  return dot(out.data(), cot.data());
}

double lift_dot(const Model& m, const Tensor& x0, const Tensor& cot) { return dot(m.lift(x0).data(), cot.data()); }

}  // namespace

TEST(ModelSpec, PhaseDimensions) {
  EXPECT_EQ(node_spec(3).phase_dim(), 3u);
  EXPECT_EQ(anode_spec(2, 3).phase_dim(), 5u);
  EXPECT_EQ(sonode_spec(2).phase_dim(), 4u);
  EXPECT_EQ(kth_spec(2, 3).phase_dim(), 6u);
  EXPECT_EQ(sonode_spec(2).head_dim(), 2u);
  EXPECT_EQ(anode_spec(2, 3).head_dim(), 5u);
  EXPECT_EQ(kth_spec(1, 3).init_dim(), 2u);
  ModelSpec s = sonode_spec(2);
  s.time_dependent = s.cubic_feature = s.forcing_feature = true;
  EXPECT_EQ(s.head_input_dim(), 4u + 1 + 2 + 1);
}

TEST(ModelSpec, Validation) {
  EXPECT_THROW(node_spec(0).validate(), DimensionError);
  EXPECT_THROW(kth_spec(1, 0).validate(), DimensionError);
  ModelSpec s = sonode_spec(1);
  s.D = 2;
  EXPECT_THROW(s.validate(), ConfigError);
  for (ModelKind k : {ModelKind::node, ModelKind::anode, ModelKind::sonode, ModelKind::kth_order})
    EXPECT_EQ(model_kind_from_string(to_string(k)), k);
  EXPECT_THROW(model_kind_from_string("gru"), ConfigError);
}

TEST(Model, ConstructionChecksShapes) {
  std::mt19937_64 rng(1);
  const auto wrong = MlpParams::init({3, 8, 2}, Activation::elu, Activation::none, rng);
  EXPECT_THROW(Model(sonode_spec(2), wrong), DimensionError);
  InitMap g;
  g.kind = InitKind::constant;
  g.constant = {0.0};
  const auto ok = MlpParams::init({2, 1}, Activation::none, Activation::none, rng);
  EXPECT_THROW(Model(anode_spec(1, 1), MlpParams::init({2, 2}, Activation::none, Activation::none, rng), g),
               ConfigError);
  EXPECT_THROW(Model(node_spec(1), MlpParams::init({1, 1}, Activation::none, Activation::none, rng), g), ConfigError);
  g.constant = {0.0, 0.0};
  EXPECT_THROW(Model(sonode_spec(1), ok, g), DimensionError);
}

TEST(Model, AnodeLiftAppendsZeros) {
  const Model m = build_model(anode_spec(2, 3), {}, 4);
  const Tensor z = m.lift(Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
  EXPECT_EQ(z.values(), (std::vector<double>{1, 2, 0, 0, 0, 3, 4, 0, 0, 0}));
  EXPECT_EQ(anode_lift(m, Tensor::vector({5.0, 6.0})).values(), (std::vector<double>{5, 6, 0, 0, 0}));
}

TEST(Model, SonodeLiftUsesInitialVelocityMap) {
  ArchSpec arch;
  arch.g = InitKind::fixed;
  arch.g_fixed = Tensor::vector({0.5, -0.5});
  const Model m = build_model(sonode_spec(2), arch, 2);
  const Tensor z = m.lift(Tensor::vector({1.0, 2.0}));
  EXPECT_EQ(z.values(), (std::vector<double>{1.0, 2.0, 0.5, -0.5}));

  const Model net = build_model(sonode_spec(2), {}, 3);
  const Tensor x0 = Tensor::from_rows({{0.1, 0.2}, {-0.3, 0.4}});
  const Tensor zn = net.lift(x0);
  const Tensor g = mlp_forward(net.init_map().mlp, x0);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_EQ(zn(b, i), x0(b, i));
      EXPECT_EQ(zn(b, 2 + i), g(b, i));
    }
}

TEST(Model, PerSampleFixedInitialValues) {
  ArchSpec arch;
  arch.g = InitKind::fixed;
  arch.g_fixed = Tensor::from_rows({{1.0}, {2.0}});
  const Model m = build_model(sonode_spec(1), arch, 2);
  EXPECT_EQ(m.lift(Tensor::from_rows({{0.0}, {0.0}})).values(), (std::vector<double>{0, 1, 0, 2}));
  EXPECT_THROW(m.lift(Tensor::from_rows({{0.0}, {0.0}, {0.0}})), DimensionError);
}

TEST(Model, SonodeFieldShiftsVelocity) {
  std::mt19937_64 rng(5);
  const Model m = build_model(sonode_spec(2), {}, 5);
  const Tensor z = random_tensor({3, 4}, rng);
  const Tensor dz = sonode_field(m, z, 0.3);
  const Tensor x = project(z, 4, 2);
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(dz(b, 0), z(b, 2));
    EXPECT_EQ(dz(b, 1), z(b, 3));
    const Tensor a = mlp_forward(m.field_mlp(), Tensor::vector({z(b, 0), z(b, 1), z(b, 2), z(b, 3)}));
    EXPECT_NEAR(dz(b, 2), a[0], 1e-15);
    EXPECT_NEAR(dz(b, 3), a[1], 1e-15);
  }
  EXPECT_THROW(anode_field(m, z, 0.0), ModelKindError);
  EXPECT_THROW(kth_order_field(m, z, 0.0), ModelKindError);
  EXPECT_THROW(sonode_field(m, Tensor({5}), 0.0), DimensionError);
}

TEST(Model, KthOrderChainStructure) {
  std::mt19937_64 rng(6);
  const Model m = build_model(kth_spec(1, 3), {}, 6);
  const Tensor z = random_tensor({2, 3}, rng);
  const Tensor dz = kth_order_field(m, z, 0.0);
  for (std::size_t b = 0; b < 2; ++b) {
    EXPECT_EQ(dz(b, 0), z(b, 1));
    EXPECT_EQ(dz(b, 1), z(b, 2));
  }
}

TEST(Model, ZeroThirdDerivativeGivesQuadratic) {
  ModelSpec spec = kth_spec(1, 3);
  MlpParams zero = MlpParams::zeros({3, 1}, Activation::none, Activation::none);
  InitMap g;
  g.kind = InitKind::fixed;
  g.fixed = Tensor::vector({0.5, -2.0});
  const Model m(spec, zero, g);
  const auto times = std::vector<double>{0.0, 0.5, 1.0, 2.5, 4.0};
  const Trajectory tr = forward_model(m, Tensor::vector({1.0}), times, SolverConfig::precise());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    EXPECT_NEAR(tr.states[i][0], 1.0 + 0.5 * t - t * t, 1e-10);
  }
}

TEST(Model, ParameterRoundTrip) {
  ArchSpec arch;
  arch.learn_s = true;
  Model m = build_model(sonode_spec(2), arch, 7);
  EXPECT_EQ(m.param_count(), m.theta_f_count() + m.theta_g_count() + m.theta_s_count());
  EXPECT_GT(m.theta_s_count(), 0u);
  auto p = m.params();
  for (auto& v : p) v *= -2.0;
  m.set_params(p);
  EXPECT_EQ(m.params(), p);
  EXPECT_THROW(m.set_params(std::vector<double>(3)), DimensionError);
}

TEST(Model, BuildIsSeedDeterministic) {
  EXPECT_EQ(build_model(sonode_spec(2), {}, 9).params(), build_model(sonode_spec(2), {}, 9).params());
  EXPECT_NE(build_model(sonode_spec(2), {}, 9).params(), build_model(sonode_spec(2), {}, 10).params());
}

TEST(Model, FieldVjpMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::vector<ModelSpec> specs{node_spec(2), anode_spec(2, 2), sonode_spec(2), kth_spec(1, 3)};
  ModelSpec featured = sonode_spec(1);
  featured.time_dependent = featured.cubic_feature = featured.forcing_feature = true;
  specs.push_back(featured);
  for (const auto& spec : specs) {
    ArchSpec arch;
    arch.hidden = {6};
    arch.field_activation = Activation::tanh;
    const Model m = build_model(spec, arch, 8, Forcing::cosine(1.0, 0.7));
    const std::size_t p = m.phase_dim();
    const Tensor z = random_tensor({2, p}, rng);
    const Tensor cot = random_tensor({2, p}, rng);
    const double t = 0.4;
    std::vector<double> gz(2 * p, 0.0), gth(m.theta_f_count(), 0.0);
    m.field_vjp(t, z.data(), cot.data(), gz, gth);
    const double h = 1e-6;
    for (std::size_t i = 0; i < z.size(); ++i) {
      Tensor zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      EXPECT_NEAR(gz[i], (field_dot(m, zp, t, cot) - field_dot(m, zm, t, cot)) / (2 * h), 1e-7);
    }
    const auto th = m.theta_f();
    for (std::size_t k = 0; k < th.size(); ++k) {
      Model a = m, b = m;
      auto tp = th, tm = th;
      tp[k] += h;
      tm[k] -= h;
      a.set_theta_f(tp);
      b.set_theta_f(tm);
      EXPECT_NEAR(gth[k], (field_dot(a, z, t, cot) - field_dot(b, z, t, cot)) / (2 * h), 1e-7);
    }
  }
}

TEST(Model, LiftVjpMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  ArchSpec arch;
  arch.g_hidden = {5};
  arch.s_hidden = {4};
  arch.learn_s = true;
  for (InitKind gk : {InitKind::mlp, InitKind::constant}) {
    arch.g = gk;
    Model m = build_model(sonode_spec(2), arch, 9);
    if (gk == InitKind::constant) m.set_theta_g(std::vector<double>{0.3, -0.1});
    const Tensor x0 = random_tensor({3, 2}, rng);
    const Tensor cot = random_tensor({3, 4}, rng);
    std::vector<double> gg(m.theta_g_count(), 0.0), gs(m.theta_s_count(), 0.0);
    m.lift_vjp(x0, cot.data(), gg, gs);
    const double h = 1e-6;
    const auto tg = m.theta_g();
    for (std::size_t k = 0; k < tg.size(); ++k) {
      Model a = m, b = m;
      auto tp = tg, tm = tg;
      tp[k] += h;
      tm[k] -= h;
      a.set_theta_g(tp);
      b.set_theta_g(tm);
      EXPECT_NEAR(gg[k], (lift_dot(a, x0, cot) - lift_dot(b, x0, cot)) / (2 * h), 1e-7);
    }
    const auto ts = m.theta_s();
    for (std::size_t k = 0; k < ts.size(); ++k) {
      Model a = m, b = m;
      auto tp = ts, tm = ts;
      tp[k] += h;
      tm[k] -= h;
      a.set_theta_s(tp);
      b.set_theta_s(tm);
      EXPECT_NEAR(gs[k], (lift_dot(a, x0, cot) - lift_dot(b, x0, cot)) / (2 * h), 1e-7);
    }
  }
}

TEST(Model, ForwardModelKeepsRankOfInput) {
  const Model m = build_model(sonode_spec(2), {}, 10);
  const std::vector<double> times{0.0, 0.5};
  const Trajectory single = forward_model(m, Tensor::vector({0.1, 0.2}), times, SolverConfig::training());
  EXPECT_EQ(single.states[1].rank(), 1u);
  EXPECT_EQ(single.states[0].values(), (std::vector<double>{0.1, 0.2}));
  const Trajectory batch = forward_model(m, Tensor::from_rows({{0.1, 0.2}}), times, SolverConfig::training());
  EXPECT_EQ(batch.states[1].rank(), 2u);
  EXPECT_NEAR(batch.states[1](0, 1), single.states[1][1], 1e-15);
  EXPECT_THROW(forward_model(m, Tensor::vector({0.1, 0.2, 0.3}), times, SolverConfig::training()), DimensionError);
}

TEST(Model, CountersTrackEvaluations) {
  const Model m = build_model(sonode_spec(1), {}, 11);
  OpCounters c;
  c.enabled = true;
  const Trajectory tr = integrate_phase(m, Tensor::vector({0.5}), {0.0, 1.0}, SolverConfig::training(), &c);
  EXPECT_EQ(c.field_evals, tr.nfe);
  EXPECT_EQ(c.vjp_calls, 0u);
}
