// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sonode/sonode.hpp"

using namespace sonode;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const std::vector<std::uint64_t> kSeeds = {0, 1, 2};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s + "]";
}

bool majority(const std::vector<bool>& ok) {
  return 3 * static_cast<std::size_t>(std::count(ok.begin(), ok.end(), true)) >= 2 * ok.size();
}

// Builds the task and model of a preset and trains it, giving the callback
// access to the task (the readout of classification tasks lives there).
struct Run {
  Task task;
  TrainResult train;
};

Run train_preset(const ExperimentConfig& cfg, std::uint64_t seed,
                 const std::function<bool(std::size_t, double, const Model&, const Task&)>& stop = {}) {
  cfg.validate();
  Run r;
  r.task = build_task(cfg, seed);
  const Model model = build_experiment_model(cfg, r.task, seed);
  TrainConfig tc = cfg.trainer;
  tc.seed = seed;
  TrainCallback cb;
  if (stop) cb = [&](std::size_t it, double loss, const Model& m) { return !stop(it, loss, m, r.task); };
  r.train = train(model, r.task.x0, *r.task.objective, tc, cb);
  return r;
}

double endpoint_accuracy(const Model& m, const Task& task, const SolverConfig& cfg) {
  const Trajectory tr = integrate_phase(m, task.x0, {0.0, 1.0}, cfg);
  return static_cast<const XentObjective&>(*task.objective).accuracy(tr.states.back());
}

// A SONODE with zero acceleration and g(x0) = -2 x0 / T maps x0 to -x0 at T.
Model planted_parity_model(double t_end) {
  InitMap g;
  g.kind = InitKind::mlp;
  g.mlp = MlpParams::affine(Tensor::matrix(1, 1, {-2.0 / t_end}), Tensor::vector({0.0}));
  return Model(sonode_spec(1), MlpParams::zeros({2, 1}, Activation::none, Activation::none), g);
}

Outcome c1_c2(std::vector<GradCheckRow>& rows_out) {
  double worst_so = 0.0, worst_fd = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GradCheckCase c = random_sonode_case(seed, 1 + seed % 3, 16);
    GradCheckOptions opt;
    opt.include_backprop = false;
    const auto rows = grad_check(c.model, c.x0, c.objective, seed, opt);
    for (const auto& r : rows) {
      if (r.engine_b == "second_order") worst_so = std::max(worst_so, r.rel_err);
      if (r.engine_b == "finite_diff") worst_fd = std::max(worst_fd, r.rel_err);
    }
    rows_out.insert(rows_out.end(), rows.begin(), rows.end());
  }
  return {worst_so <= 1e-4 && worst_fd <= 1e-3,
          "max rel coupled/second_order " + fmt(worst_so) + ", max rel vs finite differences " + fmt(worst_fd)};
}

Outcome c2(const std::vector<GradCheckRow>& rows) {
  bool ok = true;
  std::size_t cases = 0;
  std::ostringstream os;
  for (const auto& r : rows) {
    if (r.engine_a != "coupled" || r.engine_b != "second_order" || r.param_group != "theta_f") continue;
    ++cases;
    ok = ok && r.vjp_calls_b >= r.vjp_calls_a;
    if (cases <= 4) os << (cases > 1 ? " " : "") << r.vjp_calls_a << "/" << r.vjp_calls_b;
  }
  return {ok && cases == 20, std::to_string(cases) + " cases, vjp calls coupled/second_order " + os.str() + " ..."};
}

Outcome c3() {
  const double t_end = 1.0;
  const Model m = planted_parity_model(t_end);
  const Tensor x0 = Tensor::matrix(5, 1, {-2.0, -1.0, 0.0, 0.3, 1.0});
  const Trajectory tr = integrate_phase(m, x0, {0.0, t_end}, SolverConfig::precise());
  double err = 0.0;
  for (std::size_t b = 0; b < 5; ++b) err = std::max(err, std::abs(tr.states.back()(b, 0) + x0(b, 0)));
  return {err <= 1e-8, "max |x(T) + x0| = " + fmt(err)};
}

Outcome c4() {
  std::vector<bool> ok;
  std::vector<double> so, nd;
  for (auto seed : kSeeds) {
    const auto r = train_preset(preset("parity1d-sonode"), seed, [](std::size_t, double loss, const Model&, const Task&) {
      return loss < 1e-3;
    });
    so.push_back(r.train.log.rows.back().loss);
    ok.push_back(so.back() < 1e-3);
    const auto n = run_training(preset("parity1d-node"), seed);
    nd.push_back(n.train_loss);
  }
  const bool node_ok = std::all_of(nd.begin(), nd.end(), [](double v) { return v >= 0.9; });
  return {majority(ok) && node_ok, "sonode mse " + list(so) + ", node mse " + list(nd)};
}

Outcome c5() {
  const double omega = 1.0, gamma = 0.1667;
  const FunctionalPair p = two_function_pair(1.2, omega, gamma);
  const auto times = linspace(0.0, 10.0, 201);
  double err = 0.0;
  for (double x0 : {0.0, 1.0}) {
    const Trajectory tr = integrate_pair(p, {x0}, {0.0}, times, SolverConfig::precise());
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double t = times[i];
      const double truth = std::exp(-gamma * t) * (x0 == 0.0 ? std::sin(omega * t) : std::cos(omega * t));
      err = std::max(err, std::abs(tr.states[i][0] - truth));
    }
  }
  return {err <= 1e-4, "max abs error " + fmt(err)};
}

Outcome c6() {
  const ClosedForm law_cf = ClosedForm::damped_oscillator(1.0, 0.1667);
  const AccelLaw law = AccelLaw::from_closed_form(law_cf);
  const FunctionalPair p = two_function_pair(1.2, 1.0, 0.1667);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double e_id = 0.0, e_pair = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec x{u(rng)}, a{u(rng)};
    e_id = std::max(e_id, std::abs(compute_G(Coupling::identity(1), law, x, a, 0.0)[0] - law.f(x, a, 0.0)[0]));
    e_pair = std::max(e_pair, std::abs(compute_G(p.F, law, x, a, 0.0)[0] - p.G(x, a, 0.0)[0]));
  }
  return {e_id <= 1e-12 && e_pair <= 1e-6, "identity error " + fmt(e_id) + ", pair error " + fmt(e_pair)};
}

Outcome c7() {
  const FunctionalPair base = two_function_pair(1.2, 1.0, 0.1667);
  const AccelLaw law = AccelLaw::from_closed_form(ClosedForm::damped_oscillator(1.0, 0.1667));
  const auto times = linspace(0.0, 10.0, 101);
  const SolverConfig cfg = SolverConfig::tolerance(1e-11);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mag(0.2, 2.0), pos(-1.0, 1.0);
  double real_diff = 0.0, aug_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 5; ++k) {
    const double x0 = pos(rng), a0 = pos(rng);
    const double alpha = (k % 2 ? -1.0 : 1.0) * mag(rng);
    const FunctionalPair shifted = gauge_transform(base, law, GaugeSpec::through(Tensor::matrix(1, 1, {alpha}), {x0}));
    const Trajectory ref = integrate_pair(base, {x0}, {a0}, times, cfg);
    const Trajectory tr = integrate_pair(shifted, {x0}, {a0}, times, cfg);
    double aug = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      real_diff = std::max(real_diff, std::abs(tr.states[i][0] - ref.states[i][0]));
      aug = std::max(aug, std::abs(tr.states[i][1] - ref.states[i][1]));
    }
    aug_min = std::min(aug_min, aug);
  }
  return {real_diff <= 1e-6 && aug_min >= 1e-3,
          "max real difference " + fmt(real_diff) + ", min augmented sup difference " + fmt(aug_min)};
}

Trajectory from_series(const TimeSeries& ts) {
  Trajectory t;
  t.times = ts.times;
  for (std::size_t i = 0; i < ts.size(); ++i) t.states.push_back(ts.at(i));
  return t;
}

Outcome c8() {
  const auto times = linspace(0.0, 10.0, 201);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t phase_hits = 0;
  for (int k = 0; k < 10; ++k) {
    const Trajectory a = from_series(gen_damped_osc(1.0, 0.1667, u(rng), u(rng), times));
    const Trajectory b = from_series(gen_damped_osc(1.0, 0.1667, u(rng), u(rng), times));
    phase_hits += crossing_check(a, b, CrossingSpace::phase).size();
  }
  const Model m = planted_parity_model(1.0);
  const Trajectory tr = integrate_phase(m, Tensor::matrix(2, 1, {1.0, -1.0}), linspace(0.0, 1.0, 21),
                                        SolverConfig::precise());
  Trajectory up, down;
  up.times = down.times = tr.times;
  for (const auto& s : tr.states) {
    up.states.push_back(Tensor::vector({s(0, 0), s(0, 1)}));
    down.states.push_back(Tensor::vector({s(1, 0), s(1, 1)}));
  }
  CrossingOptions opt;
  opt.time_axis = true;
  const std::size_t real_hits = crossing_check(up, down, CrossingSpace::real, opt).size();
  const std::size_t parity_phase = crossing_check(up, down, CrossingSpace::phase, opt).size();
  return {phase_hits == 0 && real_hits > 0,
          "damped phase crossings " + std::to_string(phase_hits) + ", parity real crossings " +
              std::to_string(real_hits) + ", parity phase crossings " + std::to_string(parity_phase)};
}

Outcome c9() {
  const HomeoReport r = homeo_counterexample();
  const double err = std::max(std::abs(r.outputs[0] - 2.0), std::abs(r.outputs[1] - 2.0));
  return {err <= 1e-8 && r.injectivity_violated,
          "x(1) = " + list(r.outputs) + ", non-injective " + (r.injectivity_violated ? "true" : "false")};
}

Outcome c10() {
  auto full = [](std::size_t, double, const Model& m, const Task& task) {
    return endpoint_accuracy(m, task, SolverConfig::training()) == 1.0;
  };
  std::vector<double> acc_anode, acc_sonode, acc_node;
  std::vector<bool> ok_anode, ok_sonode;
  for (auto seed : kSeeds) {
    for (auto [name, acc, ok] : {std::tuple{"spheres-anode", &acc_anode, &ok_anode},
                                 std::tuple{"spheres-sonode", &acc_sonode, &ok_sonode}}) {
      const ExperimentConfig cfg = preset(name);
      const Run r = train_preset(cfg, seed, full);
      acc->push_back(endpoint_accuracy(r.train.model, r.task, cfg.solver()));
      ok->push_back(acc->back() == 1.0);
    }
    acc_node.push_back(run_training(preset("spheres-node"), seed).accuracy);
  }
  const bool node_ok = std::all_of(acc_node.begin(), acc_node.end(), [](double a) { return a < 1.0; });
  return {majority(ok_anode) && majority(ok_sonode) && node_ok,
          "accuracy anode " + list(acc_anode) + ", sonode " + list(acc_sonode) + ", node " + list(acc_node)};
}

Outcome c11() {
  auto reached = [](std::size_t, double loss, const Model&, const Task&) { return loss < 1e-2; };
  std::vector<double> so, an;
  std::vector<bool> ok;
  for (auto seed : kSeeds) {
    auto iters = [&](const char* name) {
      const std::size_t it = train_preset(preset(name), seed, reached).train.log.iters_to(1e-2);
      return it == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(it);
    };
    so.push_back(iters("osc-sonode"));
    an.push_back(iters("osc-anode"));
    ok.push_back(so.back() < an.back());
  }
  return {majority(ok), "iterations to 1e-2 sonode " + list(so) + ", anode " + list(an)};
}

Outcome c12() {
  std::vector<double> so, an;
  std::vector<bool> ok;
  for (auto seed : kSeeds) {
    so.push_back(run_training(preset("sine-sonode"), seed).test_loss);
    an.push_back(run_training(preset("sine-anode"), seed).test_loss);
    ok.push_back(so.back() <= an.back());
  }
  return {majority(ok), "sigma 0.5 test mse sonode " + list(so) + ", anode " + list(an)};
}

Outcome c13() {
  const double omega = 1.0, gamma = 0.1667;
  const auto osc = run_training(preset("osc-closed-form"), 0).train.model.closed_form().coefficient_map();
  const double ek = std::abs(osc.at("k0") + (omega * omega + gamma * gamma)) / (omega * omega + gamma * gamma);
  const double ec = std::abs(osc.at("c0") + 2.0 * gamma) / (2.0 * gamma);
  const auto duf = run_training(preset("silverbox-fixture-closed-form"), 0).train.model.closed_form().coefficient_map();
  double ed = 0.0;
  std::vector<double> got;
  for (const auto& [k, v] : duffing_fixture_coefficients()) {
    ed = std::max(ed, std::abs(duf.at(k) - v) / std::abs(v));
    got.push_back(duf.at(k));
  }
  return {std::max(ek, ec) <= 0.05 && ed <= 0.10,
          "oscillator k0 " + fmt(osc.at("k0")) + " c0 " + fmt(osc.at("c0")) + " (max rel " + fmt(std::max(ek, ec)) +
              "), duffing a b c d " + list(got) + " (max rel " + fmt(ed) + ")"};
}

Outcome c14() {
  InitMap g;
  g.kind = InitKind::fixed;
  g.fixed = Tensor::vector({0.5, -2.0});
  const Model m(kth_spec(1, 3), MlpParams::zeros({3, 1}, Activation::none, Activation::none), g);
  const auto times = linspace(0.0, 4.0, 17);
  const Trajectory tr = forward_model(m, Tensor::vector({1.0}), times, SolverConfig::precise());
  double err = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    err = std::max(err, std::abs(tr.states[i][0] - (1.0 + 0.5 * t - t * t)));
  }
  std::vector<double> mse;
  std::vector<bool> ok;
  for (auto seed : kSeeds) {
    mse.push_back(run_training(preset("tonode"), seed).train_loss);
    ok.push_back(mse.back() < 1e-2);
  }
  return {err <= 1e-8 && majority(ok), "quadratic error " + fmt(err) + ", tonode mse " + list(mse)};
}

Outcome c15() {
  std::size_t checked = 0;
  std::string mismatch;
  for (const auto& [name, base] : presets()) {
    ExperimentConfig cfg = base;
    cfg.trainer.iters = std::min<std::size_t>(cfg.trainer.iters, 3);
    auto log = [&] {
      try {
        return run_training(cfg, cfg.trainer.seed).train.log.to_csv();
      } catch (const Error& e) {
        return std::string("error: ") + e.what();
      }
    };
    const std::string a = log();
    const std::string b = log();
    ++checked;
    if (a != b) mismatch += " " + name;
  }
  return {mismatch.empty(), std::to_string(checked) + " presets re-run" +
                                (mismatch.empty() ? ", logs identical" : ", differing:" + mismatch)};
}

}  // namespace

int main() {
  int failures = 0;
  std::vector<GradCheckRow> grad_rows;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, [&] { return c1_c2(grad_rows); }},
      {2, [&] { return c2(grad_rows); }},
      {3, c3},
      {4, c4},
      {5, c5},
      {6, c6},
      {7, c7},
      {8, c8},
      {9, c9},
      {10, c10},
      {11, c11},
      {12, c12},
      {13, c13},
      {14, c14},
      {15, c15},
  };
  for (const auto& [id, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("criterion %2d: %s  %s  (%.1fs)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
