#pragma once

// Cross-engine gradient comparison on small random second-order models.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sonode/adjoint.hpp"
#include "sonode/model.hpp"
#include "sonode/objective.hpp"

namespace sonode {

struct GradCheckCase {
  std::uint64_t seed = 0;
  Model model;
  Tensor x0;
  MseObjective objective{{0.0}, {Tensor{}}};
};

/// Random SONODE with one hidden layer of width 4..max_width in f, g and
/// (for odd seeds) a learned state map s. Batch of 3 with random targets at
/// t = 0.5 and 1.
inline GradCheckCase random_sonode_case(std::uint64_t seed, std::size_t d, std::size_t max_width = 16) {
  std::mt19937_64 rng(seed * 7919 + d);
  std::uniform_int_distribution<std::size_t> width(4, std::max<std::size_t>(4, max_width));
  std::normal_distribution<double> normal(0.0, 1.0);
  ArchSpec arch;
  arch.hidden = {width(rng)};
  arch.g_hidden = {width(rng)};
  arch.learn_s = seed % 2 == 1;
  arch.s_hidden = {width(rng)};
  GradCheckCase c;
  c.seed = seed;
  c.model = build_model(sonode_spec(d), arch, seed);
  const std::size_t batch = 3;
  c.x0 = Tensor({batch, d});
  for (auto& v : c.x0.values()) v = 0.5 * normal(rng);
  std::vector<Tensor> targets(3);
  for (std::size_t i = 1; i < 3; ++i) {
    targets[i] = Tensor({batch, d});
    for (auto& v : targets[i].values()) v = normal(rng);
  }
  c.objective = MseObjective({0.0, 0.5, 1.0}, targets);
  return c;
}

struct GradCheckRow {
  std::uint64_t seed = 0;
  std::size_t d = 0;
  std::string engine_a;
  std::string engine_b;
  std::string param_group;
  double rel_err = 0.0;
  std::size_t vjp_calls_a = 0;
  std::size_t vjp_calls_b = 0;
};

struct GradCheckOptions {
  SolverConfig solver = SolverConfig::precise();
  std::size_t backprop_steps = 200;
  double fd_step = 1e-5;
  bool include_backprop = true;
  bool include_fd = true;
};

/// Compares every engine pair on one case, one row per parameter group.
/// Empty groups compare as zero error.
inline std::vector<GradCheckRow> grad_check(const Model& m, const Tensor& x0, Objective& obj, std::uint64_t seed,
                                            const GradCheckOptions& opt = {}) {
  std::vector<std::pair<std::string, GradResult>> res;
  EngineOptions eo;
  eo.fd_step = opt.fd_step;
  res.emplace_back("coupled", grad_coupled(m, x0, obj, opt.solver, eo));
  if (m.spec().kind == ModelKind::sonode) res.emplace_back("second_order", grad_second_order(m, x0, obj, opt.solver, eo));
  if (opt.include_backprop) res.emplace_back("backprop", grad_backprop_solver(m, x0, obj, opt.backprop_steps, eo));
  if (opt.include_fd) res.emplace_back("finite_diff", grad_finite_diff(m, x0, obj, opt.solver, opt.fd_step));
  std::vector<GradCheckRow> rows;
  for (std::size_t i = 0; i < res.size(); ++i) {
    for (std::size_t j = i + 1; j < res.size(); ++j) {
      const auto& a = res[i].second;
      const auto& b = res[j].second;
      const std::pair<const char*, std::pair<const std::vector<double>*, const std::vector<double>*>> groups[] = {
          {"theta_f", {&a.d_theta_f, &b.d_theta_f}},
          {"theta_g", {&a.d_theta_g, &b.d_theta_g}},
          {"theta_s", {&a.d_theta_s, &b.d_theta_s}}};
      for (const auto& [name, pv] : groups) {
        GradCheckRow r;
        r.seed = seed;
        r.d = m.spec().d;
        r.engine_a = res[i].first;
        r.engine_b = res[j].first;
        r.param_group = name;
        r.rel_err = relative_error(*pv.first, *pv.second);
        r.vjp_calls_a = a.counters.vjp_calls;
        r.vjp_calls_b = b.counters.vjp_calls;
        rows.push_back(r);
      }
    }
  }
  return rows;
}

inline std::string grad_check_csv(const std::vector<GradCheckRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << "seed,d,engine_a,engine_b,param_group,rel_err,vjp_calls_a,vjp_calls_b\n";
  for (const auto& r : rows)
    os << r.seed << ',' << r.d << ',' << r.engine_a << ',' << r.engine_b << ',' << r.param_group << ',' << r.rel_err << ','
       << r.vjp_calls_a << ',' << r.vjp_calls_b << '\n';
  return os.str();
}

}  // namespace sonode
