#pragma once

// Full-batch Adam training with per-iteration logging.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sonode/adjoint.hpp"
#include "sonode/errors.hpp"
#include "sonode/model.hpp"
#include "sonode/objective.hpp"
#include "sonode/ode.hpp"

namespace sonode {

enum class LossKind { mse_states, mse_state_and_velocity, cross_entropy_endpoint };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::mse_states: return "mse_states";
    case LossKind::mse_state_and_velocity: return "mse_state_and_velocity";
    default: return "cross_entropy_endpoint";
  }
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "mse_states") return LossKind::mse_states;
  if (s == "mse_state_and_velocity") return LossKind::mse_state_and_velocity;
  if (s == "cross_entropy_endpoint") return LossKind::cross_entropy_endpoint;
  throw ConfigError("unknown loss '" + s + "'");
}

struct TrainConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::size_t iters = 100;
  LossKind loss = LossKind::mse_states;
  EngineKind engine = EngineKind::coupled;
  std::uint64_t seed = 0;
  SolverConfig solver = SolverConfig::training();
  /// Record real elapsed time; when false wall_ms is logged as 0 so logs are
  /// reproducible byte for byte.
  bool wall_time = false;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(eps_adam > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (engine == EngineKind::finite_diff) throw ConfigError("finite differences are a check, not a training engine");
    solver.validate();
  }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st, const TrainConfig& cfg) {
  if (params.size() != grads.size() || st.m.size() != params.size() || st.v.size() != params.size())
    throw DimensionError("adam_step: parameter, gradient and moment lengths differ");
  ++st.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grads[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mh = st.m[i] / c1;
    const double vh = st.v[i] / c2;
    params[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps_adam);
  }
}

struct TrainLogRow {
  std::size_t iter = 0;
  double loss = 0.0;
  std::size_t nfe_forward = 0;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "iter,loss,nfe_forward,wall_ms\n";
    for (const auto& r : rows) os << r.iter << ',' << r.loss << ',' << r.nfe_forward << ',' << r.wall_ms << '\n';
    return os.str();
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << to_csv();
    if (!out) throw IoError("failed writing '" + path + "'");
  }

  double final_loss() const { return rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().loss; }

  /// First logged iteration with loss below the threshold, or 0 if none.
  std::size_t iters_to(double threshold) const {
    for (const auto& r : rows)
      if (r.loss < threshold) return r.iter;
    return 0;
  }
};

struct TrainResult {
  Model model;
  std::vector<double> extra_params;
  TrainLog log;
};

/// Called after every update with (iteration, loss before the update,
/// updated model); return false to stop.
using TrainCallback = std::function<bool(std::size_t, double, const Model&)>;

/// Runs cfg.iters full-batch Adam steps on all model parameters and any
/// parameters owned by the objective. Row i logs the loss before update i.
inline TrainResult train(const Model& initial, const Tensor& x0, Objective& obj, const TrainConfig& cfg,
                         const TrainCallback& callback = {}) {
  cfg.validate();
  TrainResult res{initial, obj.extra_params(), {}};
  Model& model = res.model;
  const std::size_t nm = model.param_count();
  const std::size_t ne = obj.extra_count();
  std::vector<double> params = model.params();
  params.insert(params.end(), res.extra_params.begin(), res.extra_params.end());
  AdamState st(params.size());
  EngineOptions opts;
  opts.instrument = false;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t it = 1; it <= cfg.iters; ++it) {
    GradResult g = compute_gradient(cfg.engine, model, x0, obj, cfg.solver, opts);
    std::vector<double> grad = g.model_grad();
    if (g.d_extra.size() == ne) {
      grad.insert(grad.end(), g.d_extra.begin(), g.d_extra.end());
    } else {
      grad.resize(nm + ne, 0.0);
    }
    for (double v : grad)
      if (!std::isfinite(v)) throw InstabilityError("non-finite gradient at iteration " + std::to_string(it));
    TrainLogRow row;
    row.iter = it;
    row.loss = g.loss;
    row.nfe_forward = g.forward_nfe;
    if (cfg.wall_time)
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    res.log.rows.push_back(row);
    adam_step(params, grad, st, cfg);
    model.set_params(std::span<const double>(params).subspan(0, nm));
    if (ne > 0) obj.set_extra_params(std::span<const double>(params).subspan(nm));
    if (callback && !callback(it, g.loss, model)) break;
  }
  res.extra_params = obj.extra_params();
  return res;
}

}  // namespace sonode
