#pragma once

// Gradient engines for model parameters:
//   coupled       first-order adjoint on the full phase state
//   second_order  adjoint r of the velocity block, integrated as a
//                 second-order ODE (sonode models only)
//   backprop      reverse sweep through fixed-step RK4
//   finite_diff   central differences, one parameter at a time
//
// All engines re-run the forward solve themselves and report the same loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sonode/errors.hpp"
#include "sonode/model.hpp"
#include "sonode/objective.hpp"
#include "sonode/ode.hpp"
#include "sonode/tensor.hpp"

namespace sonode {

enum class EngineKind { coupled, second_order, backprop, finite_diff };

inline std::string to_string(EngineKind e) {
  switch (e) {
    case EngineKind::coupled: return "coupled";
    case EngineKind::second_order: return "second_order";
    case EngineKind::backprop: return "backprop";
    default: return "finite_diff";
  }
}

inline EngineKind engine_from_string(const std::string& s) {
  if (s == "coupled") return EngineKind::coupled;
  if (s == "second_order") return EngineKind::second_order;
  if (s == "backprop") return EngineKind::backprop;
  if (s == "finite_diff") return EngineKind::finite_diff;
  throw ConfigError("unknown engine '" + s + "'");
}

struct GradResult {
  std::vector<double> d_theta_f;
  std::vector<double> d_theta_g;
  std::vector<double> d_theta_s;
  std::vector<double> d_extra;  // loss-owned parameters
  OpCounters counters;          // backward pass only
  double loss = 0.0;
  std::size_t forward_nfe = 0;
  /// Per observation time (after that time's jump): the coupled engine stores
  /// lambda (B x P), the second-order engine stores r (B x d). Empty unless
  /// requested.
  std::vector<Tensor> adjoint_at_obs;

  /// Model gradients in parameter order theta_f, theta_g, theta_s.
  std::vector<double> model_grad() const {
    std::vector<double> g = d_theta_f;
    g.insert(g.end(), d_theta_g.begin(), d_theta_g.end());
    g.insert(g.end(), d_theta_s.begin(), d_theta_s.end());
    return g;
  }
};

struct EngineOptions {
  bool instrument = true;
  bool record_adjoint = false;
  /// backprop: refuse to store more than this many doubles of stage data.
  std::size_t memory_cap = 50'000'000;
  /// finite_diff: absolute perturbation per parameter.
  double fd_step = 1e-5;
};

namespace detail {

inline void check_objective(const Model& m, const Tensor& x0, const Objective& obj) {
  if (obj.times().empty()) throw DimensionError("objective has no times");
  (void)m;
  (void)x0;
}


inline void finish_initial(const Model& m, const Tensor& x0, std::span<const double> lambda0, GradResult& r) {
  r.d_theta_g.assign(m.theta_g_count(), 0.0);
  r.d_theta_s.assign(m.theta_s_count(), 0.0);
  m.lift_vjp(x0, lambda0, r.d_theta_g, r.d_theta_s);
}

}  // namespace detail

/// Loss of the model on the objective (forward solve only).
inline double evaluate_loss(const Model& m, const Tensor& x0, const Objective& obj, const SolverConfig& cfg) {
  const Trajectory traj = integrate_phase(m, x0, obj.times(), cfg);
  return obj.evaluate(traj.states, nullptr);
}

/// Coupled first-order adjoint. Integrates [z, lambda, a_theta] backward,
/// adding the loss cotangent to lambda at every observation time.
inline GradResult grad_coupled(const Model& m, const Tensor& x0, const Objective& obj, const SolverConfig& cfg,
                               const EngineOptions& opts = {}) {
  detail::check_objective(m, x0, obj);
  const auto& times = obj.times();
  const Trajectory traj = integrate_phase(m, x0, times, cfg);
  GradResult r;
  r.forward_nfe = traj.nfe;
  r.counters.enabled = opts.instrument;
  std::vector<Tensor> cot;
  r.loss = obj.evaluate(traj.states, &cot, &r.d_extra);

  const std::size_t n = traj.states.front().size();
  const std::size_t nf = m.theta_f_count();
  const std::size_t last = times.size() - 1;
  OpCounters* ctr = &r.counters;

  auto backward = [&](double t, std::span<const double> y, std::span<double> dy) {
    const auto z = y.subspan(0, n);
    const auto lam = y.subspan(n, n);
    auto dz = dy.subspan(0, n);
    auto dlam = dy.subspan(n, n);
    auto dth = dy.subspan(2 * n, nf);
    m.field(t, z, dz, ctr);
    std::fill(dlam.begin(), dlam.end(), 0.0);
    std::fill(dth.begin(), dth.end(), 0.0);
    m.field_vjp(t, z, lam, dlam, dth, ctr);
    for (auto& v : dlam) v = -v;
    for (auto& v : dth) v = -v;
  };

  std::vector<double> y(2 * n + nf, 0.0);
  std::copy(traj.states[last].values().begin(), traj.states[last].values().end(), y.begin());
  std::copy(cot[last].values().begin(), cot[last].values().end(), y.begin() + n);
  if (opts.record_adjoint) r.adjoint_at_obs.assign(times.size(), Tensor());
  if (opts.record_adjoint) r.adjoint_at_obs[last] = Tensor(traj.states[last].shape(), {y.begin() + n, y.begin() + 2 * n});

  Integrator<decltype(backward)> integ(backward, cfg, times[last], y);
  for (std::size_t i = last; i-- > 0;) {
    integ.advance_to(times[i]);
    std::vector<double> yi = integ.state();
    std::copy(traj.states[i].values().begin(), traj.states[i].values().end(), yi.begin());
    for (std::size_t k = 0; k < n; ++k) yi[n + k] += cot[i][k];
    if (opts.record_adjoint) r.adjoint_at_obs[i] = Tensor(traj.states[i].shape(), {yi.begin() + n, yi.begin() + 2 * n});
    integ.reset(std::move(yi));
  }
  const auto& yf = integ.state();
  r.d_theta_f.assign(yf.begin() + 2 * n, yf.end());
  detail::finish_initial(m, x0, std::span<const double>(yf).subspan(n, n), r);
  if (!opts.instrument) r.counters = OpCounters{};
  return r;
}

/// Second-order adjoint for sonode models. With z = [x, v] and acceleration
/// f, the adjoint r of v obeys
///   r'' = r^T df/dx - r'^T df/dv - r^T d/dt(df/dv),
/// integrated backward together with z and a_theta' = -r^T df/dtheta. At an
/// observation with cotangents (Lx, Lv):
///   r += Lv,  r' += -Lx - Lv^T df/dv.
/// The total derivative term is a central difference of the VJP along the
/// flow direction (z', 1).
inline GradResult grad_second_order(const Model& m, const Tensor& x0, const Objective& obj,
                                    const SolverConfig& cfg, const EngineOptions& opts = {}) {
  if (m.spec().kind != ModelKind::sonode)
    throw ModelKindError("second-order adjoint needs a sonode model, got " + to_string(m.spec().kind));
  detail::check_objective(m, x0, obj);
  const auto& times = obj.times();
  const Trajectory traj = integrate_phase(m, x0, times, cfg);
  GradResult r;
  r.forward_nfe = traj.nfe;
  r.counters.enabled = opts.instrument;
  std::vector<Tensor> cot;
  r.loss = obj.evaluate(traj.states, &cot, &r.d_extra);

  const std::size_t d = m.spec().d;
  const std::size_t p = 2 * d;
  const std::size_t n = traj.states.front().size();  // B * p
  const std::size_t batch = n / p;
  const std::size_t nb = batch * d;
  const std::size_t nf = m.theta_f_count();
  const std::size_t last = times.size() - 1;
  OpCounters* ctr = &r.counters;

  // u^T df/dv for a B x d cotangent u at (t, z).
  auto vjp_v = [&](double t, std::span<const double> z, std::span<const double> u, std::span<double> out,
                   std::span<double> gtheta = {}) {
    std::vector<double> gz(n, 0.0);
    m.head_vjp(t, z, u, gz, gtheta, ctr);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < d; ++i) out[b * d + i] = gz[b * p + d + i];
  };

  std::vector<double> gz(n), gzp(n), gplus(n), gzm(n), zp(n), zm(n);
  auto backward = [&](double t, std::span<const double> y, std::span<double> dy) {
    const auto z = y.subspan(0, n);
    const auto rr = y.subspan(n, nb);
    const auto rd = y.subspan(n + nb, nb);
    auto dz = dy.subspan(0, n);
    auto drr = dy.subspan(n, nb);
    auto drd = dy.subspan(n + nb, nb);
    auto dth = dy.subspan(n + 2 * nb, nf);
    m.field(t, z, dz, ctr);
    // r^T [df/dx, df/dv] and r^T df/dtheta.
    std::fill(gz.begin(), gz.end(), 0.0);
    std::fill(dth.begin(), dth.end(), 0.0);
    m.head_vjp(t, z, rr, gz, dth, ctr);
    for (auto& v : dth) v = -v;
    // r'^T df/dv.
    std::fill(gzp.begin(), gzp.end(), 0.0);
    m.head_vjp(t, z, rd, gzp, {}, ctr);
    // d/dt (r^T df/dv) with r held fixed.
    double scale = 0.0;
    for (double v : z) scale = std::max(scale, std::abs(v));
    const double h = 1e-4 * (1.0 + scale);
    for (std::size_t k = 0; k < n; ++k) {
      zp[k] = z[k] + h * dz[k];
      zm[k] = z[k] - h * dz[k];
    }
    std::fill(gplus.begin(), gplus.end(), 0.0);
    std::fill(gzm.begin(), gzm.end(), 0.0);
    m.head_vjp(t + h, zp, rr, gplus, {}, ctr);
    m.head_vjp(t - h, zm, rr, gzm, {}, ctr);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t xi = b * p + i;
        const std::size_t vi = b * p + d + i;
        const double ddt = (gplus[vi] - gzm[vi]) / (2.0 * h);
        drr[b * d + i] = rd[b * d + i];
        drd[b * d + i] = gz[xi] - gzp[vi] - ddt;
      }
  };

  // Jump at observation i: r += Lv, r' += -Lx - Lv^T df/dv.
  auto apply_jump = [&](std::size_t i, std::vector<double>& y) {
    const Tensor& c = cot[i];
    bool any = false;
    for (double v : c.values()) any = any || v != 0.0;
    if (!any) return;
    std::vector<double> lv(nb), lvf(nb);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < d; ++k) lv[b * d + k] = c[b * p + d + k];
    vjp_v(times[i], traj.states[i].data(), lv, lvf);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < d; ++k) {
        y[n + b * d + k] += lv[b * d + k];
        y[n + nb + b * d + k] += -c[b * p + k] - lvf[b * d + k];
      }
  };
  auto record = [&](std::size_t i, const std::vector<double>& y) {
    if (opts.record_adjoint) r.adjoint_at_obs[i] = Tensor({batch, d}, {y.begin() + n, y.begin() + n + nb});
  };

  std::vector<double> y(n + 2 * nb + nf, 0.0);
  std::copy(traj.states[last].values().begin(), traj.states[last].values().end(), y.begin());
  if (opts.record_adjoint) r.adjoint_at_obs.assign(times.size(), Tensor());
  apply_jump(last, y);
  record(last, y);

  Integrator<decltype(backward)> integ(backward, cfg, times[last], y);
  for (std::size_t i = last; i-- > 0;) {
    integ.advance_to(times[i]);
    std::vector<double> yi = integ.state();
    std::copy(traj.states[i].values().begin(), traj.states[i].values().end(), yi.begin());
    apply_jump(i, yi);
    record(i, yi);
    integ.reset(std::move(yi));
  }
  const auto& yf = integ.state();
  r.d_theta_f.assign(yf.begin() + n + 2 * nb, yf.end());

  // lambda_x = -r' - r^T df/dv, lambda_v = r at t0.
  std::vector<double> rfv(nb);
  vjp_v(times[0], traj.states[0].data(), std::span<const double>(yf).subspan(n, nb), rfv);
  std::vector<double> lambda0(n);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < d; ++k) {
      lambda0[b * p + k] = -yf[n + nb + b * d + k] - rfv[b * d + k];
      lambda0[b * p + d + k] = yf[n + b * d + k];
    }
  detail::finish_initial(m, x0, lambda0, r);
  if (!opts.instrument) r.counters = OpCounters{};
  return r;
}

/// Exact gradient of the discretized forward pass: RK4 with cfg.rk4_steps
/// equal steps between consecutive objective times, differentiated by a
/// reverse sweep over the stored stages.
inline GradResult grad_backprop_solver(const Model& m, const Tensor& x0, const Objective& obj, std::size_t n_steps,
                                       const EngineOptions& opts = {}) {
  detail::check_objective(m, x0, obj);
  if (n_steps == 0) throw ConfigError("backprop engine needs n_steps > 0");
  const auto& times = obj.times();
  const std::size_t segs = times.size() - 1;
  const Tensor z0 = m.lift(x0);
  const std::size_t n = z0.size();
  const std::size_t stored = (segs * n_steps * 4 + times.size()) * n;
  if (stored > opts.memory_cap)
    throw MemoryCapError("backprop engine would store " + std::to_string(stored) + " values (cap " +
                         std::to_string(opts.memory_cap) + ")");

  GradResult r;
  r.counters.enabled = opts.instrument;
  OpCounters* ctr = &r.counters;

  // Forward: per step keep z_n, k1, k2, k3.
  std::vector<std::vector<double>> zs, k1s, k2s, k3s;
  zs.reserve(segs * n_steps);
  std::vector<Tensor> states{z0};
  std::vector<double> z = z0.values(), k1(n), k2(n), k3(n), k4(n), u(n);
  for (std::size_t s = 0; s < segs; ++s) {
    const double h = (times[s + 1] - times[s]) / static_cast<double>(n_steps);
    for (std::size_t j = 0; j < n_steps; ++j) {
      const double t = times[s] + h * static_cast<double>(j);
      m.field(t, z, k1);
      for (std::size_t i = 0; i < n; ++i) u[i] = z[i] + 0.5 * h * k1[i];
      m.field(t + 0.5 * h, u, k2);
      for (std::size_t i = 0; i < n; ++i) u[i] = z[i] + 0.5 * h * k2[i];
      m.field(t + 0.5 * h, u, k3);
      for (std::size_t i = 0; i < n; ++i) u[i] = z[i] + h * k3[i];
      m.field(t + h, u, k4);
      zs.push_back(z);
      k1s.push_back(k1);
      k2s.push_back(k2);
      k3s.push_back(k3);
      for (std::size_t i = 0; i < n; ++i) z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      for (double v : z)
        if (!std::isfinite(v)) throw InstabilityError("non-finite state in rk4 forward pass");
    }
    states.emplace_back(z0.shape(), z);
  }
  r.forward_nfe = 4 * segs * n_steps;
  std::vector<Tensor> cot;
  r.loss = obj.evaluate(states, &cot, &r.d_extra);

  const std::size_t nf = m.theta_f_count();
  std::vector<double> gth(nf, 0.0);
  std::vector<double> zbar = cot[segs].values();
  std::vector<double> kb1(n), kb2(n), kb3(n), kb4(n), gz(n);
  if (opts.record_adjoint) {
    r.adjoint_at_obs.assign(times.size(), Tensor());
    r.adjoint_at_obs[segs] = Tensor(z0.shape(), zbar);
  }
  for (std::size_t s = segs; s-- > 0;) {
    const double h = (times[s + 1] - times[s]) / static_cast<double>(n_steps);
    for (std::size_t j = n_steps; j-- > 0;) {
      const std::size_t idx = s * n_steps + j;
      const double t = times[s] + h * static_cast<double>(j);
      const auto& zn = zs[idx];
      for (std::size_t i = 0; i < n; ++i) {
        kb1[i] = h / 6.0 * zbar[i];
        kb2[i] = h / 3.0 * zbar[i];
        kb3[i] = h / 3.0 * zbar[i];
        kb4[i] = h / 6.0 * zbar[i];
      }
      // Stage 4 at z + h k3.
      for (std::size_t i = 0; i < n; ++i) u[i] = zn[i] + h * k3s[idx][i];
      std::fill(gz.begin(), gz.end(), 0.0);
      m.field_vjp(t + h, u, kb4, gz, gth, ctr);
      for (std::size_t i = 0; i < n; ++i) {
        zbar[i] += gz[i];
        kb3[i] += h * gz[i];
      }
      // Stage 3 at z + h/2 k2.
      for (std::size_t i = 0; i < n; ++i) u[i] = zn[i] + 0.5 * h * k2s[idx][i];
      std::fill(gz.begin(), gz.end(), 0.0);
      m.field_vjp(t + 0.5 * h, u, kb3, gz, gth, ctr);
      for (std::size_t i = 0; i < n; ++i) {
        zbar[i] += gz[i];
        kb2[i] += 0.5 * h * gz[i];
      }
      // Stage 2 at z + h/2 k1.
      for (std::size_t i = 0; i < n; ++i) u[i] = zn[i] + 0.5 * h * k1s[idx][i];
      std::fill(gz.begin(), gz.end(), 0.0);
      m.field_vjp(t + 0.5 * h, u, kb2, gz, gth, ctr);
      for (std::size_t i = 0; i < n; ++i) {
        zbar[i] += gz[i];
        kb1[i] += 0.5 * h * gz[i];
      }
      // Stage 1 at z.
      std::fill(gz.begin(), gz.end(), 0.0);
      m.field_vjp(t, zn, kb1, gz, gth, ctr);
      for (std::size_t i = 0; i < n; ++i) zbar[i] += gz[i];
      if (ctr->enabled) ctr->field_evals += 4;
    }
    for (std::size_t i = 0; i < n; ++i) zbar[i] += cot[s][i];
    if (opts.record_adjoint) r.adjoint_at_obs[s] = Tensor(z0.shape(), zbar);
  }
  r.d_theta_f = std::move(gth);
  detail::finish_initial(m, x0, zbar, r);
  if (!opts.instrument) r.counters = OpCounters{};
  return r;
}

/// Central differences of the loss in every model and loss-owned parameter.
inline GradResult grad_finite_diff(const Model& m, const Tensor& x0, Objective& obj, const SolverConfig& cfg,
                                   double h = 1e-5) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  GradResult r;
  r.loss = evaluate_loss(m, x0, obj, cfg);
  const std::vector<double> base = m.params();
  std::vector<double> grad(base.size());
  Model probe = m;
  std::vector<double> p = base;
  for (std::size_t i = 0; i < base.size(); ++i) {
    p[i] = base[i] + h;
    probe.set_params(p);
    const double lp = evaluate_loss(probe, x0, obj, cfg);
    p[i] = base[i] - h;
    probe.set_params(p);
    const double lm = evaluate_loss(probe, x0, obj, cfg);
    p[i] = base[i];
    grad[i] = (lp - lm) / (2.0 * h);
  }
  const std::size_t nf = m.theta_f_count();
  const std::size_t ng = m.theta_g_count();
  r.d_theta_f.assign(grad.begin(), grad.begin() + nf);
  r.d_theta_g.assign(grad.begin() + nf, grad.begin() + nf + ng);
  r.d_theta_s.assign(grad.begin() + nf + ng, grad.end());

  const std::vector<double> extra = obj.extra_params();
  std::vector<double> e = extra;
  r.d_extra.assign(extra.size(), 0.0);
  for (std::size_t i = 0; i < extra.size(); ++i) {
    e[i] = extra[i] + h;
    obj.set_extra_params(e);
    const double lp = evaluate_loss(m, x0, obj, cfg);
    e[i] = extra[i] - h;
    obj.set_extra_params(e);
    const double lm = evaluate_loss(m, x0, obj, cfg);
    e[i] = extra[i];
    r.d_extra[i] = (lp - lm) / (2.0 * h);
  }
  obj.set_extra_params(extra);
  return r;
}

/// Dispatches to one engine. backprop uses cfg.rk4_steps steps per interval.
inline GradResult compute_gradient(EngineKind engine, const Model& m, const Tensor& x0, Objective& obj,
                                   const SolverConfig& cfg, const EngineOptions& opts = {}) {
  switch (engine) {
    case EngineKind::coupled: return grad_coupled(m, x0, obj, cfg, opts);
    case EngineKind::second_order: return grad_second_order(m, x0, obj, cfg, opts);
    case EngineKind::backprop: return grad_backprop_solver(m, x0, obj, cfg.rk4_steps, opts);
    default: return grad_finite_diff(m, x0, obj, cfg, opts.fd_step);
  }
}

/// Operation counters of one instrumented backward pass.
inline OpCounters count_ops(EngineKind engine, const Model& m, const Tensor& x0, Objective& obj,
                            const SolverConfig& cfg) {
  EngineOptions opts;
  opts.instrument = true;
  return compute_gradient(engine, m, x0, obj, cfg, opts).counters;
}

}  // namespace sonode
