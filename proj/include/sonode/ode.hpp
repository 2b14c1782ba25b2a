#pragma once

// Explicit Runge-Kutta integration: classic fixed-step RK4 and adaptive
// Dormand-Prince 5(4) with FSAL. Both directions of time are supported; a
// backward solve steps in the reversed variable s = -t so the same stepping
// code serves both.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sonode/errors.hpp"
#include "sonode/tensor.hpp"

namespace sonode {

enum class Method { rk4, dopri5 };

struct SolverConfig {
  Method method = Method::dopri5;
  double rtol = 1e-6;
  double atol = 1e-6;
  /// Initial step magnitude for dopri5; 0 selects one from the field at t0.
  double h_init = 0.0;
  double h_min = 1e-12;
  std::size_t max_steps = 200000;
  /// rk4 takes exactly this many equal steps per integrate() call.
  std::size_t rk4_steps = 100;

  void validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("solver tolerances must be positive");
    if (!(h_min > 0.0)) throw ConfigError("h_min must be positive");
    if (h_init < 0.0) throw ConfigError("h_init must be non-negative");
    if (max_steps == 0) throw ConfigError("max_steps must be positive");
    if (method == Method::rk4 && rk4_steps == 0) throw ConfigError("rk4_steps must be positive");
  }

  /// Defaults used while training.
  static SolverConfig training() { return {}; }

  /// Defaults for ground-truth generation and gradient checks.
  static SolverConfig precise() {
    SolverConfig c;
    c.rtol = c.atol = 1e-9;
    return c;
  }

  static SolverConfig tolerance(double tol) {
    SolverConfig c;
    c.rtol = c.atol = tol;
    return c;
  }

  static SolverConfig fixed_rk4(std::size_t steps) {
    SolverConfig c;
    c.method = Method::rk4;
    c.rk4_steps = steps;
    return c;
  }
};

/// A vector field writes dz/dt at (t, z) into dz.
template <class F>
concept VectorField = requires(F f, double t, std::span<const double> z, std::span<double> dz) {
  f(t, z, dz);
};

struct SolveStats {
  std::size_t nfe = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  /// Largest scaled error estimate seen on an accepted dopri5 step.
  double max_accepted_error = 0.0;
};

/// Stateful integrator that can be advanced through a sequence of target
/// times, carrying step size and the FSAL derivative between calls.
template <VectorField Field>
class Integrator {
 public:
  Integrator(Field& field, const SolverConfig& cfg, double t0, std::vector<double> z0)
      : field_(field), cfg_(cfg), t_(t0), z_(std::move(z0)) {
    cfg_.validate();
    check_finite(z_, "initial state");
    const std::size_t n = z_.size();
    for (auto& k : k_) k.assign(n, 0.0);
    tmp_.assign(n, 0.0);
    znew_.assign(n, 0.0);
  }

  double time() const noexcept { return t_; }
  const std::vector<double>& state() const noexcept { return z_; }
  std::vector<double>& mutable_state() noexcept {
    have_k1_ = false;
    return z_;
  }
  const SolveStats& stats() const noexcept { return stats_; }

  /// Replace the state at the current time (e.g. after a jump).
  void reset(std::vector<double> z) {
    if (z.size() != z_.size()) throw DimensionError("integrator reset with wrong state size");
    z_ = std::move(z);
    have_k1_ = false;
  }

  void advance_to(double t1) {
    if (t1 == t_) return;
    if (cfg_.method == Method::rk4) {
      advance_rk4(t1);
    } else {
      advance_dopri5(t1);
    }
  }

 private:
  static void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
      if (!std::isfinite(x)) throw InstabilityError(std::string("non-finite value in ") + what);
  }

  void eval(double t, std::span<const double> z, std::vector<double>& out) {
    field_(t, z, std::span<double>(out));
    ++stats_.nfe;
    check_finite(out, "vector field output");
  }

  void advance_rk4(double t1) {
    const std::size_t n = z_.size();
    const std::size_t steps = cfg_.rk4_steps;
    const double h = (t1 - t_) / static_cast<double>(steps);
    const double t_start = t_;
    auto& [k1, k2, k3, k4, k5, k6, k7] = k_;
    (void)k5;
    (void)k6;
    (void)k7;
    for (std::size_t s = 0; s < steps; ++s) {
      const double t = t_start + h * static_cast<double>(s);
      eval(t, z_, k1);
      for (std::size_t i = 0; i < n; ++i) tmp_[i] = z_[i] + 0.5 * h * k1[i];
      eval(t + 0.5 * h, tmp_, k2);
      for (std::size_t i = 0; i < n; ++i) tmp_[i] = z_[i] + 0.5 * h * k2[i];
      eval(t + 0.5 * h, tmp_, k3);
      for (std::size_t i = 0; i < n; ++i) tmp_[i] = z_[i] + h * k3[i];
      eval(t + h, tmp_, k4);
      for (std::size_t i = 0; i < n; ++i) z_[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      ++stats_.accepted;
    }
    t_ = t1;
    have_k1_ = false;
    check_finite(z_, "state");
  }

  double initial_step(double dir, double span) {
    if (cfg_.h_init > 0.0) return std::min(cfg_.h_init, span);
    // Uses only the derivative already available at t0.
    const auto& k1 = k_[0];
    double d0 = 0.0;
    double d1 = 0.0;
    for (std::size_t i = 0; i < z_.size(); ++i) {
      const double sc = cfg_.atol + cfg_.rtol * std::abs(z_[i]);
      d0 = std::max(d0, std::abs(z_[i]) / sc);
      d1 = std::max(d1, std::abs(k1[i]) / sc);
    }
    (void)dir;
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    if (d1 >= 1e-5) h = std::min(h, 0.01 / d1 * 10.0);
    if (d1 < 1e-5) h = std::max(h, 1e-3 * span);
    return std::clamp(h, std::min(cfg_.h_min * 10.0, span), span);
  }

  void advance_dopri5(double t1) {
    // Dormand-Prince 5(4) tableau.
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                     b6 = 11.0 / 84;
    // Difference between 5th and embedded 4th order weights.
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const std::size_t n = z_.size();
    const double dir = t1 > t_ ? 1.0 : -1.0;
    auto& [k1, k2, k3, k4, k5, k6, k7] = k_;

    if (!have_k1_) {
      eval(t_, z_, k1);
      have_k1_ = true;
    }
    if (h_abs_ <= 0.0) h_abs_ = initial_step(dir, std::abs(t1 - t_));

    bool last_rejected = false;
    while (dir * (t1 - t_) > 0.0) {
      if (stats_.accepted + stats_.rejected >= cfg_.max_steps) {
        throw NonconvergenceError("dopri5 exceeded max_steps=" + std::to_string(cfg_.max_steps));
      }
      const double remaining = std::abs(t1 - t_);
      bool final_step = false;
      double h_abs = h_abs_;
      if (h_abs >= remaining * (1.0 - 1e-12)) {
        h_abs = remaining;
        final_step = true;
      }
      if (!final_step && h_abs < cfg_.h_min) {
        throw NonconvergenceError("dopri5 step size fell below h_min at t=" + std::to_string(t_));
      }
      const double h = dir * h_abs;

      for (std::size_t i = 0; i < n; ++i) tmp_[i] = z_[i] + h * a21 * k1[i];
      eval(t_ + c2 * h, tmp_, k2);
      for (std::size_t i = 0; i < n; ++i) tmp_[i] = z_[i] + h * (a31 * k1[i] + a32 * k2[i]);
      eval(t_ + c3 * h, tmp_, k3);
      for (std::size_t i = 0; i < n; ++i)
        tmp_[i] = z_[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      eval(t_ + c4 * h, tmp_, k4);
      for (std::size_t i = 0; i < n; ++i)
        tmp_[i] = z_[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      eval(t_ + c5 * h, tmp_, k5);
      for (std::size_t i = 0; i < n; ++i)
        tmp_[i] = z_[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      const double t_new = final_step ? t1 : t_ + h;
      eval(t_ + h, tmp_, k6);
      for (std::size_t i = 0; i < n; ++i)
        znew_[i] = z_[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
      eval(t_new, znew_, k7);

      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e =
            h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = cfg_.atol + cfg_.rtol * std::max(std::abs(z_[i]), std::abs(znew_[i]));
        err = std::max(err, std::abs(e) / sc);
      }
      if (!std::isfinite(err)) throw InstabilityError("non-finite error estimate in dopri5");

      double factor = err == 0.0 ? 10.0 : 0.9 * std::pow(1.0 / err, 0.2);
      factor = std::clamp(factor, 0.2, 10.0);
      if (err <= 1.0) {
        ++stats_.accepted;
        stats_.max_accepted_error = std::max(stats_.max_accepted_error, err);
        t_ = t_new;
        std::swap(z_, znew_);
        std::swap(k1, k7);
        if (last_rejected) factor = std::min(factor, 1.0);
        last_rejected = false;
        // A truncated final step says nothing about the natural step size.
        if (!final_step) h_abs_ = h_abs * factor;
      } else {
        ++stats_.rejected;
        last_rejected = true;
        h_abs_ = h_abs * std::min(factor, 1.0);
      }
    }
  }

  Field& field_;
  SolverConfig cfg_;
  double t_;
  std::vector<double> z_;
  std::vector<double> k_[7];
  std::vector<double> tmp_;
  std::vector<double> znew_;
  bool have_k1_ = false;
  double h_abs_ = 0.0;
  SolveStats stats_;
};

struct IntegrateResult {
  std::vector<double> state;
  SolveStats stats;
};

/// Integrates dz/dt = field(t, z) from t0 to t1 (t1 < t0 integrates backward).
template <VectorField Field>
IntegrateResult integrate(Field&& field, std::vector<double> z0, double t0, double t1,
                          const SolverConfig& cfg) {
  Integrator<std::remove_reference_t<Field>> integ(field, cfg, t0, std::move(z0));
  integ.advance_to(t1);
  return {integ.state(), integ.stats()};
}

/// Ordered (time, state) samples plus the number of field evaluations spent.
struct Trajectory {
  std::vector<double> times;
  std::vector<Tensor> states;
  std::size_t nfe = 0;
};

/// Integrates piecewise between consecutive requested times, recording the
/// state at each. times[0] is the initial time. States keep z0's shape.
template <VectorField Field>
Trajectory integrate_dense(Field&& field, const Tensor& z0, const std::vector<double>& times,
                           const SolverConfig& cfg) {
  if (times.empty()) throw DimensionError("integrate_dense needs at least one time");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw DimensionError("integrate_dense times must be strictly increasing");
  Integrator<std::remove_reference_t<Field>> integ(field, cfg, times.front(), z0.values());
  Trajectory traj;
  traj.times = times;
  traj.states.reserve(times.size());
  traj.states.push_back(z0);
  for (std::size_t i = 1; i < times.size(); ++i) {
    integ.advance_to(times[i]);
    traj.states.emplace_back(z0.shape(), integ.state());
  }
  traj.nfe = integ.stats().nfe;
  return traj;
}

/// Tensor-valued convenience wrapper: field maps (t, z) to dz/dt as Tensors.
template <class TensorField>
  requires requires(TensorField f, double t, const Tensor& z) {
    { f(t, z) } -> std::convertible_to<Tensor>;
  }
std::pair<Tensor, std::size_t> integrate(TensorField&& field, const Tensor& z0, double t0, double t1,
                                         const SolverConfig& cfg) {
  const auto shape = z0.shape();
  auto adapter = [&](double t, std::span<const double> z, std::span<double> dz) {
    Tensor in(shape, std::vector<double>(z.begin(), z.end()));
    Tensor out = field(t, in);
    if (out.size() != dz.size()) throw DimensionError("vector field returned wrong size");
    std::copy(out.values().begin(), out.values().end(), dz.begin());
  };
  auto res = integrate(adapter, z0.values(), t0, t1, cfg);
  return {Tensor(shape, std::move(res.state)), res.stats.nfe};
}

}  // namespace sonode
