#pragma once

// Acceleration laws with a fixed algebraic form and learnable coefficients.
// Each template maps (x, v, t) to an acceleration of the same dimension as x.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sonode/errors.hpp"

namespace sonode {

/// Scalar external input u(t).
struct Forcing {
  enum class Kind { none, cosine, multisine, table };
  Kind kind = Kind::none;
  // cosine: amplitude * cos(omega t + phase); multisine: sum over components.
  std::vector<double> amplitudes;
  std::vector<double> omegas;
  std::vector<double> phases;
  // table: piecewise-linear through (times[i], values[i]), held constant outside.
  std::vector<double> times;
  std::vector<double> values;

  static Forcing cosine(double amplitude, double omega, double phase = 0.0) {
    Forcing f;
    f.kind = Kind::cosine;
    f.amplitudes = {amplitude};
    f.omegas = {omega};
    f.phases = {phase};
    return f;
  }

  static Forcing multisine(std::vector<double> amplitudes, std::vector<double> omegas,
                           std::vector<double> phases) {
    if (amplitudes.size() != omegas.size() || omegas.size() != phases.size())
      throw DimensionError("multisine component arrays differ in length");
    Forcing f;
    f.kind = Kind::multisine;
    f.amplitudes = std::move(amplitudes);
    f.omegas = std::move(omegas);
    f.phases = std::move(phases);
    return f;
  }

  static Forcing table(std::vector<double> times, std::vector<double> values) {
    if (times.size() != values.size() || times.empty())
      throw DimensionError("forcing table needs matching, non-empty arrays");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw DimensionError("forcing table times must increase");
    Forcing f;
    f.kind = Kind::table;
    f.times = std::move(times);
    f.values = std::move(values);
    return f;
  }

  double operator()(double t) const {
    switch (kind) {
      case Kind::none: return 0.0;
      case Kind::cosine:
      case Kind::multisine: {
        double s = 0.0;
        for (std::size_t i = 0; i < amplitudes.size(); ++i)
          s += amplitudes[i] * std::cos(omegas[i] * t + phases[i]);
        return s;
      }
      case Kind::table: {
        if (t <= times.front()) return values.front();
        if (t >= times.back()) return values.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const std::size_t j = static_cast<std::size_t>(it - times.begin());
        const double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
        return (1.0 - w) * values[j - 1] + w * values[j];
      }
    }
    return 0.0;
  }
};

enum class Template { linear_osc, duffing, vdp_forced, custom_affine };

inline std::string to_string(Template t) {
  switch (t) {
    case Template::linear_osc: return "linear_osc";
    case Template::duffing: return "duffing";
    case Template::vdp_forced: return "vdp_forced";
    default: return "custom_affine";
  }
}

inline Template template_from_string(const std::string& s) {
  if (s == "linear_osc") return Template::linear_osc;
  if (s == "duffing") return Template::duffing;
  if (s == "vdp_forced") return Template::vdp_forced;
  if (s == "custom_affine") return Template::custom_affine;
  throw ConfigError("unknown closed-form template '" + s + "'");
}

/// Coefficient names of a template in canonical (flattening) order.
///   linear_osc:    f_i = k_i x_i + c_i v_i              names k0.., c0..
///   duffing:       f = a v + b x + c x^3 + d u(t)        (dim 1)
///   vdp_forced:    f = mu (1 - x^2) v + k x + A u(t)     (dim 1)
///   custom_affine: f_i = sum_j ax_ij x_j + av_ij v_j + b_i
inline std::vector<std::string> template_names(Template t, std::size_t dim) {
  std::vector<std::string> names;
  switch (t) {
    case Template::linear_osc:
      for (std::size_t i = 0; i < dim; ++i) names.push_back("k" + std::to_string(i));
      for (std::size_t i = 0; i < dim; ++i) names.push_back("c" + std::to_string(i));
      break;
    case Template::duffing:
      names = {"a", "b", "c", "d"};
      break;
    case Template::vdp_forced:
      names = {"mu", "k", "A"};
      break;
    case Template::custom_affine:
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) names.push_back("ax" + std::to_string(i) + std::to_string(j));
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) names.push_back("av" + std::to_string(i) + std::to_string(j));
      for (std::size_t i = 0; i < dim; ++i) names.push_back("b" + std::to_string(i));
      break;
  }
  return names;
}

class ClosedForm {
 public:
  ClosedForm() = default;

  ClosedForm(Template tmpl, std::size_t dim, const std::map<std::string, double>& coefficients,
             Forcing forcing = {})
      : tmpl_(tmpl), dim_(dim), forcing_(std::move(forcing)) {
    if ((tmpl == Template::duffing || tmpl == Template::vdp_forced) && dim != 1)
      throw DimensionError(to_string(tmpl) + " template is one-dimensional");
    if (dim == 0) throw DimensionError("closed form needs dim >= 1");
    names_ = template_names(tmpl, dim);
    if (coefficients.size() != names_.size())
      throw ConfigError(to_string(tmpl) + " expects " + std::to_string(names_.size()) + " coefficients, got " +
                        std::to_string(coefficients.size()));
    for (const auto& n : names_) {
      auto it = coefficients.find(n);
      if (it == coefficients.end()) throw ConfigError("missing coefficient '" + n + "' for " + to_string(tmpl));
      coef_.push_back(it->second);
    }
  }

  /// All coefficients zero.
  static ClosedForm zeros(Template tmpl, std::size_t dim, Forcing forcing = {}) {
    std::map<std::string, double> c;
    for (const auto& n : template_names(tmpl, dim)) c[n] = 0.0;
    return ClosedForm(tmpl, dim, c, std::move(forcing));
  }

  Template kind() const noexcept { return tmpl_; }
  std::size_t dim() const noexcept { return dim_; }
  const Forcing& forcing() const noexcept { return forcing_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t param_count() const noexcept { return coef_.size(); }
  const std::vector<double>& coefficients() const noexcept { return coef_; }

  double coefficient(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return coef_[i];
    throw ConfigError("no coefficient '" + name + "'");
  }

  std::map<std::string, double> coefficient_map() const {
    std::map<std::string, double> m;
    for (std::size_t i = 0; i < names_.size(); ++i) m[names_[i]] = coef_[i];
    return m;
  }

  void set_coefficients(std::span<const double> c) {
    if (c.size() != coef_.size()) throw DimensionError("closed form coefficient count mismatch");
    coef_.assign(c.begin(), c.end());
  }

  void eval(std::span<const double> x, std::span<const double> v, double t, std::span<double> out) const {
    const std::size_t d = dim_;
    const auto& c = coef_;
    switch (tmpl_) {
      case Template::linear_osc:
        for (std::size_t i = 0; i < d; ++i) out[i] = c[i] * x[i] + c[d + i] * v[i];
        break;
      case Template::duffing:
        out[0] = c[0] * v[0] + c[1] * x[0] + c[2] * x[0] * x[0] * x[0] + c[3] * forcing_(t);
        break;
      case Template::vdp_forced:
        out[0] = c[0] * (1.0 - x[0] * x[0]) * v[0] + c[1] * x[0] + c[2] * forcing_(t);
        break;
      case Template::custom_affine:
        for (std::size_t i = 0; i < d; ++i) {
          double s = c[2 * d * d + i];
          for (std::size_t j = 0; j < d; ++j) s += c[i * d + j] * x[j] + c[d * d + i * d + j] * v[j];
          out[i] = s;
        }
        break;
    }
  }

  /// Accumulates cot^T df/dx into gx, cot^T df/dv into gv, cot^T df/dc into
  /// gc. Any of the outputs may be empty.
  void vjp(std::span<const double> x, std::span<const double> v, double t, std::span<const double> cot,
           std::span<double> gx, std::span<double> gv, std::span<double> gc) const {
    const std::size_t d = dim_;
    const auto& c = coef_;
    switch (tmpl_) {
      case Template::linear_osc:
        for (std::size_t i = 0; i < d; ++i) {
          if (!gx.empty()) gx[i] += cot[i] * c[i];
          if (!gv.empty()) gv[i] += cot[i] * c[d + i];
          if (!gc.empty()) {
            gc[i] += cot[i] * x[i];
            gc[d + i] += cot[i] * v[i];
          }
        }
        break;
      case Template::duffing: {
        const double r = cot[0];
        if (!gx.empty()) gx[0] += r * (c[1] + 3.0 * c[2] * x[0] * x[0]);
        if (!gv.empty()) gv[0] += r * c[0];
        if (!gc.empty()) {
          gc[0] += r * v[0];
          gc[1] += r * x[0];
          gc[2] += r * x[0] * x[0] * x[0];
          gc[3] += r * forcing_(t);
        }
        break;
      }
      case Template::vdp_forced: {
        const double r = cot[0];
        if (!gx.empty()) gx[0] += r * (-2.0 * c[0] * x[0] * v[0] + c[1]);
        if (!gv.empty()) gv[0] += r * c[0] * (1.0 - x[0] * x[0]);
        if (!gc.empty()) {
          gc[0] += r * (1.0 - x[0] * x[0]) * v[0];
          gc[1] += r * x[0];
          gc[2] += r * forcing_(t);
        }
        break;
      }
      case Template::custom_affine:
        for (std::size_t i = 0; i < d; ++i) {
          const double r = cot[i];
          for (std::size_t j = 0; j < d; ++j) {
            if (!gx.empty()) gx[j] += r * c[i * d + j];
            if (!gv.empty()) gv[j] += r * c[d * d + i * d + j];
            if (!gc.empty()) {
              gc[i * d + j] += r * x[j];
              gc[d * d + i * d + j] += r * v[j];
            }
          }
          if (!gc.empty()) gc[2 * d * d + i] += r;
        }
        break;
    }
  }

  /// True when the law is affine in v, so a gauge shift keeps the form exact.
  bool affine_in_velocity() const noexcept { return true; }

  /// Linear-oscillator law with true coefficients -(w^2+g^2) and -2g.
  static ClosedForm damped_oscillator(double omega, double gamma) {
    return ClosedForm(Template::linear_osc, 1, {{"k0", -(omega * omega + gamma * gamma)}, {"c0", -2.0 * gamma}});
  }

  /// Forced Van der Pol law x'' = mu (1 - x^2) x' + k x + A cos(0.2 pi t).
  static ClosedForm van_der_pol(double mu = 8.53, double k = -1.0, double amplitude = 1.2) {
    return ClosedForm(Template::vdp_forced, 1, {{"mu", mu}, {"k", k}, {"A", amplitude}},
                      Forcing::cosine(1.0, 0.2 * std::numbers::pi));
  }

 private:
  Template tmpl_ = Template::linear_osc;
  std::size_t dim_ = 0;
  Forcing forcing_;
  std::vector<std::string> names_;
  std::vector<double> coef_;
};

}  // namespace sonode
