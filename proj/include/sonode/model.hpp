#pragma once

// First-order, augmented, second-order and k-th order neural ODE models.
//
// Every model is a first-order system on a phase state z of width P. The
// first P - H entries follow the shift rule dz[i]/dt = z[i + d]; the last H
// entries come from a learned head (an MLP or a closed-form law):
//   node       P = d       H = d
//   anode      P = d + D   H = d + D
//   sonode     P = 2d      H = d      z = [x, v]
//   kth_order  P = k d     H = d      z = [x, x', ..., x^(k-1)]
// States are batched row-major as B x P.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sonode/closed_form.hpp"
#include "sonode/errors.hpp"
#include "sonode/mlp.hpp"
#include "sonode/ode.hpp"
#include "sonode/tensor.hpp"

namespace sonode {

enum class ModelKind { node, anode, sonode, kth_order };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::node: return "node";
    case ModelKind::anode: return "anode";
    case ModelKind::sonode: return "sonode";
    default: return "kth_order";
  }
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "node") return ModelKind::node;
  if (s == "anode") return ModelKind::anode;
  if (s == "sonode") return ModelKind::sonode;
  if (s == "kth_order") return ModelKind::kth_order;
  throw ConfigError("unknown model kind '" + s + "'");
}

struct ModelSpec {
  ModelKind kind = ModelKind::node;
  std::size_t d = 1;
  std::size_t D = 0;  // anode only
  std::size_t k = 1;  // kth_order only
  bool time_dependent = false;
  bool learn_aug_init = false;
  // Extra MLP input features: x^3 per real coordinate and the forcing u(t).
  bool cubic_feature = false;
  bool forcing_feature = false;

  std::size_t phase_dim() const {
    switch (kind) {
      case ModelKind::node: return d;
      case ModelKind::anode: return d + D;
      case ModelKind::sonode: return 2 * d;
      default: return k * d;
    }
  }

  std::size_t head_dim() const {
    return kind == ModelKind::sonode || kind == ModelKind::kth_order ? d : phase_dim();
  }

  /// Width of the part of z0 produced by the initial-condition map g.
  std::size_t init_dim() const { return phase_dim() - d; }

  /// Width of an MLP head input: z, then t, then x^3, then u(t).
  std::size_t head_input_dim() const {
    return phase_dim() + (time_dependent ? 1 : 0) + (cubic_feature ? d : 0) + (forcing_feature ? 1 : 0);
  }

  void validate() const {
    if (d == 0) throw DimensionError("state dimension must be >= 1");
    if (kind == ModelKind::kth_order && k < 1) throw DimensionError("order k must be >= 1");
    if (kind != ModelKind::anode && D != 0) throw ConfigError("aug_dim is only meaningful for anode");
  }
};

/// Per-invocation instrumentation.
struct OpCounters {
  bool enabled = false;
  std::size_t vjp_calls = 0;
  std::size_t field_evals = 0;
};

enum class InitKind { none, fixed, constant, mlp };

inline std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::none: return "none";
    case InitKind::fixed: return "fixed";
    case InitKind::constant: return "constant";
    default: return "mlp";
  }
}

inline InitKind init_kind_from_string(const std::string& s) {
  if (s == "none") return InitKind::none;
  if (s == "fixed") return InitKind::fixed;
  if (s == "constant") return InitKind::constant;
  if (s == "mlp") return InitKind::mlp;
  throw ConfigError("unknown init kind '" + s + "'");
}

/// Initial values of the non-real phase coordinates: velocity (and higher
/// derivatives) for sonode/kth_order, augmented state for anode.
struct InitMap {
  InitKind kind = InitKind::none;
  Tensor fixed;                    // [m] broadcast, or [B x m] per sample
  std::vector<double> constant;    // learned, [m]
  MlpParams mlp;                   // d -> m

  std::size_t param_count() const {
    if (kind == InitKind::constant) return constant.size();
    if (kind == InitKind::mlp) return mlp.param_count();
    return 0;
  }
};

/// Map from the observed initial condition X0 to the real part of z0.
struct StateMap {
  bool identity = true;
  MlpParams mlp;  // d -> d

  std::size_t param_count() const { return identity ? 0 : mlp.param_count(); }
};

class Model {
 public:
  using Head = std::variant<MlpParams, ClosedForm>;

  Model() = default;
  Model(ModelSpec spec, Head head, InitMap g = {}, StateMap s = {}, Forcing forcing = {})
      : spec_(spec), head_(std::move(head)), g_(std::move(g)), s_(std::move(s)), forcing_(std::move(forcing)) {
    validate();
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  const Head& head() const noexcept { return head_; }
  const InitMap& init_map() const noexcept { return g_; }
  const StateMap& state_map() const noexcept { return s_; }
  const Forcing& forcing() const noexcept { return forcing_; }
  InitMap& init_map() noexcept { return g_; }

  bool has_closed_form() const noexcept { return std::holds_alternative<ClosedForm>(head_); }
  const ClosedForm& closed_form() const { return std::get<ClosedForm>(head_); }
  const MlpParams& field_mlp() const { return std::get<MlpParams>(head_); }

  std::size_t phase_dim() const { return spec_.phase_dim(); }
  std::size_t head_dim() const { return spec_.head_dim(); }

  std::size_t head_input_dim() const { return spec_.head_input_dim(); }

  // -- parameters -----------------------------------------------------------

  std::size_t theta_f_count() const {
    return std::visit([](const auto& h) { return h.param_count(); }, head_);
  }
  std::size_t theta_g_count() const { return g_.param_count(); }
  std::size_t theta_s_count() const { return s_.param_count(); }
  std::size_t param_count() const { return theta_f_count() + theta_g_count() + theta_s_count(); }

  std::vector<double> theta_f() const {
    if (has_closed_form()) return closed_form().coefficients();
    return field_mlp().flatten();
  }
  std::vector<double> theta_g() const {
    if (g_.kind == InitKind::constant) return g_.constant;
    if (g_.kind == InitKind::mlp) return g_.mlp.flatten();
    return {};
  }
  std::vector<double> theta_s() const { return s_.identity ? std::vector<double>{} : s_.mlp.flatten(); }

  void set_theta_f(std::span<const double> p) {
    if (auto* cf = std::get_if<ClosedForm>(&head_)) {
      cf->set_coefficients(p);
    } else {
      std::get<MlpParams>(head_).unflatten(p);
    }
  }
  void set_theta_g(std::span<const double> p) {
    if (p.size() != theta_g_count()) throw DimensionError("theta_g size mismatch");
    if (g_.kind == InitKind::constant) g_.constant.assign(p.begin(), p.end());
    if (g_.kind == InitKind::mlp) g_.mlp.unflatten(p);
  }
  void set_theta_s(std::span<const double> p) {
    if (p.size() != theta_s_count()) throw DimensionError("theta_s size mismatch");
    if (!s_.identity) s_.mlp.unflatten(p);
  }

  /// All parameters in the order theta_f, theta_g, theta_s.
  std::vector<double> params() const {
    std::vector<double> out = theta_f();
    const auto g = theta_g();
    const auto s = theta_s();
    out.insert(out.end(), g.begin(), g.end());
    out.insert(out.end(), s.begin(), s.end());
    return out;
  }

  void set_params(std::span<const double> p) {
    if (p.size() != param_count())
      throw DimensionError("model expects " + std::to_string(param_count()) + " parameters, got " +
                           std::to_string(p.size()));
    const std::size_t nf = theta_f_count();
    const std::size_t ng = theta_g_count();
    set_theta_f(p.subspan(0, nf));
    set_theta_g(p.subspan(nf, ng));
    set_theta_s(p.subspan(nf + ng));
  }

  // -- vector field -----------------------------------------------------------

  std::size_t batch_of(std::span<const double> z) const {
    const std::size_t p = phase_dim();
    if (z.size() % p != 0)
      throw DimensionError("state of " + std::to_string(z.size()) + " values is not a multiple of phase dim " +
                           std::to_string(p));
    return z.size() / p;
  }

  /// Head output (B x H) at (t, Z).
  void head_eval(double t, std::span<const double> z, std::span<double> out) const {
    const std::size_t batch = batch_of(z);
    const std::size_t p = phase_dim();
    const std::size_t h = head_dim();
    const std::size_t d = spec_.d;
    if (const auto* cf = std::get_if<ClosedForm>(&head_)) {
      for (std::size_t b = 0; b < batch; ++b)
        cf->eval(z.subspan(b * p, d), z.subspan(b * p + d, d), t, out.subspan(b * h, h));
      return;
    }
    MlpTape tape;
    const auto in = head_inputs(t, z, batch);
    detail::mlp_forward_batch(field_mlp(), in, batch, tape);
    std::copy(tape.post.back().begin(), tape.post.back().end(), out.begin());
  }

  /// dZ/dt at (t, Z) for a batch Z of B x P values.
  void field(double t, std::span<const double> z, std::span<double> dz, OpCounters* counters = nullptr) const {
    const std::size_t batch = batch_of(z);
    const std::size_t p = phase_dim();
    const std::size_t h = head_dim();
    const std::size_t shift = p - h;
    const std::size_t d = spec_.d;
    std::vector<double> head(batch * h);
    head_eval(t, z, head);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < shift; ++i) dz[b * p + i] = z[b * p + i + d];
      for (std::size_t i = 0; i < h; ++i) dz[b * p + shift + i] = head[b * h + i];
    }
    if (counters && counters->enabled) ++counters->field_evals;
  }

  /// Accumulates cot^T dHead/dZ into gz (B x P) and cot^T dHead/dtheta_f into
  /// gtheta. cot is B x H. Either output may be empty.
  void head_vjp(double t, std::span<const double> z, std::span<const double> cot, std::span<double> gz,
                std::span<double> gtheta, OpCounters* counters = nullptr) const {
    const std::size_t batch = batch_of(z);
    const std::size_t p = phase_dim();
    const std::size_t h = head_dim();
    const std::size_t d = spec_.d;
    if (counters && counters->enabled) ++counters->vjp_calls;
    if (const auto* cf = std::get_if<ClosedForm>(&head_)) {
      for (std::size_t b = 0; b < batch; ++b) {
        std::span<double> gx = gz.empty() ? std::span<double>{} : gz.subspan(b * p, d);
        std::span<double> gv = gz.empty() ? std::span<double>{} : gz.subspan(b * p + d, d);
        cf->vjp(z.subspan(b * p, d), z.subspan(b * p + d, d), t, cot.subspan(b * h, h), gx, gv, gtheta);
      }
      return;
    }
    const auto& mlp = field_mlp();
    MlpTape tape;
    const auto in = head_inputs(t, z, batch);
    detail::mlp_forward_batch(mlp, in, batch, tape);
    if (gz.empty()) {
      detail::mlp_vjp_batch(mlp, tape, cot, {}, gtheta);
      return;
    }
    const std::size_t w = head_input_dim();
    std::vector<double> gin(batch * w);
    detail::mlp_vjp_batch(mlp, tape, cot, gin, gtheta);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* gi = gin.data() + b * w;
      for (std::size_t i = 0; i < p; ++i) gz[b * p + i] += gi[i];
      if (spec_.cubic_feature) {
        const std::size_t off = p + (spec_.time_dependent ? 1 : 0);
        for (std::size_t i = 0; i < d; ++i) {
          const double x = z[b * p + i];
          gz[b * p + i] += gi[off + i] * 3.0 * x * x;
        }
      }
    }
  }

  /// Full-field VJP: cot is B x P; accumulates into gz (B x P) and gtheta.
  void field_vjp(double t, std::span<const double> z, std::span<const double> cot, std::span<double> gz,
                 std::span<double> gtheta, OpCounters* counters = nullptr) const {
    const std::size_t batch = batch_of(z);
    const std::size_t p = phase_dim();
    const std::size_t h = head_dim();
    const std::size_t shift = p - h;
    const std::size_t d = spec_.d;
    std::vector<double> hc(batch * h);
    for (std::size_t b = 0; b < batch; ++b) {
      if (!gz.empty())
        for (std::size_t i = 0; i < shift; ++i) gz[b * p + i + d] += cot[b * p + i];
      for (std::size_t i = 0; i < h; ++i) hc[b * h + i] = cot[b * p + shift + i];
    }
    head_vjp(t, z, hc, gz, gtheta, counters);
  }

  // -- initial conditions -----------------------------------------------------

  /// Real part of z0: s(X0). X0 is [d] or [B x d].
  Tensor initial_position(const Tensor& x0) const {
    check_x0(x0);
    if (s_.identity) return as_batch(x0);
    return mlp_forward(s_.mlp, as_batch(x0));
  }

  /// z0 = [s(X0), g(s(X0))] as a B x P tensor.
  Tensor lift(const Tensor& x0_in) const {
    const Tensor x0 = initial_position(x0_in);
    const std::size_t batch = x0.rows();
    const std::size_t d = spec_.d;
    const std::size_t p = phase_dim();
    const std::size_t m = spec_.init_dim();
    Tensor z({batch, p});
    const Tensor aug = init_values(x0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < d; ++i) z(b, i) = x0(b, i);
      for (std::size_t i = 0; i < m; ++i) z(b, d + i) = aug(b, i);
    }
    return z;
  }

  /// Given the cotangent of z0 (B x P), accumulates parameter gradients of
  /// g and s.
  void lift_vjp(const Tensor& x0_in, std::span<const double> cot, std::span<double> gtheta_g,
                std::span<double> gtheta_s) const {
    const Tensor x0 = initial_position(x0_in);
    const std::size_t batch = x0.rows();
    const std::size_t d = spec_.d;
    const std::size_t p = phase_dim();
    const std::size_t m = spec_.init_dim();
    Tensor cx({batch, d});
    Tensor ca({batch, m});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < d; ++i) cx(b, i) = cot[b * p + i];
      for (std::size_t i = 0; i < m; ++i) ca(b, i) = cot[b * p + d + i];
    }
    if (m > 0) {
      if (g_.kind == InitKind::constant) {
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t i = 0; i < m; ++i) gtheta_g[i] += ca(b, i);
      } else if (g_.kind == InitKind::mlp) {
        MlpTape tape;
        detail::mlp_forward_batch(g_.mlp, x0.data(), batch, tape);
        std::vector<double> gx(batch * d);
        detail::mlp_vjp_batch(g_.mlp, tape, ca.data(), gx, gtheta_g);
        for (std::size_t k = 0; k < gx.size(); ++k) cx[k] += gx[k];
      }
    }
    if (!s_.identity) {
      const Tensor in = as_batch(x0_in);
      MlpTape tape;
      detail::mlp_forward_batch(s_.mlp, in.data(), batch, tape);
      detail::mlp_vjp_batch(s_.mlp, tape, cx.data(), {}, gtheta_s);
    }
  }

  /// Values g(x0) for a batch of initial positions (B x m).
  Tensor init_values(const Tensor& x0) const {
    const std::size_t batch = x0.rows();
    const std::size_t m = spec_.init_dim();
    Tensor aug({batch, m});
    if (m == 0) return aug;
    switch (g_.kind) {
      case InitKind::none:
        break;
      case InitKind::fixed:
        if (g_.fixed.size() == m) {
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < m; ++i) aug(b, i) = g_.fixed[i];
        } else if (g_.fixed.size() == batch * m) {
          aug = Tensor({batch, m}, g_.fixed.values());
        } else {
          throw DimensionError("fixed initial values have " + std::to_string(g_.fixed.size()) +
                               " entries; expected " + std::to_string(m) + " or " + std::to_string(batch * m));
        }
        break;
      case InitKind::constant:
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t i = 0; i < m; ++i) aug(b, i) = g_.constant[i];
        break;
      case InitKind::mlp:
        aug = mlp_forward(g_.mlp, x0);
        break;
    }
    return aug;
  }

  Tensor as_batch(const Tensor& x0) const {
    if (x0.rank() == 1) return Tensor({1, x0.size()}, x0.values());
    return x0;
  }

 private:
  void validate() const {
    spec_.validate();
    const std::size_t d = spec_.d;
    const std::size_t m = spec_.init_dim();
    if (const auto* cf = std::get_if<ClosedForm>(&head_)) {
      const bool second = spec_.kind == ModelKind::sonode || (spec_.kind == ModelKind::kth_order && spec_.k == 2);
      if (!second) throw ModelKindError("closed-form heads require a second-order model");
      if (cf->dim() != d) throw DimensionError("closed-form dimension differs from state dimension");
    } else {
      const auto& mlp = std::get<MlpParams>(head_);
      mlp.validate();
      if (mlp.in_dim() != head_input_dim() || mlp.out_dim() != head_dim())
        throw DimensionError("field network must map " + std::to_string(head_input_dim()) + " -> " +
                             std::to_string(head_dim()) + ", got " + std::to_string(mlp.in_dim()) + " -> " +
                             std::to_string(mlp.out_dim()));
    }
    if (m == 0 && g_.kind != InitKind::none) throw ConfigError("model has no initial-condition block for g");
    if (spec_.kind == ModelKind::anode && !spec_.learn_aug_init && g_.kind != InitKind::none)
      throw ConfigError("anode without learn_aug_init must start the augmented block at zero");
    if (g_.kind == InitKind::constant && g_.constant.size() != m) throw DimensionError("constant g has wrong size");
    if (g_.kind == InitKind::mlp) {
      g_.mlp.validate();
      if (g_.mlp.in_dim() != d || g_.mlp.out_dim() != m) throw DimensionError("g network must map d -> init dim");
    }
    if (!s_.identity) {
      s_.mlp.validate();
      if (s_.mlp.in_dim() != d || s_.mlp.out_dim() != d) throw DimensionError("s network must map d -> d");
    }
  }

  void check_x0(const Tensor& x0) const {
    const std::size_t d = spec_.d;
    const bool ok = (x0.rank() == 1 && x0.size() == d) || (x0.rank() == 2 && x0.shape()[1] == d);
    if (!ok) throw DimensionError("initial condition " + Tensor::shape_string(x0.shape()) + " needs width " +
                                  std::to_string(d));
  }

  std::vector<double> head_inputs(double t, std::span<const double> z, std::size_t batch) const {
    const std::size_t p = phase_dim();
    const std::size_t w = head_input_dim();
    if (w == p) return std::vector<double>(z.begin(), z.end());
    std::vector<double> in(batch * w);
    const double u = spec_.forcing_feature ? forcing_(t) : 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      double* row = in.data() + b * w;
      std::size_t k = 0;
      for (std::size_t i = 0; i < p; ++i) row[k++] = z[b * p + i];
      if (spec_.time_dependent) row[k++] = t;
      if (spec_.cubic_feature)
        for (std::size_t i = 0; i < spec_.d; ++i) {
          const double x = z[b * p + i];
          row[k++] = x * x * x;
        }
      if (spec_.forcing_feature) row[k++] = u;
    }
    return in;
  }

  ModelSpec spec_;
  Head head_;
  InitMap g_;
  StateMap s_;
  Forcing forcing_;
};

// ---------------------------------------------------------------------------
// Construction helpers

enum class FieldArch { deep, affine };

struct ArchSpec {
  FieldArch field = FieldArch::deep;
  std::vector<std::size_t> hidden = {20, 20};
  Activation field_activation = Activation::elu;
  InitKind g = InitKind::mlp;
  std::vector<std::size_t> g_hidden = {20, 20};
  bool learn_s = false;
  std::vector<std::size_t> s_hidden = {20, 20};
  Tensor g_fixed;
};

namespace detail {
inline std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}
}  // namespace detail

/// Builds a model with randomly initialized networks (seeded). The field is
/// a deep ELU network or a single affine layer; g and s use tanh hidden
/// layers.
inline Model build_model(ModelSpec spec, const ArchSpec& arch, std::uint64_t seed, Forcing forcing = {}) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const std::size_t in = spec.head_input_dim();
  const std::size_t out = spec.head_dim();
  MlpParams field = arch.field == FieldArch::affine
                        ? MlpParams::init({in, out}, Activation::none, Activation::none, rng)
                        : MlpParams::init(detail::widths(in, arch.hidden, out), arch.field_activation,
                                          Activation::none, rng);
  const std::size_t m = spec.init_dim();
  InitMap g;
  const bool aug_zero = spec.kind == ModelKind::anode && !spec.learn_aug_init;
  if (m > 0 && !aug_zero) {
    g.kind = arch.g;
    if (arch.g == InitKind::constant) g.constant.assign(m, 0.0);
    if (arch.g == InitKind::fixed) g.fixed = arch.g_fixed;
    if (arch.g == InitKind::mlp) {
      g.mlp = arch.field == FieldArch::affine
                  ? MlpParams::init({spec.d, m}, Activation::none, Activation::none, rng)
                  : MlpParams::init(detail::widths(spec.d, arch.g_hidden, m), Activation::tanh, Activation::none, rng);
    }
  }
  StateMap s;
  if (arch.learn_s) {
    s.identity = false;
    s.mlp = MlpParams::init(detail::widths(spec.d, arch.s_hidden, spec.d), Activation::tanh, Activation::none, rng);
  }
  return Model(spec, std::move(field), std::move(g), std::move(s), std::move(forcing));
}

inline ModelSpec node_spec(std::size_t d) { return {ModelKind::node, d, 0, 1}; }
inline ModelSpec anode_spec(std::size_t d, std::size_t aug, bool learn_aug_init = false) {
  ModelSpec s{ModelKind::anode, d, aug, 1};
  s.learn_aug_init = learn_aug_init;
  return s;
}
inline ModelSpec sonode_spec(std::size_t d) { return {ModelKind::sonode, d, 0, 2}; }
inline ModelSpec kth_spec(std::size_t d, std::size_t k) { return {ModelKind::kth_order, d, 0, k}; }

// ---------------------------------------------------------------------------
// Field views and forward simulation

namespace detail {
inline Tensor eval_field(const Model& m, const Tensor& z, double t) {
  if (z.size() % m.phase_dim() != 0) throw DimensionError("state size does not match model phase dimension");
  Tensor out(z.shape());
  m.field(t, z.data(), out.data());
  return out;
}
}  // namespace detail

/// [v, f(x, v, t)] for a sonode model.
inline Tensor sonode_field(const Model& m, const Tensor& z, double t) {
  if (m.spec().kind != ModelKind::sonode) throw ModelKindError("sonode_field needs a sonode model");
  return detail::eval_field(m, z, t);
}

inline Tensor anode_lift(const Model& m, const Tensor& x0) {
  if (m.spec().kind != ModelKind::anode && m.spec().kind != ModelKind::node)
    throw ModelKindError("anode_lift needs an anode (or node) model");
  return m.lift(x0);
}

inline Tensor anode_field(const Model& m, const Tensor& z, double t) {
  if (m.spec().kind != ModelKind::anode && m.spec().kind != ModelKind::node)
    throw ModelKindError("anode_field needs an anode (or node) model");
  return detail::eval_field(m, z, t);
}

inline Tensor kth_order_field(const Model& m, const Tensor& z, double t) {
  if (m.spec().kind != ModelKind::kth_order) throw ModelKindError("kth_order_field needs a kth_order model");
  return detail::eval_field(m, z, t);
}

/// Integrates the lifted phase state, recording B x P states at each time.
inline Trajectory integrate_phase(const Model& m, const Tensor& x0, const std::vector<double>& times,
                                  const SolverConfig& cfg, OpCounters* counters = nullptr) {
  const Tensor z0 = m.lift(x0);
  auto f = [&](double t, std::span<const double> z, std::span<double> dz) { m.field(t, z, dz, counters); };
  return integrate_dense(f, z0, times, cfg);
}

/// Keeps the first `width` coordinates of every row.
inline Tensor project(const Tensor& z, std::size_t phase, std::size_t width) {
  const std::size_t batch = z.size() / phase;
  Tensor out({batch, width});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < width; ++i) out(b, i) = z[b * phase + i];
  return out;
}

/// Real-space trajectory: phase states projected to their first d
/// coordinates. A rank-1 X0 yields rank-1 states.
inline Trajectory forward_model(const Model& m, const Tensor& x0, const std::vector<double>& times,
                                const SolverConfig& cfg) {
  Trajectory phase = integrate_phase(m, x0, times, cfg);
  const std::size_t d = m.spec().d;
  for (auto& s : phase.states) {
    s = project(s, m.phase_dim(), d);
    if (x0.rank() == 1) s = s.reshaped({d});
  }
  return phase;
}

}  // namespace sonode
