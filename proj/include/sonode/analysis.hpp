#pragma once

// Functional-form construction for augmented models, gauge changes, phase
// space crossing detection and interpretability metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <tuple>
#include <string>
#include <vector>

#include "sonode/datasets.hpp"
#include "sonode/errors.hpp"
#include "sonode/model.hpp"
#include "sonode/ode.hpp"
#include "sonode/tensor.hpp"

namespace sonode {

using Vec = std::vector<double>;

/// F(x, a, t) = Ax x + Aa a + b + bt t.
struct AffineMap {
  Tensor ax;  // d x d
  Tensor aa;  // d x D
  Vec b;      // d
  Vec bt;     // d, may be empty

  Vec operator()(std::span<const double> x, std::span<const double> a, double t) const {
    const std::size_t d = ax.rows();
    const std::size_t aug = aa.cols();
    Vec out(d);
    for (std::size_t i = 0; i < d; ++i) {
      double s = b[i] + (bt.empty() ? 0.0 : bt[i] * t);
      for (std::size_t j = 0; j < d; ++j) s += ax(i, j) * x[j];
      for (std::size_t j = 0; j < aug; ++j) s += aa(i, j) * a[j];
      out[i] = s;
    }
    return out;
  }
};

/// Real-space velocity x' = F(x, a, t) of an augmented model.
struct Coupling {
  std::size_t d = 0;
  std::size_t aug = 0;
  std::function<Vec(std::span<const double>, std::span<const double>, double)> eval;
  std::optional<AffineMap> affine;

  static Coupling from_affine(AffineMap m) {
    Coupling c;
    c.d = m.ax.rows();
    c.aug = m.aa.cols();
    if (m.ax.cols() != c.d || m.aa.rows() != c.d || m.b.size() != c.d || (!m.bt.empty() && m.bt.size() != c.d))
      throw DimensionError("affine coupling blocks do not agree");
    c.affine = m;
    c.eval = [m](std::span<const double> x, std::span<const double> a, double t) { return m(x, a, t); };
    return c;
  }

  static Coupling general(std::size_t d, std::size_t aug,
                          std::function<Vec(std::span<const double>, std::span<const double>, double)> f) {
    Coupling c;
    c.d = d;
    c.aug = aug;
    c.eval = std::move(f);
    return c;
  }

  /// F(x, a) = a (requires D = d).
  static Coupling identity(std::size_t d) {
    return from_affine({Tensor({d, d}), Tensor::identity(d), Vec(d, 0.0), {}});
  }
};

/// True acceleration x'' = f(x, x', t).
struct AccelLaw {
  std::size_t d = 0;
  std::function<Vec(std::span<const double>, std::span<const double>, double)> f;
  bool affine_in_velocity = false;

  static AccelLaw from_closed_form(const ClosedForm& cf) {
    return {cf.dim(),
            [cf](std::span<const double> x, std::span<const double> v, double t) {
              Vec out(cf.dim());
              cf.eval(x, v, t, out);
              return out;
            },
            cf.affine_in_velocity()};
  }
};

struct CouplingJacobians {
  Tensor jx;  // d x d
  Tensor ja;  // d x D
  Vec jt;     // d
};

/// Analytic Jacobians for affine couplings, central differences with step
/// 1e-5 (1 + |arg|) otherwise.
inline CouplingJacobians coupling_jacobians(const Coupling& F, std::span<const double> x, std::span<const double> a,
                                            double t) {
  const std::size_t d = F.d;
  const std::size_t aug = F.aug;
  CouplingJacobians j{Tensor({d, d}), Tensor({d, aug}), Vec(d, 0.0)};
  if (F.affine) {
    j.jx = F.affine->ax;
    j.ja = F.affine->aa;
    if (!F.affine->bt.empty()) j.jt = F.affine->bt;
    return j;
  }
  Vec xp(x.begin(), x.end()), ap(a.begin(), a.end());
  for (std::size_t c = 0; c < d; ++c) {
    const double h = 1e-5 * (1.0 + std::abs(x[c]));
    xp[c] = x[c] + h;
    const Vec fp = F.eval(xp, a, t);
    xp[c] = x[c] - h;
    const Vec fm = F.eval(xp, a, t);
    xp[c] = x[c];
    for (std::size_t r = 0; r < d; ++r) j.jx(r, c) = (fp[r] - fm[r]) / (2.0 * h);
  }
  for (std::size_t c = 0; c < aug; ++c) {
    const double h = 1e-5 * (1.0 + std::abs(a[c]));
    ap[c] = a[c] + h;
    const Vec fp = F.eval(x, ap, t);
    ap[c] = a[c] - h;
    const Vec fm = F.eval(x, ap, t);
    ap[c] = a[c];
    for (std::size_t r = 0; r < d; ++r) j.ja(r, c) = (fp[r] - fm[r]) / (2.0 * h);
  }
  const double ht = 1e-5 * (1.0 + std::abs(t));
  const Vec fp = F.eval(x, a, t + ht);
  const Vec fm = F.eval(x, a, t - ht);
  for (std::size_t r = 0; r < d; ++r) j.jt[r] = (fp[r] - fm[r]) / (2.0 * ht);
  return j;
}

/// The a' = G(x, a, t) that makes x' = F reproduce x'' = f:
///   G = pinv(dF/da) (f(x, F, t) - dF/dx F - dF/dt).
/// Square couplings are solved directly; for D < d (or a singular dF/da) this
/// is the ridge-regularized least-squares choice.
inline Vec compute_G(const Coupling& F, const AccelLaw& f_acc, std::span<const double> x, std::span<const double> a,
                     double t, double ridge = kDefaultRidge) {
  if (F.d != f_acc.d) throw DimensionError("coupling and acceleration law differ in dimension");
  if (F.aug > F.d) throw DimensionError("compute_G needs aug_dim <= state dim");
  const CouplingJacobians j = coupling_jacobians(F, x, a, t);
  const Vec vel = F.eval(x, a, t);
  const Vec acc = f_acc.f(x, vel, t);
  Tensor rhs({F.d});
  for (std::size_t r = 0; r < F.d; ++r) {
    double s = acc[r] - j.jt[r];
    for (std::size_t c = 0; c < F.d; ++c) s -= j.jx(r, c) * vel[c];
    rhs[r] = s;
  }
  if (F.aug == F.d) {
    try {
      return solve(j.ja, rhs).values();
    } catch (const SingularityError&) {
      // fall through to the regularized least-squares solution
    }
  }
  return matvec(pinv_left(j.ja, ridge), rhs).values();
}

/// An augmented system x' = F(x, a, t), a' = G(x, a, t).
struct FunctionalPair {
  Coupling F;
  std::function<Vec(std::span<const double>, std::span<const double>, double)> G;

  std::size_t d() const { return F.d; }
  std::size_t aug() const { return F.aug; }
};

/// Pair whose G is computed from F and the true acceleration on the fly.
inline FunctionalPair make_pair(const Coupling& F, const AccelLaw& f_acc, double ridge = kDefaultRidge) {
  FunctionalPair p;
  p.F = F;
  p.G = [F, f_acc, ridge](std::span<const double> x, std::span<const double> a, double t) {
    return compute_G(F, f_acc, x, a, t, ridge);
  };
  return p;
}

/// Closed-form two-function solution for the damped oscillator:
///   x' = C a - (w + g) x + w
///   a' = (w - g) a - (2 w^2 x + g w - w^2) / C
inline FunctionalPair two_function_pair(double c, double omega, double gamma) {
  FunctionalPair p;
  p.F = Coupling::from_affine(
      {Tensor::matrix(1, 1, {-(omega + gamma)}), Tensor::matrix(1, 1, {c}), Vec{omega}, {}});
  p.G = [c, omega, gamma](std::span<const double> x, std::span<const double> a, double) {
    return Vec{(omega - gamma) * a[0] - (2.0 * omega * omega * x[0] + gamma * omega - omega * omega) / c};
  };
  return p;
}

/// Integrates a pair from (x0, a0); states are [x, a] rows.
inline Trajectory integrate_pair(const FunctionalPair& p, const Vec& x0, const Vec& a0, const std::vector<double>& times,
                                 const SolverConfig& cfg) {
  const std::size_t d = p.d();
  const std::size_t aug = p.aug();
  if (x0.size() != d || a0.size() != aug) throw DimensionError("initial state does not match pair dimensions");
  auto f = [&](double t, std::span<const double> z, std::span<double> dz) {
    const auto x = z.subspan(0, d);
    const auto a = z.subspan(d, aug);
    const Vec fx = p.F.eval(x, a, t);
    const Vec ga = p.G(x, a, t);
    std::copy(fx.begin(), fx.end(), dz.begin());
    std::copy(ga.begin(), ga.end(), dz.begin() + static_cast<std::ptrdiff_t>(d));
  };
  Vec z0 = x0;
  z0.insert(z0.end(), a0.begin(), a0.end());
  return integrate_dense(f, Tensor::vector(z0), times, cfg);
}

/// Affine shift phi(x) = alpha (x - x0), which vanishes at x0.
struct GaugeSpec {
  Tensor alpha;  // d x d
  Vec beta;      // d

  static GaugeSpec through(const Tensor& alpha, const Vec& x0) {
    if (alpha.rank() != 2 || alpha.rows() != x0.size() || alpha.cols() != x0.size())
      throw DimensionError("gauge alpha must be d x d");
    GaugeSpec g{alpha, Vec(x0.size(), 0.0)};
    const Tensor ax = matvec(alpha, Tensor::vector(x0));
    for (std::size_t i = 0; i < x0.size(); ++i) g.beta[i] = -ax[i];
    return g;
  }

  Vec operator()(std::span<const double> x) const {
    Vec out = beta;
    for (std::size_t i = 0; i < beta.size(); ++i)
      for (std::size_t j = 0; j < beta.size(); ++j) out[i] += alpha(i, j) * x[j];
    return out;
  }
};

/// (F, G) -> (F + phi, G~) with
///   G~ = G + (dF/da)^-1 (df/dv phi - dF/dx phi - dphi/dx F - dphi/dx phi),
/// exact when phi is affine and f is affine in v. Requires square dF/da.
inline FunctionalPair gauge_transform(const FunctionalPair& pair, const AccelLaw& f_acc, const GaugeSpec& gauge) {
  const std::size_t d = pair.d();
  if (!f_acc.affine_in_velocity) throw UnsupportedCaseError("gauge change needs an acceleration affine in velocity");
  if (pair.aug() != d) throw UnsupportedCaseError("gauge change needs a square coupling Jacobian");
  if (gauge.alpha.rows() != d || gauge.beta.size() != d) throw DimensionError("gauge dimension mismatch");
  FunctionalPair out;
  if (pair.F.affine) {
    AffineMap m = *pair.F.affine;
    for (std::size_t i = 0; i < d; ++i) {
      m.b[i] += gauge.beta[i];
      for (std::size_t j = 0; j < d; ++j) m.ax(i, j) += gauge.alpha(i, j);
    }
    out.F = Coupling::from_affine(std::move(m));
  } else {
    auto base = pair.F.eval;
    out.F = Coupling::general(d, d, [base, gauge](std::span<const double> x, std::span<const double> a, double t) {
      Vec f = base(x, a, t);
      const Vec ph = gauge(x);
      for (std::size_t i = 0; i < f.size(); ++i) f[i] += ph[i];
      return f;
    });
  }
  const Coupling F = pair.F;
  const auto G = pair.G;
  out.G = [F, G, f_acc, gauge, d](std::span<const double> x, std::span<const double> a, double t) {
    const CouplingJacobians j = coupling_jacobians(F, x, a, t);
    const Vec fv = F.eval(x, a, t);
    const Vec ph = gauge(x);
    // df/dv phi for a law affine in v.
    Vec zero(d, 0.0);
    const Vec f0 = f_acc.f(x, zero, t);
    const Vec f1 = f_acc.f(x, ph, t);
    Tensor rhs({d});
    for (std::size_t r = 0; r < d; ++r) {
      double s = f1[r] - f0[r];
      for (std::size_t c = 0; c < d; ++c) s -= j.jx(r, c) * ph[c] + gauge.alpha(r, c) * (fv[c] + ph[c]);
      rhs[r] = s;
    }
    const Tensor delta = solve(j.ja, rhs);
    Vec g = G(x, a, t);
    for (std::size_t r = 0; r < d; ++r) g[r] += delta[r];
    return g;
  };
  return out;
}

// ---------------------------------------------------------------------------
// Crossing geometry

enum class CrossingSpace { real, phase };

struct CrossingOptions {
  double delta_rel = 1e-3;    // proximity threshold relative to the diameter
  double min_angle_deg = 5.0;
  bool time_axis = false;     // append t as a coordinate
  std::size_t real_dim = 1;   // coordinates kept in real space
};

struct Crossing {
  std::size_t seg_a = 0;
  std::size_t seg_b = 0;
  double time_a = 0.0;
  double time_b = 0.0;
  double distance = 0.0;
  double angle_deg = 0.0;
  Vec point;
};

namespace detail {

inline std::vector<Vec> polyline(const Trajectory& tr, CrossingSpace space, const CrossingOptions& opt) {
  std::vector<Vec> pts;
  pts.reserve(tr.states.size());
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    const auto& s = tr.states[i].values();
    const std::size_t w = space == CrossingSpace::real ? std::min(opt.real_dim, s.size()) : s.size();
    Vec p(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(w));
    if (opt.time_axis) p.push_back(tr.times[i]);
    pts.push_back(std::move(p));
  }
  return pts;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Closest points of segments p0-p1 and q0-q1; returns (distance, s, t).
inline std::tuple<double, double, double> segment_distance(const Vec& p0, const Vec& p1, const Vec& q0, const Vec& q1) {
  const std::size_t n = p0.size();
  Vec u(n), v(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = p1[i] - p0[i];
    v[i] = q1[i] - q0[i];
    w[i] = p0[i] - q0[i];
  }
  const double a = dot(u, u), b = dot(u, v), c = dot(v, v), d = dot(u, w), e = dot(v, w);
  const double den = a * c - b * b;
  double s = 0.0, t = 0.0;
  if (a <= 1e-300 && c <= 1e-300) {
    s = t = 0.0;
  } else if (a <= 1e-300) {
    t = std::clamp(e / c, 0.0, 1.0);
  } else if (c <= 1e-300) {
    s = std::clamp(-d / a, 0.0, 1.0);
  } else {
    s = den > 1e-14 * a * c ? std::clamp((b * e - c * d) / den, 0.0, 1.0) : 0.0;
    t = (b * s + e) / c;
    if (t < 0.0) {
      t = 0.0;
      s = std::clamp(-d / a, 0.0, 1.0);
    } else if (t > 1.0) {
      t = 1.0;
      s = std::clamp((b - d) / a, 0.0, 1.0);
    }
  }
  double dist2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = w[i] + s * u[i] - t * v[i];
    dist2 += diff * diff;
  }
  return {std::sqrt(dist2), s, t};
}

}  // namespace detail

/// Segment pairs of two sampled trajectories that come within
/// delta_rel * diameter of each other while their directions differ by more
/// than min_angle_deg. Runs of adjacent hits are reported once.
inline std::vector<Crossing> crossing_check(const Trajectory& a, const Trajectory& b, CrossingSpace space,
                                            const CrossingOptions& opt = {}) {
  const auto pa = detail::polyline(a, space, opt);
  const auto pb = detail::polyline(b, space, opt);
  std::vector<Crossing> out;
  if (pa.size() < 2 || pb.size() < 2) return out;
  const std::size_t n = pa.front().size();
  Vec lo(n, std::numeric_limits<double>::infinity()), hi(n, -std::numeric_limits<double>::infinity());
  for (const auto* poly : {&pa, &pb})
    for (const auto& p : *poly)
      for (std::size_t i = 0; i < n; ++i) {
        lo[i] = std::min(lo[i], p[i]);
        hi[i] = std::max(hi[i], p[i]);
      }
  double diam = 0.0;
  for (std::size_t i = 0; i < n; ++i) diam += (hi[i] - lo[i]) * (hi[i] - lo[i]);
  diam = std::sqrt(diam);
  const double delta = opt.delta_rel * diam;
  const double cos_min = std::cos(opt.min_angle_deg * std::numbers::pi / 180.0);

  for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
    Vec u(n);
    for (std::size_t k = 0; k < n; ++k) u[k] = pa[i + 1][k] - pa[i][k];
    const double nu = std::sqrt(detail::dot(u, u));
    for (std::size_t j = 0; j + 1 < pb.size(); ++j) {
      // Cheap bounding-box rejection.
      bool far = false;
      for (std::size_t k = 0; k < n && !far; ++k) {
        const double amin = std::min(pa[i][k], pa[i + 1][k]), amax = std::max(pa[i][k], pa[i + 1][k]);
        const double bmin = std::min(pb[j][k], pb[j + 1][k]), bmax = std::max(pb[j][k], pb[j + 1][k]);
        far = amin > bmax + delta || bmin > amax + delta;
      }
      if (far) continue;
      const auto [dist, s, t] = detail::segment_distance(pa[i], pa[i + 1], pb[j], pb[j + 1]);
      if (dist >= delta) continue;
      Vec v(n);
      for (std::size_t k = 0; k < n; ++k) v[k] = pb[j + 1][k] - pb[j][k];
      const double nv = std::sqrt(detail::dot(v, v));
      if (nu == 0.0 || nv == 0.0) continue;
      const double cosang = std::abs(detail::dot(u, v)) / (nu * nv);
      if (cosang > cos_min) continue;
      if (!out.empty() && i <= out.back().seg_a + 2 && (j + 2 >= out.back().seg_b && j <= out.back().seg_b + 2))
        continue;
      Crossing c;
      c.seg_a = i;
      c.seg_b = j;
      c.time_a = a.times[i] + s * (a.times[i + 1] - a.times[i]);
      c.time_b = b.times[j] + t * (b.times[j + 1] - b.times[j]);
      c.distance = dist;
      c.angle_deg = std::acos(std::clamp(cosang, -1.0, 1.0)) * 180.0 / std::numbers::pi;
      c.point.resize(n);
      for (std::size_t k = 0; k < n; ++k) c.point[k] = pa[i][k] + s * u[k];
      out.push_back(std::move(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Non-injective real-space map

struct HomeoReport {
  Vec inputs;
  Vec outputs;
  bool injectivity_violated = false;
};

/// Second-order flow with zero acceleration over [0, 1] from x0 = (0, 1)
/// with velocity v0 = velocity(x0). The default v0 = -x0 + 2 sends both
/// inputs to 2.
inline HomeoReport homeo_counterexample(const std::function<double(double)>& velocity = [](double x) { return -x + 2.0; },
                                        const SolverConfig& cfg = SolverConfig::precise()) {
  HomeoReport r;
  r.inputs = {0.0, 1.0};
  auto f = [](double, std::span<const double> z, std::span<double> dz) {
    dz[0] = z[2];
    dz[1] = z[3];
    dz[2] = 0.0;
    dz[3] = 0.0;
  };
  const Vec z0{r.inputs[0], r.inputs[1], velocity(r.inputs[0]), velocity(r.inputs[1])};
  const auto res = integrate(f, z0, 0.0, 1.0, cfg);
  r.outputs = {res.state[0], res.state[1]};
  r.injectivity_violated = r.inputs[0] != r.inputs[1] && std::abs(r.outputs[0] - r.outputs[1]) <= 1e-8;
  return r;
}

// ---------------------------------------------------------------------------
// Interpretability on the two-dimensional oscillator

struct InterpretabilityMetrics {
  double init_velocity_rel_err = 0.0;
  double aug_vs_velocity_rmse = 0.0;
  double force_field_rmse = 0.0;
};

/// True acceleration of the two-dimensional oscillator.
inline Vec oscillator_2d_force(std::span<const double> x, std::span<const double> v) {
  return {-(1.0 + 0.01) * x[0] - 0.2 * v[0], -(1.44 + 0.09) * x[1] - 0.6 * v[1]};
}

/// Compares a sonode or anode model (d = 2) against the analytic system:
///   init velocity: g(x0) (sonode) or a(t0) (anode) vs (2.9, 3.9)
///   trajectory:    velocity block (sonode) or augmented block (anode) vs x'
///   force:         learned acceleration vs the true one at the samples.
/// For anode the learned acceleration is the derivative of F along the flow.
inline InterpretabilityMetrics interpretability_metrics(const Model& m, const TimeSeries& truth,
                                                        const SolverConfig& cfg = SolverConfig::precise()) {
  const auto& sp = m.spec();
  if (sp.d != 2 || truth.values.cols() != 4) throw DimensionError("interpretability metrics need d = 2 and 4 columns");
  if (sp.kind != ModelKind::sonode && sp.kind != ModelKind::anode)
    throw ModelKindError("interpretability metrics cover sonode and anode models");
  const std::size_t p = m.phase_dim();
  const std::size_t na = std::min<std::size_t>(2, p - 2);
  const Tensor x0 = Tensor::vector({truth.values(0, 0), truth.values(0, 1)});
  const Trajectory tr = integrate_phase(m, x0, truth.times, cfg);

  InterpretabilityMetrics out;
  const Vec v0{truth.values(0, 2), truth.values(0, 3)};
  Vec g0(2, 0.0);
  for (std::size_t i = 0; i < na; ++i) g0[i] = tr.states[0][2 + i];
  out.init_velocity_rel_err = relative_error(g0, v0);

  double se = 0.0, fe = 0.0;
  std::size_t cnt = 0;
  Vec dz(p), dzp(p), zp(p);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto& z = tr.states[k].values();
    for (std::size_t i = 0; i < 2; ++i) {
      const double aug = i < na ? z[2 + i] : 0.0;
      se += (aug - truth.values(k, 2 + i)) * (aug - truth.values(k, 2 + i));
    }
    Vec learned(2), x{truth.values(k, 0), truth.values(k, 1)}, v{truth.values(k, 2), truth.values(k, 3)};
    if (sp.kind == ModelKind::sonode) {
      const Vec zt{x[0], x[1], v[0], v[1]};
      m.field(truth.times[k], zt, dz);
      learned = {dz[2], dz[3]};
    } else {
      // x'' = d/dt F(z) along the model's own flow.
      m.field(truth.times[k], z, dz);
      double sc = 0.0;
      for (double q : z) sc = std::max(sc, std::abs(q));
      const double h = 1e-5 * (1.0 + sc);
      for (std::size_t i = 0; i < p; ++i) zp[i] = z[i] + h * dz[i];
      m.field(truth.times[k] + h, zp, dzp);
      Vec dzm(p);
      for (std::size_t i = 0; i < p; ++i) zp[i] = z[i] - h * dz[i];
      m.field(truth.times[k] - h, zp, dzm);
      learned = {(dzp[0] - dzm[0]) / (2 * h), (dzp[1] - dzm[1]) / (2 * h)};
      v = {dz[0], dz[1]};
      x = {z[0], z[1]};
    }
    const Vec truef = oscillator_2d_force(x, v);
    for (std::size_t i = 0; i < 2; ++i) fe += (learned[i] - truef[i]) * (learned[i] - truef[i]);
    cnt += 2;
  }
  out.aug_vs_velocity_rmse = std::sqrt(se / static_cast<double>(cnt));
  out.force_field_rmse = std::sqrt(fe / static_cast<double>(cnt));
  return out;
}

// ---------------------------------------------------------------------------
// Linear acceleration identifiability

/// Least-squares fit of x'' = K x + C v + b from sampled (x, v, a) triples
/// (rows of N x d each). Returns the d x (2d + 1) coefficient matrix [K C b].
inline Tensor fit_linear_acceleration(const Tensor& x, const Tensor& v, const Tensor& acc) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (v.rows() != n || acc.rows() != n || v.cols() != d || acc.cols() != d)
    throw DimensionError("fit_linear_acceleration: sample blocks disagree");
  Tensor design({n, 2 * d + 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      design(i, j) = x(i, j);
      design(i, d + j) = v(i, j);
    }
    design(i, 2 * d) = 1.0;
  }
  const Tensor coef = matmul(pinv_left(design, 0.0), acc);  // (2d+1) x d
  return transpose(coef);
}

}  // namespace sonode
