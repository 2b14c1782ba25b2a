#pragma once

// Ground-truth generators and CSV ingestion.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sonode/closed_form.hpp"
#include "sonode/errors.hpp"
#include "sonode/ode.hpp"
#include "sonode/tensor.hpp"

namespace sonode {

/// Samples of a (possibly forced) signal. values and control are N x m and
/// N x c matrices, one row per time. The first n_train rows are the training
/// split.
struct TimeSeries {
  std::vector<double> times;
  Tensor values;
  Tensor control;
  std::string time_name = "t";
  std::vector<std::string> value_names;
  std::vector<std::string> control_names;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::map<std::string, double> metadata;

  std::size_t size() const noexcept { return times.size(); }
  Tensor at(std::size_t i) const {
    const auto r = values.row(i);
    return Tensor::vector({r.begin(), r.end()});
  }
  double value(std::size_t i, std::size_t j = 0) const { return values(i, j); }
};

struct LabeledPoints {
  Tensor inputs;             // N x D
  Tensor targets;            // N x D (regression) or empty
  std::vector<int> labels;   // classification labels or empty
  double t0 = 0.0;
  double t1 = 1.0;

  std::size_t size() const noexcept { return inputs.rows(); }
};

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Endpoint tasks

struct ParityData {
  LabeledPoints train;
  LabeledPoints test;
};

/// Points uniform in [-1, 1]^D with targets -x.
inline ParityData gen_parity(std::size_t dim, std::size_t n_train = 50, std::size_t n_test = 10,
                             std::uint64_t seed = 0) {
  if (dim == 0) throw DimensionError("parity needs D >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto make = [&](std::size_t n) {
    LabeledPoints p;
    p.inputs = Tensor({n, dim});
    for (auto& v : p.inputs.values()) v = u(rng);
    p.targets = -1.0 * p.inputs;
    return p;
  };
  ParityData d;
  d.train = make(n_train);
  d.test = make(n_test);
  return d;
}

/// The two-point 1D parity problem: +1 -> -1 and -1 -> +1.
inline LabeledPoints gen_parity_1d_fixed() {
  LabeledPoints p;
  p.inputs = Tensor::matrix(2, 1, {1.0, -1.0});
  p.targets = Tensor::matrix(2, 1, {-1.0, 1.0});
  return p;
}

/// Class 0 uniform in the ball of radius r_inner, class 1 uniform in radius
/// over the shell [shell_lo, shell_hi]. Classes alternate so they stay
/// balanced (class 0 first). In 2D the shell angles are stratified.
inline LabeledPoints gen_nested_spheres(std::size_t dim, std::size_t n, double r_inner, double shell_lo,
                                        double shell_hi, std::uint64_t seed) {
  if (dim == 0) throw DimensionError("nested spheres need D >= 1");
  if (!(r_inner > 0.0 && r_inner < shell_lo && shell_lo < shell_hi))
    throw ConfigError("nested spheres need 0 < r_inner < shell_lo < shell_hi");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LabeledPoints p;
  p.inputs = Tensor({n, dim});
  p.labels.resize(n);
  const std::size_t n_shell = n / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<double> dir(dim);
    double norm = 0.0;
    if (dim == 2 && label == 1) {
      // Stratified angles keep the 2D shell free of wide gaps.
      const double ang = 2.0 * std::numbers::pi * (static_cast<double>(i / 2) + unif(rng)) / static_cast<double>(n_shell);
      dir = {std::cos(ang), std::sin(ang)};
      norm = 1.0;
    }
    while (norm < 1e-12) {
      norm = 0.0;
      for (auto& v : dir) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
    }
    const double radius = label == 0 ? r_inner * std::pow(unif(rng), 1.0 / static_cast<double>(dim))
                                     : shell_lo + (shell_hi - shell_lo) * unif(rng);
    for (std::size_t j = 0; j < dim; ++j) p.inputs(i, j) = radius * dir[j] / norm;
    p.labels[i] = label;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Closed-form second-order signals

/// x'' = -(w^2 + g^2) x - 2 g x'. Columns: x, v.
inline TimeSeries gen_damped_osc(double omega, double gamma, double x0, double v0, const std::vector<double>& times) {
  if (!(omega > 0.0)) throw ConfigError("damped oscillator needs omega > 0");
  const double a = (v0 + gamma * x0) / omega;
  const double b = x0;
  TimeSeries ts;
  ts.times = times;
  ts.values = Tensor({times.size(), 2});
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const double e = std::exp(-gamma * t);
    const double s = std::sin(omega * t);
    const double c = std::cos(omega * t);
    ts.values(i, 0) = e * (a * s + b * c);
    ts.values(i, 1) = e * ((a * omega - gamma * b) * c - (b * omega + gamma * a) * s);
  }
  ts.value_names = {"x", "v"};
  ts.n_train = times.size();
  ts.metadata = {{"omega", omega}, {"gamma", gamma}, {"x0", x0}, {"v0", v0}};
  return ts;
}

/// Two decoupled damped oscillators:
///   x = e^{-0.1 t}(3 sin t + cos t),  y = e^{-0.3 t}(2 sin 1.2t - 5 cos 1.2t).
/// Columns: x, y, x', y'.
inline TimeSeries gen_2d_ode(const std::vector<double>& times) {
  const TimeSeries x = gen_damped_osc(1.0, 0.1, 1.0, 3.0 - 0.1, times);
  const TimeSeries y = gen_damped_osc(1.2, 0.3, -5.0, 2.0 * 1.2 + 0.3 * 5.0, times);
  TimeSeries ts;
  ts.times = times;
  ts.values = Tensor({times.size(), 4});
  for (std::size_t i = 0; i < times.size(); ++i) {
    ts.values(i, 0) = x.values(i, 0);
    ts.values(i, 1) = y.values(i, 0);
    ts.values(i, 2) = x.values(i, 1);
    ts.values(i, 3) = y.values(i, 1);
  }
  ts.value_names = {"x", "y", "vx", "vy"};
  ts.n_train = times.size();
  ts.metadata = {{"omega_x", 1.0}, {"gamma_x", 0.1}, {"omega_y", 1.2}, {"gamma_y", 0.3},
                 {"x0", 1.0},      {"y0", -5.0},     {"vx0", 2.9},     {"vy0", 3.9}};
  return ts;
}

/// 50 noisy training samples of sin(t) on [0, 10] and 10 clean test samples
/// at 10.5, 11, ..., 15.
inline TimeSeries gen_sine_noise(double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("noise level must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  TimeSeries ts;
  ts.times = linspace(0.0, 10.0, 50);
  for (std::size_t i = 1; i <= 10; ++i) ts.times.push_back(10.0 + 0.5 * static_cast<double>(i));
  ts.values = Tensor({60, 1});
  for (std::size_t i = 0; i < 60; ++i) {
    ts.values(i, 0) = std::sin(ts.times[i]);
    if (i < 50 && sigma > 0.0) ts.values(i, 0) += sigma * noise(rng);
  }
  ts.value_names = {"x"};
  ts.n_train = 50;
  ts.n_test = 10;
  ts.metadata = {{"sigma", sigma}};
  return ts;
}

/// x = exp(0.1667 t).
inline TimeSeries gen_exponential(const std::vector<double>& times) {
  TimeSeries ts;
  ts.times = times;
  ts.values = Tensor({times.size(), 1});
  for (std::size_t i = 0; i < times.size(); ++i) ts.values(i, 0) = std::exp(0.1667 * times[i]);
  ts.value_names = {"x"};
  ts.n_train = times.size();
  ts.metadata = {{"rate", 0.1667}};
  return ts;
}

/// Numerical solution of x'' = f(x, x', t) for a closed-form law at tight
/// tolerance. Columns: x, v.
inline TimeSeries simulate_second_order(const ClosedForm& law, double x0, double v0, const std::vector<double>& times,
                                        double tol = 1e-10) {
  if (law.dim() != 1) throw DimensionError("simulate_second_order expects a scalar law");
  auto f = [&](double t, std::span<const double> z, std::span<double> dz) {
    dz[0] = z[1];
    law.eval(z.subspan(0, 1), z.subspan(1, 1), t, dz.subspan(1, 1));
  };
  SolverConfig cfg = SolverConfig::tolerance(tol);
  cfg.max_steps = 5'000'000;
  const Trajectory traj = integrate_dense(f, Tensor::vector({x0, v0}), times, cfg);
  TimeSeries ts;
  ts.times = times;
  ts.values = Tensor({times.size(), 2});
  for (std::size_t i = 0; i < times.size(); ++i) {
    ts.values(i, 0) = traj.states[i][0];
    ts.values(i, 1) = traj.states[i][1];
  }
  ts.value_names = {"x", "v"};
  ts.n_train = times.size();
  return ts;
}

/// Forced Van der Pol oscillator x'' = 8.53 (1 - x^2) x' - x + 1.2 cos(0.2 pi t),
/// x(0) = 0.1, x'(0) = 0. Default grid: 200 samples at spacing 0.1, first 70
/// for training.
inline TimeSeries gen_vdp(std::vector<double> times = {}, double tol = 1e-10) {
  if (times.empty()) times = linspace(0.0, 19.9, 200);
  TimeSeries ts = simulate_second_order(ClosedForm::van_der_pol(), 0.1, 0.0, times, tol);
  ts.n_train = std::min<std::size_t>(70, times.size());
  ts.n_test = times.size() - ts.n_train;
  ts.metadata = {{"mu", 8.53}, {"k", -1.0}, {"A", 1.2}, {"x0", 0.1}, {"v0", 0.0}};
  return ts;
}

/// Third-order linear system x''' = c2 x'' + c1 x' + c0 x, integrated
/// numerically. Columns: x, x', x''.
inline TimeSeries gen_third_order(const std::vector<double>& times, double c0 = -0.52, double c1 = -1.24,
                                  double c2 = -0.9, std::vector<double> init = {1.0, 0.0, 0.0}) {
  auto f = [&](double, std::span<const double> z, std::span<double> dz) {
    dz[0] = z[1];
    dz[1] = z[2];
    dz[2] = c0 * z[0] + c1 * z[1] + c2 * z[2];
  };
  const Trajectory traj = integrate_dense(f, Tensor::vector(init), times, SolverConfig::tolerance(1e-10));
  TimeSeries ts;
  ts.times = times;
  ts.values = Tensor({times.size(), 3});
  for (std::size_t i = 0; i < times.size(); ++i)
    for (std::size_t j = 0; j < 3; ++j) ts.values(i, j) = traj.states[i][j];
  ts.value_names = {"x", "dx", "ddx"};
  ts.n_train = times.size();
  ts.metadata = {{"c0", c0}, {"c1", c1}, {"c2", c2}};
  return ts;
}

/// Default input used for the Duffing fixture: a sum of three sines.
inline Forcing duffing_fixture_forcing() {
  return Forcing::multisine({0.6, 0.4, 0.3}, {0.7, 1.3, 2.1}, {0.0, 1.0, 2.0});
}

inline std::map<std::string, double> duffing_fixture_coefficients() {
  return {{"a", -0.2}, {"b", -1.0}, {"c", -0.5}, {"d", 1.0}};
}

/// Duffing oscillator V2'' = a V2' + b V2 + c V2^3 + d V1(t). Columns: V2;
/// control column V1.
inline TimeSeries gen_duffing(const std::map<std::string, double>& coefficients, const Forcing& input,
                              const std::vector<double>& times, double x0 = 0.0, double v0 = 0.0) {
  const ClosedForm law(Template::duffing, 1, coefficients, input);
  TimeSeries full = simulate_second_order(law, x0, v0, times);
  TimeSeries ts;
  ts.times = times;
  ts.values = Tensor({times.size(), 1});
  ts.control = Tensor({times.size(), 1});
  for (std::size_t i = 0; i < times.size(); ++i) {
    ts.values(i, 0) = full.values(i, 0);
    ts.control(i, 0) = input(times[i]);
  }
  ts.value_names = {"V2"};
  ts.control_names = {"V1"};
  ts.n_train = times.size();
  ts.metadata = coefficients;
  ts.metadata["x0"] = x0;
  ts.metadata["v0"] = v0;
  return ts;
}

/// The shipped Duffing fixture: 401 samples on [0, 40] from rest, first 150
/// for training.
inline TimeSeries gen_duffing_fixture(double t_end = 40.0, std::size_t n_times = 401, std::size_t n_train = 150) {
  TimeSeries ts = gen_duffing(duffing_fixture_coefficients(), duffing_fixture_forcing(), linspace(0.0, t_end, n_times));
  ts.n_train = std::min(n_train, ts.size());
  ts.n_test = ts.size() - ts.n_train;
  return ts;
}

// ---------------------------------------------------------------------------
// Random oscillator batches

/// Batch of damped-oscillator trajectories from random (x0, v0) in [-1, 1]^2.
struct OscillatorBatch {
  std::vector<double> times;
  Tensor x0;                   // N x 1
  Tensor v0;                   // N x 1
  std::vector<Tensor> states;  // per time, N x 2 columns (x, v)
  double omega = 1.0;
  double gamma = 0.1;
};

inline OscillatorBatch gen_oscillator_batch(std::size_t n, std::uint64_t seed, double omega = 1.0, double gamma = 0.1,
                                            double t_end = 10.0, std::size_t n_times = 100) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  OscillatorBatch b;
  b.times = linspace(0.0, t_end, n_times);
  b.x0 = Tensor({n, 1});
  b.v0 = Tensor({n, 1});
  b.omega = omega;
  b.gamma = gamma;
  for (std::size_t i = 0; i < n; ++i) {
    b.x0[i] = u(rng);
    b.v0[i] = u(rng);
  }
  b.states.assign(n_times, Tensor({n, 2}));
  for (std::size_t i = 0; i < n; ++i) {
    const TimeSeries ts = gen_damped_osc(omega, gamma, b.x0[i], b.v0[i], b.times);
    for (std::size_t k = 0; k < n_times; ++k) {
      b.states[k](i, 0) = ts.values(k, 0);
      b.states[k](i, 1) = ts.values(k, 1);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvSchema {
  std::string time_col = "t";
  std::vector<std::string> value_cols;
  std::vector<std::string> control_cols;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t s = 0;
    while (s < cell.size() && cell[s] == ' ') ++s;
    out.push_back(cell.substr(s));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Loads a header-first CSV. The first n_train rows form the training split
/// and the next n_test rows the test split (both clamped to the file).
inline TimeSeries load_csv(const std::string& path, const CsvSchema& schema, std::size_t n_train = 1000,
                           std::size_t n_test = 4000) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path + "' is empty");
  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw SchemaError("'" + path + "' has no column '" + name + "'");
  };
  const std::size_t tc = column(schema.time_col);
  std::vector<std::size_t> vc, cc;
  for (const auto& c : schema.value_cols) vc.push_back(column(c));
  for (const auto& c : schema.control_cols) cc.push_back(column(c));

  TimeSeries ts;
  ts.time_name = schema.time_col;
  ts.value_names = schema.value_cols;
  ts.control_names = schema.control_cols;
  std::vector<double> vals, ctrl;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    auto get = [&](std::size_t c) {
      if (c >= cells.size())
        throw ParseError("'" + path + "' row " + std::to_string(row) + ": missing cell", row);
      const auto v = detail::parse_double(cells[c]);
      if (!v)
        throw ParseError("'" + path + "' row " + std::to_string(row) + ": non-numeric value '" + cells[c] + "' in column '" +
                             header[c] + "'",
                         row);
      return *v;
    };
    ts.times.push_back(get(tc));
    for (auto c : vc) vals.push_back(get(c));
    for (auto c : cc) ctrl.push_back(get(c));
  }
  const std::size_t n = ts.times.size();
  ts.values = Tensor({n, vc.size()}, std::move(vals));
  if (!cc.empty()) ts.control = Tensor({n, cc.size()}, std::move(ctrl));
  ts.n_train = std::min(n_train, n);
  ts.n_test = std::min(n_test, n - ts.n_train);
  return ts;
}

/// CSV text: t, value columns, control columns with full round-trip precision.
inline std::string csv_text(const TimeSeries& ts) {
  std::ostringstream out;
  out.precision(17);
  out << ts.time_name;
  for (const auto& n : ts.value_names) out << ',' << n;
  for (const auto& n : ts.control_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out << ts.times[i];
    for (std::size_t j = 0; j < ts.values.cols(); ++j) out << ',' << ts.values(i, j);
    if (!ts.control.empty())
      for (std::size_t j = 0; j < ts.control.cols(); ++j) out << ',' << ts.control(i, j);
    out << '\n';
  }
  return out.str();
}

inline void write_csv(const std::string& path, const TimeSeries& ts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << csv_text(ts);
  if (!out) throw IoError("failed writing '" + path + "'");
}

/// Piecewise-linear forcing through the first control column of a series.
inline Forcing control_forcing(const TimeSeries& ts, std::size_t column = 0) {
  if (ts.control.empty()) throw SchemaError("series has no control column");
  std::vector<double> v(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) v[i] = ts.control(i, column);
  return Forcing::table(ts.times, std::move(v));
}

}  // namespace sonode
