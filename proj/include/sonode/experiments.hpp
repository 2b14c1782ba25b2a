#pragma once

// Experiment tasks, seeded training runs, repeats and summary outputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sonode/adjoint.hpp"
#include "sonode/checkpoint.hpp"
#include "sonode/config.hpp"
#include "sonode/datasets.hpp"
#include "sonode/errors.hpp"
#include "sonode/model.hpp"
#include "sonode/objective.hpp"
#include "sonode/training.hpp"

namespace sonode {

/// A training problem: the batch of initial positions, the training loss and
/// an evaluation grid (possibly extending past the training window).
struct Task {
  std::string dataset;
  std::size_t d = 1;
  Tensor x0;
  std::shared_ptr<Objective> objective;
  /// Per-sample initial velocities offered to second-order models.
  Tensor init_velocity;
  Forcing forcing;
  bool classification = false;
  std::vector<int> labels;

  Tensor eval_x0;
  std::vector<double> eval_times;
  /// One entry per eval time; empty when nothing is known there.
  std::vector<Tensor> eval_targets;
  /// Marks eval times that belong to the held-out split.
  std::vector<char> eval_is_test;
  bool fixture = false;
};

namespace detail {

inline double param_or(const nlohmann::json& p, const char* key, double fallback) {
  return p.contains(key) ? p.at(key).get<double>() : fallback;
}

inline std::size_t size_param_or(const nlohmann::json& p, const char* key, std::size_t fallback) {
  return p.contains(key) ? p.at(key).get<std::size_t>() : fallback;
}

inline Tensor column_block(const TimeSeries& ts, std::size_t i, std::size_t cols) {
  Tensor t({1, cols});
  for (std::size_t j = 0; j < cols; ++j) t(0, j) = ts.values(i, j);
  return t;
}

/// Training times/targets from the rows where train_mask is set. The first
/// row is always the initial time, observed or not.
inline void series_task(Task& task, const TimeSeries& ts, std::size_t cols, const std::vector<char>& train_mask) {
  std::vector<double> times{ts.times[0]};
  std::vector<Tensor> targets{train_mask[0] ? column_block(ts, 0, cols) : Tensor{}};
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (!train_mask[i]) continue;
    times.push_back(ts.times[i]);
    targets.push_back(column_block(ts, i, cols));
  }
  task.objective = std::make_shared<MseObjective>(times, targets);
  task.eval_x0 = task.x0;
  task.eval_times = ts.times;
  task.eval_targets.clear();
  task.eval_is_test.clear();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    task.eval_targets.push_back(column_block(ts, i, cols));
    task.eval_is_test.push_back(train_mask[i] ? 0 : 1);
  }
}

inline std::vector<char> prefix_mask(std::size_t n, std::size_t n_train) {
  std::vector<char> m(n, 0);
  for (std::size_t i = 0; i < std::min(n, n_train); ++i) m[i] = 1;
  return m;
}

inline Tensor rows_of(const std::vector<std::vector<double>>& rows) {
  Tensor t({rows.size(), rows.empty() ? 0 : rows.front().size()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t(i, j) = rows[i][j];
  return t;
}

inline std::size_t readout_width(const ExperimentConfig& cfg, std::size_t d) {
  const bool full = cfg.model.readout == "full" || (cfg.model.readout == "auto" && cfg.model.kind == ModelKind::anode);
  if (!full) return d;
  ModelSpec s{cfg.model.kind, d, cfg.model.aug_dim, cfg.model.order};
  return s.phase_dim();
}

}  // namespace detail

/// Builds the task for a config. The seed drives any random data.
inline Task build_task(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& p = cfg.dataset.params;
  const std::string& name = cfg.dataset.name;
  const bool velocity_loss = cfg.trainer.loss == LossKind::mse_state_and_velocity;
  const bool second = cfg.model.kind == ModelKind::sonode;
  Task task;
  task.dataset = name;
  try {
    if (name == "parity1d" || name == "parity") {
      LabeledPoints train, test;
      if (name == "parity1d") {
        train = gen_parity_1d_fixed();
      } else {
        auto pd = gen_parity(detail::size_param_or(p, "dim", 2), detail::size_param_or(p, "n_train", 50),
                             detail::size_param_or(p, "n_test", 10), seed);
        train = std::move(pd.train);
        test = std::move(pd.test);
      }
      task.d = train.inputs.cols();
      task.x0 = train.inputs;
      task.objective = std::make_shared<MseObjective>(std::vector<double>{0.0, 1.0},
                                                      std::vector<Tensor>{Tensor{}, train.targets});
      if (name == "parity1d") {
        task.eval_x0 = train.inputs;
        task.eval_times = linspace(0.0, 1.0, 51);
        task.eval_targets.assign(51, Tensor{});
        task.eval_targets.back() = train.targets;
        task.eval_is_test.assign(51, 0);
      } else {
        task.eval_x0 = test.inputs;
        task.eval_times = {0.0, 1.0};
        task.eval_targets = {Tensor{}, test.targets};
        task.eval_is_test = {0, 1};
      }
    } else if (name == "spheres") {
      const std::size_t dim = detail::size_param_or(p, "dim", 2);
      LabeledPoints pts = gen_nested_spheres(dim, detail::size_param_or(p, "n", 120), detail::param_or(p, "r_inner", 0.5),
                                             detail::param_or(p, "shell_lo", 1.0), detail::param_or(p, "shell_hi", 1.5),
                                             100 + seed);
      task.d = dim;
      task.x0 = pts.inputs;
      task.classification = true;
      task.labels = pts.labels;
      task.objective = std::make_shared<XentObjective>(0.0, 1.0, pts.labels, detail::readout_width(cfg, dim));
      task.eval_x0 = pts.inputs;
      task.eval_times = {0.0, 1.0};
      task.eval_targets = {Tensor{}, Tensor{}};
      task.eval_is_test = {0, 0};
    } else if (name == "oscillators") {
      const OscillatorBatch b =
          gen_oscillator_batch(detail::size_param_or(p, "n", 30), seed, detail::param_or(p, "omega", 1.0),
                               detail::param_or(p, "gamma", 0.1), detail::param_or(p, "t_end", 10.0),
                               detail::size_param_or(p, "n_times", 100));
      const std::size_t n = b.x0.rows();
      if (second) {
        task.d = 1;
        task.x0 = b.x0;
        task.init_velocity = b.v0;
      } else {
        task.d = 2;
        task.x0 = Tensor({n, 2});
        for (std::size_t i = 0; i < n; ++i) {
          task.x0(i, 0) = b.x0[i];
          task.x0(i, 1) = b.v0[i];
        }
      }
      const std::size_t cols = (velocity_loss || !second) ? 2 : 1;
      std::vector<Tensor> targets;
      for (const auto& s : b.states) {
        Tensor t({n, cols});
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < cols; ++j) t(i, j) = s(i, j);
        targets.push_back(std::move(t));
      }
      if (!velocity_loss && !second) {
        for (auto& t : targets) {
          Tensor x({n, 1});
          for (std::size_t i = 0; i < n; ++i) x(i, 0) = t(i, 0);
          t = std::move(x);
        }
      }
      task.objective = std::make_shared<MseObjective>(b.times, targets);
      task.eval_x0 = task.x0;
      task.eval_times = b.times;
      task.eval_targets = targets;
      task.eval_is_test.assign(b.times.size(), 0);
    } else if (name == "functions") {
      const double omega = detail::param_or(p, "omega", 1.0);
      const double gamma = detail::param_or(p, "gamma", 0.1667);
      std::vector<std::vector<double>> init = {{0.0, omega}, {1.0, -gamma}};
      if (p.contains("initial")) init = p.at("initial").get<std::vector<std::vector<double>>>();
      const auto times = linspace(0.0, detail::param_or(p, "t_end", 10.0), detail::size_param_or(p, "n_times", 50));
      const std::size_t n = init.size();
      task.d = 1;
      task.x0 = Tensor({n, 1});
      task.init_velocity = Tensor({n, 1});
      std::vector<Tensor> targets(times.size(), Tensor({n, 1}));
      for (std::size_t i = 0; i < n; ++i) {
        if (init[i].size() != 2) throw ConfigError("functions.initial entries must be [x0, v0]");
        task.x0(i, 0) = init[i][0];
        task.init_velocity(i, 0) = init[i][1];
        const TimeSeries ts = gen_damped_osc(omega, gamma, init[i][0], init[i][1], times);
        for (std::size_t k = 0; k < times.size(); ++k) targets[k](i, 0) = ts.values(k, 0);
      }
      task.objective = std::make_shared<MseObjective>(times, targets);
      task.eval_x0 = task.x0;
      task.eval_times = times;
      task.eval_targets = targets;
      task.eval_is_test.assign(times.size(), 0);
    } else if (name == "sine") {
      const TimeSeries ts = gen_sine_noise(detail::param_or(p, "sigma", 0.5), detail::size_param_or(p, "noise_seed", seed));
      task.d = 1;
      task.x0 = Tensor({1, 1}, {ts.values(0, 0)});
      detail::series_task(task, ts, 1, detail::prefix_mask(ts.size(), ts.n_train));
    } else if (name == "ode2d") {
      const TimeSeries ts = gen_2d_ode(linspace(0.0, detail::param_or(p, "t_end", 10.0), detail::size_param_or(p, "n_times", 100)));
      task.d = 2;
      task.x0 = Tensor({1, 2}, {ts.values(0, 0), ts.values(0, 1)});
      task.init_velocity = Tensor({1, 2}, {ts.values(0, 2), ts.values(0, 3)});
      detail::series_task(task, ts, 2, detail::prefix_mask(ts.size(), ts.size()));
    } else if (name == "exponential") {
      const std::size_t n = detail::size_param_or(p, "n_times", 50);
      const double t_end = detail::param_or(p, "t_end", 10.0);
      const TimeSeries ts = gen_exponential(linspace(0.0, t_end, n));
      const double gap_lo = detail::param_or(p, "gap_lo", 0.3 * t_end);
      const double gap_hi = detail::param_or(p, "gap_hi", 0.7 * t_end);
      std::vector<char> mask(n);
      for (std::size_t i = 0; i < n; ++i) mask[i] = (ts.times[i] <= gap_lo || ts.times[i] >= gap_hi) ? 1 : 0;
      task.d = 1;
      task.x0 = Tensor({1, 1}, {ts.values(0, 0)});
      detail::series_task(task, ts, 1, mask);
    } else if (name == "vdp") {
      const TimeSeries ts = gen_vdp();
      task.d = 1;
      task.x0 = Tensor({1, 1}, {ts.values(0, 0)});
      task.init_velocity = Tensor({1, 1}, {ts.values(0, 1)});
      task.forcing = Forcing::cosine(1.0, 0.2 * std::numbers::pi);
      detail::series_task(task, ts, 1, detail::prefix_mask(ts.size(), detail::size_param_or(p, "n_train", ts.n_train)));
    } else if (name == "third_order") {
      const TimeSeries ts =
          gen_third_order(linspace(0.0, detail::param_or(p, "t_end", 10.0), detail::size_param_or(p, "n_times", 50)));
      task.d = 1;
      task.x0 = Tensor({1, 1}, {ts.values(0, 0)});
      detail::series_task(task, ts, 1, detail::prefix_mask(ts.size(), ts.size()));
    } else if (name == "duffing_fixture" || name == "csv") {
      TimeSeries ts;
      if (!cfg.dataset.path.empty() || name == "csv") {
        if (cfg.dataset.path.empty()) throw ConfigError("dataset 'csv' needs a path");
        CsvSchema schema;
        schema.time_col = p.value("time_col", std::string("t"));
        schema.value_cols = p.value("value_cols", std::vector<std::string>{"V2"});
        schema.control_cols = p.value("control_cols", std::vector<std::string>{"V1"});
        ts = load_csv(cfg.dataset.path, schema, detail::size_param_or(p, "n_train", 1000),
                      detail::size_param_or(p, "n_test", 4000));
        task.fixture = name == "duffing_fixture" && p.value("fixture", false);
      } else {
        ts = gen_duffing_fixture(detail::param_or(p, "t_end", 40.0), detail::size_param_or(p, "n_times", 401),
                                 detail::size_param_or(p, "n_train", 150));
        task.fixture = true;
      }
      task.d = 1;
      task.x0 = Tensor({1, 1}, {ts.values(0, 0)});
      if (!ts.control.empty()) task.forcing = control_forcing(ts);
      std::vector<char> mask(ts.size(), 0);
      for (std::size_t i = 0; i < ts.n_train + ts.n_test && i < ts.size(); ++i) mask[i] = i < ts.n_train ? 1 : 0;
      detail::series_task(task, ts, 1, mask);
      // Rows past the declared split are not part of the evaluation.
      const std::size_t keep = std::min(ts.size(), ts.n_train + ts.n_test);
      task.eval_times.resize(keep);
      task.eval_targets.resize(keep);
      task.eval_is_test.resize(keep);
    } else {
      throw ConfigError("unknown dataset '" + name + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid dataset parameters: " + std::string(e.what()));
  }
  return task;
}

/// Builds the randomly initialized model for a config and task.
inline Model build_experiment_model(const ExperimentConfig& cfg, const Task& task, std::uint64_t seed) {
  const ModelConfig& mc = cfg.model;
  ModelSpec spec{mc.kind, task.d, mc.kind == ModelKind::anode ? mc.aug_dim : 0,
                 mc.kind == ModelKind::sonode ? 2 : (mc.kind == ModelKind::kth_order ? mc.order : 1)};
  spec.time_dependent = mc.time_dependent;
  spec.learn_aug_init = mc.learn_aug_init;
  spec.cubic_feature = mc.cubic_feature;
  spec.forcing_feature = mc.forcing_feature;
  spec.validate();

  // Known initial velocities seed g for second-order models, or the
  // augmented block of an anode whose a(t0) is supplied.
  const bool has_velocity =
      !task.init_velocity.empty() &&
      (spec.kind == ModelKind::sonode ||
       (spec.kind == ModelKind::anode && spec.learn_aug_init && task.init_velocity.cols() == spec.D));
  std::string init = mc.init;
  if (init == "auto") {
    if (spec.kind == ModelKind::anode && !spec.learn_aug_init) init = "none";
    else if (has_velocity) init = "fixed";
    else if (mc.field == "closed_form") init = "constant";
    else init = spec.init_dim() > 0 ? "mlp" : "none";
  }
  if (init == "fixed" && !has_velocity) throw ConfigError("dataset '" + task.dataset + "' offers no initial velocities");

  if (mc.field == "closed_form") {
    InitMap g;
    g.kind = init_kind_from_string(init);
    std::mt19937_64 rng(seed);
    if (g.kind == InitKind::fixed) g.fixed = task.init_velocity;
    if (g.kind == InitKind::constant) g.constant.assign(spec.init_dim(), 0.0);
    if (g.kind == InitKind::mlp)
      g.mlp = MlpParams::init(detail::widths(spec.d, mc.init_hidden, spec.init_dim()), Activation::tanh, Activation::none, rng);
    return Model(spec, ClosedForm::zeros(mc.closed_form, spec.d, task.forcing), std::move(g), {}, task.forcing);
  }
  ArchSpec arch;
  arch.field = mc.field == "affine" ? FieldArch::affine : FieldArch::deep;
  arch.hidden = mc.hidden;
  arch.field_activation = mc.activation;
  arch.g = init_kind_from_string(init);
  arch.g_hidden = mc.init_hidden;
  if (arch.g == InitKind::fixed) arch.g_fixed = task.init_velocity;
  return build_model(spec, arch, seed, task.forcing);
}

struct RunResult {
  std::uint64_t seed = 0;
  TrainResult train;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  bool fixture = false;
};

/// Phase-space predictions of a model over the task's evaluation grid.
inline Trajectory predict(const Model& m, const Task& task, const SolverConfig& cfg) {
  return integrate_phase(m, task.eval_x0, task.eval_times, cfg);
}

/// Mean squared error over the held-out evaluation times (NaN if none).
inline double test_loss(const Model& m, const Task& task, const SolverConfig& cfg) {
  bool any = false;
  std::vector<Tensor> targets(task.eval_times.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!task.eval_is_test[i] || task.eval_targets[i].empty()) continue;
    targets[i] = task.eval_targets[i];
    any = true;
  }
  if (!any) return std::numeric_limits<double>::quiet_NaN();
  const Trajectory tr = predict(m, task, cfg);
  return mse_loss(tr.states, targets).loss;
}

/// Trains one seeded run of a config. The optional callback sees every
/// update and may stop the run early.
inline RunResult run_training(const ExperimentConfig& cfg, std::uint64_t seed, const TrainCallback& callback = {}) {
  cfg.validate();
  Task task = build_task(cfg, seed);
  Model model = build_experiment_model(cfg, task, seed);
  TrainConfig tc = cfg.trainer;
  tc.seed = seed;
  RunResult r;
  r.seed = seed;
  r.fixture = task.fixture;
  r.train = train(model, task.x0, *task.objective, tc, callback);
  r.iterations = r.train.log.rows.size();
  r.train_loss = evaluate_loss(r.train.model, task.x0, *task.objective, tc.solver);
  r.test_loss = test_loss(r.train.model, task, tc.solver);
  if (task.classification) {
    const Trajectory tr = integrate_phase(r.train.model, task.x0, {0.0, 1.0}, tc.solver);
    r.accuracy = static_cast<const XentObjective&>(*task.objective).accuracy(tr.states.back());
  }
  return r;
}

/// Runs cfg.repeats seeds (cfg.trainer.seed, +1, ...) concurrently.
inline std::vector<RunResult> run_repeats(const ExperimentConfig& cfg, std::size_t max_threads = 0) {
  cfg.validate();
  const std::size_t n = cfg.repeats;
  std::vector<RunResult> out(n);
  std::vector<std::exception_ptr> errors(n);
  if (max_threads == 0) max_threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < n; start += max_threads) {
    std::vector<std::thread> pool;
    for (std::size_t i = start; i < std::min(n, start + max_threads); ++i) {
      pool.emplace_back([&, i] {
        try {
          out[i] = run_training(cfg, cfg.trainer.seed + i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Outputs

struct MeanStd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and sample standard deviation of the finite values.
inline MeanStd mean_std(const std::vector<double>& v) {
  std::vector<double> f;
  for (double x : v)
    if (std::isfinite(x)) f.push_back(x);
  MeanStd r;
  if (f.empty()) return r;
  double s = 0.0;
  for (double x : f) s += x;
  r.mean = s / static_cast<double>(f.size());
  double q = 0.0;
  for (double x : f) q += (x - r.mean) * (x - r.mean);
  r.std = f.size() > 1 ? std::sqrt(q / static_cast<double>(f.size() - 1)) : 0.0;
  return r;
}

namespace detail {

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json mean_std_json(const std::vector<double>& v) {
  const MeanStd m = mean_std(v);
  return {{"mean", number_or_null(m.mean)}, {"std", number_or_null(m.std)}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace detail

inline std::string run_stem(const ExperimentConfig& cfg, const RunResult& r) {
  return cfg.name + (r.fixture ? "_fixture" : "") + "_seed" + std::to_string(r.seed);
}

inline nlohmann::json summary_json(const ExperimentConfig& cfg, const std::vector<RunResult>& runs) {
  std::vector<double> train, test, acc;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : runs) {
    train.push_back(r.train_loss);
    test.push_back(r.test_loss);
    acc.push_back(r.accuracy);
    per.push_back({{"seed", r.seed},
                   {"iterations", r.iterations},
                   {"train_loss", detail::number_or_null(r.train_loss)},
                   {"test_loss", detail::number_or_null(r.test_loss)},
                   {"accuracy", detail::number_or_null(r.accuracy)}});
  }
  nlohmann::json j = {{"name", cfg.name},
                      {"config", to_json(cfg)},
                      {"runs", per},
                      {"train_loss", detail::mean_std_json(train)},
                      {"test_loss", detail::mean_std_json(test)},
                      {"accuracy", detail::mean_std_json(acc)}};
  if (!runs.empty() && runs.front().fixture) j["data"] = "fixture";
  return j;
}

/// Writes <stem>_log.csv and <stem>.ckpt.json per run plus
/// <name>_summary.json; returns the paths written.
inline std::vector<std::string> write_run_outputs(const ExperimentConfig& cfg, const std::vector<RunResult>& runs,
                                                  const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  std::vector<std::string> files;
  for (const auto& r : runs) {
    const auto stem = std::filesystem::path(dir) / run_stem(cfg, r);
    const auto log = stem.string() + "_log.csv";
    r.train.log.write_csv(log);
    files.push_back(log);
    const auto ckpt = stem.string() + ".ckpt.json";
    save_checkpoint(ckpt, r.train.model);
    files.push_back(ckpt);
  }
  const auto summary = (std::filesystem::path(dir) / (cfg.name + "_summary.json")).string();
  detail::write_text(summary, summary_json(cfg, runs).dump(2) + "\n");
  files.push_back(summary);
  return files;
}

/// Long-format prediction table: t, sample, coord, prediction, target, split.
inline std::string prediction_csv(const Model& m, const Task& task, const SolverConfig& cfg) {
  const Trajectory tr = predict(m, task, cfg);
  std::ostringstream os;
  os.precision(17);
  os << "t,sample,coord,prediction,target,split\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const Tensor& s = tr.states[i];
    for (std::size_t b = 0; b < s.rows(); ++b) {
      for (std::size_t j = 0; j < s.cols(); ++j) {
        os << tr.times[i] << ',' << b << ',' << j << ',' << s(b, j) << ',';
        const Tensor& tg = task.eval_targets[i];
        if (!tg.empty() && j < tg.cols()) os << tg(b, j);
        os << ',' << (task.eval_is_test[i] ? "test" : "train") << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace sonode
