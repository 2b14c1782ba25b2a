// Command-line runner: data generation, training, gradient checks, analyses
// and experiment reproductions.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sonode/sonode.hpp"

namespace fs = std::filesystem;
using namespace sonode;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumeric = 3, kIo = 4 };

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iters;
  std::optional<std::string> engine;
  std::optional<std::size_t> repeats;
  std::string output_dir;
  std::string data;
  bool force = false;
  bool wall_time = false;
};

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) cfg = load_config(c.config);
  else if (!c.preset.empty()) cfg = preset(c.preset);
  else throw ConfigError("either --config or --preset is required");
  if (!c.config.empty() && !c.preset.empty()) throw ConfigError("--config and --preset are mutually exclusive");
  if (c.seed) cfg.trainer.seed = *c.seed;
  if (c.iters) cfg.trainer.iters = *c.iters;
  if (c.engine) cfg.trainer.engine = engine_from_string(*c.engine);
  if (c.repeats) cfg.repeats = *c.repeats;
  if (!c.output_dir.empty()) cfg.output_dir = c.output_dir;
  if (!c.data.empty()) cfg.dataset.path = c.data;
  if (c.wall_time) cfg.trainer.wall_time = true;
  cfg.validate();
  return cfg;
}

void refuse_overwrite(const std::string& path, bool force) {
  if (!force && fs::exists(path)) throw IoError("'" + path + "' exists; pass --force to overwrite");
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string points_csv(const LabeledPoints& p, const std::string& split, bool header) {
  std::ostringstream os;
  os.precision(17);
  const std::size_t dim = p.inputs.cols();
  if (header) {
    os << "split";
    for (std::size_t j = 0; j < dim; ++j) os << ",x" << j;
    if (!p.targets.empty())
      for (std::size_t j = 0; j < dim; ++j) os << ",y" << j;
    if (!p.labels.empty()) os << ",label";
    os << '\n';
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    os << split;
    for (std::size_t j = 0; j < dim; ++j) os << ',' << p.inputs(i, j);
    if (!p.targets.empty())
      for (std::size_t j = 0; j < dim; ++j) os << ',' << p.targets(i, j);
    if (!p.labels.empty()) os << ',' << p.labels[i];
    os << '\n';
  }
  return os.str();
}

/// gen-data: writes the dataset CSV plus <out>.manifest.json.
int cmd_gen_data(const Common& c, const std::string& out_path) {
  ExperimentConfig cfg = resolve_config(c);
  const auto& p = cfg.dataset.params;
  const std::string& name = cfg.dataset.name;
  const std::uint64_t seed = cfg.trainer.seed;
  std::string text;
  nlohmann::json schema, split;
  if (name == "parity1d" || name == "parity") {
    if (name == "parity1d" || p.value("dim", std::size_t{2}) == 1) {
      text = points_csv(gen_parity_1d_fixed(), "train", true);
      split = {{"train", 2}, {"test", 0}};
    } else {
      const auto d = gen_parity(p.value("dim", std::size_t{2}), p.value("n_train", std::size_t{50}),
                                p.value("n_test", std::size_t{10}), seed);
      text = points_csv(d.train, "train", true) + points_csv(d.test, "test", false);
      split = {{"train", d.train.size()}, {"test", d.test.size()}};
    }
  } else if (name == "spheres") {
    const Task task = build_task(cfg, seed);
    LabeledPoints pts;
    pts.inputs = task.x0;
    pts.labels = task.labels;
    text = points_csv(pts, "train", true);
    split = {{"train", pts.size()}, {"test", 0}};
  } else {
    TimeSeries ts;
    if (name == "sine") ts = gen_sine_noise(p.value("sigma", 0.5), p.value("noise_seed", seed));
    else if (name == "ode2d") ts = gen_2d_ode(linspace(0.0, p.value("t_end", 10.0), p.value("n_times", std::size_t{100})));
    else if (name == "exponential") ts = gen_exponential(linspace(0.0, p.value("t_end", 10.0), p.value("n_times", std::size_t{50})));
    else if (name == "vdp") ts = gen_vdp();
    else if (name == "third_order") ts = gen_third_order(linspace(0.0, p.value("t_end", 10.0), p.value("n_times", std::size_t{50})));
    else if (name == "duffing_fixture") {
      ts = gen_duffing_fixture(p.value("t_end", 40.0), p.value("n_times", std::size_t{401}),
                               p.value("n_train", std::size_t{150}));
    } else if (name == "functions" || name == "oscillators") {
      const Task task = build_task(cfg, seed);
      ts.times = task.eval_times;
      const std::size_t batch = task.x0.rows();
      const std::size_t cols = task.eval_targets.front().cols();
      ts.values = Tensor({ts.times.size(), batch * cols});
      for (std::size_t i = 0; i < ts.times.size(); ++i)
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t j = 0; j < cols; ++j) ts.values(i, b * cols + j) = task.eval_targets[i](b, j);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < cols; ++j) ts.value_names.push_back("s" + std::to_string(b) + "_c" + std::to_string(j));
      ts.n_train = ts.times.size();
    } else {
      throw ConfigError("gen-data does not support dataset '" + name + "'");
    }
    text = csv_text(ts);
    schema = {{"time_col", "t"}, {"value_cols", ts.value_names}, {"control_cols", ts.control_names}};
    split = {{"train", ts.n_train}, {"test", ts.n_test}};
  }
  const std::string manifest = out_path + ".manifest.json";
  refuse_overwrite(out_path, c.force);
  refuse_overwrite(manifest, c.force);
  if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
  write_file(out_path, text);
  nlohmann::json m = {{"name", name}, {"params", p}, {"seed", seed}, {"split", split}};
  if (!schema.is_null()) m["schema"] = schema;
  if (name == "duffing_fixture") m["coefficients"] = duffing_fixture_coefficients();
  write_file(manifest, m.dump(2) + "\n");
  std::cout << "wrote " << out_path << " and " << manifest << '\n';
  return kOk;
}

int cmd_train(const Common& c) {
  ExperimentConfig cfg = resolve_config(c);
  const std::string summary = (fs::path(cfg.output_dir) / (cfg.name + "_summary.json")).string();
  refuse_overwrite(summary, c.force);
  const auto runs = run_repeats(cfg);
  const auto files = write_run_outputs(cfg, runs, cfg.output_dir);
  for (const auto& r : runs) {
    std::cout << cfg.name << " seed " << r.seed << ": final train loss " << r.train_loss;
    if (std::isfinite(r.test_loss)) std::cout << ", test loss " << r.test_loss;
    if (std::isfinite(r.accuracy)) std::cout << ", accuracy " << r.accuracy;
    std::cout << '\n';
  }
  std::cout << "wrote " << files.size() << " files to " << cfg.output_dir << '\n';
  return kOk;
}

int cmd_grad_check(const Common& c, std::size_t n_seeds, const std::string& out_path) {
  std::vector<GradCheckRow> rows;
  bool ok = true;
  const std::uint64_t base = c.seed.value_or(0);
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = base + s;
    GradCheckCase gc = random_sonode_case(seed, 1 + s % 3);
    const auto r = grad_check(gc.model, gc.x0, gc.objective, seed);
    for (const auto& row : r) {
      const bool fd = row.engine_b == "finite_diff";
      const double tol = fd ? 1e-3 : 1e-4;
      if (row.rel_err > tol) ok = false;
      if (row.engine_a == "coupled" && row.engine_b == "second_order" && row.vjp_calls_b < row.vjp_calls_a) ok = false;
    }
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const std::string csv = grad_check_csv(rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    refuse_overwrite(out_path, c.force);
    write_file(out_path, csv);
    std::cout << "wrote " << out_path << '\n';
  }
  std::cout << (ok ? "all engine pairs within tolerance" : "engine disagreement above tolerance") << '\n';
  return ok ? kOk : kNumeric;
}

int cmd_analyze(const Common& c, const std::string& what, const std::string& checkpoint) {
  nlohmann::json out;
  if (what == "homeo") {
    const HomeoReport h = homeo_counterexample();
    out = {{"inputs", h.inputs}, {"outputs", h.outputs}, {"injectivity_violated", h.injectivity_violated}};
  } else if (what == "two-function") {
    const auto pair = two_function_pair(1.2, 1.0, 0.1667);
    const auto times = linspace(0.0, 10.0, 201);
    double err = 0.0;
    for (double x0 : {0.0, 1.0}) {
      const Trajectory tr = integrate_pair(pair, {x0}, {0.0}, times, SolverConfig::tolerance(1e-10));
      for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const double truth = std::exp(-0.1667 * t) * (x0 == 0.0 ? std::sin(t) : std::cos(t));
        err = std::max(err, std::abs(tr.states[i][0] - truth));
      }
    }
    out = {{"max_abs_error", err}};
  } else if (what == "interp") {
    if (checkpoint.empty()) throw ConfigError("analyze interp needs --checkpoint");
    const Model m = load_checkpoint(checkpoint);
    const auto metrics = interpretability_metrics(m, gen_2d_ode(linspace(0.0, 10.0, 100)));
    out = {{"init_velocity_rel_err", metrics.init_velocity_rel_err},
           {"aug_vs_velocity_rmse", metrics.aug_vs_velocity_rmse},
           {"force_field_rmse", metrics.force_field_rmse}};
  } else if (what == "coefficients") {
    if (checkpoint.empty()) throw ConfigError("analyze coefficients needs --checkpoint");
    const Model m = load_checkpoint(checkpoint);
    if (!m.has_closed_form()) throw ModelKindError("checkpoint has no closed-form field");
    out = m.closed_form().coefficient_map();
  } else {
    throw ConfigError("unknown analysis '" + what + "' (homeo, two-function, interp, coefficients)");
  }
  const std::string text = out.dump(2) + "\n";
  if (c.output_dir.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(c.output_dir);
    const std::string path = (fs::path(c.output_dir) / ("analysis_" + what + ".json")).string();
    refuse_overwrite(path, c.force);
    write_file(path, text);
    std::cout << "wrote " << path << '\n';
  }
  return kOk;
}

int cmd_reproduce(const Common& c, const std::string& name) {
  ReproduceOptions opt;
  opt.seed = c.seed.value_or(0);
  opt.repeats = c.repeats.value_or(1);
  opt.iters = c.iters;
  if (c.engine) opt.engine = engine_from_string(*c.engine);
  opt.data_path = c.data;
  opt.output_dir = c.output_dir.empty() ? "out/" + name : c.output_dir;
  const std::string summary = (fs::path(opt.output_dir) / (name + "_summary.json")).string();
  refuse_overwrite(summary, c.force);
  const auto report = reproduce(name, opt);
  std::cout << report.summary.dump(2) << '\n';
  return kOk;
}

void add_common(CLI::App* sub, Common& c, bool training) {
  sub->add_option("--config", c.config, "JSON experiment config");
  sub->add_option("--preset", c.preset, "named preset");
  sub->add_option("--seed", c.seed, "base seed");
  sub->add_option("--output-dir", c.output_dir, "output directory");
  sub->add_flag("--force", c.force, "overwrite existing outputs");
  if (training) {
    sub->add_option("--iters", c.iters, "Adam iterations");
    sub->add_option("--engine", c.engine, "gradient engine: coupled, second_order, backprop");
    sub->add_option("--repeats", c.repeats, "number of seeds");
    sub->add_option("--data", c.data, "external measurement CSV");
    sub->add_flag("--wall-time", c.wall_time, "record elapsed time in logs");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sonode_lab: second-order neural ODE experiments"};
  app.require_subcommand(1);
  Common c;
  std::string out_path, what, checkpoint, repro;
  std::size_t n_seeds = 20;
  bool list = false;

  auto* gen = app.add_subcommand("gen-data", "write a dataset CSV and manifest");
  add_common(gen, c, false);
  gen->add_option("--out", out_path, "output CSV path")->required();

  auto* tr = app.add_subcommand("train", "train a config or preset");
  add_common(tr, c, true);
  tr->add_flag("--list", list, "list presets and exit");

  auto* gc = app.add_subcommand("grad-check", "compare gradient engines on random models");
  add_common(gc, c, false);
  gc->add_option("--seeds", n_seeds, "number of random models");
  gc->add_option("--out", out_path, "report CSV path (stdout if omitted)");

  auto* an = app.add_subcommand("analyze", "run an analysis");
  add_common(an, c, false);
  an->add_option("what", what, "homeo | two-function | interp | coefficients")->required();
  an->add_option("--checkpoint", checkpoint, "model checkpoint JSON");

  auto* rp = app.add_subcommand("reproduce", "reproduce an experiment");
  add_common(rp, c, true);
  rp->add_option("name", repro, "experiment name")->required()->check(CLI::IsMember(reproduce_names()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_gen_data(c, out_path);
    if (*tr) {
      if (list) {
        for (const auto& [name, cfg] : presets()) std::cout << name << "  " << cfg.note << '\n';
        return kOk;
      }
      return cmd_train(c);
    }
    if (*gc) return cmd_grad_check(c, n_seeds, out_path);
    if (*an) return cmd_analyze(c, what, checkpoint);
    if (*rp) return cmd_reproduce(c, repro);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ModelKindError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const UnsupportedCaseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const SchemaError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
