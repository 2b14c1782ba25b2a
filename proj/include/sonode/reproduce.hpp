#pragma once

// End-to-end experiment reproductions. Each routine trains the relevant
// presets and writes plain CSV/JSON artifacts into an output directory.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sonode/analysis.hpp"
#include "sonode/config.hpp"
#include "sonode/datasets.hpp"
#include "sonode/experiments.hpp"

namespace sonode {

struct ReproduceOptions {
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::optional<std::size_t> iters;
  std::optional<EngineKind> engine;
  /// External measurement CSV for the Silverbox-style experiment.
  std::string data_path;
  std::string output_dir = "out";
};

struct ReproduceReport {
  std::string name;
  std::vector<std::string> files;
  nlohmann::json summary = nlohmann::json::object();
};

inline const std::vector<std::string>& reproduce_names() {
  static const std::vector<std::string> names{"fig1-parity",   "fig2-parity-dims", "fig3-twofunc", "fig4-minaug",
                                              "fig5-interp",   "fig6-osc",         "fig7-noise",
                                              "fig8-silverbox-fixture", "vdp",     "exponential",  "tonode"};
  return names;
}

/// Per-sample training MSE of a model on a task (one value per batch row).
inline std::vector<double> per_sample_mse(const Model& m, const Task& task, const SolverConfig& cfg) {
  const Trajectory tr = integrate_phase(m, task.x0, task.objective->times(), cfg);
  const auto& targets = static_cast<const MseObjective&>(*task.objective).targets();
  const std::size_t batch = task.x0.rows();
  std::vector<double> se(batch, 0.0);
  std::vector<std::size_t> cnt(batch, 0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].empty()) continue;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < targets[i].cols(); ++j) {
        const double e = tr.states[i](b, j) - targets[i](b, j);
        se[b] += e * e;
        ++cnt[b];
      }
  }
  for (std::size_t b = 0; b < batch; ++b) se[b] = cnt[b] ? se[b] / static_cast<double>(cnt[b]) : 0.0;
  return se;
}

struct MultiFuncReport {
  RunResult run;
  std::vector<double> mse;
};

/// Trains one shared model on several trajectories (a "functions" dataset)
/// and reports the MSE of each.
inline MultiFuncReport anode_multifunc_fit(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.dataset.name != "functions") throw ConfigError("multi-function fits need the 'functions' dataset");
  MultiFuncReport r;
  r.run = run_training(cfg, seed);
  const Task task = build_task(cfg, seed);
  r.mse = per_sample_mse(r.run.train.model, task, cfg.solver());
  return r;
}

/// Preset for 2 or 3 damped oscillators.
inline ExperimentConfig multifunc_preset(std::size_t n_funcs) {
  if (n_funcs == 2) return preset("twofunc-anode");
  if (n_funcs == 3) return preset("threefunc-anode");
  throw ConfigError("multi-function presets exist for 2 and 3 functions");
}

namespace detail {

struct ReproRow {
  std::string label;
  RunResult run;
  nlohmann::json extra = nlohmann::json::object();
};

class Reproducer {
 public:
  Reproducer(std::string fig, const ReproduceOptions& opt) : fig_(std::move(fig)), opt_(opt) {
    std::error_code ec;
    std::filesystem::create_directories(opt_.output_dir, ec);
    if (ec) throw IoError("cannot create '" + opt_.output_dir + "': " + ec.message());
    report_.name = fig_;
  }

  ExperimentConfig config(const std::string& preset_name) const {
    ExperimentConfig c = preset(preset_name);
    if (opt_.iters) c.trainer.iters = *opt_.iters;
    if (opt_.engine) c.trainer.engine = *opt_.engine;
    return c;
  }

  /// Trains every seed of a config, writing its log and prediction table.
  std::vector<ReproRow> run(const ExperimentConfig& cfg, const std::string& label) {
    std::vector<ReproRow> rows;
    for (std::size_t k = 0; k < opt_.repeats; ++k) {
      const std::uint64_t seed = opt_.seed + k;
      ReproRow row{label, run_training(cfg, seed), {}};
      const std::string stem = fig_ + "_" + label + (row.run.fixture ? "_fixture" : "") + "_seed" + std::to_string(seed);
      const auto log = path(stem + "_log.csv");
      row.run.train.log.write_csv(log);
      const Task task = build_task(cfg, seed);
      write_text(path(stem + "_pred.csv"), prediction_csv(row.run.train.model, task, cfg.solver()));
      report_.files.push_back(log);
      report_.files.push_back(path(stem + "_pred.csv"));
      rows.push_back(std::move(row));
    }
    return rows;
  }

  void add(std::vector<ReproRow> rows) {
    for (auto& r : rows) rows_.push_back(std::move(r));
  }

  std::string path(const std::string& file) const { return (std::filesystem::path(opt_.output_dir) / file).string(); }

  void write_text(const std::string& p, const std::string& text) {
    detail::write_text(p, text);
    report_.files.push_back(p);
  }

  /// Writes <fig>_summary.csv and <fig>_summary.json.
  ReproduceReport finish() {
    std::ostringstream os;
    os.precision(17);
    os << "label,seed,iterations,train_loss,test_loss,accuracy,iters_to_1e-2\n";
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : rows_) {
      os << r.label << ',' << r.run.seed << ',' << r.run.iterations << ',' << r.run.train_loss << ',' << r.run.test_loss
         << ',' << r.run.accuracy << ',' << r.run.train.log.iters_to(1e-2) << '\n';
      nlohmann::json j = {{"label", r.label},
                          {"seed", r.run.seed},
                          {"train_loss", number_or_null(r.run.train_loss)},
                          {"test_loss", number_or_null(r.run.test_loss)},
                          {"accuracy", number_or_null(r.run.accuracy)},
                          {"iters_to_1e-2", r.run.train.log.iters_to(1e-2)}};
      if (!r.extra.empty()) j["metrics"] = r.extra;
      if (r.run.fixture) j["data"] = "fixture";
      runs.push_back(j);
    }
    write_text(path(fig_ + "_summary.csv"), os.str());
    report_.summary = {{"name", fig_}, {"runs", runs}};
    write_text(path(fig_ + "_summary.json"), report_.summary.dump(2) + "\n");
    return report_;
  }

  const ReproduceOptions& options() const noexcept { return opt_; }

 private:
  std::string fig_;
  ReproduceOptions opt_;
  ReproduceReport report_;
  std::vector<ReproRow> rows_;
};

}  // namespace detail

/// Runs one named reproduction; throws ConfigError for unknown names.
inline ReproduceReport reproduce(const std::string& name, const ReproduceOptions& opt) {
  detail::Reproducer r(name, opt);
  auto family = [&](const std::string& prefix, const std::vector<std::string>& kinds) {
    for (const auto& k : kinds) r.add(r.run(r.config(prefix + "-" + k), prefix + "-" + k));
  };
  if (name == "fig1-parity") {
    family("parity1d", {"node", "anode", "sonode"});
  } else if (name == "fig2-parity-dims") {
    for (std::size_t dim : {1, 2, 3}) {
      for (const auto& k : {"node", "anode", "sonode"}) {
        ExperimentConfig c = r.config(std::string("parity-") + k);
        c.dataset.params["dim"] = dim;
        r.add(r.run(c, std::string("parity-") + k + "-D" + std::to_string(dim)));
      }
    }
  } else if (name == "fig3-twofunc") {
    for (std::size_t n : {2, 3}) {
      ExperimentConfig c = multifunc_preset(n);
      if (opt.iters) c.trainer.iters = *opt.iters;
      auto rows = r.run(c, c.name);
      for (auto& row : rows) {
        const Task task = build_task(c, row.run.seed);
        row.extra["per_function_mse"] = per_sample_mse(row.run.train.model, task, c.solver());
      }
      r.add(std::move(rows));
    }
  } else if (name == "fig4-minaug") {
    r.add(r.run(r.config("minaug-anode"), "minaug-anode"));
  } else if (name == "fig5-interp") {
    const TimeSeries truth = gen_2d_ode(linspace(0.0, 10.0, 100));
    for (const auto& p : {"interp-sonode", "interp-anode"}) {
      auto rows = r.run(r.config(p), p);
      for (auto& row : rows) {
        const auto m = interpretability_metrics(row.run.train.model, truth);
        row.extra = {{"init_velocity_rel_err", m.init_velocity_rel_err},
                     {"aug_vs_velocity_rmse", m.aug_vs_velocity_rmse},
                     {"force_field_rmse", m.force_field_rmse}};
      }
      r.add(std::move(rows));
    }
  } else if (name == "fig6-osc") {
    family("osc", {"sonode", "anode", "node"});
  } else if (name == "fig7-noise") {
    for (int i = 0; i <= 7; ++i) {
      const double sigma = 0.1 * i;
      for (const auto& k : {"sonode", "anode"}) {
        ExperimentConfig c = r.config(std::string("sine-") + k);
        c.dataset.params["sigma"] = sigma;
        std::ostringstream label;
        label << "sine-" << k << "-sigma" << sigma;
        r.add(r.run(c, label.str()));
      }
    }
  } else if (name == "fig8-silverbox-fixture") {
    for (const auto& k : {"sonode", "anode"}) {
      ExperimentConfig c = r.config(std::string("silverbox-fixture-") + k);
      if (!opt.data_path.empty()) c.dataset.path = opt.data_path;
      r.add(r.run(c, c.name));
    }
  } else if (name == "vdp") {
    family("vdp", {"sonode", "anode"});
  } else if (name == "exponential") {
    family("exponential", {"node", "anode", "sonode"});
  } else if (name == "tonode") {
    r.add(r.run(r.config("tonode"), "tonode"));
  } else {
    throw ConfigError("unknown reproduction '" + name + "'");
  }
  return r.finish();
}

}  // namespace sonode
