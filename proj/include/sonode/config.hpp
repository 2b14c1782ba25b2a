#pragma once

// Experiment configuration: JSON (de)serialization and named presets.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sonode/adjoint.hpp"
#include "sonode/closed_form.hpp"
#include "sonode/errors.hpp"
#include "sonode/mlp.hpp"
#include "sonode/model.hpp"
#include "sonode/ode.hpp"
#include "sonode/training.hpp"

namespace sonode {

struct ModelConfig {
  ModelKind kind = ModelKind::sonode;
  std::size_t aug_dim = 0;
  std::size_t order = 2;
  /// "deep", "affine" or "closed_form".
  std::string field = "deep";
  std::vector<std::size_t> hidden = {20, 20};
  Activation activation = Activation::elu;
  /// "auto", "none", "fixed", "constant" or "mlp".
  std::string init = "auto";
  std::vector<std::size_t> init_hidden = {20, 20};
  bool learn_aug_init = false;
  bool time_dependent = false;
  bool cubic_feature = false;
  bool forcing_feature = false;
  Template closed_form = Template::linear_osc;
  /// Classification readout over the real coordinates ("real"), the whole
  /// state ("full"), or "auto" (full for augmented models).
  std::string readout = "auto";
};

struct DatasetConfig {
  std::string name = "parity1d";
  nlohmann::json params = nlohmann::json::object();
  std::string path;
};

struct ExperimentConfig {
  std::string name = "custom";
  ModelConfig model;
  DatasetConfig dataset;
  TrainConfig trainer;
  std::size_t repeats = 3;
  std::string output_dir = "out";
  /// Free-form note recorded with outputs (budgets are choices, not results).
  std::string note;

  const SolverConfig& solver() const noexcept { return trainer.solver; }
  void validate() const;
};

// ---------------------------------------------------------------------------
// JSON

inline std::string to_string(Method m) { return m == Method::rk4 ? "rk4" : "dopri5"; }

inline Method method_from_string(const std::string& s) {
  if (s == "rk4") return Method::rk4;
  if (s == "dopri5") return Method::dopri5;
  throw ConfigError("unknown solver method '" + s + "'");
}

inline nlohmann::json to_json(const SolverConfig& c) {
  return {{"method", to_string(c.method)}, {"rtol", c.rtol},           {"atol", c.atol},
          {"h_init", c.h_init},            {"h_min", c.h_min},         {"max_steps", c.max_steps},
          {"rk4_steps", c.rk4_steps}};
}

inline nlohmann::json to_json(const ModelConfig& m) {
  return {{"kind", to_string(m.kind)},
          {"aug_dim", m.aug_dim},
          {"order", m.order},
          {"field", m.field},
          {"hidden", m.hidden},
          {"activation", to_string(m.activation)},
          {"init", m.init},
          {"init_hidden", m.init_hidden},
          {"learn_aug_init", m.learn_aug_init},
          {"time_dependent", m.time_dependent},
          {"cubic_feature", m.cubic_feature},
          {"forcing_feature", m.forcing_feature},
          {"template", to_string(m.closed_form)},
          {"readout", m.readout}};
}

inline nlohmann::json to_json(const TrainConfig& t) {
  return {{"lr", t.lr},         {"beta1", t.beta1},          {"beta2", t.beta2},
          {"eps", t.eps_adam},  {"iters", t.iters},          {"loss", to_string(t.loss)},
          {"engine", to_string(t.engine)}, {"seed", t.seed}, {"wall_time", t.wall_time}};
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json ds = {{"name", c.dataset.name}, {"params", c.dataset.params}};
  if (!c.dataset.path.empty()) ds["path"] = c.dataset.path;
  nlohmann::json j = {{"name", c.name},
                      {"model", to_json(c.model)},
                      {"dataset", ds},
                      {"solver", to_json(c.trainer.solver)},
                      {"trainer", to_json(c.trainer)},
                      {"repeats", c.repeats},
                      {"output_dir", c.output_dir}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

namespace detail {

/// Rejects keys outside the allowed set so typos surface as config errors.
inline void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == k;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

}  // namespace detail

inline void update_from_json(SolverConfig& c, const nlohmann::json& j) {
  detail::check_keys(j, {"method", "rtol", "atol", "h_init", "h_min", "max_steps", "rk4_steps"}, "solver");
  if (j.contains("method")) c.method = method_from_string(j["method"].get<std::string>());
  c.rtol = j.value("rtol", c.rtol);
  c.atol = j.value("atol", c.atol);
  c.h_init = j.value("h_init", c.h_init);
  c.h_min = j.value("h_min", c.h_min);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.rk4_steps = j.value("rk4_steps", c.rk4_steps);
}

inline void update_from_json(ModelConfig& m, const nlohmann::json& j) {
  detail::check_keys(j,
                     {"kind", "aug_dim", "order", "field", "hidden", "activation", "init", "init_hidden",
                      "learn_aug_init", "time_dependent", "cubic_feature", "forcing_feature", "template", "readout"},
                     "model");
  if (j.contains("kind")) m.kind = model_kind_from_string(j["kind"].get<std::string>());
  m.aug_dim = j.value("aug_dim", m.aug_dim);
  m.order = j.value("order", m.order);
  m.field = j.value("field", m.field);
  if (j.contains("hidden")) m.hidden = j["hidden"].get<std::vector<std::size_t>>();
  if (j.contains("activation")) m.activation = activation_from_string(j["activation"].get<std::string>());
  m.init = j.value("init", m.init);
  if (j.contains("init_hidden")) m.init_hidden = j["init_hidden"].get<std::vector<std::size_t>>();
  m.learn_aug_init = j.value("learn_aug_init", m.learn_aug_init);
  m.time_dependent = j.value("time_dependent", m.time_dependent);
  m.cubic_feature = j.value("cubic_feature", m.cubic_feature);
  m.forcing_feature = j.value("forcing_feature", m.forcing_feature);
  if (j.contains("template")) m.closed_form = template_from_string(j["template"].get<std::string>());
  m.readout = j.value("readout", m.readout);
}

inline void update_from_json(TrainConfig& t, const nlohmann::json& j) {
  detail::check_keys(j, {"lr", "beta1", "beta2", "eps", "iters", "loss", "engine", "seed", "wall_time"}, "trainer");
  t.lr = j.value("lr", t.lr);
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.eps_adam = j.value("eps", t.eps_adam);
  t.iters = j.value("iters", t.iters);
  if (j.contains("loss")) t.loss = loss_kind_from_string(j["loss"].get<std::string>());
  if (j.contains("engine")) t.engine = engine_from_string(j["engine"].get<std::string>());
  t.seed = j.value("seed", t.seed);
  t.wall_time = j.value("wall_time", t.wall_time);
}

/// Overlays a JSON document on an existing config; absent keys keep their
/// current values. Errors of any kind surface as ConfigError.
inline void update_from_json(ExperimentConfig& c, const nlohmann::json& j) {
  try {
    detail::check_keys(j,
                       {"name", "preset", "model", "dataset", "solver", "trainer", "repeats", "output_dir", "note"},
                       "config");
    c.name = j.value("name", c.name);
    if (j.contains("model")) update_from_json(c.model, j["model"]);
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      detail::check_keys(d, {"name", "params", "path"}, "dataset");
      if (d.contains("name") && d["name"].get<std::string>() != c.dataset.name) {
        c.dataset.name = d["name"].get<std::string>();
        c.dataset.params = nlohmann::json::object();
      }
      if (d.contains("params")) c.dataset.params.update(d["params"]);
      c.dataset.path = d.value("path", c.dataset.path);
    }
    if (j.contains("solver")) update_from_json(c.trainer.solver, j["solver"]);
    if (j.contains("trainer")) update_from_json(c.trainer, j["trainer"]);
    c.repeats = j.value("repeats", c.repeats);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.note = j.value("note", c.note);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

inline void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("config name must not be empty");
  if (repeats == 0) throw ConfigError("repeats must be at least 1");
  if (model.field != "deep" && model.field != "affine" && model.field != "closed_form")
    throw ConfigError("model.field must be deep, affine or closed_form");
  if (model.init != "auto" && model.init != "none" && model.init != "fixed" && model.init != "constant" &&
      model.init != "mlp")
    throw ConfigError("model.init must be auto, none, fixed, constant or mlp");
  if (model.readout != "auto" && model.readout != "real" && model.readout != "full")
    throw ConfigError("model.readout must be auto, real or full");
  if (model.field == "closed_form" && model.kind != ModelKind::sonode)
    throw ConfigError("closed-form fields are second order only");
  trainer.validate();
}

// ---------------------------------------------------------------------------
// Presets. Iteration budgets and learning rates are choices made for
// desk-scale runs.

namespace detail {

inline ExperimentConfig preset_base(const std::string& name, ModelKind kind, const std::string& dataset,
                                    std::size_t iters, double lr = 0.01) {
  ExperimentConfig c;
  c.name = name;
  c.model.kind = kind;
  c.model.order = kind == ModelKind::sonode ? 2 : 1;
  c.dataset.name = dataset;
  c.trainer.iters = iters;
  c.trainer.lr = lr;
  return c;
}

inline void add_family(std::map<std::string, ExperimentConfig>& out, const std::string& prefix,
                       const std::string& dataset, std::size_t iters, double lr, std::size_t aug,
                       const std::vector<ModelKind>& kinds, const std::string& note) {
  for (ModelKind k : kinds) {
    auto c = preset_base(prefix + "-" + to_string(k), k, dataset, iters, lr);
    if (k == ModelKind::anode) c.model.aug_dim = aug;
    c.note = note;
    out[c.name] = c;
  }
}

}  // namespace detail

inline std::map<std::string, ExperimentConfig> presets() {
  using detail::add_family;
  std::map<std::string, ExperimentConfig> p;
  const std::vector<ModelKind> three{ModelKind::node, ModelKind::anode, ModelKind::sonode};
  const std::vector<ModelKind> two{ModelKind::anode, ModelKind::sonode};

  add_family(p, "parity1d", "parity1d", 2000, 0.01, 1, three, "compact parity x -> -x from +/-1");
  add_family(p, "parity", "parity", 300, 0.01, 1, three, "parity in D dimensions, 50 train / 10 test points");
  add_family(p, "spheres", "spheres", 400, 0.01, 1, three, "nested 2-spheres, endpoint cross-entropy");
  for (const auto& n : {"spheres-node", "spheres-anode", "spheres-sonode"})
    p[n].trainer.loss = LossKind::cross_entropy_endpoint;

  add_family(p, "osc", "oscillators", 300, 0.01, 1, three, "30 damped oscillators, loss on position and velocity");
  for (const auto& n : {"osc-node", "osc-anode", "osc-sonode"}) p[n].trainer.loss = LossKind::mse_state_and_velocity;

  add_family(p, "sine", "sine", 300, 0.01, 1, two, "noisy sine, extrapolation over (10, 15]");
  for (const auto& n : {"sine-anode", "sine-sonode"}) p[n].dataset.params = {{"sigma", 0.5}};

  add_family(p, "exponential", "exponential", 300, 0.01, 1, three, "exp(0.1667 t) with a held-out middle section");
  add_family(p, "vdp", "vdp", 300, 0.01, 1, two, "forced Van der Pol, first 70 of 200 samples");
  for (const auto& n : {"vdp-anode", "vdp-sonode"}) p[n].model.time_dependent = true;

  add_family(p, "silverbox-fixture", "duffing_fixture", 300, 0.01, 1, two, "Duffing fixture with input forcing");
  for (const auto& n : {"silverbox-fixture-anode", "silverbox-fixture-sonode"}) {
    p[n].model.cubic_feature = true;
    p[n].model.forcing_feature = true;
  }
  {
    auto c = detail::preset_base("silverbox-fixture-closed-form", ModelKind::sonode, "duffing_fixture", 1000, 0.1);
    c.model.field = "closed_form";
    c.model.closed_form = Template::duffing;
    c.note = "Duffing template x'' = a x' + b x + c x^3 + d u(t) on the fixture";
    p[c.name] = c;
  }
  {
    auto c = detail::preset_base("osc-closed-form", ModelKind::sonode, "functions", 1000, 0.1);
    c.model.field = "closed_form";
    c.model.closed_form = Template::linear_osc;
    c.note = "linear template recovering -(w^2 + g^2) and -2 g";
    p[c.name] = c;
  }
  {
    auto c = detail::preset_base("twofunc-anode", ModelKind::anode, "functions", 500, 0.01);
    c.model.aug_dim = 1;
    c.note = "one shared ANODE(1) for e^{-g t} sin(w t) and e^{-g t} cos(w t)";
    p[c.name] = c;
    c.name = "threefunc-anode";
    c.dataset.params = {{"initial", {{0.0, 1.0}, {1.0, -0.1667}, {-0.5, 0.5}}}};
    c.note = "one shared ANODE(1) for three damped oscillators";
    p[c.name] = c;
    c.name = "degenerate-anode";
    c.dataset.params = {{"gamma", 0.0}, {"initial", {{0.0, 1.0}, {0.0, -1.0}}}};
    c.note = "+/- sin(t): equal initial positions, opposite velocities";
    p[c.name] = c;
  }
  {
    auto c = detail::preset_base("minaug-anode", ModelKind::anode, "ode2d", 500, 0.01);
    c.model.aug_dim = 1;
    c.note = "ANODE(1) on the two dimensional second-order system";
    p[c.name] = c;
    c.name = "interp-anode";
    c.model.aug_dim = 2;
    c.model.learn_aug_init = true;
    c.model.init = "fixed";
    c.note = "ANODE(2) on the two dimensional second-order system, a(t0) set to the true velocity";
    p[c.name] = c;
    auto s = detail::preset_base("interp-sonode", ModelKind::sonode, "ode2d", 500, 0.01);
    s.note = "SONODE on the two dimensional second-order system with the true initial velocity";
    p[s.name] = s;
  }
  {
    auto c = detail::preset_base("tonode", ModelKind::kth_order, "third_order", 1000, 0.01);
    c.model.order = 3;
    c.note = "third-order model on a synthetic third-order linear system";
    p[c.name] = c;
  }
  return p;
}

inline ExperimentConfig preset(const std::string& name) {
  const auto all = presets();
  const auto it = all.find(name);
  if (it == all.end()) throw ConfigError("unknown preset '" + name + "'");
  return it->second;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  ExperimentConfig c = j.contains("preset") ? preset(j["preset"].get<std::string>()) : ExperimentConfig{};
  update_from_json(c, j);
  return c;
}

}  // namespace sonode
