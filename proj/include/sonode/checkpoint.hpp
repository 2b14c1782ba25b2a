#pragma once

// JSON model checkpoints.
//
// {
//   "format": "sonode-checkpoint/1",
//   "spec":   {kind, d, aug_dim, order, time_dependent, learn_aug_init,
//              cubic_feature, forcing_feature},
//   "field":  {"type": "mlp", "sizes": [...], "hidden_activation", "output_activation"}
//           | {"type": "closed_form", "template", "dim", "names": [...]},
//   "init":   {"kind": "none"|"fixed"|"constant"|"mlp", "sizes"?, "fixed"?, "fixed_shape"?},
//   "state":  {"identity": bool, "sizes"?},
//   "forcing": {...},
//   "param_layout": {"theta_f": n_f, "theta_g": n_g, "theta_s": n_s},
//   "params": [theta_f..., theta_g..., theta_s...]
// }
// MLP parameters are flattened layer by layer, weights (row-major, out x in)
// before biases. Closed-form coefficients follow "names".

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sonode/closed_form.hpp"
#include "sonode/errors.hpp"
#include "sonode/mlp.hpp"
#include "sonode/model.hpp"

namespace sonode {

inline constexpr const char* kCheckpointFormat = "sonode-checkpoint/1";

namespace detail {

inline nlohmann::json mlp_shape_json(const MlpParams& p) {
  std::vector<std::size_t> sizes{p.in_dim()};
  for (const auto& l : p.layers) sizes.push_back(l.weight.rows());
  return {{"sizes", sizes},
          {"hidden_activation", to_string(p.hidden_activation)},
          {"output_activation", to_string(p.output_activation)}};
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
  return MlpParams::zeros(j.at("sizes").get<std::vector<std::size_t>>(),
                          activation_from_string(j.at("hidden_activation").get<std::string>()),
                          activation_from_string(j.at("output_activation").get<std::string>()));
}

inline nlohmann::json forcing_json(const Forcing& f) {
  switch (f.kind) {
    case Forcing::Kind::none: return {{"kind", "none"}};
    case Forcing::Kind::cosine:
    case Forcing::Kind::multisine:
      return {{"kind", f.kind == Forcing::Kind::cosine ? "cosine" : "multisine"},
              {"amplitudes", f.amplitudes},
              {"omegas", f.omegas},
              {"phases", f.phases}};
    case Forcing::Kind::table: return {{"kind", "table"}, {"times", f.times}, {"values", f.values}};
  }
  return {{"kind", "none"}};
}

inline Forcing forcing_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "none") return {};
  if (kind == "cosine" || kind == "multisine") {
    Forcing f = Forcing::multisine(j.at("amplitudes").get<std::vector<double>>(), j.at("omegas").get<std::vector<double>>(),
                                   j.at("phases").get<std::vector<double>>());
    if (kind == "cosine") f.kind = Forcing::Kind::cosine;
    return f;
  }
  if (kind == "table") return Forcing::table(j.at("times").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
  throw SchemaError("unknown forcing kind '" + kind + "'");
}

}  // namespace detail

inline nlohmann::json model_to_json(const Model& m) {
  using nlohmann::json;
  const auto& s = m.spec();
  json j;
  j["format"] = kCheckpointFormat;
  j["spec"] = {{"kind", to_string(s.kind)},          {"d", s.d},
               {"aug_dim", s.D},                      {"order", s.k},
               {"time_dependent", s.time_dependent},  {"learn_aug_init", s.learn_aug_init},
               {"cubic_feature", s.cubic_feature},    {"forcing_feature", s.forcing_feature}};
  if (m.has_closed_form()) {
    const auto& cf = m.closed_form();
    j["field"] = {{"type", "closed_form"}, {"template", to_string(cf.kind())}, {"dim", cf.dim()}, {"names", cf.names()},
                  {"forcing", detail::forcing_json(cf.forcing())}};
  } else {
    j["field"] = detail::mlp_shape_json(m.field_mlp());
    j["field"]["type"] = "mlp";
  }
  const auto& g = m.init_map();
  j["init"] = {{"kind", to_string(g.kind)}};
  if (g.kind == InitKind::mlp) j["init"].update(detail::mlp_shape_json(g.mlp));
  if (g.kind == InitKind::constant) j["init"]["size"] = g.constant.size();
  if (g.kind == InitKind::fixed) {
    j["init"]["fixed"] = g.fixed.values();
    j["init"]["fixed_shape"] = g.fixed.shape();
  }
  const auto& st = m.state_map();
  j["state"] = {{"identity", st.identity}};
  if (!st.identity) j["state"].update(detail::mlp_shape_json(st.mlp));
  j["forcing"] = detail::forcing_json(m.forcing());
  j["param_layout"] = {{"theta_f", m.theta_f_count()}, {"theta_g", m.theta_g_count()}, {"theta_s", m.theta_s_count()}};
  j["params"] = m.params();
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw SchemaError("unsupported checkpoint format '" + j.at("format").get<std::string>() + "'");
    const auto& js = j.at("spec");
    ModelSpec s;
    s.kind = model_kind_from_string(js.at("kind").get<std::string>());
    s.d = js.at("d").get<std::size_t>();
    s.D = js.at("aug_dim").get<std::size_t>();
    s.k = js.at("order").get<std::size_t>();
    s.time_dependent = js.at("time_dependent").get<bool>();
    s.learn_aug_init = js.at("learn_aug_init").get<bool>();
    s.cubic_feature = js.value("cubic_feature", false);
    s.forcing_feature = js.value("forcing_feature", false);

    const auto& jf = j.at("field");
    Model::Head head;
    if (jf.at("type").get<std::string>() == "closed_form") {
      head = ClosedForm::zeros(template_from_string(jf.at("template").get<std::string>()), jf.at("dim").get<std::size_t>(),
                               detail::forcing_from_json(jf.at("forcing")));
    } else {
      head = detail::mlp_from_json(jf);
    }
    InitMap g;
    const auto& jg = j.at("init");
    g.kind = init_kind_from_string(jg.at("kind").get<std::string>());
    if (g.kind == InitKind::mlp) g.mlp = detail::mlp_from_json(jg);
    if (g.kind == InitKind::constant) g.constant.assign(jg.at("size").get<std::size_t>(), 0.0);
    if (g.kind == InitKind::fixed)
      g.fixed = Tensor(jg.at("fixed_shape").get<std::vector<std::size_t>>(), jg.at("fixed").get<std::vector<double>>());
    StateMap st;
    st.identity = j.at("state").at("identity").get<bool>();
    if (!st.identity) st.mlp = detail::mlp_from_json(j.at("state"));
    Model m(s, std::move(head), std::move(g), std::move(st), detail::forcing_from_json(j.at("forcing")));
    const auto& lay = j.at("param_layout");
    if (lay.at("theta_f").get<std::size_t>() != m.theta_f_count() ||
        lay.at("theta_g").get<std::size_t>() != m.theta_g_count() ||
        lay.at("theta_s").get<std::size_t>() != m.theta_s_count())
      throw SchemaError("checkpoint param_layout does not match its architecture");
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != m.param_count())
      throw SchemaError("checkpoint has " + std::to_string(params.size()) + " parameters, architecture needs " +
                        std::to_string(m.param_count()));
    m.set_params(params);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << model_to_json(m).dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace sonode
