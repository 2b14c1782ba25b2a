#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "sonode/config.hpp"

using namespace sonode;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const auto dir = std::filesystem::temp_directory_path() / "sonode_test_config";
  std::filesystem::create_directories(dir);
  const auto p = (dir / name).string();
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

}  // namespace

TEST(Config, EveryPresetValidatesAndRoundTrips) {
  const auto all = presets();
  EXPECT_GE(all.size(), 30u);
  for (const auto& [name, cfg] : all) {
    EXPECT_EQ(cfg.name, name);
    EXPECT_NO_THROW(cfg.validate()) << name;
    ExperimentConfig back;
    update_from_json(back, to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg)) << name;
  }
}

TEST(Config, PresetLookup) {
  EXPECT_EQ(preset("parity1d-sonode").trainer.iters, 2000u);
  EXPECT_EQ(preset("spheres-node").trainer.loss, LossKind::cross_entropy_endpoint);
  EXPECT_EQ(preset("osc-anode").model.aug_dim, 1u);
  EXPECT_EQ(preset("tonode").model.order, 3u);
  EXPECT_THROW(preset("no-such-preset"), ConfigError);
}

TEST(Config, OverlayKeepsUnspecifiedValues) {
  ExperimentConfig c = preset("sine-sonode");
  update_from_json(c, nlohmann::json{{"trainer", {{"iters", 7}}}, {"dataset", {{"params", {{"seed_offset", 1}}}}}});
  EXPECT_EQ(c.trainer.iters, 7u);
  EXPECT_DOUBLE_EQ(c.trainer.lr, 0.01);
  EXPECT_DOUBLE_EQ(c.dataset.params["sigma"].get<double>(), 0.5);
  update_from_json(c, nlohmann::json{{"dataset", {{"name", "exponential"}}}});
  EXPECT_TRUE(c.dataset.params.empty());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  ExperimentConfig c;
  EXPECT_THROW(update_from_json(c, nlohmann::json{{"iterations", 3}}), ConfigError);
  EXPECT_THROW(update_from_json(c, nlohmann::json{{"model", {{"depth", 3}}}}), ConfigError);
  EXPECT_THROW(update_from_json(c, nlohmann::json{{"trainer", {{"engine", "magic"}}}}), ConfigError);
  EXPECT_THROW(update_from_json(c, nlohmann::json{{"trainer", {{"iters", "many"}}}}), ConfigError);
  EXPECT_THROW(update_from_json(c, nlohmann::json{{"solver", {{"method", "euler"}}}}), ConfigError);
  EXPECT_THROW(update_from_json(c, nlohmann::json{{"model", 3}}), ConfigError);
}

TEST(Config, ValidateCatchesInconsistentSettings) {
  ExperimentConfig c;
  c.repeats = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.model.field = "wide";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.model.init = "random";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.model.readout = "half";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.model.kind = ModelKind::anode;
  c.model.field = "closed_form";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.trainer.lr = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, LoadFromFileWithPreset) {
  const auto p = write_temp("cfg.json", R"({"preset": "osc-sonode", "name": "mine", "trainer": {"iters": 11}})");
  const ExperimentConfig c = load_config(p);
  EXPECT_EQ(c.name, "mine");
  EXPECT_EQ(c.trainer.iters, 11u);
  EXPECT_EQ(c.dataset.name, "oscillators");
  EXPECT_THROW(load_config(write_temp("bad.json", "{oops")), ConfigError);
  EXPECT_THROW(load_config(write_temp("badpreset.json", R"({"preset": "zzz"})")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/cfg.json"), IoError);
}

TEST(Config, MethodNames) {
  EXPECT_EQ(method_from_string(to_string(Method::rk4)), Method::rk4);
  EXPECT_EQ(method_from_string(to_string(Method::dopri5)), Method::dopri5);
  EXPECT_THROW(method_from_string("euler"), ConfigError);
}
