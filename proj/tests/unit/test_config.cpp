#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "edaan/config.hpp"
#include "../support/fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json default_json() { return edaan::run_config_to_json(edaan::RunConfig{}); }

}  // namespace

TEST_CASE("defaults round-trip through JSON") {
  const json j = default_json();
  const auto back = edaan::run_config_from_json(j);
  CHECK(edaan::run_config_to_json(back) == j);
  CHECK(j.at("train").at("epochs") == 60);
  CHECK(j.at("train").at("batch_size") == 16);
  CHECK(j.at("train").at("lr") == 2e-4);
  CHECK(j.at("loss").at("lambda_attn") == 10.0);
  CHECK(j.at("network").at("embedding_dim") == 128);
}

TEST_CASE("unknown keys are rejected with their full path") {
  json j = default_json();
  j["data"]["synthetic"]["num_identitys"] = 12;
  CHECK_THROWS_WITH_AS(edaan::run_config_from_json(j), doctest::Contains("data.synthetic.num_identitys"),
                       edaan::ConfigError);
  json top = default_json();
  top["extra"] = 1;
  CHECK_THROWS_WITH_AS(edaan::run_config_from_json(top), doctest::Contains("extra"), edaan::ConfigError);
}

TEST_CASE("schema version is required and checked") {
  json j = default_json();
  j["schema_version"] = 2;
  CHECK_THROWS_AS(edaan::run_config_from_json(j), edaan::ConfigError);
  j.erase("schema_version");
  CHECK_THROWS_AS(edaan::run_config_from_json(j), edaan::ConfigError);
}

TEST_CASE("partial configs keep defaults for absent keys") {
  const auto c = edaan::parse_run_config(R"({"schema_version": 1, "train": {"epochs": 20}})");
  CHECK(c.train.epochs == 20);
  CHECK(c.train.decay_start() == 10);
  CHECK(c.train.attention_epochs() == 3);
  CHECK(c.train.batch_size == 16);
}

TEST_CASE("type and enum errors are configuration errors") {
  CHECK_THROWS_AS(edaan::parse_run_config(R"({"schema_version": 1, "train": {"epochs": "many"}})"),
                  edaan::ConfigError);
  CHECK_THROWS_AS(edaan::parse_run_config(R"({"schema_version": 1, "train": {"mode": "cyclegan"}})"),
                  edaan::ConfigError);
  CHECK_THROWS_AS(edaan::parse_run_config("{not json"), edaan::ConfigError);
}

TEST_CASE("overrides parse JSON values and fall back to strings") {
  const auto c = edaan::parse_run_config(R"({"schema_version": 1})",
                                         {"train.epochs=12", "train.mode=daan_two_stage", "output.run_name=abc",
                                          "eval.ranks=[1,3]", "train.attention_enabled=false"});
  CHECK(c.train.epochs == 12);
  CHECK(c.train.mode == edaan::TrainMode::kDaanTwoStage);
  CHECK(c.output.run_name == "abc");
  CHECK(c.eval.ranks == std::vector<int>{1, 3});
  CHECK_FALSE(c.train.attention_enabled);
  CHECK_THROWS_AS(edaan::parse_run_config(R"({"schema_version": 1})", {"train.epochs"}), edaan::ConfigError);
  CHECK_THROWS_AS(edaan::parse_run_config(R"({"schema_version": 1})", {"train.epoch=3"}), edaan::ConfigError);
}

TEST_CASE("run root can be redirected by environment") {
  ::setenv(edaan::kRunRootEnv, "/tmp/elsewhere", 1);
  const auto c = edaan::parse_run_config(R"({"schema_version": 1})");
  ::unsetenv(edaan::kRunRootEnv);
  CHECK(c.output.run_root == "/tmp/elsewhere");
  CHECK(c.run_dir() == "/tmp/elsewhere/default");
  const auto d = edaan::parse_run_config(R"({"schema_version": 1})");
  CHECK(d.output.run_root == "runs");
}

TEST_CASE("cross-section constraints") {
  CHECK_THROWS_AS(edaan::parse_run_config(R"({"schema_version": 1, "network": {"image_height": 32}})"),
                  edaan::ConfigError);
  CHECK_THROWS_AS(edaan::parse_run_config(R"({"schema_version": 1, "output": {"run_name": "a/b"}})"),
                  edaan::ConfigError);
  CHECK_THROWS_AS(edaan::parse_run_config(R"({"schema_version": 1, "loss": {"lambda_id": -1}})"),
                  edaan::ConfigError);
}

TEST_CASE("train sections round-trip for checkpoints") {
  edaan::TrainConfig t;
  t.epochs = 7;
  t.attention_train_epochs = 2;
  t.loss.margin_form = edaan::MarginForm::kPaperLiteral;
  const auto back = edaan::train_config_from_json(edaan::train_config_to_json(t));
  CHECK(edaan::train_config_to_json(back) == edaan::train_config_to_json(t));
  CHECK(back.attention_epochs() == 2);
}

TEST_CASE("shipped configs load") {
  for (const char* name : {"default.json", "desk.json"}) {
    INFO(name);
    const auto c = edaan::load_run_config((fs::path(EDAAN_SOURCE_DIR) / "configs" / name).string());
    CHECK(c.train.epochs == 60);
    CHECK(c.data.synthetic.num_identities == 12);
    CHECK(c.data.synthetic.height == 64);
    CHECK(c.data.synthetic.width == 32);
  }
  CHECK_THROWS_AS(edaan::load_run_config("/nonexistent/config.json"), edaan::ConfigError);
}
