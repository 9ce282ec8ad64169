#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "edaan/checkpoint.hpp"
#include "edaan/commands.hpp"
#include "edaan/train.hpp"
#include "../support/fixtures.hpp"
#include "../support/suites.hpp"

namespace fs = std::filesystem;
using edaan::TrainConfig;
using edaan::TrainMode;

namespace {

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

// Trainable values only; batch-norm running statistics move on every forward pass.
std::vector<float> flatten(const edaan::ParameterStore<float>& store) {
  std::vector<float> out;
  for (const auto& p : store.all())
    if (p.trainable) out.insert(out.end(), p.value.vec().begin(), p.value.vec().end());
  return out;
}

std::vector<std::pair<std::string, double>> terms(const edaan::LossReport& r) { return edaan::report_terms(r); }

}  // namespace

TEST_CASE("learning-rate schedule, phase thresholds and attention freeze") {
  const auto r = suites::schedule_and_phases(fixtures::scratch_dir("schedule"));
  INFO(r.summary());
  CHECK(r.ok());
}

TEST_CASE("lr schedule is continuous at the decay start and rejects out-of-range epochs") {
  TrainConfig c;
  c.epochs = 60;
  CHECK(c.decay_start() == 30);
  CHECK(edaan::lr_schedule(30, c) == 2e-4);
  CHECK(edaan::lr_schedule(60, c) == 0.0);
  CHECK(edaan::lr_schedule(45, c) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK_THROWS_AS(edaan::lr_schedule(-1, c), edaan::ConfigError);
  CHECK_THROWS_AS(edaan::lr_schedule(61, c), edaan::ConfigError);
}

TEST_CASE("phase flags switch exactly at their thresholds") {
  TrainConfig c;
  c.epochs = 60;
  CHECK(c.attention_epochs() == 9);
  CHECK_FALSE(edaan::phase_for_epoch(8, c).attention_frozen);
  CHECK(edaan::phase_for_epoch(9, c).attention_frozen);
  CHECK_FALSE(edaan::phase_for_epoch(8, c).disc_masked);
  CHECK(edaan::phase_for_epoch(9, c).disc_masked);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.attention_train_epochs = 0;
  CHECK_THROWS_AS(c.validate(), edaan::ConfigError);
  c = TrainConfig{};
  c.attention_train_epochs = 61;
  CHECK_THROWS_AS(c.validate(), edaan::ConfigError);
  c = TrainConfig{};
  c.decay_start_epoch = 60;
  CHECK_THROWS_AS(c.validate(), edaan::ConfigError);
  c = TrainConfig{};
  c.lr = 0;
  CHECK_THROWS_AS(c.validate(), edaan::ConfigError);
}

TEST_CASE("first steps report finite losses for every component") {
  const std::string dir = fixtures::scratch_dir("smoke");
  auto rc = fixtures::tiny_config(dir);
  edaan::cmd_gen_data(rc);
  const auto data = edaan::prepare_data(rc);
  edaan::Trainer t(rc.train, data.training, edaan::Stage::kJoint);
  t.initialize();
  const auto rep = t.next_step();
  const auto list = terms(rep);
  CHECK(list.size() == 7);
  for (const auto& [name, v] : list) {
    INFO(name);
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("with only adversarial weights the re-ID heads receive no updates") {
  const std::string dir = fixtures::scratch_dir("reachability");
  auto rc = fixtures::tiny_config(dir);
  rc.train.loss.lambda_attn = rc.train.loss.lambda_quartet = rc.train.loss.lambda_id = rc.train.loss.lambda_cycle = 0;
  edaan::cmd_gen_data(rc);
  const auto data = edaan::prepare_data(rc);
  edaan::Trainer t(rc.train, data.training, edaan::Stage::kJoint);
  t.initialize();
  auto& m = t.state().models;
  const auto emb = flatten(m.embedding.params()), cls = flatten(m.classifier.params());
  const auto dec = flatten(m.source.decoder.params());
  for (int s = 0; s < 3; ++s) t.next_step();
  CHECK(flatten(m.embedding.params()) == emb);
  CHECK(flatten(m.classifier.params()) == cls);
  CHECK(flatten(m.source.decoder.params()) != dec);
}

TEST_CASE("direct transfer logs no adversarial terms and writes no samples") {
  const std::string dir = fixtures::scratch_dir("direct");
  auto rc = fixtures::tiny_config(dir, "direct");
  rc.train.mode = TrainMode::kDirectTransfer;
  edaan::cmd_gen_data(rc);
  edaan::cmd_train(rc);
  const std::string header = first_line(fs::path(rc.run_dir()) / "losses.csv");
  CHECK(header.find("gan_s") == std::string::npos);
  CHECK(header.find("gan_t") == std::string::npos);
  CHECK(header.find("cycle") == std::string::npos);
  CHECK(header.find("id") != std::string::npos);
  CHECK_FALSE(fs::exists(fs::path(rc.run_dir()) / "samples"));
}

TEST_CASE("two-stage training emits two checkpoint series and leaves translation untouched in stage two") {
  const std::string dir = fixtures::scratch_dir("daan");
  auto rc = fixtures::tiny_config(dir, "daan");
  rc.train.mode = TrainMode::kDaanTwoStage;
  edaan::cmd_gen_data(rc);
  const auto result = edaan::cmd_train(rc);
  REQUIRE(result.stages.size() == 2);
  const fs::path s1 = fs::path(rc.run_dir()) / "stage1_translation", s2 = fs::path(rc.run_dir()) / "stage2_reid";
  for (const auto& d : {s1, s2}) {
    CHECK(fs::exists(d / "ckpt_epoch_0001.bin"));
    CHECK(fs::exists(d / "ckpt_final.bin"));
    CHECK(fs::exists(d / "losses.csv"));
  }
  CHECK(first_line(s1 / "losses.csv").find("gan_s") != std::string::npos);
  CHECK(first_line(s2 / "losses.csv").find("gan_s") == std::string::npos);
  const auto a = edaan::read_checkpoint((s1 / "ckpt_final.bin").string());
  const auto b = edaan::read_checkpoint((s2 / "ckpt_final.bin").string());
  int compared = 0;
  for (const auto& [name, t] : a.arrays) {
    if (name.rfind("param/source.", 0) != 0 && name.rfind("param/target.", 0) != 0) continue;
    INFO(name);
    CHECK(b.array(name).vec() == t.vec());
    ++compared;
  }
  CHECK(compared > 0);
}

TEST_CASE("resumed training reproduces the uninterrupted run") {
  const std::string dir = fixtures::scratch_dir("resume");
  auto rc = fixtures::tiny_config(dir, "full");
  rc.train.epochs = 3;
  edaan::cmd_gen_data(rc);
  const auto full = edaan::cmd_train(rc);
  const auto& full_losses = full.stages.back().losses;

  auto rc2 = rc;
  rc2.output.run_name = "resumed";
  const auto resumed =
      edaan::cmd_train(rc2, (fs::path(rc.run_dir()) / "ckpt_epoch_0001.bin").string());
  const auto& tail = resumed.stages.back().losses;
  REQUIRE(tail.size() >= 5);
  REQUIRE(full_losses.size() > tail.size());
  const std::size_t offset = full_losses.size() - tail.size();
  for (std::size_t s = 0; s < 5; ++s) {
    const auto a = terms(full_losses[offset + s]), b = terms(tail[s]);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      INFO("step " << offset + s + 1 << " term " << a[k].first);
      CHECK(std::fabs(a[k].second - b[k].second) <= 1e-4);
    }
  }
}

TEST_CASE("resuming keeps earlier log rows and appends without duplicates") {
  const std::string dir = fixtures::scratch_dir("resume_log");
  auto rc = fixtures::tiny_config(dir, "log");
  rc.train.epochs = 2;
  edaan::cmd_gen_data(rc);
  edaan::cmd_train(rc);
  const fs::path csv = fs::path(rc.run_dir()) / "losses.csv";
  const std::string before = fixtures::read_bytes(csv);
  edaan::cmd_train(rc, (fs::path(rc.run_dir()) / "ckpt_epoch_0001.bin").string());
  std::ifstream in(csv);
  std::string line;
  std::vector<long> steps;
  std::getline(in, line);
  while (std::getline(in, line)) steps.push_back(std::stol(line.substr(0, line.find(','))));
  for (std::size_t i = 0; i < steps.size(); ++i) CHECK(steps[i] == static_cast<long>(i + 1));
  CHECK(std::count(before.begin(), before.end(), '\n') == static_cast<long>(steps.size() + 1));
}

TEST_CASE("invalid data surfaces before any training step") {
  const std::string dir = fixtures::scratch_dir("bad_data");
  auto rc = fixtures::tiny_config(dir);
  edaan::TrainingData empty;
  bool stepped = false;
  edaan::TrainHooks hooks;
  hooks.on_step = [&](const edaan::TrainerState&, const edaan::LossReport&) { stepped = true; };
  CHECK_THROWS_AS(edaan::train(rc.train, empty, {}, hooks), edaan::DataError);
  CHECK_FALSE(stepped);
}
