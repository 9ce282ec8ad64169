#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "edaan/commands.hpp"
#include "../support/fixtures.hpp"
#include "../support/suites.hpp"

namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "edaan");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return edaan::run_cli(static_cast<int>(argv.size()), argv.data());
}

// Writes the tiny configuration to <dir>/config.json.
std::string write_config(const std::string& dir, const edaan::RunConfig& c) {
  const std::string path = (fs::path(dir) / "config.json").string();
  std::ofstream(path) << edaan::run_config_to_json(c).dump(2);
  return path;
}

std::vector<std::string> metric_keys(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::vector<std::string> keys;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    keys.push_back(line.substr(0, a) + (b == a + 1 ? "" : "@" + line.substr(a + 1, b - a - 1)));
  }
  return keys;
}

}  // namespace

TEST_CASE("regeneration, checkpoint round-trip and repeated evaluation are byte-identical") {
  const auto r = suites::determinism(fixtures::scratch_dir("determinism"));
  INFO(r.summary());
  CHECK(r.ok());
}

TEST_CASE("full command sequence through the command line") {
  const std::string dir = fixtures::scratch_dir("cli_flow");
  const auto c = fixtures::tiny_config(dir, "flow");
  const std::string cfg = write_config(dir, c);
  REQUIRE(run({"gen-data", "-c", cfg}) == edaan::kExitOk);
  REQUIRE(run({"train", "-c", cfg}) == edaan::kExitOk);
  const fs::path run_dir = c.run_dir();
  CHECK(fs::exists(run_dir / "config.snapshot"));
  CHECK(fs::exists(run_dir / "losses.csv"));
  CHECK(fs::exists(run_dir / "ckpt_final.bin"));
  CHECK(fs::exists(run_dir / "samples" / "epoch_0002.png"));
  REQUIRE(run({"evaluate", "--run", run_dir.string()}) == edaan::kExitOk);
  CHECK(metric_keys(run_dir / "eval" / "metrics.csv") ==
        std::vector<std::string>{"cmc@1", "cmc@5", "cmc@10", "map", "attn_iou", "fg_mae"});
  CHECK(fs::exists(run_dir / "eval" / "ranking.png"));
  CHECK(fs::exists(run_dir / "eval" / "query_embeddings.csv"));
  const fs::path out = fs::path(dir) / "grids";
  CHECK(run({"translate", "-c", cfg, "--checkpoint", (run_dir / "ckpt_final.bin").string(), "--input",
             (fs::path(c.data.root) / "target" / "images").string(), "--out", out.string(), "--from", "target"}) ==
        edaan::kExitOk);
  CHECK(!fs::is_empty(out));
}

TEST_CASE("no-attention runs report no attention IoU") {
  const std::string dir = fixtures::scratch_dir("cli_noattn");
  auto c = fixtures::tiny_config(dir, "noattn");
  c.train.attention_enabled = false;
  c.train.epochs = 1;
  const std::string cfg = write_config(dir, c);
  REQUIRE(run({"gen-data", "-c", cfg}) == edaan::kExitOk);
  REQUIRE(run({"train", "-c", cfg}) == edaan::kExitOk);
  REQUIRE(run({"evaluate", "-c", cfg}) == edaan::kExitOk);
  const auto keys = metric_keys(fs::path(c.run_dir()) / "eval" / "metrics.csv");
  CHECK(std::find(keys.begin(), keys.end(), "attn_iou") == keys.end());
  CHECK(std::find(keys.begin(), keys.end(), "fg_mae") != keys.end());
}

TEST_CASE("exit codes distinguish failure classes") {
  const std::string dir = fixtures::scratch_dir("cli_codes");
  const auto c = fixtures::tiny_config(dir, "codes");
  const std::string cfg = write_config(dir, c);
  CHECK(run({"train", "-c", (fs::path(dir) / "missing.json").string()}) == edaan::kExitConfig);
  CHECK(run({"train", "-c", cfg, "--set", "train.epochz=3"}) == edaan::kExitConfig);
  CHECK(run({"bogus"}) == edaan::kExitConfig);
  // Dataset not generated yet.
  CHECK(run({"train", "-c", cfg}) == edaan::kExitData);
  CHECK_FALSE(fs::exists(fs::path(c.run_dir()) / "ckpt_final.bin"));
  REQUIRE(run({"gen-data", "-c", cfg}) == edaan::kExitOk);
  CHECK(run({"evaluate", "-c", cfg, "--checkpoint", (fs::path(dir) / "none.bin").string()}) ==
        edaan::kExitCheckpoint);
  std::ofstream(fs::path(dir) / "garbage.bin") << "EDAANCKP but not really";
  CHECK(run({"evaluate", "-c", cfg, "--checkpoint", (fs::path(dir) / "garbage.bin").string()}) ==
        edaan::kExitCheckpoint);
  CHECK(edaan::exit_code_for(edaan::NumericError("cycle", "boom")) == edaan::kExitNumeric);
  CHECK(edaan::exit_code_for(std::runtime_error("x")) == edaan::kExitOther);
}
