#ifndef EDAAN_TESTS_FIXTURES_HPP_
#define EDAAN_TESTS_FIXTURES_HPP_

// Small configurations and file helpers shared by the tests.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "edaan/config.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Five identities at 32 x 16 with the smallest valid networks; trains in
// seconds.
inline edaan::RunConfig tiny_config(const std::string& work_dir, const std::string& run_name = "tiny") {
  edaan::RunConfig c;
  c.data.root = (fs::path(work_dir) / "data").string();
  c.data.synthetic.num_identities = 5;
  c.data.synthetic.images_per_identity_per_domain = 6;
  c.data.synthetic.height = 32;
  c.data.synthetic.width = 16;
  c.protocol.train_fraction = 0.6;
  c.train.network.base_channels = 8;
  c.train.network.num_residual_blocks = 0;
  c.train.network.image_height = 32;
  c.train.network.image_width = 16;
  c.train.epochs = 2;
  c.train.batch_size = 8;
  c.train.checkpoint_interval = 1;
  c.train.sample_images = 2;
  c.eval.ranking_queries = 2;
  c.output.run_root = (fs::path(work_dir) / "runs").string();
  c.output.run_name = run_name;
  c.validate();
  return c;
}

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Relative path -> contents of every regular file below `root`.
inline std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_bytes(e.path());
  return out;
}

// A fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("edaan_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace fixtures

#endif  // EDAAN_TESTS_FIXTURES_HPP_
