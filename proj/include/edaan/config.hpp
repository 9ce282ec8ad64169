#ifndef EDAAN_CONFIG_HPP_
#define EDAAN_CONFIG_HPP_

// Versioned JSON run configuration. Unknown keys are rejected with their
// full key path; absent keys keep the defaults of the owning structs.

#include <string>
#include <vector>

#include "json.hpp"

#include "edaan/data.hpp"
#include "edaan/eval.hpp"
#include "edaan/train.hpp"

namespace edaan {

inline constexpr int kConfigSchemaVersion = 1;
// Overrides output.run_root when set.
inline constexpr const char* kRunRootEnv = "EDAAN_RUN_ROOT";

enum class DataKind { kSynthetic, kDirectory };

struct DataConfig {
  DataKind kind = DataKind::kSynthetic;
  // Synthetic datasets live in <root>/source and <root>/target.
  std::string root = "data/synthetic";
  SyntheticSpec synthetic;
  // Directory datasets.
  std::string source_dir;
  std::string target_dir;
  DirectoryLayout layout = DirectoryLayout::kFilename;

  std::string source_path() const;
  std::string target_path() const;
};

struct OutputConfig {
  std::string run_root = "runs";
  std::string run_name = "default";
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  DataConfig data;
  ProtocolConfig protocol;
  TrainConfig train;
  EvalConfig eval;
  OutputConfig output;

  // Validates every section and cross-section constraint.
  void validate() const;
  std::string run_dir() const;
};

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

// train + network + loss sections (what a checkpoint needs to rebuild itself).
nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Applies one "a.b.c=value" override; the value is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

// File, then EDAAN_RUN_ROOT, then overrides; fully validated.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides = {});

}  // namespace edaan

#endif  // EDAAN_CONFIG_HPP_
