#ifndef EDAAN_COMMANDS_HPP_
#define EDAAN_COMMANDS_HPP_

// Command implementations behind the edaan executable: gen-data, train,
// translate, evaluate. Each validates the whole configuration before any
// file is written.

#include <exception>
#include <string>
#include <vector>

#include "edaan/config.hpp"
#include "edaan/eval.hpp"
#include "edaan/train.hpp"

namespace edaan {

enum ExitCode {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
  kExitCheckpoint = 5,
};
int exit_code_for(const std::exception& e);

// Both domains loaded and split with the same protocol.
struct PreparedData {
  DatasetSplits source;
  DatasetSplits target;
  TrainingData training;          // source train (labeled) + target train (unlabeled)
  std::vector<LabeledImage> source_test;  // source query + gallery
};
PreparedData prepare_data(const RunConfig& config);

// Writes <data.root>/source and <data.root>/target; returns image counts.
std::pair<int, int> cmd_gen_data(const RunConfig& config);

// Trains into config.run_dir(), writing the config snapshot first.
TrainResult cmd_train(const RunConfig& config, const std::string& resume_from = "");

// The final checkpoint of a run directory for the given mode.
std::string default_checkpoint(const RunConfig& config);

// One <stem>_grid.png per PNG in `input_dir`; `from` is the domain the
// inputs come from. Returns the number of grids written.
int cmd_translate(const RunConfig& config, const std::string& checkpoint, const std::string& input_dir,
                  const std::string& out_dir, Side from = Side::kSource);

// Writes <out_dir>/metrics.csv, query/gallery embeddings and ranking.png.
EvaluationReport cmd_evaluate(const RunConfig& config, const std::string& checkpoint, const std::string& out_dir);

// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace edaan

#endif  // EDAAN_COMMANDS_HPP_
