#ifndef EDAAN_TRAIN_HPP_
#define EDAAN_TRAIN_HPP_

// Joint translation + re-ID training with the epoch schedules (lr decay,
// attention freeze, discriminator input switch), the two-stage and direct
// transfer ablations, checkpointing and loss logging.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "edaan/checkpoint.hpp"
#include "edaan/data.hpp"
#include "edaan/losses.hpp"
#include "edaan/model.hpp"
#include "edaan/optim.hpp"
#include "edaan/sampler.hpp"

namespace edaan {

enum class TrainMode { kEdaanEndToEnd, kDaanTwoStage, kDirectTransfer };
const char* mode_name(TrainMode mode);
TrainMode parse_mode(const std::string& s);

struct TrainConfig {
  TrainMode mode = TrainMode::kEdaanEndToEnd;
  bool attention_enabled = true;
  int epochs = 60;
  double lr = 2e-4;
  int batch_size = 16;
  // Derived from `epochs` when unset: epochs / 2, and 15% of epochs for the
  // attention and whole-image discriminator phases.
  std::optional<int> decay_start_epoch;
  std::optional<int> attention_train_epochs;
  std::optional<int> disc_whole_image_epochs;
  std::uint64_t seed = 0;
  LossWeights loss;
  NetworkConfig network;
  AdamConfig adam;
  int checkpoint_interval = 10;  // epochs; 0 keeps only the final checkpoint
  bool translated_reid = true;    // re-ID losses also see translated source images
  bool cycle_on_composed = false;
  bool disc_on_composed = true;
  int sample_images = 4;          // rows of each sample translation grid

  int decay_start() const;
  int attention_epochs() const;
  int disc_whole_epochs() const;
  void validate() const;
};

// lr before decay_start, then linear to 0 at epoch == epochs.
double lr_schedule(int epoch, const TrainConfig& config);

struct PhaseFlags {
  bool attention_frozen = false;
  bool disc_masked = false;
  bool operator==(const PhaseFlags&) const = default;
};
PhaseFlags phase_for_epoch(int epoch, const TrainConfig& config);

enum class Stage { kJoint, kTranslation, kReid };
const char* stage_name(Stage s);

struct TrainerState {
  DomainModelSet<float> models;
  Adam<float> optimizer;
  Stage stage = Stage::kJoint;
  int epoch = 0;   // epochs completed in the current stage
  long step = 0;   // steps completed in the current stage
  PhaseFlags phase;
  std::mt19937_64 rng;
};

struct TrainingData {
  std::vector<LabeledImage> source;  // labeled source-domain training images
  std::vector<LabeledImage> target;  // unlabeled target-domain training images
};

struct DiscriminatorInputEvent {
  int epoch = 0;
  long step = 0;
  bool masked = false;  // real inputs are background-masked
};

struct TrainHooks {
  std::function<void(const DiscriminatorInputEvent&)> on_discriminator_input;
  std::function<void(const TrainerState&)> on_epoch_end;
  std::function<void(const TrainerState&, const LossReport&)> on_step;
};

// One stage of training over fixed data.
class Trainer {
 public:
  Trainer(const TrainConfig& config, const TrainingData& data, Stage stage, TrainHooks hooks = {});

  // Fresh models and optimizer for this stage (seeded from the config).
  void initialize();
  // Continue from a previously saved state of the same stage.
  void restore(TrainerState state);

  TrainerState& state() { return state_; }
  const TrainerState& state() const { return state_; }
  Stage stage() const { return stage_; }
  int num_classes() const { return num_classes_; }
  int steps_per_epoch() const;

  // Updates phase flags and freezes/unfreezes the attention nets.
  PhaseFlags apply_phase_schedule(int epoch);

  // Joint or translation stage: one discriminator update then one update of
  // every other network. `quartets` may be empty in the translation stage.
  LossReport training_step(const QuartetBatch& quartets, const DomainPairBatch& domain_batch);
  // Re-ID stage (direct transfer and second DAAN stage).
  LossReport reid_step(const QuartetBatch& quartets);
  // Samples batches from the state rng and runs one step of this stage.
  LossReport next_step();

  // Images (translated source training set) fed to the re-ID losses in the
  // second DAAN stage.
  void set_translated_source(Tensor<float> images) { translated_source_ = std::move(images); }

 private:
  void check_finite_grads(const NamedStores<float>& stores, const char* what) const;

  TrainConfig config_;
  const TrainingData* data_;
  Stage stage_;
  TrainHooks hooks_;
  TrainerState state_;
  IdentityIndex index_;
  std::vector<int> labels_;  // source labels remapped to [0, num_classes)
  int num_classes_ = 0;
  Tensor<float> translated_source_;
};

// Network groups by role.
NamedStores<float> discriminator_stores(DomainModelSet<float>& models);
NamedStores<float> attention_stores(DomainModelSet<float>& models);
NamedStores<float> reid_stores(DomainModelSet<float>& models);

CheckpointData state_to_checkpoint(const TrainerState& state, const TrainConfig& config);
// Rebuilds the models from the header's configuration and restores every
// array. Throws CheckpointError on any mismatch.
TrainerState state_from_checkpoint(const CheckpointData& data, TrainConfig* config = nullptr);
void save_checkpoint(const TrainerState& state, const TrainConfig& config, const std::string& path);
TrainerState load_checkpoint(const std::string& path, TrainConfig* config = nullptr);

struct TrainOutput {
  std::string run_dir;          // empty: nothing written
  std::string config_snapshot;  // written to <run_dir>/config.snapshot when non-empty
  std::string resume_from;      // checkpoint to continue from
};

struct StageResult {
  Stage stage = Stage::kJoint;
  std::string dir;
  std::vector<LossReport> losses;
  std::vector<std::string> checkpoints;
};

struct TrainResult {
  TrainerState state;
  std::vector<StageResult> stages;
  int num_classes = 0;
};

// Validates everything, then runs every stage of `config.mode`.
TrainResult train(const TrainConfig& config, const TrainingData& data, const TrainOutput& output = {},
                  const TrainHooks& hooks = {});

// Evaluation-mode composed S->T translations of a whole image list.
Tensor<float> translate_source_images(DomainModelSet<float>& models, const std::vector<LabeledImage>& images,
                                      bool attention_enabled);

}  // namespace edaan

#endif  // EDAAN_TRAIN_HPP_
