#include "edaan/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "edaan/config.hpp"
#include "edaan/eval.hpp"
#include "edaan/translate.hpp"

namespace edaan {

namespace fs = std::filesystem;

const char* mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kEdaanEndToEnd: return "edaan_end_to_end";
    case TrainMode::kDaanTwoStage: return "daan_two_stage";
    default: return "direct_transfer";
  }
}

TrainMode parse_mode(const std::string& s) {
  for (TrainMode m : {TrainMode::kEdaanEndToEnd, TrainMode::kDaanTwoStage, TrainMode::kDirectTransfer})
    if (s == mode_name(m)) return m;
  throw ConfigError("train.mode '" + s + "' is not one of edaan_end_to_end, daan_two_stage, direct_transfer");
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kJoint: return "joint";
    case Stage::kTranslation: return "translation";
    default: return "reid";
  }
}

namespace {

Stage parse_stage(const std::string& s) {
  for (Stage st : {Stage::kJoint, Stage::kTranslation, Stage::kReid})
    if (s == stage_name(st)) return st;
  throw CheckpointError("unknown stage '" + s + "' in checkpoint");
}

int scaled_phase(int epochs) { return std::max(1, static_cast<int>(std::lround(epochs * 0.15))); }

}  // namespace

int TrainConfig::decay_start() const { return decay_start_epoch.value_or(epochs / 2); }
int TrainConfig::attention_epochs() const { return attention_train_epochs.value_or(scaled_phase(epochs)); }
int TrainConfig::disc_whole_epochs() const { return disc_whole_image_epochs.value_or(scaled_phase(epochs)); }

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be > 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (!(decay_start() >= 0 && decay_start() < epochs))
    throw ConfigError("train.decay_start_epoch must satisfy 0 <= decay_start_epoch < epochs");
  if (!(attention_epochs() > 0 && attention_epochs() <= epochs))
    throw ConfigError("train.attention_train_epochs must satisfy 0 < attention_train_epochs <= epochs");
  if (!(disc_whole_epochs() >= 0 && disc_whole_epochs() <= epochs))
    throw ConfigError("train.disc_whole_image_epochs must be in [0, epochs]");
  if (checkpoint_interval < 0) throw ConfigError("train.checkpoint_interval must be >= 0");
  if (sample_images < 0) throw ConfigError("train.sample_images must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0))
    throw ConfigError("train.adam parameters must satisfy 0 <= beta < 1 and eps > 0");
  loss.validate();
  network.validate();
}

double lr_schedule(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch > config.epochs)
    throw ConfigError("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(config.epochs) + "]");
  const int decay = config.decay_start();
  if (epoch < decay) return config.lr;
  return config.lr * static_cast<double>(config.epochs - epoch) / static_cast<double>(config.epochs - decay);
}

PhaseFlags phase_for_epoch(int epoch, const TrainConfig& config) {
  return {epoch >= config.attention_epochs(), epoch >= config.disc_whole_epochs()};
}

NamedStores<float> discriminator_stores(DomainModelSet<float>& models) {
  return {{"source.discriminator", &models.source.discriminator.params()},
          {"target.discriminator", &models.target.discriminator.params()}};
}

NamedStores<float> attention_stores(DomainModelSet<float>& models) {
  NamedStores<float> out;
  for (auto& [name, store] : models.named_stores())
    if (name.find(".attention.") != std::string::npos) out.emplace_back(name, store);
  return out;
}

NamedStores<float> reid_stores(DomainModelSet<float>& models) {
  NamedStores<float> out;
  if (models.reid_encoder)
    out.emplace_back("reid.encoder", &models.reid_encoder->params());
  else
    out.emplace_back("source.encoder", &models.source.encoder.params());
  out.emplace_back("reid.embedding", &models.embedding.params());
  out.emplace_back("reid.classifier", &models.classifier.params());
  return out;
}

namespace {

// Rows of an N x ... tensor selected by index.
Tensor<float> gather_rows(const Tensor<float>& t, const std::vector<int>& rows) {
  Shape shape = t.shape();
  shape[0] = static_cast<int>(rows.size());
  Tensor<float> out(shape);
  const std::size_t per = t.stride0();
  for (std::size_t k = 0; k < rows.size(); ++k)
    std::copy_n(t.data() + static_cast<std::size_t>(rows[k]) * per, per, out.data() + k * per);
  return out;
}

// x1..x4 blocks of a 4q-row embedding matrix, optionally followed by a
// second 4q-row block (translated images) appended per member.
std::array<Var<float>, 4> quartet_members(Var<float> emb, int q, bool two_blocks) {
  std::array<Var<float>, 4> out;
  for (int k = 0; k < 4; ++k) {
    Var<float> real = ag::slice_batch(emb, k * q, (k + 1) * q);
    out[k] = two_blocks ? ag::concat_batch<float>({real, ag::slice_batch(emb, (4 + k) * q, (5 + k) * q)}) : real;
  }
  return out;
}

Var<float> weighted_sum(Graph<float>& g, const std::vector<std::pair<Var<float>, double>>& terms) {
  Var<float> acc;
  for (const auto& [v, w] : terms) {
    Var<float> t = w == 1.0 ? v : ag::scale(v, static_cast<float>(w));
    acc = acc.valid() ? ag::add(acc, t) : t;
  }
  if (!acc.valid()) acc = g.constant(Tensor<float>({1}));
  return acc;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, const TrainingData& data, Stage stage, TrainHooks hooks)
    : config_(config), data_(&data), stage_(stage), hooks_(std::move(hooks)) {
  config_.validate();
  if (data.source.empty()) throw DataError("training requires labeled source images");
  if (stage != Stage::kReid && data.target.empty()) throw DataError("translation training requires target images");
  const NetworkConfig& net = config_.network;
  auto check_images = [&](const std::vector<LabeledImage>& images, const char* which) {
    for (const auto& li : images)
      if (li.image.shape() != Shape{3, net.image_height, net.image_width})
        throw DataError(std::string(which) + " image '" + li.path + "' has shape " + shape_string(li.image.shape()) +
                        ", expected (3," + std::to_string(net.image_height) + "," +
                        std::to_string(net.image_width) + ")");
  };
  check_images(data.source, "source");
  check_images(data.target, "target");
  std::set<int> ids;
  for (const auto& li : data.source) ids.insert(li.identity);
  std::map<int, int> remap;
  for (int id : ids) remap.emplace(id, static_cast<int>(remap.size()));
  for (const auto& li : data.source) labels_.push_back(remap.at(li.identity));
  num_classes_ = static_cast<int>(remap.size());
  index_ = IdentityIndex(labels_);
  if (stage != Stage::kTranslation) {
    if (index_.num_identities() < 3)
      throw DataError("quartet sampling requires ≥ 3 identities, got " + std::to_string(index_.num_identities()));
    if (index_.anchor_identities().empty())
      throw DataError("re-ID training requires an identity with at least two images");
  }
}

void Trainer::initialize() {
  NetworkConfig net = config_.network;
  net.num_classes = num_classes_;
  net.seed = config_.seed;
  state_ = TrainerState{build_domain_models<float>(net), Adam<float>(config_.adam), stage_, 0, 0, {},
                        std::mt19937_64(config_.seed ^ fnv1a(stage_name(stage_)))};
  apply_phase_schedule(0);
}

void Trainer::restore(TrainerState state) {
  if (state.stage != stage_)
    throw CheckpointError(std::string("checkpoint stage '") + stage_name(state.stage) + "' does not match '" +
                          stage_name(stage_) + "'");
  if (state.models.config.num_classes != num_classes_)
    throw CheckpointError("checkpoint classifier has " + std::to_string(state.models.config.num_classes) +
                          " classes but the training set has " + std::to_string(num_classes_));
  state_ = std::move(state);
  apply_phase_schedule(std::min(state_.epoch, config_.epochs - 1));
}

int Trainer::steps_per_epoch() const {
  return edaan::steps_per_epoch(static_cast<int>(data_->source.size()), config_.batch_size);
}

PhaseFlags Trainer::apply_phase_schedule(int epoch) {
  state_.phase = phase_for_epoch(epoch, config_);
  const bool frozen = state_.phase.attention_frozen || stage_ == Stage::kReid;
  state_.models.source.attention.set_frozen(frozen);
  state_.models.target.attention.set_frozen(frozen);
  return state_.phase;
}

void Trainer::check_finite_grads(const NamedStores<float>& stores, const char* what) const {
  for (const auto& [name, store] : stores)
    for (const auto& p : store->all())
      for (float v : p.grad.vec())
        if (!std::isfinite(v))
          throw NumericError(what, std::string("non-finite gradient in ") + name + "/" + p.name + " (" + what + ")");
}

LossReport Trainer::next_step() {
  LossReport rep;
  if (stage_ == Stage::kReid) {
    rep = reid_step(sample_quartet_batch(index_, std::max(1, config_.batch_size / 4), state_.rng));
  } else {
    QuartetBatch qb;
    if (stage_ == Stage::kJoint) qb = sample_quartet_batch(index_, std::max(1, config_.batch_size / 4), state_.rng);
    const int n_target = stage_ == Stage::kJoint ? 4 * qb.batch_size() : config_.batch_size;
    DomainPairBatch db = sample_domain_pair_batch(static_cast<int>(data_->source.size()),
                                                  static_cast<int>(data_->target.size()), n_target, state_.rng);
    rep = training_step(qb, db);
  }
  if (hooks_.on_step) hooks_.on_step(state_, rep);
  return rep;
}

LossReport Trainer::training_step(const QuartetBatch& qb, const DomainPairBatch& db) {
  if (stage_ == Stage::kReid) throw Error("training_step is not available in the re-ID stage");
  const bool attn = config_.attention_enabled;
  const bool joint = stage_ == Stage::kJoint;
  if (joint && qb.batch_size() == 0) throw DataError("joint training step requires a quartet batch");
  DomainModelSet<float>& m = state_.models;
  const LossWeights& w = config_.loss;
  const double lr = lr_schedule(state_.epoch, config_);

  // Joint mode translates the quartet images themselves so the shared
  // encoder pass serves both objectives.
  const std::vector<int> src_idx = joint ? qb.all_indices() : db.source;
  const Tensor<float> xs_t = stack_images<float>(data_->source, src_idx);
  const Tensor<float> xt_t = stack_images<float>(data_->target, db.target);

  Graph<float> g(true, true);
  g.set_rng(&state_.rng);
  Var<float> xs = g.constant(xs_t), xt = g.constant(xt_t);
  Var<float> feat_s = m.source.encoder.forward(g, xs);
  TranslationOutput<float> fwd_s =
      compose(g, xs, m.source.decoder.forward(g, feat_s), attn ? forward_attention(g, m.source, xs) : Var<float>());
  TranslationOutput<float> fwd_t =
      compose(g, xt, m.target.generate(g, xt), attn ? forward_attention(g, m.target, xt) : Var<float>());
  Var<float> fake_t = config_.disc_on_composed ? fwd_s.composed : fwd_s.raw;
  Var<float> fake_s = config_.disc_on_composed ? fwd_t.composed : fwd_t.raw;

  // (1) Discriminators on real vs. detached fakes.
  NamedStores<float> d_stores = discriminator_stores(m);
  {
    const bool masked = state_.phase.disc_masked && attn;
    Tensor<float> real_s = xs_t, real_t = xt_t;
    if (masked) {
      // Real inputs become (1 - A(x)) * x.
      auto mask_background = [](Tensor<float>& img, const Tensor<float>& mask) {
        const int n = img.dim(0), c = img.dim(1);
        const std::size_t plane = static_cast<std::size_t>(img.dim(2)) * img.dim(3);
        for (int s = 0; s < n; ++s)
          for (int ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < plane; ++p)
              img[(static_cast<std::size_t>(s) * c + ch) * plane + p] *= 1.0f - mask[s * plane + p];
      };
      mask_background(real_s, fwd_s.mask.value());
      mask_background(real_t, fwd_t.mask.value());
    }
    Graph<float> gd(true, true);
    Var<float> loss_d = ag::add(
        losses::adversarial_loss_d(m.target.discriminator.forward(gd, gd.constant(real_t)),
                                   m.target.discriminator.forward(gd, gd.constant(fake_t.value()))),
        losses::adversarial_loss_d(m.source.discriminator.forward(gd, gd.constant(real_s)),
                                   m.source.discriminator.forward(gd, gd.constant(fake_s.value()))));
    if (!std::isfinite(loss_d.value()[0])) throw NumericError("gan_d", "non-finite discriminator loss 'gan_d'");
    gd.backward(loss_d);
    check_finite_grads(d_stores, "gan_d");
    state_.optimizer.step(d_stores, lr);
    zero_grads(d_stores);
    if (hooks_.on_discriminator_input) hooks_.on_discriminator_input({state_.epoch, state_.step, masked});
  }

  // (2) Every other network against the updated, now frozen, discriminators.
  for (auto& entry : d_stores) entry.second->set_frozen(true);
  LossComponents c;
  std::vector<std::pair<Var<float>, double>> terms;
  Var<float> gan_s = losses::adversarial_loss_g(m.target.discriminator.forward(g, fake_t));
  Var<float> gan_t = losses::adversarial_loss_g(m.source.discriminator.forward(g, fake_s));
  terms.emplace_back(gan_s, 1.0);
  terms.emplace_back(gan_t, 1.0);
  c.gan_s = gan_s.value()[0];
  c.gan_t = gan_t.value()[0];

  Var<float> recon_s, recon_t;
  if (config_.cycle_on_composed) {
    recon_s = translate(g, make_translator(m, Side::kTarget, attn), fwd_s.composed).composed;
    recon_t = translate(g, make_translator(m, Side::kSource, attn), fwd_t.composed).composed;
  } else {
    recon_s = m.target.generate(g, fwd_s.raw);
    recon_t = m.source.generate(g, fwd_t.raw);
  }
  Var<float> cycle = ag::add(losses::mean_l1(recon_s, xs), losses::mean_l1(recon_t, xt));
  terms.emplace_back(cycle, w.lambda_cycle);
  c.cycle = cycle.value()[0];

  if (attn) {
    Var<float> a = ag::add(losses::mean_l1(fwd_s.mask, forward_attention(g, m.target, fwd_s.composed)),
                           losses::mean_l1(fwd_t.mask, forward_attention(g, m.source, fwd_t.composed)));
    terms.emplace_back(a, w.lambda_attn);
    c.attn = a.value()[0];
  }

  if (joint) {
    const int q = qb.batch_size();
    Var<float> pooled = ag::stripe_pool(feat_s, m.config.reid_stripes);
    std::vector<int> labels;
    for (int idx : src_idx) labels.push_back(labels_[idx]);
    if (config_.translated_reid) {
      Var<float> pooled_tr = ag::stripe_pool(m.source.encoder.forward(g, fwd_s.composed), m.config.reid_stripes);
      pooled = ag::concat_batch<float>({pooled, pooled_tr});
      const std::vector<int> base = labels;
      labels.insert(labels.end(), base.begin(), base.end());
    }
    const auto x = quartet_members(m.embedding.forward(g, pooled), q, config_.translated_reid);
    Var<float> quartet = losses::metric_loss(x[0], x[1], x[2], x[3], w);
    Var<float> id = losses::identity_loss(m.classifier.forward(g, pooled), labels);
    terms.emplace_back(quartet, w.lambda_quartet);
    terms.emplace_back(id, w.lambda_id);
    c.quartet = quartet.value()[0];
    c.id = id.value()[0];
  }

  LossReport report = total_loss(c, w);
  Var<float> total = weighted_sum(g, terms);
  NamedStores<float> g_stores;
  for (auto& entry : m.named_stores())
    if (entry.first.find(".discriminator") == std::string::npos) g_stores.push_back(entry);
  g.backward(total);
  check_finite_grads(g_stores, "total");
  state_.optimizer.step(g_stores, lr);
  zero_grads(m.named_stores());
  for (auto& entry : d_stores) entry.second->set_frozen(false);
  ++state_.step;
  return report;
}

LossReport Trainer::reid_step(const QuartetBatch& qb) {
  DomainModelSet<float>& m = state_.models;
  const LossWeights& w = config_.loss;
  const double lr = lr_schedule(state_.epoch, config_);
  const std::vector<int> idx = qb.all_indices();
  const bool with_translated = config_.translated_reid && !translated_source_.empty();

  Graph<float> g(true, true);
  g.set_rng(&state_.rng);
  Var<float> pooled = reid_features(g, m, g.constant(stack_images<float>(data_->source, idx)));
  std::vector<int> labels;
  for (int i : idx) labels.push_back(labels_[i]);
  if (with_translated) {
    Var<float> tr = g.constant(gather_rows(translated_source_, idx));
    pooled = ag::concat_batch<float>({pooled, reid_features(g, m, tr)});
    const std::vector<int> base = labels;
    labels.insert(labels.end(), base.begin(), base.end());
  }
  const auto x = quartet_members(m.embedding.forward(g, pooled), qb.batch_size(), with_translated);
  Var<float> quartet = losses::metric_loss(x[0], x[1], x[2], x[3], w);
  Var<float> id = losses::identity_loss(m.classifier.forward(g, pooled), labels);
  LossComponents c;
  c.quartet = quartet.value()[0];
  c.id = id.value()[0];
  LossReport report = total_loss(c, w);
  NamedStores<float> stores = reid_stores(m);
  g.backward(weighted_sum(g, {{quartet, w.lambda_quartet}, {id, w.lambda_id}}));
  check_finite_grads(stores, "total");
  state_.optimizer.step(stores, lr);
  zero_grads(m.named_stores());
  ++state_.step;
  return report;
}

CheckpointData state_to_checkpoint(const TrainerState& state, const TrainConfig& config) {
  CheckpointData d;
  std::ostringstream rng;
  rng << state.rng;
  nlohmann::json adam_steps = nlohmann::json::object();
  for (const auto& [key, slot] : state.optimizer.slots()) adam_steps[key] = slot.t;
  d.header = {{"format", "edaan-trainer-state"},
              {"stage", stage_name(state.stage)},
              {"epoch", state.epoch},
              {"step", state.step},
              {"phase", {{"attention_frozen", state.phase.attention_frozen}, {"disc_masked", state.phase.disc_masked}}},
              {"rng", rng.str()},
              {"config", train_config_to_json(config)},
              {"num_classes", state.models.config.num_classes},
              {"has_reid_encoder", state.models.reid_encoder.has_value()},
              {"adam_steps", adam_steps}};
  for (const auto& [name, store] : state.models.named_stores())
    for (const auto& p : store->all()) d.arrays.emplace_back("param/" + name + "/" + p.name, p.value);
  for (const auto& [key, slot] : state.optimizer.slots()) {
    d.arrays.emplace_back("adam.m/" + key, slot.m);
    d.arrays.emplace_back("adam.v/" + key, slot.v);
  }
  return d;
}

TrainerState state_from_checkpoint(const CheckpointData& d, TrainConfig* config_out) {
  try {
    if (d.header.at("format") != "edaan-trainer-state") throw CheckpointError("checkpoint is not a trainer state");
    TrainConfig config = train_config_from_json(d.header.at("config"));
    NetworkConfig net = config.network;
    net.num_classes = d.header.at("num_classes").get<int>();
    TrainerState state{build_domain_models<float>(net), Adam<float>(config.adam),
                       parse_stage(d.header.at("stage").get<std::string>()), d.header.at("epoch").get<int>(),
                       d.header.at("step").get<long>(), {}, {}};
    if (d.header.at("has_reid_encoder").get<bool>()) attach_fresh_reid_network(state.models, 0);
    state.phase.attention_frozen = d.header.at("phase").at("attention_frozen").get<bool>();
    state.phase.disc_masked = d.header.at("phase").at("disc_masked").get<bool>();
    std::istringstream rng(d.header.at("rng").get<std::string>());
    rng >> state.rng;
    if (!rng) throw CheckpointError("checkpoint rng state unreadable");

    std::map<std::string, const Tensor<float>*> arrays;
    for (const auto& [name, t] : d.arrays) arrays[name] = &t;
    std::size_t used = 0;
    std::map<std::string, Shape> param_shapes;
    for (auto& [name, store] : state.models.named_stores())
      for (auto& p : store->all()) {
        const std::string key = name + "/" + p.name;
        auto it = arrays.find("param/" + key);
        if (it == arrays.end()) throw CheckpointError("checkpoint is missing parameter '" + key + "'");
        if (it->second->shape() != p.value.shape())
          throw CheckpointError("checkpoint parameter '" + key + "' has shape " + shape_string(it->second->shape()) +
                                ", expected " + shape_string(p.value.shape()));
        p.value = *it->second;
        param_shapes[key] = p.value.shape();
        ++used;
      }
    for (const auto& [key, t] : d.header.at("adam_steps").items()) {
      auto shape = param_shapes.find(key);
      auto m = arrays.find("adam.m/" + key), v = arrays.find("adam.v/" + key);
      if (shape == param_shapes.end() || m == arrays.end() || v == arrays.end() ||
          m->second->shape() != shape->second || v->second->shape() != shape->second)
        throw CheckpointError("checkpoint optimizer state for '" + key + "' is missing or malformed");
      auto& slot = state.optimizer.slots()[key];
      slot.m = *m->second;
      slot.v = *v->second;
      slot.t = t.get<std::int64_t>();
      used += 2;
    }
    if (used != d.arrays.size()) throw CheckpointError("checkpoint contains unexpected arrays");
    if (config_out) *config_out = config;
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header invalid: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint configuration invalid: ") + e.what());
  }
}

void save_checkpoint(const TrainerState& state, const TrainConfig& config, const std::string& path) {
  write_checkpoint(path, state_to_checkpoint(state, config));
}

TrainerState load_checkpoint(const std::string& path, TrainConfig* config) {
  return state_from_checkpoint(read_checkpoint(path), config);
}

Tensor<float> translate_source_images(DomainModelSet<float>& models, const std::vector<LabeledImage>& images,
                                      bool attention_enabled) {
  std::vector<int> idx(images.size());
  std::iota(idx.begin(), idx.end(), 0);
  return translate_batch(models, Side::kSource, stack_images<float>(images, idx), attention_enabled).composed;
}

namespace {

std::string epoch_tag(int epoch) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << epoch;
  return os.str();
}

class LossLog {
 public:
  // When continuing a resumed stage, keeps the rows up to `resume_step` and
  // appends after them.
  LossLog(const std::string& path, bool append, long resume_step) {
    if (!path.empty()) {
      header_written_ = append && fs::exists(path);
      if (header_written_) truncate_after(path, resume_step);
      out_.open(path, header_written_ ? std::ios::app : std::ios::trunc);
      if (!out_) throw Error("cannot write loss log '" + path + "'");
      out_ << std::setprecision(9);
    }
  }
  void write(long step, int epoch, const LossReport& r) {
    if (!out_.is_open()) return;
    const auto terms = report_terms(r);
    if (!header_written_) {
      out_ << "step,epoch";
      for (const auto& t : terms) out_ << ',' << t.first;
      out_ << '\n';
      header_written_ = true;
    }
    out_ << step << ',' << epoch;
    for (const auto& t : terms) out_ << ',' << t.second;
    out_ << '\n';
    out_.flush();
  }

 private:
  static void truncate_after(const std::string& path, long step) {
    std::ifstream in(path);
    std::string line, kept;
    bool header = true;
    while (std::getline(in, line)) {
      if (header || std::stol(line.substr(0, line.find(','))) <= step) kept += line + '\n';
      header = false;
    }
    in.close();
    std::ofstream(path, std::ios::trunc) << kept;
  }

  std::ofstream out_;
  bool header_written_ = false;
};

void write_samples(Trainer& trainer, const TrainConfig& config, const TrainingData& data, const std::string& dir,
                   int epoch) {
  if (config.sample_images == 0 || data.source.empty()) return;
  std::vector<int> idx;
  for (int k = 0; k < std::min<int>(config.sample_images, static_cast<int>(data.source.size())); ++k)
    idx.push_back(k * static_cast<int>(data.source.size()) / config.sample_images);
  fs::create_directories(fs::path(dir) / "samples");
  const TranslationTensors t = translate_batch(trainer.state().models, Side::kSource,
                                               stack_images<float>(data.source, idx), config.attention_enabled);
  write_png((fs::path(dir) / "samples" / ("epoch_" + epoch_tag(epoch) + ".png")).string(), translation_grid(t));
}

StageResult run_stage(Trainer& trainer, const TrainConfig& config, const TrainingData& data, const std::string& dir,
                      const TrainHooks& hooks) {
  StageResult result;
  result.stage = trainer.state().stage;
  result.dir = dir;
  if (!dir.empty()) fs::create_directories(dir);
  TrainerState& st = trainer.state();
  LossLog log(dir.empty() ? "" : (fs::path(dir) / "losses.csv").string(), st.epoch > 0, st.step);
  const bool translation = st.stage != Stage::kReid;
  auto checkpoint = [&](const std::string& name) {
    if (dir.empty()) return;
    const std::string path = (fs::path(dir) / name).string();
    save_checkpoint(st, config, path);
    result.checkpoints.push_back(path);
  };
  for (int epoch = st.epoch; epoch < config.epochs; ++epoch) {
    trainer.apply_phase_schedule(epoch);
    for (int s = 0; s < trainer.steps_per_epoch(); ++s) {
      LossReport r = trainer.next_step();
      log.write(st.step, epoch, r);
      result.losses.push_back(r);
    }
    st.epoch = epoch + 1;
    if (hooks.on_epoch_end) hooks.on_epoch_end(st);
    if (config.checkpoint_interval > 0 && st.epoch % config.checkpoint_interval == 0) {
      checkpoint("ckpt_epoch_" + epoch_tag(st.epoch) + ".bin");
      if (translation && !dir.empty()) write_samples(trainer, config, data, dir, st.epoch);
    }
  }
  checkpoint("ckpt_final.bin");
  if (translation && !dir.empty()) write_samples(trainer, config, data, dir, st.epoch);
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainingData& data, const TrainOutput& output,
                  const TrainHooks& hooks) {
  config.validate();
  std::optional<TrainerState> resumed;
  if (!output.resume_from.empty()) resumed = load_checkpoint(output.resume_from);
  if (!output.run_dir.empty()) {
    fs::create_directories(output.run_dir);
    if (!output.config_snapshot.empty()) {
      std::ofstream snap(fs::path(output.run_dir) / "config.snapshot");
      snap << output.config_snapshot;
      if (!snap.flush()) throw Error("cannot write config snapshot in '" + output.run_dir + "'");
    }
  }
  auto sub = [&](const char* name) {
    return output.run_dir.empty() ? std::string() : (fs::path(output.run_dir) / name).string();
  };
  auto start = [&](Trainer& t) {
    if (resumed && resumed->stage == t.stage())
      t.restore(std::move(*resumed)), resumed.reset();
    else
      t.initialize();
  };

  TrainResult result;
  if (config.mode != TrainMode::kDaanTwoStage) {
    const Stage stage = config.mode == TrainMode::kEdaanEndToEnd ? Stage::kJoint : Stage::kReid;
    Trainer t(config, data, stage, hooks);
    start(t);
    result.stages.push_back(run_stage(t, config, data, output.run_dir, hooks));
    result.num_classes = t.num_classes();
    result.state = std::move(t.state());
    return result;
  }

  Trainer stage1(config, data, Stage::kTranslation, hooks);
  Trainer stage2(config, data, Stage::kReid, hooks);
  TrainerState reid_start;
  if (resumed && resumed->stage == Stage::kReid) {
    stage2.restore(std::move(*resumed));
    resumed.reset();
  } else {
    start(stage1);
    result.stages.push_back(run_stage(stage1, config, data, sub("stage1_translation"), hooks));
    // Stage two: a fresh re-ID network on real + translated source images;
    // translation networks are left untouched.
    reid_start.models = std::move(stage1.state().models);
    attach_fresh_reid_network(reid_start.models, config.seed);
    reid_start.optimizer = Adam<float>(config.adam);
    reid_start.stage = Stage::kReid;
    reid_start.rng.seed(config.seed ^ fnv1a(stage_name(Stage::kReid)));
    stage2.restore(std::move(reid_start));
  }
  if (config.translated_reid)
    stage2.set_translated_source(
        translate_source_images(stage2.state().models, data.source, config.attention_enabled));
  result.stages.push_back(run_stage(stage2, config, data, sub("stage2_reid"), hooks));
  result.num_classes = stage2.num_classes();
  result.state = std::move(stage2.state());
  return result;
}

}  // namespace edaan
