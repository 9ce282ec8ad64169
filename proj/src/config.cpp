#include "edaan/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace edaan {

using nlohmann::json;

namespace {

// Strict reader over one JSON object: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + display() + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + full(key) + "' has the wrong type");
    }
  }

  void read_optional(const char* key, std::optional<int>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    if (!it->is_number_integer()) throw ConfigError("config key '" + full(key) + "' must be an integer or null");
    out = it->get<int>();
  }

  template <typename Fn>
  void read_enum(const char* key, Fn parse) {
    std::string s;
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_string()) throw ConfigError("config key '" + full(key) + "' must be a string");
    try {
      parse(it->get<std::string>());
    } catch (const Error& e) {
      throw ConfigError("config key '" + full(key) + "': " + e.what());
    }
  }

  Section child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return Section(it == j_.end() ? empty() : *it, full(key));
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + full(item.key().c_str()) + "'");
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  std::string full(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json style_to_json(const BackgroundStyle& s) {
  return {{"hue_min", s.hue_min},
          {"hue_max", s.hue_max},
          {"texture", texture_name(s.texture)},
          {"brightness", s.brightness},
          {"saturation", s.saturation}};
}

void read_style(Section sec, BackgroundStyle& s) {
  sec.read("hue_min", s.hue_min);
  sec.read("hue_max", s.hue_max);
  sec.read_enum("texture", [&](const std::string& v) { s.texture = parse_texture(v); });
  sec.read("brightness", s.brightness);
  sec.read("saturation", s.saturation);
  sec.finish();
}

json synthetic_to_json(const SyntheticSpec& s) {
  return {{"num_identities", s.num_identities},
          {"images_per_identity_per_domain", s.images_per_identity_per_domain},
          {"height", s.height},
          {"width", s.width},
          {"seed", s.seed},
          {"source_background", style_to_json(s.source_background)},
          {"target_background", style_to_json(s.target_background)},
          {"foreground_palette_size", s.foreground_palette_size},
          {"pose_jitter", s.pose_jitter},
          {"cameras_per_domain", s.cameras_per_domain},
          {"min_background_separation", s.min_background_separation}};
}

void read_synthetic(Section sec, SyntheticSpec& s) {
  sec.read("num_identities", s.num_identities);
  sec.read("images_per_identity_per_domain", s.images_per_identity_per_domain);
  sec.read("height", s.height);
  sec.read("width", s.width);
  sec.read("seed", s.seed);
  read_style(sec.child("source_background"), s.source_background);
  read_style(sec.child("target_background"), s.target_background);
  sec.read("foreground_palette_size", s.foreground_palette_size);
  sec.read("pose_jitter", s.pose_jitter);
  sec.read("cameras_per_domain", s.cameras_per_domain);
  sec.read("min_background_separation", s.min_background_separation);
  sec.finish();
}

json network_to_json(const NetworkConfig& n) {
  return {{"base_channels", n.base_channels},   {"num_residual_blocks", n.num_residual_blocks},
          {"image_height", n.image_height},     {"image_width", n.image_width},
          {"embedding_dim", n.embedding_dim},   {"dropout_rate", n.dropout_rate},
          {"l2_normalize", n.l2_normalize},     {"reid_stripes", n.reid_stripes}};
}

void read_network(Section sec, NetworkConfig& n) {
  sec.read("base_channels", n.base_channels);
  sec.read("num_residual_blocks", n.num_residual_blocks);
  sec.read("image_height", n.image_height);
  sec.read("image_width", n.image_width);
  sec.read("embedding_dim", n.embedding_dim);
  sec.read("dropout_rate", n.dropout_rate);
  sec.read("l2_normalize", n.l2_normalize);
  sec.read("reid_stripes", n.reid_stripes);
  sec.finish();
}

json loss_to_json(const LossWeights& w) {
  return {{"lambda_attn", w.lambda_attn},
          {"lambda_quartet", w.lambda_quartet},
          {"lambda_id", w.lambda_id},
          {"lambda_cycle", w.lambda_cycle},
          {"margin_tau1", w.margin_tau1},
          {"margin_tau2", w.margin_tau2},
          {"margin_form", w.margin_form == MarginForm::kCanonical ? "canonical" : "paper_literal"},
          {"metric", w.metric == MetricLoss::kQuartet ? "quartet" : "triplet"}};
}

void read_loss(Section sec, LossWeights& w) {
  sec.read("lambda_attn", w.lambda_attn);
  sec.read("lambda_quartet", w.lambda_quartet);
  sec.read("lambda_id", w.lambda_id);
  sec.read("lambda_cycle", w.lambda_cycle);
  sec.read("margin_tau1", w.margin_tau1);
  sec.read("margin_tau2", w.margin_tau2);
  sec.read_enum("margin_form", [&](const std::string& v) {
    if (v == "canonical")
      w.margin_form = MarginForm::kCanonical;
    else if (v == "paper_literal")
      w.margin_form = MarginForm::kPaperLiteral;
    else
      throw ConfigError("expected canonical or paper_literal, got '" + v + "'");
  });
  sec.read_enum("metric", [&](const std::string& v) {
    if (v == "quartet")
      w.metric = MetricLoss::kQuartet;
    else if (v == "triplet")
      w.metric = MetricLoss::kTriplet;
    else
      throw ConfigError("expected quartet or triplet, got '" + v + "'");
  });
  sec.finish();
}

json optional_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

json train_section_to_json(const TrainConfig& t) {
  return {{"mode", mode_name(t.mode)},
          {"attention_enabled", t.attention_enabled},
          {"epochs", t.epochs},
          {"lr", t.lr},
          {"batch_size", t.batch_size},
          {"decay_start_epoch", optional_json(t.decay_start_epoch)},
          {"attention_train_epochs", optional_json(t.attention_train_epochs)},
          {"disc_whole_image_epochs", optional_json(t.disc_whole_image_epochs)},
          {"seed", t.seed},
          {"adam_beta1", t.adam.beta1},
          {"adam_beta2", t.adam.beta2},
          {"adam_eps", t.adam.eps},
          {"checkpoint_interval", t.checkpoint_interval},
          {"translated_reid", t.translated_reid},
          {"cycle_on_composed", t.cycle_on_composed},
          {"disc_on_composed", t.disc_on_composed},
          {"sample_images", t.sample_images}};
}

void read_train_section(Section sec, TrainConfig& t) {
  sec.read_enum("mode", [&](const std::string& v) { t.mode = parse_mode(v); });
  sec.read("attention_enabled", t.attention_enabled);
  sec.read("epochs", t.epochs);
  sec.read("lr", t.lr);
  sec.read("batch_size", t.batch_size);
  sec.read_optional("decay_start_epoch", t.decay_start_epoch);
  sec.read_optional("attention_train_epochs", t.attention_train_epochs);
  sec.read_optional("disc_whole_image_epochs", t.disc_whole_image_epochs);
  sec.read("seed", t.seed);
  sec.read("adam_beta1", t.adam.beta1);
  sec.read("adam_beta2", t.adam.beta2);
  sec.read("adam_eps", t.adam.eps);
  sec.read("checkpoint_interval", t.checkpoint_interval);
  sec.read("translated_reid", t.translated_reid);
  sec.read("cycle_on_composed", t.cycle_on_composed);
  sec.read("disc_on_composed", t.disc_on_composed);
  sec.read("sample_images", t.sample_images);
  sec.finish();
}

json protocol_to_json(const ProtocolConfig& p) {
  return {{"train_fraction", p.train_fraction},
          {"queries_per_identity", p.queries_per_identity},
          {"seed", p.seed},
          {"query_camera", p.query_camera},
          {"gallery_camera", p.gallery_camera}};
}

void read_protocol(Section sec, ProtocolConfig& p) {
  sec.read("train_fraction", p.train_fraction);
  sec.read("queries_per_identity", p.queries_per_identity);
  sec.read("seed", p.seed);
  sec.read("query_camera", p.query_camera);
  sec.read("gallery_camera", p.gallery_camera);
  sec.finish();
}

json eval_to_json(const EvalConfig& e) {
  return {{"ranks", e.ranks},
          {"attention_threshold", e.attention_threshold},
          {"ranking_queries", e.ranking_queries},
          {"batch_size", e.batch_size}};
}

void read_eval(Section sec, EvalConfig& e) {
  sec.read("ranks", e.ranks);
  sec.read("attention_threshold", e.attention_threshold);
  sec.read("ranking_queries", e.ranking_queries);
  sec.read("batch_size", e.batch_size);
  sec.finish();
}

const char* layout_name(DirectoryLayout l) { return l == DirectoryLayout::kFilename ? "filename" : "manifest"; }

}  // namespace

std::string DataConfig::source_path() const {
  return kind == DataKind::kSynthetic ? (std::filesystem::path(root) / "source").string() : source_dir;
}

std::string DataConfig::target_path() const {
  return kind == DataKind::kSynthetic ? (std::filesystem::path(root) / "target").string() : target_dir;
}

void RunConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    throw ConfigError("config schema_version " + std::to_string(schema_version) + " is not supported (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  if (data.kind == DataKind::kSynthetic) {
    data.synthetic.validate();
    if (data.synthetic.height != train.network.image_height || data.synthetic.width != train.network.image_width)
      throw ConfigError("data.synthetic height/width must equal network.image_height/image_width");
    if (data.root.empty()) throw ConfigError("data.root must not be empty");
  } else if (data.source_dir.empty() || data.target_dir.empty()) {
    throw ConfigError("data.source_dir and data.target_dir are required for directory datasets");
  }
  protocol.validate();
  train.validate();
  eval.validate();
  if (output.run_name.empty() || output.run_name.find('/') != std::string::npos)
    throw ConfigError("output.run_name must be a non-empty name without '/'");
}

std::string RunConfig::run_dir() const { return (std::filesystem::path(output.run_root) / output.run_name).string(); }

json train_config_to_json(const TrainConfig& config) {
  return {{"train", train_section_to_json(config)},
          {"network", network_to_json(config.network)},
          {"loss", loss_to_json(config.loss)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig t;
  Section root(j, "");
  read_train_section(root.child("train"), t);
  read_network(root.child("network"), t.network);
  read_loss(root.child("loss"), t.loss);
  root.finish();
  t.validate();
  return t;
}

json run_config_to_json(const RunConfig& c) {
  json data = {{"kind", c.data.kind == DataKind::kSynthetic ? "synthetic" : "directory"},
               {"root", c.data.root},
               {"synthetic", synthetic_to_json(c.data.synthetic)},
               {"source_dir", c.data.source_dir},
               {"target_dir", c.data.target_dir},
               {"layout", layout_name(c.data.layout)}};
  return {{"schema_version", c.schema_version},
          {"data", data},
          {"protocol", protocol_to_json(c.protocol)},
          {"network", network_to_json(c.train.network)},
          {"loss", loss_to_json(c.train.loss)},
          {"train", train_section_to_json(c.train)},
          {"eval", eval_to_json(c.eval)},
          {"output", {{"run_root", c.output.run_root}, {"run_name", c.output.run_name}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.read("schema_version", c.schema_version);
  if (!j.contains("schema_version")) throw ConfigError("config is missing 'schema_version'");
  if (c.schema_version != kConfigSchemaVersion)
    throw ConfigError("config schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  {
    Section data = root.child("data");
    data.read_enum("kind", [&](const std::string& v) {
      if (v == "synthetic")
        c.data.kind = DataKind::kSynthetic;
      else if (v == "directory")
        c.data.kind = DataKind::kDirectory;
      else
        throw ConfigError("expected synthetic or directory, got '" + v + "'");
    });
    data.read("root", c.data.root);
    read_synthetic(data.child("synthetic"), c.data.synthetic);
    data.read("source_dir", c.data.source_dir);
    data.read("target_dir", c.data.target_dir);
    data.read_enum("layout", [&](const std::string& v) {
      if (v == "filename")
        c.data.layout = DirectoryLayout::kFilename;
      else if (v == "manifest")
        c.data.layout = DirectoryLayout::kManifest;
      else
        throw ConfigError("expected filename or manifest, got '" + v + "'");
    });
    data.finish();
  }
  read_protocol(root.child("protocol"), c.protocol);
  read_network(root.child("network"), c.train.network);
  read_loss(root.child("loss"), c.train.loss);
  read_train_section(root.child("train"), c.train);
  read_eval(root.child("eval"), c.eval);
  {
    Section out = root.child("output");
    out.read("run_root", c.output.run_root);
    out.read("run_name", c.output.run_name);
    out.finish();
  }
  root.finish();
  c.validate();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
  (*node)[parts.back()] = value;
}

RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (const char* root = std::getenv(kRunRootEnv); root && *root) j["output"]["run_root"] = root;
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), overrides);
}

}  // namespace edaan
