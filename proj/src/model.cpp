#include "edaan/model.hpp"

namespace edaan {

std::uint64_t fnv1a(const std::string& s, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void NetworkConfig::validate() const {
  if (base_channels < 8) throw ConfigError("network.base_channels must be >= 8");
  if (num_residual_blocks < 0) throw ConfigError("network.num_residual_blocks must be >= 0");
  if (image_height <= 0 || image_width <= 0 || image_height % kDownsampleFactor != 0 ||
      image_width % kDownsampleFactor != 0)
    throw ConfigError("network image size " + std::to_string(image_height) + "x" +
                      std::to_string(image_width) + " must be positive multiples of " +
                      std::to_string(kDownsampleFactor));
  // Three stride-2 stages in the discriminator.
  if (image_height % 8 != 0 || image_width % 8 != 0)
    throw ConfigError("network image size must be a multiple of 8 for the discriminator");
  if (embedding_dim != 128) throw ConfigError("network.embedding_dim is fixed at 128");
  if (num_classes < 1) throw ConfigError("network.num_classes must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("network.dropout_rate must be in [0, 1)");
  if (reid_stripes < 1 || (image_height / kDownsampleFactor) % reid_stripes != 0)
    throw ConfigError("network.reid_stripes must divide the feature-map height " +
                      std::to_string(image_height / kDownsampleFactor));
}

namespace {

template <typename Dtype>
void check_image(const Var<Dtype>& x, int channels, int h, int w, const char* who) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != channels || s[2] != h || s[3] != w)
    throw ShapeError(std::string(who) + ": expected N x " + std::to_string(channels) + " x " +
                     std::to_string(h) + " x " + std::to_string(w) + " input, got " + shape_string(s));
}

}  // namespace

template <typename Dtype>
Encoder<Dtype>::Encoder(const NetworkConfig& config)
    : height_(config.image_height), width_(config.image_width) {
  const int c = config.base_channels;
  stem_ = Conv2dLayer<Dtype>(params_, "stem", 3, c, 7, 1, 3);
  stem_norm_ = InstanceNormLayer<Dtype>(params_, "stem_norm", c);
  down1_ = Conv2dLayer<Dtype>(params_, "down1", c, 2 * c, 3, 2, 1);
  down1_norm_ = InstanceNormLayer<Dtype>(params_, "down1_norm", 2 * c);
  down2_ = Conv2dLayer<Dtype>(params_, "down2", 2 * c, 4 * c, 3, 2, 1);
  down2_norm_ = InstanceNormLayer<Dtype>(params_, "down2_norm", 4 * c);
  for (int i = 0; i < config.num_residual_blocks; ++i)
    blocks_.emplace_back(params_, "res" + std::to_string(i), 4 * c);
}

template <typename Dtype>
Var<Dtype> Encoder<Dtype>::forward(Graph<Dtype>& g, Var<Dtype> x) {
  check_image(x, 3, height_, width_, "encoder");
  Var<Dtype> h = ag::relu(stem_norm_.forward(g, params_, stem_.forward(g, params_, x)));
  h = ag::relu(down1_norm_.forward(g, params_, down1_.forward(g, params_, h)));
  h = ag::relu(down2_norm_.forward(g, params_, down2_.forward(g, params_, h)));
  for (const auto& block : blocks_) h = block.forward(g, params_, h);
  return h;
}

template <typename Dtype>
Decoder<Dtype>::Decoder(const NetworkConfig& config, int out_channels) {
  const int c = config.base_channels;
  up1_ = ConvTranspose2dLayer<Dtype>(params_, "up1", 4 * c, 2 * c, 4, 2, 1);
  up1_norm_ = InstanceNormLayer<Dtype>(params_, "up1_norm", 2 * c);
  up2_ = ConvTranspose2dLayer<Dtype>(params_, "up2", 2 * c, c, 4, 2, 1);
  up2_norm_ = InstanceNormLayer<Dtype>(params_, "up2_norm", c);
  head_ = Conv2dLayer<Dtype>(params_, "head", c, out_channels, 7, 1, 3);
}

template <typename Dtype>
Var<Dtype> Decoder<Dtype>::forward_logits(Graph<Dtype>& g, Var<Dtype> features) {
  ++forward_calls_;
  Var<Dtype> h = ag::relu(up1_norm_.forward(g, params_, up1_.forward(g, params_, features)));
  h = ag::relu(up2_norm_.forward(g, params_, up2_.forward(g, params_, h)));
  return head_.forward(g, params_, h);
}

template <typename Dtype>
Var<Dtype> Decoder<Dtype>::forward(Graph<Dtype>& g, Var<Dtype> features) {
  return ag::tanh(forward_logits(g, features));
}

template <typename Dtype>
Discriminator<Dtype>::Discriminator(const NetworkConfig& config)
    : height_(config.image_height), width_(config.image_width) {
  const int c = config.base_channels;
  c1_ = Conv2dLayer<Dtype>(params_, "c1", 3, c, 4, 2, 1);
  c2_ = Conv2dLayer<Dtype>(params_, "c2", c, 2 * c, 4, 2, 1);
  n2_ = InstanceNormLayer<Dtype>(params_, "n2", 2 * c);
  c3_ = Conv2dLayer<Dtype>(params_, "c3", 2 * c, 4 * c, 4, 2, 1);
  n3_ = InstanceNormLayer<Dtype>(params_, "n3", 4 * c);
  head_ = Conv2dLayer<Dtype>(params_, "head", 4 * c, 1, 3, 1, 1);
}

template <typename Dtype>
Var<Dtype> Discriminator<Dtype>::forward_logits(Graph<Dtype>& g, Var<Dtype> x) {
  check_image(x, 3, height_, width_, "discriminator");
  const Dtype slope = Dtype(0.2);
  Var<Dtype> h = ag::leaky_relu(c1_.forward(g, params_, x), slope);
  h = ag::leaky_relu(n2_.forward(g, params_, c2_.forward(g, params_, h)), slope);
  h = ag::leaky_relu(n3_.forward(g, params_, c3_.forward(g, params_, h)), slope);
  return head_.forward(g, params_, h);
}

template <typename Dtype>
Var<Dtype> Discriminator<Dtype>::forward(Graph<Dtype>& g, Var<Dtype> x) {
  return ag::sigmoid(forward_logits(g, x));
}

template <typename Dtype>
AttentionNet<Dtype>::AttentionNet(const NetworkConfig& config) : encoder_(config), decoder_(config, 1) {}

template <typename Dtype>
Var<Dtype> AttentionNet<Dtype>::forward(Graph<Dtype>& g, Var<Dtype> x) {
  return ag::sigmoid(decoder_.forward_logits(g, encoder_.forward(g, x)));
}

template <typename Dtype>
std::vector<std::pair<std::string, ParameterStore<Dtype>*>> AttentionNet<Dtype>::stores() {
  return {{"encoder", &encoder_.params()}, {"decoder", &decoder_.params()}};
}

template <typename Dtype>
void AttentionNet<Dtype>::set_frozen(bool frozen) {
  encoder_.params().set_frozen(frozen);
  decoder_.params().set_frozen(frozen);
}

template <typename Dtype>
EmbeddingHead<Dtype>::EmbeddingHead(const NetworkConfig& config) : normalize_(config.l2_normalize) {
  fc_ = LinearLayer<Dtype>(params_, "fc", config.feature_dim(), config.embedding_dim);
}

template <typename Dtype>
Var<Dtype> EmbeddingHead<Dtype>::forward(Graph<Dtype>& g, Var<Dtype> pooled) {
  Var<Dtype> e = fc_.forward(g, params_, pooled);
  return normalize_ ? ag::l2_normalize(e) : e;
}

template <typename Dtype>
ClassifierHead<Dtype>::ClassifierHead(const NetworkConfig& config)
    : dropout_(static_cast<Dtype>(config.dropout_rate)) {
  fc1_ = LinearLayer<Dtype>(params_, "fc1", config.feature_dim(), 128);
  bn_ = BatchNorm1dLayer<Dtype>(params_, "bn", 128);
  fc2_ = LinearLayer<Dtype>(params_, "fc2", 128, config.num_classes);
}

template <typename Dtype>
Var<Dtype> ClassifierHead<Dtype>::forward(Graph<Dtype>& g, Var<Dtype> pooled) {
  Var<Dtype> h = bn_.forward(g, params_, fc1_.forward(g, params_, pooled));
  h = ag::relu(ag::dropout(h, dropout_));
  return fc2_.forward(g, params_, h);
}

template <typename Dtype>
std::vector<std::pair<std::string, ParameterStore<Dtype>*>> DomainModelSet<Dtype>::named_stores() {
  std::vector<std::pair<std::string, ParameterStore<Dtype>*>> out;
  for (auto [prefix, nets] : {std::pair{std::string("source"), &source}, std::pair{std::string("target"), &target}}) {
    out.emplace_back(prefix + ".encoder", &nets->encoder.params());
    out.emplace_back(prefix + ".decoder", &nets->decoder.params());
    out.emplace_back(prefix + ".discriminator", &nets->discriminator.params());
    for (auto& [name, store] : nets->attention.stores()) out.emplace_back(prefix + ".attention." + name, store);
  }
  if (reid_encoder) out.emplace_back("reid.encoder", &reid_encoder->params());
  out.emplace_back("reid.embedding", &embedding.params());
  out.emplace_back("reid.classifier", &classifier.params());
  return out;
}

template <typename Dtype>
std::vector<std::pair<std::string, const ParameterStore<Dtype>*>> DomainModelSet<Dtype>::named_stores() const {
  auto mutable_stores = const_cast<DomainModelSet*>(this)->named_stores();
  std::vector<std::pair<std::string, const ParameterStore<Dtype>*>> out;
  for (auto& [name, store] : mutable_stores) out.emplace_back(name, store);
  return out;
}

template <typename Dtype>
DomainModelSet<Dtype> build_domain_models(const NetworkConfig& config) {
  config.validate();
  DomainModelSet<Dtype> m;
  m.config = config;
  for (DomainNets<Dtype>* nets : {&m.source, &m.target}) {
    nets->encoder = Encoder<Dtype>(config);
    nets->decoder = Decoder<Dtype>(config, 3);
    nets->discriminator = Discriminator<Dtype>(config);
    nets->attention = AttentionNet<Dtype>(config);
  }
  m.embedding = EmbeddingHead<Dtype>(config);
  m.classifier = ClassifierHead<Dtype>(config);
  for (auto& [name, store] : m.named_stores()) initialize_parameters(*store, fnv1a(name, config.seed ^ 1469598103934665603ull));
  return m;
}

template <typename Dtype>
void attach_fresh_reid_network(DomainModelSet<Dtype>& models, std::uint64_t seed) {
  models.reid_encoder = Encoder<Dtype>(models.config);
  models.embedding = EmbeddingHead<Dtype>(models.config);
  models.classifier = ClassifierHead<Dtype>(models.config);
  const std::uint64_t basis = seed ^ 0x9e3779b97f4a7c15ull;
  initialize_parameters(models.reid_encoder->params(), fnv1a("reid.encoder", basis));
  initialize_parameters(models.embedding.params(), fnv1a("reid.embedding", basis));
  initialize_parameters(models.classifier.params(), fnv1a("reid.classifier", basis));
}

template <typename Dtype>
Var<Dtype> forward_attention(Graph<Dtype>& g, DomainNets<Dtype>& nets, Var<Dtype> image) {
  return nets.attention.forward(g, image);
}

template <typename Dtype>
Var<Dtype> reid_features(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> image) {
  return ag::stripe_pool(models.reid_backbone().forward(g, image), models.config.reid_stripes);
}

template <typename Dtype>
Var<Dtype> embed(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> image) {
  return models.embedding.forward(g, reid_features(g, models, image));
}

template <typename Dtype>
Var<Dtype> classify(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> image) {
  return models.classifier.forward(g, reid_features(g, models, image));
}

template <typename Dtype>
std::size_t parameter_count(const std::vector<std::pair<std::string, ParameterStore<Dtype>*>>& stores) {
  std::size_t n = 0;
  for (const auto& entry : stores) n += entry.second->scalar_count();
  return n;
}

#define EDAAN_INSTANTIATE_MODEL(T)                                                          \
  template class Encoder<T>;                                                                \
  template class Decoder<T>;                                                                \
  template class Discriminator<T>;                                                          \
  template class AttentionNet<T>;                                                           \
  template class EmbeddingHead<T>;                                                          \
  template class ClassifierHead<T>;                                                         \
  template struct DomainModelSet<T>;                                                        \
  template DomainModelSet<T> build_domain_models<T>(const NetworkConfig&);                  \
  template void attach_fresh_reid_network<T>(DomainModelSet<T>&, std::uint64_t);            \
  template Var<T> forward_attention<T>(Graph<T>&, DomainNets<T>&, Var<T>);                  \
  template Var<T> reid_features<T>(Graph<T>&, DomainModelSet<T>&, Var<T>);                  \
  template Var<T> embed<T>(Graph<T>&, DomainModelSet<T>&, Var<T>);                          \
  template Var<T> classify<T>(Graph<T>&, DomainModelSet<T>&, Var<T>);                       \
  template std::size_t parameter_count<T>(                                                  \
      const std::vector<std::pair<std::string, ParameterStore<T>*>>&);

EDAAN_INSTANTIATE_MODEL(float)
EDAAN_INSTANTIATE_MODEL(double)

}  // namespace edaan
