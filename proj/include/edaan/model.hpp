#ifndef EDAAN_MODEL_HPP_
#define EDAAN_MODEL_HPP_

// Per-domain translation networks (encoder E, decoder G, discriminator D,
// attention net A) and the re-identification heads attached to an encoder.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "edaan/autograd.hpp"
#include "edaan/layers.hpp"

namespace edaan {

// Two stride-2 stages in the encoder.
inline constexpr int kDownsampleFactor = 4;

struct NetworkConfig {
  int base_channels = 32;
  int num_residual_blocks = 3;
  int image_height = 64;
  int image_width = 32;
  int embedding_dim = 128;
  int num_classes = 1;
  double dropout_rate = 0.5;
  bool l2_normalize = true;
  // Horizontal bands averaged to form the re-ID feature vector.
  int reid_stripes = 4;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the violated constraint.
  void validate() const;
  int feature_channels() const { return 4 * base_channels; }
  int feature_dim() const { return feature_channels() * reid_stripes; }
};

template <typename Dtype>
class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const NetworkConfig& config);

  // N x 3 x H x W -> N x 4c x H/4 x W/4.
  Var<Dtype> forward(Graph<Dtype>& g, Var<Dtype> x);

  ParameterStore<Dtype>& params() { return params_; }
  const ParameterStore<Dtype>& params() const { return params_; }

 private:
  ParameterStore<Dtype> params_;
  int height_ = 0, width_ = 0;
  Conv2dLayer<Dtype> stem_, down1_, down2_;
  InstanceNormLayer<Dtype> stem_norm_, down1_norm_, down2_norm_;
  std::vector<ResidualBlock<Dtype>> blocks_;
};

// Shared upsampling trunk of the generator decoder and the attention net.
template <typename Dtype>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const NetworkConfig& config, int out_channels);

  // Returns pre-activation output of the final 7x7 conv.
  Var<Dtype> forward_logits(Graph<Dtype>& g, Var<Dtype> features);
  // tanh head: image in [-1, 1].
  Var<Dtype> forward(Graph<Dtype>& g, Var<Dtype> features);

  ParameterStore<Dtype>& params() { return params_; }
  const ParameterStore<Dtype>& params() const { return params_; }
  // Number of forward passes run through this decoder.
  long forward_calls() const { return forward_calls_; }

 private:
  ParameterStore<Dtype> params_;
  ConvTranspose2dLayer<Dtype> up1_, up2_;
  InstanceNormLayer<Dtype> up1_norm_, up2_norm_;
  Conv2dLayer<Dtype> head_;
  long forward_calls_ = 0;
};

// PatchGAN-style critic: three stride-2 convs and a 1-channel logit map.
template <typename Dtype>
class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(const NetworkConfig& config);

  Var<Dtype> forward_logits(Graph<Dtype>& g, Var<Dtype> x);
  // Sigmoid scores in (0, 1).
  Var<Dtype> forward(Graph<Dtype>& g, Var<Dtype> x);

  ParameterStore<Dtype>& params() { return params_; }
  const ParameterStore<Dtype>& params() const { return params_; }

 private:
  ParameterStore<Dtype> params_;
  int height_ = 0, width_ = 0;
  Conv2dLayer<Dtype> c1_, c2_, c3_, head_;
  InstanceNormLayer<Dtype> n2_, n3_;
};

// Encoder-decoder producing a single-channel foreground map in [0, 1].
template <typename Dtype>
class AttentionNet {
 public:
  AttentionNet() = default;
  explicit AttentionNet(const NetworkConfig& config);

  Var<Dtype> forward(Graph<Dtype>& g, Var<Dtype> x);

  // The encoder and decoder stores, in that order.
  std::vector<std::pair<std::string, ParameterStore<Dtype>*>> stores();
  void set_frozen(bool frozen);

 private:
  Encoder<Dtype> encoder_;
  Decoder<Dtype> decoder_;
};

// Fully connected map of the pooled encoder features to the embedding.
template <typename Dtype>
class EmbeddingHead {
 public:
  EmbeddingHead() = default;
  explicit EmbeddingHead(const NetworkConfig& config);

  Var<Dtype> forward(Graph<Dtype>& g, Var<Dtype> pooled);

  ParameterStore<Dtype>& params() { return params_; }
  const ParameterStore<Dtype>& params() const { return params_; }

 private:
  ParameterStore<Dtype> params_;
  LinearLayer<Dtype> fc_;
  bool normalize_ = true;
};

// FC(128) -> BN -> dropout -> ReLU -> FC(num_classes).
template <typename Dtype>
class ClassifierHead {
 public:
  ClassifierHead() = default;
  explicit ClassifierHead(const NetworkConfig& config);

  Var<Dtype> forward(Graph<Dtype>& g, Var<Dtype> pooled);

  ParameterStore<Dtype>& params() { return params_; }
  const ParameterStore<Dtype>& params() const { return params_; }

 private:
  ParameterStore<Dtype> params_;
  LinearLayer<Dtype> fc1_, fc2_;
  BatchNorm1dLayer<Dtype> bn_;
  Dtype dropout_ = Dtype(0.5);
};

template <typename Dtype>
struct DomainNets {
  Encoder<Dtype> encoder;
  Decoder<Dtype> decoder;
  Discriminator<Dtype> discriminator;
  AttentionNet<Dtype> attention;

  // Raw translation G(E(x)).
  Var<Dtype> generate(Graph<Dtype>& g, Var<Dtype> x) {
    return decoder.forward(g, encoder.forward(g, x));
  }
};

enum class Side { kSource, kTarget };

template <typename Dtype>
struct DomainModelSet {
  NetworkConfig config;
  DomainNets<Dtype> source;
  DomainNets<Dtype> target;
  // When set, the re-ID heads read this encoder instead of the source
  // encoder (the separately trained re-ID network of the two-stage mode).
  std::optional<Encoder<Dtype>> reid_encoder;
  EmbeddingHead<Dtype> embedding;
  ClassifierHead<Dtype> classifier;

  DomainNets<Dtype>& nets(Side side) { return side == Side::kSource ? source : target; }
  Encoder<Dtype>& reid_backbone() { return reid_encoder ? *reid_encoder : source.encoder; }

  // Every parameter store keyed by a stable network name, in a fixed order.
  std::vector<std::pair<std::string, ParameterStore<Dtype>*>> named_stores();
  std::vector<std::pair<std::string, const ParameterStore<Dtype>*>> named_stores() const;
};

template <typename Dtype>
DomainModelSet<Dtype> build_domain_models(const NetworkConfig& config);

// Adds a freshly initialized re-ID encoder and re-initializes both heads.
template <typename Dtype>
void attach_fresh_reid_network(DomainModelSet<Dtype>& models, std::uint64_t seed);

template <typename Dtype>
Var<Dtype> forward_attention(Graph<Dtype>& g, DomainNets<Dtype>& nets, Var<Dtype> image);

// Pooled re-ID feature vector from the re-ID backbone.
template <typename Dtype>
Var<Dtype> reid_features(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> image);

template <typename Dtype>
Var<Dtype> embed(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> image);

template <typename Dtype>
Var<Dtype> classify(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> image);

// Total trainable scalar count of one store list.
template <typename Dtype>
std::size_t parameter_count(const std::vector<std::pair<std::string, ParameterStore<Dtype>*>>& stores);

// Stable 64-bit hash used to derive per-network seeds.
std::uint64_t fnv1a(const std::string& s, std::uint64_t basis = 1469598103934665603ull);

}  // namespace edaan

#endif  // EDAAN_MODEL_HPP_
