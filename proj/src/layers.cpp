#include "edaan/layers.hpp"

namespace edaan {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename Dtype>
Conv2dLayer<Dtype>::Conv2dLayer(ParameterStore<Dtype>& store, const std::string& name,
                                int in_channels, int out_channels, int kernel, int stride_, int pad_,
                                bool with_bias)
    : stride(stride_), pad(pad_) {
  weight = store.add(name + ".weight", {out_channels, in_channels, kernel, kernel});
  if (with_bias) bias = store.add(name + ".bias", {out_channels});
}

template <typename Dtype>
Var<Dtype> Conv2dLayer<Dtype>::forward(Graph<Dtype>& g, ParameterStore<Dtype>& store, Var<Dtype> x) const {
  Var<Dtype> b = bias >= 0 ? g.parameter(store[bias]) : Var<Dtype>();
  return ag::conv2d(x, g.parameter(store[weight]), b, stride, pad);
}

template <typename Dtype>
ConvTranspose2dLayer<Dtype>::ConvTranspose2dLayer(ParameterStore<Dtype>& store, const std::string& name,
                                                  int in_channels, int out_channels, int kernel,
                                                  int stride_, int pad_)
    : stride(stride_), pad(pad_) {
  weight = store.add(name + ".weight", {in_channels, out_channels, kernel, kernel});
  bias = store.add(name + ".bias", {out_channels});
}

template <typename Dtype>
Var<Dtype> ConvTranspose2dLayer<Dtype>::forward(Graph<Dtype>& g, ParameterStore<Dtype>& store,
                                                Var<Dtype> x) const {
  return ag::conv_transpose2d(x, g.parameter(store[weight]), g.parameter(store[bias]), stride, pad);
}

template <typename Dtype>
InstanceNormLayer<Dtype>::InstanceNormLayer(ParameterStore<Dtype>& store, const std::string& name,
                                            int channels) {
  gamma = store.add(name + ".gamma", {channels});
  beta = store.add(name + ".beta", {channels});
}

template <typename Dtype>
Var<Dtype> InstanceNormLayer<Dtype>::forward(Graph<Dtype>& g, ParameterStore<Dtype>& store,
                                             Var<Dtype> x) const {
  return ag::instance_norm(x, g.parameter(store[gamma]), g.parameter(store[beta]));
}

template <typename Dtype>
LinearLayer<Dtype>::LinearLayer(ParameterStore<Dtype>& store, const std::string& name,
                                int in_features, int out_features) {
  weight = store.add(name + ".weight", {out_features, in_features});
  bias = store.add(name + ".bias", {out_features});
}

template <typename Dtype>
Var<Dtype> LinearLayer<Dtype>::forward(Graph<Dtype>& g, ParameterStore<Dtype>& store, Var<Dtype> x) const {
  return ag::linear(x, g.parameter(store[weight]), g.parameter(store[bias]));
}

template <typename Dtype>
BatchNorm1dLayer<Dtype>::BatchNorm1dLayer(ParameterStore<Dtype>& store, const std::string& name,
                                          int features) {
  gamma = store.add(name + ".gamma", {features});
  beta = store.add(name + ".beta", {features});
  running_mean = store.add(name + ".running_mean", {features}, false);
  running_var = store.add(name + ".running_var", {features}, false);
}

template <typename Dtype>
Var<Dtype> BatchNorm1dLayer<Dtype>::forward(Graph<Dtype>& g, ParameterStore<Dtype>& store,
                                            Var<Dtype> x) const {
  return ag::batch_norm(x, g.parameter(store[gamma]), g.parameter(store[beta]), store[running_mean],
                        store[running_var]);
}

template <typename Dtype>
ResidualBlock<Dtype>::ResidualBlock(ParameterStore<Dtype>& store, const std::string& name, int channels)
    : conv1(store, name + ".conv1", channels, channels, 3, 1, 1),
      conv2(store, name + ".conv2", channels, channels, 3, 1, 1),
      norm1(store, name + ".norm1", channels),
      norm2(store, name + ".norm2", channels) {}

template <typename Dtype>
Var<Dtype> ResidualBlock<Dtype>::forward(Graph<Dtype>& g, ParameterStore<Dtype>& store, Var<Dtype> x) const {
  Var<Dtype> h = ag::relu(norm1.forward(g, store, conv1.forward(g, store, x)));
  h = norm2.forward(g, store, conv2.forward(g, store, h));
  return ag::add(x, h);
}

template <typename Dtype>
void initialize_parameters(ParameterStore<Dtype>& store, std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& p : store.all()) {
    if (ends_with(p.name, ".weight")) {
      for (auto& v : p.value.vec()) v = static_cast<Dtype>(normal(rng));
    } else if (ends_with(p.name, ".gamma") || ends_with(p.name, ".running_var")) {
      p.value.fill(Dtype(1));
    } else {
      p.value.fill(Dtype(0));
    }
  }
}

#define EDAAN_INSTANTIATE_LAYERS(T)                                                \
  template struct Conv2dLayer<T>;                                                  \
  template struct ConvTranspose2dLayer<T>;                                         \
  template struct InstanceNormLayer<T>;                                            \
  template struct LinearLayer<T>;                                                  \
  template struct BatchNorm1dLayer<T>;                                             \
  template struct ResidualBlock<T>;                                                \
  template void initialize_parameters<T>(ParameterStore<T>&, std::uint64_t, double);

EDAAN_INSTANTIATE_LAYERS(float)
EDAAN_INSTANTIATE_LAYERS(double)

}  // namespace edaan
