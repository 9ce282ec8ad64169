#ifndef EDAAN_LAYERS_HPP_
#define EDAAN_LAYERS_HPP_

#include <random>
#include <string>

#include "edaan/autograd.hpp"

namespace edaan {

// Layers hold indices into the ParameterStore of the network that owns them.

template <typename Dtype>
struct Conv2dLayer {
  int weight = -1;
  int bias = -1;
  int stride = 1;
  int pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParameterStore<Dtype>& store, const std::string& name, int in_channels,
              int out_channels, int kernel, int stride, int pad, bool with_bias = true);
  Var<Dtype> forward(Graph<Dtype>& g, ParameterStore<Dtype>& store, Var<Dtype> x) const;
};

// Weight layout: in_channels x out_channels x k x k.
template <typename Dtype>
struct ConvTranspose2dLayer {
  int weight = -1;
  int bias = -1;
  int stride = 1;
  int pad = 0;

  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(ParameterStore<Dtype>& store, const std::string& name, int in_channels,
                       int out_channels, int kernel, int stride, int pad);
  Var<Dtype> forward(Graph<Dtype>& g, ParameterStore<Dtype>& store, Var<Dtype> x) const;
};

template <typename Dtype>
struct InstanceNormLayer {
  int gamma = -1;
  int beta = -1;

  InstanceNormLayer() = default;
  InstanceNormLayer(ParameterStore<Dtype>& store, const std::string& name, int channels);
  Var<Dtype> forward(Graph<Dtype>& g, ParameterStore<Dtype>& store, Var<Dtype> x) const;
};

template <typename Dtype>
struct LinearLayer {
  int weight = -1;
  int bias = -1;

  LinearLayer() = default;
  LinearLayer(ParameterStore<Dtype>& store, const std::string& name, int in_features,
              int out_features);
  Var<Dtype> forward(Graph<Dtype>& g, ParameterStore<Dtype>& store, Var<Dtype> x) const;
};

template <typename Dtype>
struct BatchNorm1dLayer {
  int gamma = -1;
  int beta = -1;
  int running_mean = -1;
  int running_var = -1;

  BatchNorm1dLayer() = default;
  BatchNorm1dLayer(ParameterStore<Dtype>& store, const std::string& name, int features);
  Var<Dtype> forward(Graph<Dtype>& g, ParameterStore<Dtype>& store, Var<Dtype> x) const;
};

// conv3x3 -> IN -> ReLU -> conv3x3 -> IN, plus identity skip.
template <typename Dtype>
struct ResidualBlock {
  Conv2dLayer<Dtype> conv1, conv2;
  InstanceNormLayer<Dtype> norm1, norm2;

  ResidualBlock() = default;
  ResidualBlock(ParameterStore<Dtype>& store, const std::string& name, int channels);
  Var<Dtype> forward(Graph<Dtype>& g, ParameterStore<Dtype>& store, Var<Dtype> x) const;
};

// Weights ~ N(0, stddev); norm scales 1; biases, shifts and running means 0;
// running variances 1.
template <typename Dtype>
void initialize_parameters(ParameterStore<Dtype>& store, std::uint64_t seed, double stddev = 0.02);

}  // namespace edaan

#endif  // EDAAN_LAYERS_HPP_
