#ifndef EDAAN_AUTOGRAD_HPP_
#define EDAAN_AUTOGRAD_HPP_

// Tape-based reverse-mode differentiation over Tensor values.
//
// A Graph records every op applied to its Vars in creation order; backward()
// walks the tape in reverse. Parameters enter the tape as leaves and receive
// their gradient in Parameter::grad once backward() finishes. Frozen or
// non-trainable parameters are constants on the tape.

#include <deque>
#include <functional>
#include <initializer_list>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "edaan/tensor.hpp"

namespace edaan {

template <typename Dtype>
struct Parameter {
  std::string name;
  Tensor<Dtype> value;
  Tensor<Dtype> grad;
  bool trainable = true;  // false for buffers such as running statistics
  bool frozen = false;

  bool receives_grad() const { return trainable && !frozen; }
};

// Owns the parameters of one network. Layers refer to entries by index so the
// owning network stays copyable.
template <typename Dtype>
class ParameterStore {
 public:
  int add(std::string name, Shape shape, bool trainable = true) {
    Parameter<Dtype> p;
    p.name = std::move(name);
    p.value = Tensor<Dtype>(shape);
    p.trainable = trainable;
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
  }
  Parameter<Dtype>& operator[](int i) { return params_[i]; }
  const Parameter<Dtype>& operator[](int i) const { return params_[i]; }
  std::vector<Parameter<Dtype>>& all() { return params_; }
  const std::vector<Parameter<Dtype>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void set_frozen(bool frozen) {
    for (auto& p : params_) p.frozen = frozen;
  }
  void zero_grad() {
    for (auto& p : params_) p.grad = Tensor<Dtype>();
  }
  // Number of trainable scalars.
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (p.trainable) n += p.value.count();
    return n;
  }

 private:
  std::vector<Parameter<Dtype>> params_;
};

template <typename Dtype>
class Graph;

template <typename Dtype>
class Var {
 public:
  Var() = default;
  Var(Graph<Dtype>* graph, int id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph<Dtype>& graph() const { return *graph_; }
  int id() const { return id_; }
  const Tensor<Dtype>& value() const { return graph_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  int dim(std::size_t axis) const { return value().dim(axis); }
  bool requires_grad() const { return graph_->requires_grad(id_); }

 private:
  Graph<Dtype>* graph_ = nullptr;
  int id_ = -1;
};

template <typename Dtype>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<Dtype>& grad_out)>;

  explicit Graph(bool grad_enabled = true, bool training = true)
      : grad_enabled_(grad_enabled), training_(training) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  bool training() const { return training_; }

  // Random source for stochastic ops (dropout). Must outlive the graph.
  void set_rng(std::mt19937_64* rng) { rng_ = rng; }
  std::mt19937_64* rng() const { return rng_; }

  Var<Dtype> constant(Tensor<Dtype> value);
  // A leaf whose gradient is retained and readable through grad().
  Var<Dtype> variable(Tensor<Dtype> value);
  // Leaf bound to a parameter; repeated calls return the same node.
  Var<Dtype> parameter(Parameter<Dtype>& p);

  Var<Dtype> record(Tensor<Dtype> value, std::initializer_list<Var<Dtype>> parents, BackwardFn fn);
  Var<Dtype> record(Tensor<Dtype> value, const std::vector<Var<Dtype>>& parents, BackwardFn fn);

  const Tensor<Dtype>& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Adds `g` into the gradient of `v`; no-op when v does not require grad.
  void accumulate(const Var<Dtype>& v, const Tensor<Dtype>& g);
  // Zero-initialized (on first use) gradient buffer of `v` for in-place accumulation.
  Tensor<Dtype>& grad_buffer(const Var<Dtype>& v);

  // Retained gradient of a variable() leaf, or null.
  const Tensor<Dtype>* grad(const Var<Dtype>& v) const;

  // Reverse pass from a scalar root.
  void backward(const Var<Dtype>& root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Dtype> value;
    Tensor<Dtype> grad;
    bool requires_grad = false;
    bool retain = false;
    Parameter<Dtype>* param = nullptr;
    BackwardFn backward;
  };

  Var<Dtype> push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<Dtype>*, int> param_nodes_;
  bool grad_enabled_;
  bool training_;
  std::mt19937_64* rng_ = nullptr;
};

namespace ag {

template <typename Dtype>
Var<Dtype> conv2d(Var<Dtype> x, Var<Dtype> weight, Var<Dtype> bias, int stride, int pad);
template <typename Dtype>
Var<Dtype> conv_transpose2d(Var<Dtype> x, Var<Dtype> weight, Var<Dtype> bias, int stride, int pad);
template <typename Dtype>
Var<Dtype> instance_norm(Var<Dtype> x, Var<Dtype> gamma, Var<Dtype> beta, Dtype eps = Dtype(1e-5));
// x: N x F. Uses batch statistics (and updates the running buffers) when the
// graph is in training mode, running statistics otherwise.
template <typename Dtype>
Var<Dtype> batch_norm(Var<Dtype> x, Var<Dtype> gamma, Var<Dtype> beta, Parameter<Dtype>& running_mean,
                      Parameter<Dtype>& running_var, Dtype momentum = Dtype(0.1),
                      Dtype eps = Dtype(1e-5));
// x: N x F, weight: O x F, bias: O.
template <typename Dtype>
Var<Dtype> linear(Var<Dtype> x, Var<Dtype> weight, Var<Dtype> bias);

template <typename Dtype>
Var<Dtype> relu(Var<Dtype> x);
template <typename Dtype>
Var<Dtype> leaky_relu(Var<Dtype> x, Dtype slope);
template <typename Dtype>
Var<Dtype> tanh(Var<Dtype> x);
template <typename Dtype>
Var<Dtype> sigmoid(Var<Dtype> x);

template <typename Dtype>
Var<Dtype> add(Var<Dtype> a, Var<Dtype> b);
template <typename Dtype>
Var<Dtype> sub(Var<Dtype> a, Var<Dtype> b);
template <typename Dtype>
Var<Dtype> mul(Var<Dtype> a, Var<Dtype> b);
template <typename Dtype>
Var<Dtype> scale(Var<Dtype> a, Dtype s);
template <typename Dtype>
Var<Dtype> one_minus(Var<Dtype> a);

// N x 1 x H x W -> N x C x H x W by repetition.
template <typename Dtype>
Var<Dtype> broadcast_channels(Var<Dtype> mask, int channels);

// Inverted dropout; identity outside training mode.
template <typename Dtype>
Var<Dtype> dropout(Var<Dtype> x, Dtype rate);

// Average over horizontal bands: N x C x H x W -> N x (C * stripes).
template <typename Dtype>
Var<Dtype> stripe_pool(Var<Dtype> x, int stripes);

// Row-wise L2 normalization of an N x F matrix.
template <typename Dtype>
Var<Dtype> l2_normalize(Var<Dtype> x, Dtype eps = Dtype(1e-12));

template <typename Dtype>
Var<Dtype> concat_batch(const std::vector<Var<Dtype>>& parts);
template <typename Dtype>
Var<Dtype> slice_batch(Var<Dtype> x, int begin, int end);

template <typename Dtype>
Var<Dtype> mean(Var<Dtype> x);

template <typename Dtype>
Var<Dtype> detach(Var<Dtype> x);

}  // namespace ag
}  // namespace edaan

#endif  // EDAAN_AUTOGRAD_HPP_
