#include "edaan/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "edaan/kernels.hpp"

namespace edaan {

template <typename Dtype>
Var<Dtype> Graph<Dtype>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<Dtype>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename Dtype>
Var<Dtype> Graph<Dtype>::constant(Tensor<Dtype> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename Dtype>
Var<Dtype> Graph<Dtype>::variable(Tensor<Dtype> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  n.retain = true;
  return push(std::move(n));
}

template <typename Dtype>
Var<Dtype> Graph<Dtype>::parameter(Parameter<Dtype>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<Dtype>(this, it->second);
  Node n;
  n.value = p.value;
  n.requires_grad = grad_enabled_ && p.receives_grad();
  n.param = n.requires_grad ? &p : nullptr;
  Var<Dtype> v = push(std::move(n));
  param_nodes_[&p] = v.id();
  return v;
}

template <typename Dtype>
Var<Dtype> Graph<Dtype>::record(Tensor<Dtype> value, std::initializer_list<Var<Dtype>> parents,
                                BackwardFn fn) {
  return record(std::move(value), std::vector<Var<Dtype>>(parents), std::move(fn));
}

template <typename Dtype>
Var<Dtype> Graph<Dtype>::record(Tensor<Dtype> value, const std::vector<Var<Dtype>>& parents,
                                BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_)
    for (const auto& p : parents)
      if (p.valid() && p.requires_grad()) n.requires_grad = true;
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename Dtype>
void Graph<Dtype>::accumulate(const Var<Dtype>& v, const Tensor<Dtype>& g) {
  if (!v.valid() || !nodes_[v.id()].requires_grad) return;
  Node& n = nodes_[v.id()];
  check_same_shape(n.value.shape(), g.shape(), "gradient accumulation");
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  Dtype* dst = n.grad.data();
  const Dtype* src = g.data();
  for (std::size_t i = 0; i < g.count(); ++i) dst[i] += src[i];
}

template <typename Dtype>
Tensor<Dtype>& Graph<Dtype>::grad_buffer(const Var<Dtype>& v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad = Tensor<Dtype>(n.value.shape());
  return n.grad;
}

template <typename Dtype>
const Tensor<Dtype>* Graph<Dtype>::grad(const Var<Dtype>& v) const {
  const Node& n = nodes_[v.id()];
  return n.grad.empty() ? nullptr : &n.grad;
}

template <typename Dtype>
void Graph<Dtype>::backward(const Var<Dtype>& root) {
  if (root.value().count() != 1) throw ShapeError("backward: root must be a scalar");
  if (!root.requires_grad()) return;
  nodes_[root.id()].grad = Tensor<Dtype>(root.shape(), Dtype(1));
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, n.grad);
      if (!n.retain) n.grad = Tensor<Dtype>();
    }
    if (n.param) {
      Parameter<Dtype>& p = *n.param;
      if (p.grad.empty()) {
        p.grad = n.grad;
      } else {
        for (std::size_t k = 0; k < p.grad.count(); ++k) p.grad[k] += n.grad[k];
      }
      n.grad = Tensor<Dtype>();
    }
  }
}

namespace ag {

namespace {

template <typename Dtype, typename Fwd, typename Bwd>
Var<Dtype> unary(Var<Dtype> x, Fwd fwd, Bwd bwd) {
  Graph<Dtype>& g = x.graph();
  const Tensor<Dtype>& xv = x.value();
  Tensor<Dtype> y(xv.shape());
  kernels::map<Dtype>(xv.span(), y.span(), fwd);
  auto self = std::make_shared<int>(-1);
  Var<Dtype> out = g.record(std::move(y), {x}, [x, self, bwd](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    const Tensor<Dtype>& xv2 = x.value();
    const Tensor<Dtype>& yv = gr.value(*self);
    Tensor<Dtype>& gx = gr.grad_buffer(x);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(go.count());
#pragma omp parallel for schedule(static) if (n > 32768)
    for (std::ptrdiff_t i = 0; i < n; ++i) gx[i] += go[i] * bwd(xv2[i], yv[i]);
  });
  *self = out.id();
  return out;
}

}  // namespace

template <typename Dtype>
Var<Dtype> conv2d(Var<Dtype> x, Var<Dtype> weight, Var<Dtype> bias, int stride, int pad) {
  Graph<Dtype>& g = x.graph();
  const Tensor<Dtype>* b = bias.valid() ? &bias.value() : nullptr;
  Tensor<Dtype> y = kernels::conv2d_forward(x.value(), weight.value(), b, stride, pad);
  return g.record(std::move(y), {x, weight, bias}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype> dx;
    Tensor<Dtype>* dw = weight.requires_grad() ? &gr.grad_buffer(weight) : nullptr;
    Tensor<Dtype>* db = bias.valid() && bias.requires_grad() ? &gr.grad_buffer(bias) : nullptr;
    kernels::conv2d_backward(x.value(), weight.value(), go, stride, pad,
                             x.requires_grad() ? &dx : nullptr, dw, db);
    if (x.requires_grad()) gr.accumulate(x, dx);
  });
}

template <typename Dtype>
Var<Dtype> conv_transpose2d(Var<Dtype> x, Var<Dtype> weight, Var<Dtype> bias, int stride, int pad) {
  Graph<Dtype>& g = x.graph();
  const Tensor<Dtype>* b = bias.valid() ? &bias.value() : nullptr;
  Tensor<Dtype> y = kernels::conv_transpose2d_forward(x.value(), weight.value(), b, stride, pad);
  return g.record(std::move(y), {x, weight, bias}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype> dx;
    Tensor<Dtype>* dw = weight.requires_grad() ? &gr.grad_buffer(weight) : nullptr;
    Tensor<Dtype>* db = bias.valid() && bias.requires_grad() ? &gr.grad_buffer(bias) : nullptr;
    kernels::conv_transpose2d_backward(x.value(), weight.value(), go, stride, pad,
                                       x.requires_grad() ? &dx : nullptr, dw, db);
    if (x.requires_grad()) gr.accumulate(x, dx);
  });
}

template <typename Dtype>
Var<Dtype> instance_norm(Var<Dtype> x, Var<Dtype> gamma, Var<Dtype> beta, Dtype eps) {
  Graph<Dtype>& g = x.graph();
  auto mean = std::make_shared<std::vector<Dtype>>();
  auto inv_std = std::make_shared<std::vector<Dtype>>();
  Tensor<Dtype> y = kernels::instance_norm_forward(x.value(), gamma.value(), beta.value(), eps,
                                                   *mean, *inv_std);
  return g.record(std::move(y), {x, gamma, beta}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype> dx;
    kernels::instance_norm_backward(x.value(), gamma.value(), *mean, *inv_std, go,
                                    x.requires_grad() ? &dx : nullptr,
                                    gamma.requires_grad() ? &gr.grad_buffer(gamma) : nullptr,
                                    beta.requires_grad() ? &gr.grad_buffer(beta) : nullptr);
    if (x.requires_grad()) gr.accumulate(x, dx);
  });
}

template <typename Dtype>
Var<Dtype> batch_norm(Var<Dtype> x, Var<Dtype> gamma, Var<Dtype> beta, Parameter<Dtype>& running_mean,
                      Parameter<Dtype>& running_var, Dtype momentum, Dtype eps) {
  Graph<Dtype>& g = x.graph();
  const Tensor<Dtype>& xv = x.value();
  if (xv.ndim() != 2) throw ShapeError("batch_norm expects an N x F input, got " + shape_string(xv.shape()));
  const int n = xv.dim(0), f = xv.dim(1);
  Tensor<Dtype> y(xv.shape());
  auto mean = std::make_shared<std::vector<Dtype>>(f);
  auto inv_std = std::make_shared<std::vector<Dtype>>(f);
  const bool batch_stats = g.training();
  if (batch_stats && n < 2) throw ShapeError("batch_norm in training mode needs at least 2 samples");
  for (int j = 0; j < f; ++j) {
    Dtype mu, var;
    if (batch_stats) {
      Dtype s = 0;
      for (int i = 0; i < n; ++i) s += xv[static_cast<std::size_t>(i) * f + j];
      mu = s / n;
      Dtype sq = 0;
      for (int i = 0; i < n; ++i) {
        const Dtype d = xv[static_cast<std::size_t>(i) * f + j] - mu;
        sq += d * d;
      }
      var = sq / n;
      running_mean.value[j] = (1 - momentum) * running_mean.value[j] + momentum * mu;
      running_var.value[j] = (1 - momentum) * running_var.value[j] + momentum * sq / (n - 1);
    } else {
      mu = running_mean.value[j];
      var = running_var.value[j];
    }
    (*mean)[j] = mu;
    (*inv_std)[j] = Dtype(1) / std::sqrt(var + eps);
    for (int i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(i) * f + j;
      y[k] = (xv[k] - mu) * (*inv_std)[j] * gamma.value()[j] + beta.value()[j];
    }
  }
  return g.record(std::move(y), {x, gamma, beta}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    const Tensor<Dtype>& xv2 = x.value();
    Tensor<Dtype> dx(xv2.shape());
    for (int j = 0; j < f; ++j) {
      const Dtype mu = (*mean)[j], is = (*inv_std)[j];
      Dtype s1 = 0, s2 = 0;
      for (int i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i) * f + j;
        s1 += go[k];
        s2 += go[k] * (xv2[k] - mu) * is;
      }
      if (gamma.requires_grad()) gr.grad_buffer(gamma)[j] += s2;
      if (beta.requires_grad()) gr.grad_buffer(beta)[j] += s1;
      const Dtype gm = gamma.value()[j];
      for (int i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i) * f + j;
        if (batch_stats) {
          const Dtype xhat = (xv2[k] - mu) * is;
          dx[k] = gm * is / n * (n * go[k] - s1 - xhat * s2);
        } else {
          dx[k] = gm * is * go[k];
        }
      }
    }
    gr.accumulate(x, dx);
  });
}

template <typename Dtype>
Var<Dtype> linear(Var<Dtype> x, Var<Dtype> weight, Var<Dtype> bias) {
  Graph<Dtype>& g = x.graph();
  const Tensor<Dtype>& xv = x.value();
  const Tensor<Dtype>& wv = weight.value();
  if (xv.ndim() != 2 || wv.ndim() != 2 || xv.dim(1) != wv.dim(1))
    throw ShapeError("linear: input " + shape_string(xv.shape()) + " incompatible with weight " +
                     shape_string(wv.shape()));
  const int n = xv.dim(0), f = xv.dim(1), o = wv.dim(0);
  Tensor<Dtype> y({n, o});
  kernels::gemm<Dtype>(false, true, n, o, f, Dtype(1), xv.data(), wv.data(), Dtype(0), y.data());
  if (bias.valid())
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < o; ++j) y[static_cast<std::size_t>(i) * o + j] += bias.value()[j];
  return g.record(std::move(y), {x, weight, bias}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    if (x.requires_grad()) {
      Tensor<Dtype> dx({n, f});
      kernels::gemm<Dtype>(false, false, n, f, o, Dtype(1), go.data(), weight.value().data(),
                           Dtype(0), dx.data());
      gr.accumulate(x, dx);
    }
    if (weight.requires_grad())
      kernels::gemm<Dtype>(true, false, o, f, n, Dtype(1), go.data(), x.value().data(), Dtype(1),
                           gr.grad_buffer(weight).data());
    if (bias.valid() && bias.requires_grad()) {
      Tensor<Dtype>& db = gr.grad_buffer(bias);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) db[j] += go[static_cast<std::size_t>(i) * o + j];
    }
  });
}

template <typename Dtype>
Var<Dtype> relu(Var<Dtype> x) {
  return unary(
      x, [](Dtype v) { return v > 0 ? v : Dtype(0); },
      [](Dtype v, Dtype) { return v > 0 ? Dtype(1) : Dtype(0); });
}

template <typename Dtype>
Var<Dtype> leaky_relu(Var<Dtype> x, Dtype slope) {
  return unary(
      x, [slope](Dtype v) { return v > 0 ? v : slope * v; },
      [slope](Dtype v, Dtype) { return v > 0 ? Dtype(1) : slope; });
}

template <typename Dtype>
Var<Dtype> tanh(Var<Dtype> x) {
  return unary(
      x, [](Dtype v) { return std::tanh(v); }, [](Dtype, Dtype y) { return Dtype(1) - y * y; });
}

template <typename Dtype>
Var<Dtype> sigmoid(Var<Dtype> x) {
  return unary(
      x, [](Dtype v) { return Dtype(1) / (Dtype(1) + std::exp(-v)); },
      [](Dtype, Dtype y) { return y * (Dtype(1) - y); });
}

template <typename Dtype>
Var<Dtype> add(Var<Dtype> a, Var<Dtype> b) {
  check_same_shape(a.shape(), b.shape(), "add");
  Tensor<Dtype> y(a.shape());
  for (std::size_t i = 0; i < y.count(); ++i) y[i] = a.value()[i] + b.value()[i];
  return a.graph().record(std::move(y), {a, b}, [a, b](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    gr.accumulate(a, go);
    gr.accumulate(b, go);
  });
}

template <typename Dtype>
Var<Dtype> sub(Var<Dtype> a, Var<Dtype> b) {
  check_same_shape(a.shape(), b.shape(), "sub");
  Tensor<Dtype> y(a.shape());
  for (std::size_t i = 0; i < y.count(); ++i) y[i] = a.value()[i] - b.value()[i];
  return a.graph().record(std::move(y), {a, b}, [a, b](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    gr.accumulate(a, go);
    if (b.requires_grad()) {
      Tensor<Dtype>& gb = gr.grad_buffer(b);
      for (std::size_t i = 0; i < go.count(); ++i) gb[i] -= go[i];
    }
  });
}

template <typename Dtype>
Var<Dtype> mul(Var<Dtype> a, Var<Dtype> b) {
  check_same_shape(a.shape(), b.shape(), "mul");
  Tensor<Dtype> y(a.shape());
  for (std::size_t i = 0; i < y.count(); ++i) y[i] = a.value()[i] * b.value()[i];
  return a.graph().record(std::move(y), {a, b}, [a, b](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    if (a.requires_grad()) {
      Tensor<Dtype>& ga = gr.grad_buffer(a);
      for (std::size_t i = 0; i < go.count(); ++i) ga[i] += go[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      Tensor<Dtype>& gb = gr.grad_buffer(b);
      for (std::size_t i = 0; i < go.count(); ++i) gb[i] += go[i] * a.value()[i];
    }
  });
}

template <typename Dtype>
Var<Dtype> scale(Var<Dtype> a, Dtype s) {
  Tensor<Dtype> y(a.shape());
  for (std::size_t i = 0; i < y.count(); ++i) y[i] = a.value()[i] * s;
  return a.graph().record(std::move(y), {a}, [a, s](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype>& ga = gr.grad_buffer(a);
    for (std::size_t i = 0; i < go.count(); ++i) ga[i] += go[i] * s;
  });
}

template <typename Dtype>
Var<Dtype> one_minus(Var<Dtype> a) {
  Tensor<Dtype> y(a.shape());
  for (std::size_t i = 0; i < y.count(); ++i) y[i] = Dtype(1) - a.value()[i];
  return a.graph().record(std::move(y), {a}, [a](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype>& ga = gr.grad_buffer(a);
    for (std::size_t i = 0; i < go.count(); ++i) ga[i] -= go[i];
  });
}

template <typename Dtype>
Var<Dtype> broadcast_channels(Var<Dtype> mask, int channels) {
  const Tensor<Dtype>& m = mask.value();
  if (m.ndim() != 4 || m.dim(1) != 1)
    throw ShapeError("broadcast_channels expects an N x 1 x H x W map, got " + shape_string(m.shape()));
  const int n = m.dim(0);
  const std::size_t plane = static_cast<std::size_t>(m.dim(2)) * m.dim(3);
  Tensor<Dtype> y({n, channels, m.dim(2), m.dim(3)});
  for (int s = 0; s < n; ++s)
    for (int c = 0; c < channels; ++c)
      std::copy_n(m.data() + s * plane, plane, y.data() + (static_cast<std::size_t>(s) * channels + c) * plane);
  return mask.graph().record(std::move(y), {mask}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype>& gm = gr.grad_buffer(mask);
    for (int s = 0; s < n; ++s)
      for (int c = 0; c < channels; ++c) {
        const Dtype* src = go.data() + (static_cast<std::size_t>(s) * channels + c) * plane;
        Dtype* dst = gm.data() + s * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
      }
  });
}

template <typename Dtype>
Var<Dtype> dropout(Var<Dtype> x, Dtype rate) {
  Graph<Dtype>& g = x.graph();
  if (!g.training() || rate <= 0) return x;
  if (!g.rng()) throw Error("dropout in training mode requires a graph rng");
  std::bernoulli_distribution keep(1.0 - static_cast<double>(rate));
  const Dtype inv = Dtype(1) / (Dtype(1) - rate);
  auto mask = std::make_shared<std::vector<Dtype>>(x.value().count());
  Tensor<Dtype> y(x.shape());
  for (std::size_t i = 0; i < y.count(); ++i) {
    (*mask)[i] = keep(*g.rng()) ? inv : Dtype(0);
    y[i] = x.value()[i] * (*mask)[i];
  }
  return g.record(std::move(y), {x}, [x, mask](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype>& gx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < go.count(); ++i) gx[i] += go[i] * (*mask)[i];
  });
}

template <typename Dtype>
Var<Dtype> stripe_pool(Var<Dtype> x, int stripes) {
  const Tensor<Dtype>& xv = x.value();
  if (xv.ndim() != 4) throw ShapeError("stripe_pool expects a rank-4 input");
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  if (stripes < 1 || h % stripes != 0)
    throw ShapeError("stripe_pool: height " + std::to_string(h) + " not divisible into " +
                     std::to_string(stripes) + " stripes");
  const int band = h / stripes;
  const Dtype inv = Dtype(1) / (band * w);
  Tensor<Dtype> y({n, c * stripes});
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch)
      for (int b = 0; b < stripes; ++b) {
        Dtype acc = 0;
        for (int i = b * band; i < (b + 1) * band; ++i)
          for (int j = 0; j < w; ++j) acc += xv.at(s, ch, i, j);
        y[static_cast<std::size_t>(s) * c * stripes + ch * stripes + b] = acc * inv;
      }
  return x.graph().record(std::move(y), {x}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype>& gx = gr.grad_buffer(x);
    for (int s = 0; s < n; ++s)
      for (int ch = 0; ch < c; ++ch)
        for (int b = 0; b < stripes; ++b) {
          const Dtype v = go[static_cast<std::size_t>(s) * c * stripes + ch * stripes + b] * inv;
          for (int i = b * band; i < (b + 1) * band; ++i)
            for (int j = 0; j < w; ++j) gx.at(s, ch, i, j) += v;
        }
  });
}

template <typename Dtype>
Var<Dtype> l2_normalize(Var<Dtype> x, Dtype eps) {
  const Tensor<Dtype>& xv = x.value();
  if (xv.ndim() != 2) throw ShapeError("l2_normalize expects an N x F input");
  const int n = xv.dim(0), f = xv.dim(1);
  auto norms = std::make_shared<std::vector<Dtype>>(n);
  Tensor<Dtype> y(xv.shape());
  for (int i = 0; i < n; ++i) {
    Dtype sq = 0;
    for (int j = 0; j < f; ++j) sq += xv[static_cast<std::size_t>(i) * f + j] * xv[static_cast<std::size_t>(i) * f + j];
    const Dtype norm = std::max(std::sqrt(sq), eps);
    (*norms)[i] = norm;
    for (int j = 0; j < f; ++j) y[static_cast<std::size_t>(i) * f + j] = xv[static_cast<std::size_t>(i) * f + j] / norm;
  }
  auto self = std::make_shared<int>(-1);
  Var<Dtype> out = x.graph().record(std::move(y), {x}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    const Tensor<Dtype>& yv = gr.value(*self);
    Tensor<Dtype>& gx = gr.grad_buffer(x);
    for (int i = 0; i < n; ++i) {
      Dtype dot = 0;
      for (int j = 0; j < f; ++j) dot += go[static_cast<std::size_t>(i) * f + j] * yv[static_cast<std::size_t>(i) * f + j];
      for (int j = 0; j < f; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * f + j;
        gx[k] += (go[k] - yv[k] * dot) / (*norms)[i];
      }
    }
  });
  *self = out.id();
  return out;
}

template <typename Dtype>
Var<Dtype> concat_batch(const std::vector<Var<Dtype>>& parts) {
  if (parts.empty()) throw ShapeError("concat_batch of no tensors");
  Shape shape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    s[0] = shape[0];
    check_same_shape(shape, s, "concat_batch");
    total += p.dim(0);
  }
  shape[0] = total;
  Tensor<Dtype> y(shape);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().vec().begin(), p.value().vec().end(), y.data() + offset);
    offset += p.value().count();
  }
  return parts[0].graph().record(std::move(y), parts, [parts](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t cnt = p.value().count();
      if (p.requires_grad()) {
        Tensor<Dtype>& gp = gr.grad_buffer(p);
        for (std::size_t i = 0; i < cnt; ++i) gp[i] += go[off + i];
      }
      off += cnt;
    }
  });
}

template <typename Dtype>
Var<Dtype> slice_batch(Var<Dtype> x, int begin, int end) {
  const Tensor<Dtype>& xv = x.value();
  if (begin < 0 || end > xv.dim(0) || begin >= end)
    throw ShapeError("slice_batch: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of batch " + std::to_string(xv.dim(0)));
  Shape shape = xv.shape();
  shape[0] = end - begin;
  const std::size_t step = xv.stride0();
  Tensor<Dtype> y(shape);
  std::copy_n(xv.data() + begin * step, y.count(), y.data());
  return x.graph().record(std::move(y), {x}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype>& gx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < go.count(); ++i) gx[begin * step + i] += go[i];
  });
}

template <typename Dtype>
Var<Dtype> mean(Var<Dtype> x) {
  const Tensor<Dtype>& xv = x.value();
  if (xv.empty()) throw ShapeError("mean of an empty tensor");
  Dtype acc = 0;
  for (std::size_t i = 0; i < xv.count(); ++i) acc += xv[i];
  const Dtype inv = Dtype(1) / static_cast<Dtype>(xv.count());
  Tensor<Dtype> y({1}, acc * inv);
  return x.graph().record(std::move(y), {x}, [x, inv](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype>& gx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < gx.count(); ++i) gx[i] += go[0] * inv;
  });
}

template <typename Dtype>
Var<Dtype> detach(Var<Dtype> x) {
  return x.graph().constant(x.value());
}

#define EDAAN_INSTANTIATE_OPS(T)                                                              \
  template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>, int, int);                                \
  template Var<T> conv_transpose2d<T>(Var<T>, Var<T>, Var<T>, int, int);                      \
  template Var<T> instance_norm<T>(Var<T>, Var<T>, Var<T>, T);                                \
  template Var<T> batch_norm<T>(Var<T>, Var<T>, Var<T>, Parameter<T>&, Parameter<T>&, T, T);  \
  template Var<T> linear<T>(Var<T>, Var<T>, Var<T>);                                          \
  template Var<T> relu<T>(Var<T>);                                                            \
  template Var<T> leaky_relu<T>(Var<T>, T);                                                   \
  template Var<T> tanh<T>(Var<T>);                                                            \
  template Var<T> sigmoid<T>(Var<T>);                                                         \
  template Var<T> add<T>(Var<T>, Var<T>);                                                     \
  template Var<T> sub<T>(Var<T>, Var<T>);                                                     \
  template Var<T> mul<T>(Var<T>, Var<T>);                                                     \
  template Var<T> scale<T>(Var<T>, T);                                                        \
  template Var<T> one_minus<T>(Var<T>);                                                       \
  template Var<T> broadcast_channels<T>(Var<T>, int);                                         \
  template Var<T> dropout<T>(Var<T>, T);                                                      \
  template Var<T> stripe_pool<T>(Var<T>, int);                                                \
  template Var<T> l2_normalize<T>(Var<T>, T);                                                 \
  template Var<T> concat_batch<T>(const std::vector<Var<T>>&);                                \
  template Var<T> slice_batch<T>(Var<T>, int, int);                                           \
  template Var<T> mean<T>(Var<T>);                                                            \
  template Var<T> detach<T>(Var<T>);

EDAAN_INSTANTIATE_OPS(float)
EDAAN_INSTANTIATE_OPS(double)

}  // namespace ag

template class Graph<float>;
template class Graph<double>;

}  // namespace edaan
