#include "edaan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace edaan {

void LossWeights::validate() const {
  const std::pair<const char*, double> checks[] = {
      {"loss.lambda_attn", lambda_attn},   {"loss.lambda_quartet", lambda_quartet},
      {"loss.lambda_id", lambda_id},       {"loss.lambda_cycle", lambda_cycle},
      {"loss.margin_tau1", margin_tau1},   {"loss.margin_tau2", margin_tau2}};
  for (const auto& [name, value] : checks)
    if (!(value >= 0.0) || !std::isfinite(value))
      throw ConfigError(std::string(name) + " must be a finite value >= 0");
}

LossReport total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, const std::optional<double>*> terms[] = {
      {"gan_s", &c.gan_s}, {"gan_t", &c.gan_t},     {"cycle", &c.cycle},
      {"attn", &c.attn},   {"quartet", &c.quartet}, {"id", &c.id}};
  for (const auto& [name, value] : terms)
    if (*value && !std::isfinite(**value))
      throw NumericError(name, std::string("non-finite loss term '") + name + "'");
  LossReport r;
  static_cast<LossComponents&>(r) = c;
  r.total = c.gan_s.value_or(0.0) + c.gan_t.value_or(0.0) + w.lambda_cycle * c.cycle.value_or(0.0) +
            w.lambda_attn * c.attn.value_or(0.0) + w.lambda_quartet * c.quartet.value_or(0.0) +
            w.lambda_id * c.id.value_or(0.0);
  if (!std::isfinite(r.total)) throw NumericError("total", "non-finite total loss");
  return r;
}

std::vector<std::pair<std::string, double>> report_terms(const LossReport& r) {
  std::vector<std::pair<std::string, double>> out;
  if (r.gan_s) out.emplace_back("gan_s", *r.gan_s);
  if (r.gan_t) out.emplace_back("gan_t", *r.gan_t);
  if (r.cycle) out.emplace_back("cycle", *r.cycle);
  if (r.attn) out.emplace_back("attn", *r.attn);
  if (r.quartet) out.emplace_back("quartet", *r.quartet);
  if (r.id) out.emplace_back("id", *r.id);
  out.emplace_back("total", r.total);
  return out;
}

namespace losses {

namespace {

template <typename Dtype>
void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": size mismatch " + std::to_string(a) + " vs " + std::to_string(b));
}

template <typename Dtype>
bool wants(std::span<Dtype> s) {
  return !s.empty();
}

template <typename Dtype>
Dtype clamp_score(Dtype s, bool& clamped) {
  const Dtype lo = static_cast<Dtype>(kScoreClamp), hi = Dtype(1) - static_cast<Dtype>(kScoreClamp);
  clamped = s < lo || s > hi;
  return std::clamp(s, lo, hi);
}

}  // namespace

template <typename Dtype>
Dtype adversarial_loss_d(std::span<const Dtype> real, std::span<const Dtype> fake,
                         std::span<Dtype> d_real, std::span<Dtype> d_fake) {
  if (real.empty() || fake.empty()) throw ShapeError("adversarial_loss_d: empty batch");
  const Dtype inv_r = Dtype(1) / real.size(), inv_f = Dtype(1) / fake.size();
  Dtype lr = 0, lf = 0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    bool clamped;
    const Dtype s = clamp_score(real[i], clamped);
    lr += std::log(s);
    if (wants(d_real)) d_real[i] = clamped ? Dtype(0) : -inv_r / s;
  }
  for (std::size_t i = 0; i < fake.size(); ++i) {
    bool clamped;
    const Dtype s = clamp_score(fake[i], clamped);
    lf += std::log(Dtype(1) - s);
    if (wants(d_fake)) d_fake[i] = clamped ? Dtype(0) : inv_f / (Dtype(1) - s);
  }
  return -lr * inv_r - lf * inv_f;
}

template <typename Dtype>
Dtype adversarial_loss_g(std::span<const Dtype> fake, std::span<Dtype> d_fake) {
  if (fake.empty()) throw ShapeError("adversarial_loss_g: empty batch");
  const Dtype inv = Dtype(1) / fake.size();
  Dtype l = 0;
  for (std::size_t i = 0; i < fake.size(); ++i) {
    bool clamped;
    const Dtype s = clamp_score(fake[i], clamped);
    l += std::log(s);
    if (wants(d_fake)) d_fake[i] = clamped ? Dtype(0) : -inv / s;
  }
  return -l * inv;
}

template <typename Dtype>
Dtype mean_l1(std::span<const Dtype> a, std::span<const Dtype> b, std::span<Dtype> d_a,
              std::span<Dtype> d_b) {
  require_same_size<Dtype>(a.size(), b.size(), "mean_l1");
  if (a.empty()) throw ShapeError("mean_l1: empty input");
  const Dtype inv = Dtype(1) / a.size();
  Dtype acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Dtype d = a[i] - b[i];
    acc += std::abs(d);
    const Dtype sgn = d > 0 ? inv : (d < 0 ? -inv : Dtype(0));
    if (wants(d_a)) d_a[i] = sgn;
    if (wants(d_b)) d_b[i] = -sgn;
  }
  return acc * inv;
}

template <typename Dtype>
Dtype cycle_loss(std::span<const Dtype> x_s, std::span<const Dtype> recon_s, std::span<const Dtype> x_t,
                 std::span<const Dtype> recon_t, std::span<Dtype> d_recon_s, std::span<Dtype> d_recon_t) {
  return mean_l1<Dtype>(recon_s, x_s, d_recon_s, {}) + mean_l1<Dtype>(recon_t, x_t, d_recon_t, {});
}

template <typename Dtype>
Dtype attention_consistency_loss(std::span<const Dtype> a_src, std::span<const Dtype> a_translated_src,
                                 std::span<const Dtype> a_tgt, std::span<const Dtype> a_translated_tgt,
                                 std::span<Dtype> d_a_src, std::span<Dtype> d_a_translated_src,
                                 std::span<Dtype> d_a_tgt, std::span<Dtype> d_a_translated_tgt) {
  return mean_l1<Dtype>(a_src, a_translated_src, d_a_src, d_a_translated_src) +
         mean_l1<Dtype>(a_tgt, a_translated_tgt, d_a_tgt, d_a_translated_tgt);
}

template <typename Dtype>
Dtype squared_distance(std::span<const Dtype> a, std::span<const Dtype> b, int dim, int i) {
  Dtype acc = 0;
  const std::size_t off = static_cast<std::size_t>(i) * dim;
  for (int k = 0; k < dim; ++k) {
    const Dtype d = a[off + k] - b[off + k];
    acc += d * d;
  }
  return acc;
}

namespace {

// d/du of D(u, v) = 2 (u - v), added with weight `w` into grad_u (and -w into grad_v).
template <typename Dtype>
void add_distance_grad(std::span<const Dtype> u, std::span<const Dtype> v, int dim, int i, Dtype w,
                       std::span<Dtype> grad_u, std::span<Dtype> grad_v) {
  const std::size_t off = static_cast<std::size_t>(i) * dim;
  for (int k = 0; k < dim; ++k) {
    const Dtype g = Dtype(2) * w * (u[off + k] - v[off + k]);
    if (!grad_u.empty()) grad_u[off + k] += g;
    if (!grad_v.empty()) grad_v[off + k] -= g;
  }
}

template <typename Dtype>
int batch_rows(std::size_t size, int dim, const char* what) {
  if (dim <= 0 || size % static_cast<std::size_t>(dim) != 0)
    throw ShapeError(std::string(what) + ": input size " + std::to_string(size) +
                     " is not a multiple of the embedding dimension " + std::to_string(dim));
  if (size == 0) throw ShapeError(std::string(what) + ": empty batch");
  return static_cast<int>(size / dim);
}

template <typename Dtype>
void zero(std::span<Dtype> s) {
  std::fill(s.begin(), s.end(), Dtype(0));
}

}  // namespace

template <typename Dtype>
Dtype triplet_loss(std::span<const Dtype> anchor, std::span<const Dtype> positive,
                   std::span<const Dtype> negative, int dim, const LossWeights& weights,
                   std::span<Dtype> d_anchor, std::span<Dtype> d_positive, std::span<Dtype> d_negative) {
  require_same_size<Dtype>(anchor.size(), positive.size(), "triplet_loss");
  require_same_size<Dtype>(anchor.size(), negative.size(), "triplet_loss");
  const int n = batch_rows<Dtype>(anchor.size(), dim, "triplet_loss");
  zero(d_anchor), zero(d_positive), zero(d_negative);
  const Dtype tau1 = static_cast<Dtype>(weights.margin_tau1);
  const Dtype inv = Dtype(1) / n;
  Dtype total = 0;
  for (int i = 0; i < n; ++i) {
    const Dtype gap = squared_distance(anchor, positive, dim, i) - squared_distance(anchor, negative, dim, i);
    bool active;
    if (weights.margin_form == MarginForm::kCanonical) {
      active = gap + tau1 > 0;
      total += active ? gap + tau1 : Dtype(0);
    } else {
      active = gap > tau1;
      total += active ? gap : tau1;
    }
    if (active) {
      add_distance_grad<Dtype>(anchor, positive, dim, i, inv, d_anchor, d_positive);
      add_distance_grad<Dtype>(anchor, negative, dim, i, -inv, d_anchor, d_negative);
    }
  }
  return total * inv;
}

template <typename Dtype>
Dtype quartet_loss(std::span<const Dtype> x1, std::span<const Dtype> x2, std::span<const Dtype> x3,
                   std::span<const Dtype> x4, int dim, const LossWeights& weights, std::span<Dtype> d_x1,
                   std::span<Dtype> d_x2, std::span<Dtype> d_x3, std::span<Dtype> d_x4) {
  for (auto s : {x2, x3, x4}) require_same_size<Dtype>(x1.size(), s.size(), "quartet_loss");
  const int n = batch_rows<Dtype>(x1.size(), dim, "quartet_loss");
  zero(d_x1), zero(d_x2), zero(d_x3), zero(d_x4);
  const Dtype tau1 = static_cast<Dtype>(weights.margin_tau1), tau2 = static_cast<Dtype>(weights.margin_tau2);
  const Dtype inv = Dtype(1) / n;
  Dtype total = 0;
  for (int i = 0; i < n; ++i) {
    const Dtype d12 = squared_distance(x1, x2, dim, i);
    const Dtype d13 = squared_distance(x1, x3, dim, i);
    const Dtype d43 = squared_distance(x4, x3, dim, i);
    bool first_active, second_active;
    if (weights.margin_form == MarginForm::kCanonical) {
      const Dtype h1 = d12 - d13 + tau1, h2 = d12 - d43 + tau2;
      first_active = h1 > 0;
      second_active = h2 > 0;
      total += (first_active ? h1 : Dtype(0)) + (second_active ? h2 : Dtype(0));
    } else {
      const Dtype arg = (d12 - d13) + (d12 - d43);
      first_active = second_active = arg > tau1;
      total += first_active ? arg : tau1;
    }
    if (first_active) {
      add_distance_grad<Dtype>(x1, x2, dim, i, inv, d_x1, d_x2);
      add_distance_grad<Dtype>(x1, x3, dim, i, -inv, d_x1, d_x3);
    }
    if (second_active) {
      add_distance_grad<Dtype>(x1, x2, dim, i, inv, d_x1, d_x2);
      add_distance_grad<Dtype>(x4, x3, dim, i, -inv, d_x4, d_x3);
    }
  }
  return total * inv;
}

template <typename Dtype>
Dtype identity_loss(std::span<const Dtype> logits, std::span<const int> labels, int num_classes,
                    std::span<Dtype> d_logits) {
  if (num_classes <= 0 || logits.size() != labels.size() * static_cast<std::size_t>(num_classes))
    throw ShapeError("identity_loss: logits size " + std::to_string(logits.size()) + " does not match " +
                     std::to_string(labels.size()) + " labels x " + std::to_string(num_classes) + " classes");
  if (labels.empty()) throw ShapeError("identity_loss: empty batch");
  const int n = static_cast<int>(labels.size());
  const Dtype inv = Dtype(1) / n;
  Dtype total = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw DataError("identity_loss: label " + std::to_string(labels[i]) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    const Dtype* row = logits.data() + static_cast<std::size_t>(i) * num_classes;
    const Dtype mx = *std::max_element(row, row + num_classes);
    Dtype z = 0;
    for (int c = 0; c < num_classes; ++c) z += std::exp(row[c] - mx);
    const Dtype log_z = std::log(z) + mx;
    total += log_z - row[labels[i]];
    if (!d_logits.empty()) {
      Dtype* g = d_logits.data() + static_cast<std::size_t>(i) * num_classes;
      for (int c = 0; c < num_classes; ++c) g[c] = (std::exp(row[c] - log_z) - (c == labels[i] ? 1 : 0)) * inv;
    }
  }
  return total * inv;
}

// Graph overloads: forward value computed once, gradient re-derived in backward.

template <typename Dtype>
Var<Dtype> adversarial_loss_d(Var<Dtype> real_scores, Var<Dtype> fake_scores) {
  const Dtype v = adversarial_loss_d<Dtype>(real_scores.value().span(), fake_scores.value().span());
  return real_scores.graph().record(Tensor<Dtype>({1}, v), {real_scores, fake_scores},
                                    [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
                                      Tensor<Dtype> gr_real(real_scores.shape()), gr_fake(fake_scores.shape());
                                      adversarial_loss_d<Dtype>(real_scores.value().span(), fake_scores.value().span(),
                                                                gr_real.span(), gr_fake.span());
                                      for (auto& x : gr_real.vec()) x *= go[0];
                                      for (auto& x : gr_fake.vec()) x *= go[0];
                                      gr.accumulate(real_scores, gr_real);
                                      gr.accumulate(fake_scores, gr_fake);
                                    });
}

template <typename Dtype>
Var<Dtype> adversarial_loss_g(Var<Dtype> fake_scores) {
  const Dtype v = adversarial_loss_g<Dtype>(fake_scores.value().span());
  return fake_scores.graph().record(Tensor<Dtype>({1}, v), {fake_scores},
                                    [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
                                      Tensor<Dtype> g(fake_scores.shape());
                                      adversarial_loss_g<Dtype>(fake_scores.value().span(), g.span());
                                      for (auto& x : g.vec()) x *= go[0];
                                      gr.accumulate(fake_scores, g);
                                    });
}

template <typename Dtype>
Var<Dtype> mean_l1(Var<Dtype> a, Var<Dtype> b) {
  check_same_shape(a.shape(), b.shape(), "mean_l1");
  const Dtype v = mean_l1<Dtype>(a.value().span(), b.value().span());
  return a.graph().record(Tensor<Dtype>({1}, v), {a, b}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype> ga(a.shape()), gb(b.shape());
    mean_l1<Dtype>(a.value().span(), b.value().span(), ga.span(), gb.span());
    for (auto& x : ga.vec()) x *= go[0];
    for (auto& x : gb.vec()) x *= go[0];
    gr.accumulate(a, ga);
    gr.accumulate(b, gb);
  });
}

template <typename Dtype>
Var<Dtype> metric_loss(Var<Dtype> x1, Var<Dtype> x2, Var<Dtype> x3, Var<Dtype> x4, const LossWeights& weights) {
  if (x1.value().ndim() != 2) throw ShapeError("metric_loss expects N x D embeddings");
  const int dim = x1.dim(1);
  const bool quartet = weights.metric == MetricLoss::kQuartet;
  const Dtype v = quartet ? quartet_loss<Dtype>(x1.value().span(), x2.value().span(), x3.value().span(),
                                                x4.value().span(), dim, weights)
                          : triplet_loss<Dtype>(x1.value().span(), x2.value().span(), x3.value().span(), dim,
                                                weights);
  std::vector<Var<Dtype>> parents{x1, x2, x3};
  if (quartet) parents.push_back(x4);
  return x1.graph().record(Tensor<Dtype>({1}, v), parents, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype> g1(x1.shape()), g2(x1.shape()), g3(x1.shape()), g4(x1.shape());
    if (quartet)
      quartet_loss<Dtype>(x1.value().span(), x2.value().span(), x3.value().span(), x4.value().span(), dim,
                          weights, g1.span(), g2.span(), g3.span(), g4.span());
    else
      triplet_loss<Dtype>(x1.value().span(), x2.value().span(), x3.value().span(), dim, weights, g1.span(),
                          g2.span(), g3.span());
    for (Tensor<Dtype>* t : {&g1, &g2, &g3, &g4})
      for (auto& x : t->vec()) x *= go[0];
    gr.accumulate(x1, g1);
    gr.accumulate(x2, g2);
    gr.accumulate(x3, g3);
    if (quartet) gr.accumulate(x4, g4);
  });
}

template <typename Dtype>
Var<Dtype> identity_loss(Var<Dtype> logits, const std::vector<int>& labels) {
  if (logits.value().ndim() != 2) throw ShapeError("identity_loss expects N x C logits");
  const int classes = logits.dim(1);
  const Dtype v = identity_loss<Dtype>(logits.value().span(), labels, classes);
  return logits.graph().record(Tensor<Dtype>({1}, v), {logits}, [=](Graph<Dtype>& gr, const Tensor<Dtype>& go) {
    Tensor<Dtype> g(logits.shape());
    identity_loss<Dtype>(logits.value().span(), labels, classes, g.span());
    for (auto& x : g.vec()) x *= go[0];
    gr.accumulate(logits, g);
  });
}

#define EDAAN_INSTANTIATE_LOSSES(T)                                                                       \
  template T adversarial_loss_d<T>(std::span<const T>, std::span<const T>, std::span<T>, std::span<T>);   \
  template T adversarial_loss_g<T>(std::span<const T>, std::span<T>);                                     \
  template T mean_l1<T>(std::span<const T>, std::span<const T>, std::span<T>, std::span<T>);              \
  template T cycle_loss<T>(std::span<const T>, std::span<const T>, std::span<const T>, std::span<const T>, \
                           std::span<T>, std::span<T>);                                                   \
  template T attention_consistency_loss<T>(std::span<const T>, std::span<const T>, std::span<const T>,    \
                                           std::span<const T>, std::span<T>, std::span<T>, std::span<T>,  \
                                           std::span<T>);                                                 \
  template T squared_distance<T>(std::span<const T>, std::span<const T>, int, int);                      \
  template T triplet_loss<T>(std::span<const T>, std::span<const T>, std::span<const T>, int,             \
                             const LossWeights&, std::span<T>, std::span<T>, std::span<T>);               \
  template T quartet_loss<T>(std::span<const T>, std::span<const T>, std::span<const T>,                  \
                             std::span<const T>, int, const LossWeights&, std::span<T>, std::span<T>,     \
                             std::span<T>, std::span<T>);                                                 \
  template T identity_loss<T>(std::span<const T>, std::span<const int>, int, std::span<T>);              \
  template Var<T> adversarial_loss_d<T>(Var<T>, Var<T>);                                                  \
  template Var<T> adversarial_loss_g<T>(Var<T>);                                                          \
  template Var<T> mean_l1<T>(Var<T>, Var<T>);                                                             \
  template Var<T> metric_loss<T>(Var<T>, Var<T>, Var<T>, Var<T>, const LossWeights&);                     \
  template Var<T> identity_loss<T>(Var<T>, const std::vector<int>&);

EDAAN_INSTANTIATE_LOSSES(float)
EDAAN_INSTANTIATE_LOSSES(double)

}  // namespace losses
}  // namespace edaan
