#ifndef EDAAN_LOSSES_HPP_
#define EDAAN_LOSSES_HPP_

// Loss terms of the joint translation + re-identification objective.
//
// Each pure function returns the loss value and, when the corresponding
// output span is non-empty, writes d(loss)/d(input) into it. The graph
// overloads at the bottom wrap the same functions for training.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edaan/autograd.hpp"

namespace edaan {

// canonical: max(0, d_ap - d_an + margin). paper_literal: max(d_ap - d_an, margin).
enum class MarginForm { kCanonical, kPaperLiteral };
enum class MetricLoss { kQuartet, kTriplet };

struct LossWeights {
  double lambda_attn = 10.0;
  double lambda_quartet = 1.0;
  double lambda_id = 1.0;
  double lambda_cycle = 10.0;
  double margin_tau1 = 0.3;
  double margin_tau2 = 0.15;
  MarginForm margin_form = MarginForm::kCanonical;
  MetricLoss metric = MetricLoss::kQuartet;

  void validate() const;
};

// Loss terms of one step; absent terms are not part of the active objective.
struct LossComponents {
  std::optional<double> gan_s;  // S->T mapping, scored by D_T
  std::optional<double> gan_t;  // T->S mapping, scored by D_S
  std::optional<double> cycle;
  std::optional<double> attn;  // sum of both domains' consistency terms
  std::optional<double> quartet;  // or triplet, per LossWeights::metric
  std::optional<double> id;
};

struct LossReport : LossComponents {
  double total = 0.0;
};

// total = gan_s + gan_t + lambda_cycle*cycle + lambda_attn*attn
//       + lambda_quartet*quartet + lambda_id*id.
// Throws NumericError naming the first non-finite component.
LossReport total_loss(const LossComponents& components, const LossWeights& weights);

// (name, value) of each present term followed by ("total", total).
std::vector<std::pair<std::string, double>> report_terms(const LossReport& report);

namespace losses {

inline constexpr double kScoreClamp = 1e-7;

// -mean(log real) - mean(log(1 - fake)); scores clamped to [1e-7, 1 - 1e-7].
template <typename Dtype>
Dtype adversarial_loss_d(std::span<const Dtype> real, std::span<const Dtype> fake,
                         std::span<Dtype> d_real = {}, std::span<Dtype> d_fake = {});

// Non-saturating generator loss -mean(log fake).
template <typename Dtype>
Dtype adversarial_loss_g(std::span<const Dtype> fake, std::span<Dtype> d_fake = {});

// mean |a - b|.
template <typename Dtype>
Dtype mean_l1(std::span<const Dtype> a, std::span<const Dtype> b, std::span<Dtype> d_a = {},
              std::span<Dtype> d_b = {});

// mean-L1(recon_s - x_s) + mean-L1(recon_t - x_t). Gradients w.r.t. the reconstructions.
template <typename Dtype>
Dtype cycle_loss(std::span<const Dtype> x_s, std::span<const Dtype> recon_s,
                 std::span<const Dtype> x_t, std::span<const Dtype> recon_t,
                 std::span<Dtype> d_recon_s = {}, std::span<Dtype> d_recon_t = {});

// mean-L1(A_S(x_s), A_T(G(x_s))) + mean-L1(A_T(x_t), A_S(F(x_t))).
template <typename Dtype>
Dtype attention_consistency_loss(std::span<const Dtype> a_src, std::span<const Dtype> a_translated_src,
                                 std::span<const Dtype> a_tgt, std::span<const Dtype> a_translated_tgt,
                                 std::span<Dtype> d_a_src = {}, std::span<Dtype> d_a_translated_src = {},
                                 std::span<Dtype> d_a_tgt = {}, std::span<Dtype> d_a_translated_tgt = {});

// Squared Euclidean distance between row `i` of two row-major matrices.
template <typename Dtype>
Dtype squared_distance(std::span<const Dtype> a, std::span<const Dtype> b, int dim, int i);

// Batch of `n = anchor.size() / dim` triplets; mean over the batch.
template <typename Dtype>
Dtype triplet_loss(std::span<const Dtype> anchor, std::span<const Dtype> positive,
                   std::span<const Dtype> negative, int dim, const LossWeights& weights,
                   std::span<Dtype> d_anchor = {}, std::span<Dtype> d_positive = {},
                   std::span<Dtype> d_negative = {});

// x1 anchor, x2 positive, x3 negative, x4 second negative.
// canonical: max(0, D12 - D13 + tau1) + max(0, D12 - D43 + tau2).
// paper_literal: max(D12 - D13 + D12 - D43, tau1).
template <typename Dtype>
Dtype quartet_loss(std::span<const Dtype> x1, std::span<const Dtype> x2, std::span<const Dtype> x3,
                   std::span<const Dtype> x4, int dim, const LossWeights& weights,
                   std::span<Dtype> d_x1 = {}, std::span<Dtype> d_x2 = {}, std::span<Dtype> d_x3 = {},
                   std::span<Dtype> d_x4 = {});

// mean(-log softmax(logits)[label]); logits is N x num_classes.
template <typename Dtype>
Dtype identity_loss(std::span<const Dtype> logits, std::span<const int> labels, int num_classes,
                    std::span<Dtype> d_logits = {});

// Graph overloads.
template <typename Dtype>
Var<Dtype> adversarial_loss_d(Var<Dtype> real_scores, Var<Dtype> fake_scores);
template <typename Dtype>
Var<Dtype> adversarial_loss_g(Var<Dtype> fake_scores);
template <typename Dtype>
Var<Dtype> mean_l1(Var<Dtype> a, Var<Dtype> b);
// Quartet or triplet per weights.metric (x4 ignored for triplet).
template <typename Dtype>
Var<Dtype> metric_loss(Var<Dtype> x1, Var<Dtype> x2, Var<Dtype> x3, Var<Dtype> x4,
                       const LossWeights& weights);
template <typename Dtype>
Var<Dtype> identity_loss(Var<Dtype> logits, const std::vector<int>& labels);

}  // namespace losses
}  // namespace edaan

#endif  // EDAAN_LOSSES_HPP_
