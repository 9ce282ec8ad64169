#ifndef EDAAN_TRANSLATE_HPP_
#define EDAAN_TRANSLATE_HPP_

// Attention-guided composition of translated images:
//   x_b = (1 - A(x)) * G(E(x)),  x_f = A(x) * x,  composed = x_b + x_f.

#include <functional>
#include <span>

#include "edaan/autograd.hpp"
#include "edaan/model.hpp"

namespace edaan {

template <typename Dtype>
struct TranslationOutput {
  Var<Dtype> raw;         // G(E(x))
  Var<Dtype> mask;        // A(x), N x 1 x H x W
  Var<Dtype> background;  // x_b
  Var<Dtype> foreground;  // x_f
  Var<Dtype> composed;
};

// One translation direction as plain callables, so tests can substitute
// identity generators or fixed masks. An empty `attention` means the
// attention path is disabled and the mask is identically zero.
template <typename Dtype>
struct TranslatorFns {
  using Fn = std::function<Var<Dtype>(Graph<Dtype>&, Var<Dtype>)>;
  Fn generate;
  Fn attention;
};

enum class CycleDirection { kS2T2S, kT2S2T };

// Translator of the networks of `from` (source side translates S -> T).
template <typename Dtype>
TranslatorFns<Dtype> make_translator(DomainModelSet<Dtype>& models, Side from, bool attention_enabled);

// Builds x_b, x_f and composed from an image, its raw translation and a mask.
// An invalid `mask` Var is treated as all zeros.
template <typename Dtype>
TranslationOutput<Dtype> compose(Graph<Dtype>& g, Var<Dtype> x, Var<Dtype> raw, Var<Dtype> mask);

template <typename Dtype>
TranslationOutput<Dtype> translate(Graph<Dtype>& g, const TranslatorFns<Dtype>& fns, Var<Dtype> x);

template <typename Dtype>
TranslationOutput<Dtype> translate_s2t(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> x,
                                       bool attention_enabled = true);
template <typename Dtype>
TranslationOutput<Dtype> translate_t2s(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> x,
                                       bool attention_enabled = true);

// Two-step reconstruction. By default the raw generator chain
// G_back(E_back(G_fwd(E_fwd(x)))); with `on_composed` the composed output
// of the first step re-enters the second translator instead.
template <typename Dtype>
Var<Dtype> cycle_reconstruct(Graph<Dtype>& g, const TranslatorFns<Dtype>& forward,
                             const TranslatorFns<Dtype>& backward, Var<Dtype> x, bool on_composed = false);
template <typename Dtype>
Var<Dtype> cycle_reconstruct(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> x,
                             CycleDirection direction, bool attention_enabled = true, bool on_composed = false);

// Graph-free composition with the same arithmetic as compose(): images are
// N x C x H x W, mask N x 1 x H x W (all spans row-major).
template <typename Dtype>
void compose_pixels(std::span<const Dtype> x, std::span<const Dtype> raw, std::span<const Dtype> mask, int n,
                    int channels, int plane, std::span<Dtype> background, std::span<Dtype> foreground,
                    std::span<Dtype> composed);

}  // namespace edaan

#endif  // EDAAN_TRANSLATE_HPP_
