#include "edaan/translate.hpp"

namespace edaan {

template <typename Dtype>
TranslatorFns<Dtype> make_translator(DomainModelSet<Dtype>& models, Side from, bool attention_enabled) {
  DomainNets<Dtype>* nets = &models.nets(from);
  TranslatorFns<Dtype> fns;
  fns.generate = [nets](Graph<Dtype>& g, Var<Dtype> x) { return nets->generate(g, x); };
  if (attention_enabled)
    fns.attention = [nets](Graph<Dtype>& g, Var<Dtype> x) { return forward_attention(g, *nets, x); };
  return fns;
}

template <typename Dtype>
TranslationOutput<Dtype> compose(Graph<Dtype>& g, Var<Dtype> x, Var<Dtype> raw, Var<Dtype> mask) {
  check_same_shape(x.shape(), raw.shape(), "compose (image vs raw translation)");
  if (x.value().ndim() != 4) throw ShapeError("compose expects N x C x H x W images");
  TranslationOutput<Dtype> out;
  out.raw = raw;
  if (!mask.valid()) mask = g.constant(Tensor<Dtype>({x.dim(0), 1, x.dim(2), x.dim(3)}));
  const Shape expected{x.dim(0), 1, x.dim(2), x.dim(3)};
  check_same_shape(mask.shape(), expected, "compose (mask vs image)");
  out.mask = mask;
  Var<Dtype> m = ag::broadcast_channels(mask, x.dim(1));
  out.background = ag::mul(ag::one_minus(m), raw);
  out.foreground = ag::mul(m, x);
  out.composed = ag::add(out.background, out.foreground);
  return out;
}

template <typename Dtype>
TranslationOutput<Dtype> translate(Graph<Dtype>& g, const TranslatorFns<Dtype>& fns, Var<Dtype> x) {
  Var<Dtype> raw = fns.generate(g, x);
  Var<Dtype> mask = fns.attention ? fns.attention(g, x) : Var<Dtype>();
  return compose(g, x, raw, mask);
}

template <typename Dtype>
TranslationOutput<Dtype> translate_s2t(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> x,
                                       bool attention_enabled) {
  return translate(g, make_translator(models, Side::kSource, attention_enabled), x);
}

template <typename Dtype>
TranslationOutput<Dtype> translate_t2s(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> x,
                                       bool attention_enabled) {
  return translate(g, make_translator(models, Side::kTarget, attention_enabled), x);
}

template <typename Dtype>
Var<Dtype> cycle_reconstruct(Graph<Dtype>& g, const TranslatorFns<Dtype>& forward,
                             const TranslatorFns<Dtype>& backward, Var<Dtype> x, bool on_composed) {
  if (!on_composed) return backward.generate(g, forward.generate(g, x));
  return translate(g, backward, translate(g, forward, x).composed).composed;
}

template <typename Dtype>
Var<Dtype> cycle_reconstruct(Graph<Dtype>& g, DomainModelSet<Dtype>& models, Var<Dtype> x,
                             CycleDirection direction, bool attention_enabled, bool on_composed) {
  const Side first = direction == CycleDirection::kS2T2S ? Side::kSource : Side::kTarget;
  const Side second = first == Side::kSource ? Side::kTarget : Side::kSource;
  return cycle_reconstruct(g, make_translator(models, first, attention_enabled),
                           make_translator(models, second, attention_enabled), x, on_composed);
}

template <typename Dtype>
void compose_pixels(std::span<const Dtype> x, std::span<const Dtype> raw, std::span<const Dtype> mask, int n,
                    int channels, int plane, std::span<Dtype> background, std::span<Dtype> foreground,
                    std::span<Dtype> composed) {
  const std::size_t total = static_cast<std::size_t>(n) * channels * plane;
  if (x.size() != total || raw.size() != total || mask.size() != static_cast<std::size_t>(n) * plane ||
      background.size() != total || foreground.size() != total || composed.size() != total)
    throw ShapeError("compose_pixels: buffer sizes do not match the stated geometry");
  for (int s = 0; s < n; ++s)
    for (int c = 0; c < channels; ++c)
      for (int p = 0; p < plane; ++p) {
        const std::size_t i = (static_cast<std::size_t>(s) * channels + c) * plane + p;
        const Dtype a = mask[static_cast<std::size_t>(s) * plane + p];
        background[i] = (Dtype(1) - a) * raw[i];
        foreground[i] = a * x[i];
        composed[i] = background[i] + foreground[i];
      }
}

#define EDAAN_INSTANTIATE_TRANSLATE(T)                                                                   \
  template struct TranslationOutput<T>;                                                                  \
  template TranslatorFns<T> make_translator<T>(DomainModelSet<T>&, Side, bool);                          \
  template TranslationOutput<T> compose<T>(Graph<T>&, Var<T>, Var<T>, Var<T>);                           \
  template TranslationOutput<T> translate<T>(Graph<T>&, const TranslatorFns<T>&, Var<T>);                \
  template TranslationOutput<T> translate_s2t<T>(Graph<T>&, DomainModelSet<T>&, Var<T>, bool);          \
  template TranslationOutput<T> translate_t2s<T>(Graph<T>&, DomainModelSet<T>&, Var<T>, bool);          \
  template Var<T> cycle_reconstruct<T>(Graph<T>&, const TranslatorFns<T>&, const TranslatorFns<T>&,      \
                                       Var<T>, bool);                                                    \
  template Var<T> cycle_reconstruct<T>(Graph<T>&, DomainModelSet<T>&, Var<T>, CycleDirection, bool, bool); \
  template void compose_pixels<T>(std::span<const T>, std::span<const T>, std::span<const T>, int, int, int, \
                                  std::span<T>, std::span<T>, std::span<T>);

EDAAN_INSTANTIATE_TRANSLATE(float)
EDAAN_INSTANTIATE_TRANSLATE(double)

}  // namespace edaan
