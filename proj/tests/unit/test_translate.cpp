#include <random>

#include "doctest.h"
#include "edaan/translate.hpp"
#include "../support/suites.hpp"

using edaan::Graph;
using edaan::Tensor;
using edaan::Var;
namespace ag = edaan::ag;

TEST_CASE("composition identities, betweenness and cycle chains") {
  const auto r = suites::composition_identities();
  INFO(r.summary());
  CHECK(r.ok());
}

TEST_CASE("random mask blend matches a per-pixel oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1), m01(0, 1);
  const int n = 2, c = 3, plane = 12;
  std::vector<double> x(n * c * plane), raw(x.size()), mask(n * plane);
  for (auto& v : x) v = u(rng);
  for (auto& v : raw) v = u(rng);
  for (auto& v : mask) v = m01(rng);
  std::vector<double> bg(x.size()), fg(x.size()), out(x.size());
  edaan::compose_pixels<double>(x, raw, mask, n, c, plane, bg, fg, out);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int p = 0; p < plane; ++p) {
        const int k = (i * c + ch) * plane + p;
        const double m = mask[i * plane + p];
        CHECK(out[k] == doctest::Approx(m * x[k] + (1 - m) * raw[k]).epsilon(1e-12));
      }
}

TEST_CASE("mask shape mismatch is an error") {
  Graph<float> g(false, false);
  auto x = g.constant(Tensor<float>({1, 3, 4, 4}));
  auto raw = g.constant(Tensor<float>({1, 3, 4, 4}));
  CHECK_THROWS(edaan::compose(g, x, raw, g.constant(Tensor<float>({1, 1, 2, 4}))));
  CHECK_THROWS(edaan::compose(g, x, g.constant(Tensor<float>({1, 3, 4, 2})), g.constant(Tensor<float>({1, 1, 4, 4}))));
}

TEST_CASE("gradients reach both the image and the mask") {
  Graph<double> g;
  auto x = g.variable(Tensor<double>({1, 2, 2, 2}, 0.3));
  auto raw = g.variable(Tensor<double>({1, 2, 2, 2}, -0.4));
  auto mask = g.variable(Tensor<double>({1, 1, 2, 2}, 0.25));
  g.backward(ag::mean(edaan::compose(g, x, raw, mask).composed));
  // d/dx = m / 8, d/draw = (1 - m) / 8, d/dm = 2 (x - raw) / 8.
  CHECK((*g.grad(x))[0] == doctest::Approx(0.25 / 8));
  CHECK((*g.grad(raw))[0] == doctest::Approx(0.75 / 8));
  CHECK((*g.grad(mask))[0] == doctest::Approx(2 * 0.7 / 8));
}
