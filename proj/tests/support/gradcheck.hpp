#ifndef EDAAN_TESTS_GRADCHECK_HPP_
#define EDAAN_TESTS_GRADCHECK_HPP_

// Finite-difference checks of graph gradients in double precision.

#include <functional>
#include <vector>

#include "edaan/autograd.hpp"
#include "oracles.hpp"

namespace gradcheck {

using edaan::Graph;
using edaan::Tensor;
using edaan::Var;

using GraphFn = std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>;

inline double evaluate(const GraphFn& fn, const std::vector<Tensor<double>>& inputs) {
  Graph<double> g(false, true);
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return fn(g, vars).value()[0];
}

// Worst relative error over every input element.
inline double check(const GraphFn& fn, const std::vector<Tensor<double>>& inputs, double h = 1e-4) {
  Graph<double> g(true, true);
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(g.variable(t));
  Var<double> out = fn(g, vars);
  g.backward(out);
  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> analytic(inputs[k].count(), 0.0);
    if (const Tensor<double>* gr = g.grad(vars[k])) analytic = gr->vec();
    auto probe = inputs;
    auto f = [&](const std::vector<double>& x) {
      probe[k].vec() = x;
      return evaluate(fn, probe);
    };
    const auto numeric = oracle::numeric_gradient(f, inputs[k].vec(), h);
    worst = std::max(worst, oracle::relative_error(analytic, numeric));
  }
  return worst;
}

inline Tensor<double> random_tensor(edaan::Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

}  // namespace gradcheck

#endif  // EDAAN_TESTS_GRADCHECK_HPP_
