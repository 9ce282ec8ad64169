#include "edaan/optim.hpp"

#include <cmath>

namespace edaan {

template <typename Dtype>
void Adam<Dtype>::step(const NamedStores<Dtype>& stores, double lr) {
  const double b1 = config_.beta1, b2 = config_.beta2;
  for (const auto& [store_name, store] : stores)
    for (Parameter<Dtype>& p : store->all()) {
      if (!p.receives_grad() || p.grad.empty()) continue;
      Slot& s = slots_[store_name + "/" + p.name];
      if (s.m.empty()) {
        s.m = Tensor<Dtype>(p.value.shape());
        s.v = Tensor<Dtype>(p.value.shape());
      }
      ++s.t;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
      const double step = lr / c1;
      Dtype* w = p.value.data();
      const Dtype* g = p.grad.data();
      Dtype* m = s.m.data();
      Dtype* v = s.v.data();
      const std::size_t n = p.value.count();
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = static_cast<Dtype>(b1 * m[i] + (1.0 - b1) * g[i]);
        v[i] = static_cast<Dtype>(b2 * v[i] + (1.0 - b2) * g[i] * g[i]);
        w[i] -= static_cast<Dtype>(step * m[i] / (std::sqrt(v[i] / c2) + config_.eps));
      }
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace edaan
