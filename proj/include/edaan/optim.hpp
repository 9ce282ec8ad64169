#ifndef EDAAN_OPTIM_HPP_
#define EDAAN_OPTIM_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edaan/autograd.hpp"

namespace edaan {

template <typename Dtype>
using NamedStores = std::vector<std::pair<std::string, ParameterStore<Dtype>*>>;

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with per-parameter step counters. Parameters without a gradient in a
// step (frozen, non-trainable, or unreached) are left untouched, moments
// included.
template <typename Dtype>
class Adam {
 public:
  struct Slot {
    Tensor<Dtype> m;
    Tensor<Dtype> v;
    std::int64_t t = 0;
  };

  Adam() = default;
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(const NamedStores<Dtype>& stores, double lr);

  const AdamConfig& config() const { return config_; }
  // Keyed "<store>/<parameter>".
  std::map<std::string, Slot>& slots() { return slots_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }

 private:
  AdamConfig config_;
  std::map<std::string, Slot> slots_;
};

template <typename Dtype>
void zero_grads(const NamedStores<Dtype>& stores) {
  for (auto& entry : stores) entry.second->zero_grad();
}

}  // namespace edaan

#endif  // EDAAN_OPTIM_HPP_
