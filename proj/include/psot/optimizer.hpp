// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "psot/parameters.hpp"

namespace psot {

// Adam with decoupled weight decay.
template <std::floating_point S>
class AdamW {
 public:
  AdamW(double beta1, double beta2, double epsilon, double weight_decay)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {}

  // One update from the gradients currently held in `store`.
  void step(ParameterStore<S>& store, double lr) {
    if (first_.empty()) {
      for (const auto& p : store) {
        first_.emplace_back(p.value.shape());
        second_.emplace_back(p.value.shape());
      }
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    std::size_t k = 0;
    for (auto& p : store) {
      auto& m = first_[k];
      auto& v = second_[k];
      ++k;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.gradient[i]);
        const double mi = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * g;
        const double vi = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * g * g;
        m[i] = static_cast<S>(mi);
        v[i] = static_cast<S>(vi);
        const double update = (mi / c1) / (std::sqrt(vi / c2) + epsilon_) + weight_decay_ * static_cast<double>(p.value[i]);
        p.value[i] = static_cast<S>(static_cast<double>(p.value[i]) - lr * update);
      }
    }
  }

  std::size_t steps() const noexcept { return steps_; }

 private:
  double beta1_, beta2_, epsilon_, weight_decay_;
  std::size_t steps_ = 0;
  std::vector<Tensor<S>> first_, second_;
};

}  // namespace psot
