// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "psot/errors.hpp"
#include "psot/random.hpp"
#include "psot/tensor.hpp"

namespace psot {

template <std::floating_point S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> gradient;  // same shape as value
};

// Named parameters in insertion order.
template <std::floating_point S>
class ParameterStore {
 public:
  ParameterStore() = default;
  explicit ParameterStore(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Parameter<S>& add(std::string name, Tensor<S> value) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    Tensor<S> grad(value.shape());
    params_.push_back({std::move(name), std::move(value), std::move(grad)});
    return params_.back();
  }

  // Weight matrix drawn uniformly from [-1/sqrt(rows), 1/sqrt(rows)].
  Parameter<S>& add_uniform(std::string name, std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    Tensor<S> w({rows, cols});
    for (auto& v : w.values()) v = static_cast<S>(rng.uniform(-bound, bound));
    return add(std::move(name), std::move(w));
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Parameter<S>& at(const std::string& name) { return params_[lookup(name)]; }
  const Parameter<S>& at(const std::string& name) const { return params_[lookup(name)]; }

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.gradient.values().begin(), p.gradient.values().end(), S{0});
  }

  template <std::floating_point T>
  ParameterStore<T> cast() const {
    ParameterStore<T> out(seed_);
    for (const auto& p : params_) out.add(p.name, p.value.template cast<T>());
    return out;
  }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
      if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) return false;
    }
    return true;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw IndexError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::uint64_t seed_ = 0;
  std::vector<Parameter<S>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace psot
