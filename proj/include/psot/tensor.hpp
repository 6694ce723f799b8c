// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "psot/errors.hpp"

namespace psot {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

// Dense row-major array. Value type: copies are deep, and the usual pattern
// is to build a tensor once and then treat it as immutable.
template <std::floating_point S>
class Tensor {
 public:
  using value_type = S;

  Tensor() = default;

  explicit Tensor(Shape shape, S fill = S{0})
      : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

  Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
      throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                           std::to_string(data_.size()) + " values");
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = S{1};
    return t;
  }

  // 2-D literal: Tensor<float>::matrix({{1, 2}, {3, 4}}).
  static Tensor matrix(std::initializer_list<std::initializer_list<S>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<S> data;
    data.reserve(m * n);
    for (const auto& row : rows) {
      if (row.size() != n) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({m, n}, std::move(data));
  }

  static Tensor vector(std::initializer_list<S> values) {
    return Tensor({values.size()}, std::vector<S>(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  // Matrix view helpers; a rank-1 tensor counts as a single row.
  std::size_t rows() const {
    require_matrix();
    return shape_.size() == 1 ? 1 : shape_[0];
  }
  std::size_t cols() const {
    require_matrix();
    return shape_.back();
  }

  std::span<S> values() noexcept { return data_; }
  std::span<const S> values() const noexcept { return data_; }
  S* data() noexcept { return data_.data(); }
  const S* data() const noexcept { return data_.data(); }

  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }

  S& operator()(std::size_t i, std::size_t j) { return data_[i * shape_.back() + j]; }
  const S& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_.back() + j]; }

  S& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const S& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Contiguous slab along axis 0 (a row for matrices, a matrix for rank 3).
  std::span<S> slab(std::size_t i) {
    const std::size_t stride = data_.size() / shape_.at(0);
    return std::span<S>(data_).subspan(i * stride, stride);
  }
  std::span<const S> slab(std::size_t i) const {
    const std::size_t stride = data_.size() / shape_.at(0);
    return std::span<const S>(data_).subspan(i * stride, stride);
  }
  // Row i of a matrix; a rank-1 tensor is its own single row.
  std::span<S> row(std::size_t i) { return std::span<S>(data_).subspan(i * cols(), cols()); }
  std::span<const S> row(std::size_t i) const { return std::span<const S>(data_).subspan(i * cols(), cols()); }

  // Rank-2 copy of slab i of a rank-3 tensor.
  Tensor matrix_at(std::size_t i) const {
    if (rank() != 3) throw DimensionError("matrix_at needs a rank-3 tensor, got " + shape_string(shape_));
    auto s = slab(i);
    return Tensor({shape_[1], shape_[2]}, std::vector<S>(s.begin(), s.end()));
  }

  Tensor reshaped(Shape shape) const {
    if (shape_product(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  template <std::floating_point T>
  Tensor<T> cast() const {
    return Tensor<T>(shape_, std::vector<T>(data_.begin(), data_.end()));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](S x) { return std::isfinite(x); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void require_matrix() const {
    if (shape_.empty() || shape_.size() > 2) {
      throw DimensionError("expected a matrix, got shape " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<S> data_;
};

template <std::floating_point S>
S max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  S worst{0};
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace psot
