// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "psot/tensor.hpp"

namespace psot {

// Guard for every norm denominator.
inline constexpr double kNormEps = 1e-8;

namespace detail {

// out[m×n] += a[m×k] · b[k×n], all row-major.
template <std::floating_point S>
void gemm_accumulate(const S* a, const S* b, S* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    S* out_row = out + i * n;
    const S* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const S scale = a_row[p];
      if (scale == S{0}) continue;
      const S* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += scale * b_row[j];
    }
  }
}

}  // namespace detail

template <std::floating_point S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor<S> out({a.rows(), b.cols()});
  detail::gemm_accumulate(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

template <std::floating_point S>
Tensor<S> transpose(const Tensor<S>& a) {
  if (a.rank() != 2) throw DimensionError("transpose needs a matrix, got " + shape_string(a.shape()));
  Tensor<S> out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

// Subgradient at zero is zero.
template <std::floating_point S>
Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> out = x;
  for (auto& v : out.values()) v = v > S{0} ? v : S{0};
  return out;
}

template <std::floating_point S>
S dot(std::span<const S> u, std::span<const S> v) {
  if (u.size() != v.size()) {
    throw DimensionError("dot length mismatch: " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  S acc{0};
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

template <std::floating_point S>
S l2_norm(std::span<const S> u) {
  return std::sqrt(dot(u, u));
}

// (u·v) / (max(|u|, eps) · max(|v|, eps))
template <std::floating_point S>
S cosine_similarity(std::span<const S> u, std::span<const S> v, S eps = static_cast<S>(kNormEps)) {
  const S denom = std::max(l2_norm(u), eps) * std::max(l2_norm(v), eps);
  return dot(u, v) / denom;
}

template <std::floating_point S>
Tensor<S> row_softmax(const Tensor<S>& x) {
  Tensor<S> out = x;
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < m; ++i) {
    S* row = out.data() + i * n;
    const S peak = *std::max_element(row, row + n);
    S total{0};
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - peak);
      total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  return out;
}

// -ln(max(p[label], eps)) for a probability vector p.
template <std::floating_point S>
S cross_entropy(const Tensor<S>& p, std::size_t label, S eps = static_cast<S>(kNormEps)) {
  if (label >= p.size()) {
    throw IndexError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(p.size()) + " classes");
  }
  return -std::log(std::max(p[label], eps));
}

// Lowest index wins ties.
template <std::floating_point S>
std::size_t argmax(std::span<const S> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace psot
