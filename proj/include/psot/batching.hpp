// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "psot/errors.hpp"
#include "psot/random.hpp"

namespace psot {

// Indices into the input sequence.
struct DataSplit {
  std::vector<std::vector<std::size_t>> train_batches;
  std::vector<std::size_t> eval;

  std::size_t train_size() const {
    std::size_t n = 0;
    for (const auto& b : train_batches) n += b.size();
    return n;
  }
};

// Seeded shuffle, then the first floor(n·fraction) indices form the training
// part, cut into batches (last one may be short); the rest is the eval set.
inline DataSplit split_and_batch(std::size_t count, double train_fraction, std::size_t batch_size,
                                 std::uint64_t seed) {
  if (count == 0) throw ConfigError("cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1), got " + std::to_string(train_fraction));
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  const auto train = static_cast<std::size_t>(std::floor(static_cast<double>(count) * train_fraction + 1e-9));
  DataSplit split;
  for (std::size_t start = 0; start < train; start += batch_size) {
    const std::size_t stop = std::min(train, start + batch_size);
    split.train_batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  split.eval.assign(order.begin() + static_cast<std::ptrdiff_t>(train), order.end());
  return split;
}

// Reshuffles the training indices into fresh batches (per-epoch order).
inline std::vector<std::vector<std::size_t>> rebatch(const DataSplit& split, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> pool;
  for (const auto& b : split.train_batches) pool.insert(pool.end(), b.begin(), b.end());
  rng.shuffle(pool);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < pool.size(); start += batch_size) {
    const std::size_t stop = std::min(pool.size(), start + batch_size);
    out.emplace_back(pool.begin() + static_cast<std::ptrdiff_t>(start), pool.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

}  // namespace psot
