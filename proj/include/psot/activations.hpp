// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "psot/autodiff.hpp"
#include "psot/numerics.hpp"
#include "psot/tensor.hpp"

namespace psot {

template <std::floating_point S>
struct MotionMaps {
  Tensor<S> rho;     // [T×N²] local motion intensity, in [0, 2]
  Tensor<S> mu_bar;  // [N²] mean of rho over segments
  Tensor<S> m;       // [T×N²] (1-λ)·rho + λ·mu_bar
  double lambda = 0.0;
};

template <std::floating_point S>
struct SoundMaps {
  Tensor<S> s;  // [T×N²] audio-to-patch cosine, in [-1, 1]
};

template <std::floating_point S>
struct RetentionMask {
  Tensor<S> alpha;  // [T×N²] word-averaged question-to-patch cosine
  Tensor<S> beta;   // [T×N²] entries in {0, 1}
  double r = 1.0;
};

// Patch-wise motion between adjacent frames: rho[t][i] = 1 - cos(v_t^i, v_{t+1}^i).
// The last segment has no successor and repeats the previous row.
template <std::floating_point S>
Tensor<S> compute_local_motion(const Tensor<S>& visual) {
  if (visual.rank() != 3) {
    throw DimensionError("compute_local_motion expects [T×N²×d], got " + shape_string(visual.shape()));
  }
  const std::size_t segments = visual.dim(0), patches = visual.dim(1), d = visual.dim(2);
  if (segments < 2) throw ConfigError("motion is undefined for fewer than 2 segments");
  Tensor<S> rho({segments, patches});
  for (std::size_t t = 0; t + 1 < segments; ++t) {
    for (std::size_t i = 0; i < patches; ++i) {
      std::span<const S> now(&visual(t, i, 0), d);
      std::span<const S> next(&visual(t + 1, i, 0), d);
      rho(t, i) = S{1} - cosine_similarity(now, next);
    }
  }
  for (std::size_t i = 0; i < patches; ++i) rho(segments - 1, i) = rho(segments - 2, i);
  return rho;
}

template <std::floating_point S>
MotionMaps<S> combine_motion(const Tensor<S>& rho, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  const std::size_t segments = rho.rows(), patches = rho.cols();
  MotionMaps<S> maps{rho, Tensor<S>({patches}), Tensor<S>({segments, patches}), lambda};
  for (std::size_t t = 0; t < segments; ++t)
    for (std::size_t i = 0; i < patches; ++i) maps.mu_bar[i] += rho(t, i);
  for (auto& v : maps.mu_bar.values()) v /= static_cast<S>(segments);
  const S l = static_cast<S>(lambda);
  for (std::size_t t = 0; t < segments; ++t) {
    for (std::size_t i = 0; i < patches; ++i) {
      // Written so that both endpoints are exact.
      if (lambda == 0.0) maps.m(t, i) = rho(t, i);
      else if (lambda == 1.0) maps.m(t, i) = maps.mu_bar[i];
      else maps.m(t, i) = (S{1} - l) * rho(t, i) + l * maps.mu_bar[i];
    }
  }
  return maps;
}

// s[i] = cos(a, v^i) for one segment.
template <std::floating_point S>
Tensor<S> compute_sound_activation(std::span<const S> audio, const Tensor<S>& patches) {
  if (patches.cols() != audio.size()) {
    throw DimensionError("sound activation: audio dim " + std::to_string(audio.size()) + " vs patches " +
                         shape_string(patches.shape()));
  }
  Tensor<S> s({patches.rows()});
  for (std::size_t i = 0; i < patches.rows(); ++i) s[i] = cosine_similarity(audio, patches.row(i));
  return s;
}

template <std::floating_point S>
SoundMaps<S> compute_sound_maps(const Tensor<S>& audio, const Tensor<S>& visual) {
  const std::size_t segments = visual.dim(0), patches = visual.dim(1);
  SoundMaps<S> maps{Tensor<S>({segments, patches})};
  for (std::size_t t = 0; t < segments; ++t) {
    const Tensor<S> s = compute_sound_activation(audio.row(t), visual.matrix_at(t));
    std::copy(s.values().begin(), s.values().end(), maps.s.data() + t * patches);
  }
  return maps;
}

// alpha[i] = mean over words k of cos(q_k, v^i).
template <std::floating_point S>
Tensor<S> compute_question_similarity(const Tensor<S>& question, const Tensor<S>& patches) {
  if (question.cols() != patches.cols()) {
    throw DimensionError("question similarity: " + shape_string(question.shape()) + " vs " +
                         shape_string(patches.shape()));
  }
  const std::size_t words = question.rows();
  Tensor<S> alpha({patches.rows()});
  for (std::size_t i = 0; i < patches.rows(); ++i) {
    S acc{0};
    for (std::size_t k = 0; k < words; ++k) acc += cosine_similarity(question.row(k), patches.row(i));
    alpha[i] = acc / static_cast<S>(words);
  }
  return alpha;
}

// ceil(n·r), with a small slack so that products like 5·0.6 that land a hair
// above an integer in binary do not round up.
inline std::size_t retained_count(std::size_t n, double r) {
  const double raw = static_cast<double>(n) * r;
  const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(count, 1, n);
}

// 1 at the ceil(n·r) largest entries of alpha; ties keep the lower index.
template <std::floating_point S>
Tensor<S> topr_mask(const Tensor<S>& alpha, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw ConfigError("retention ratio must lie in (0, 1], got " + std::to_string(r));
  const std::size_t n = alpha.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return alpha[a] > alpha[b]; });
  Tensor<S> beta({n});
  const std::size_t keep = retained_count(n, r);
  for (std::size_t k = 0; k < keep; ++k) beta[order[k]] = S{1};
  return beta;
}

namespace ad {

// Differentiable counterparts used when the activation maps depend on
// learned features (serial execution).

// One [N²] motion row per segment from per-segment patch matrices.
template <std::floating_point S>
std::vector<Var<S>> local_motion(const std::vector<Var<S>>& patches) {
  if (patches.size() < 2) throw ConfigError("motion is undefined for fewer than 2 segments");
  std::vector<Var<S>> rho;
  for (std::size_t t = 0; t + 1 < patches.size(); ++t)
    rho.push_back(affine(cosine_rows(patches[t], patches[t + 1]), S{-1}, S{1}));
  rho.push_back(rho.back());
  return rho;
}

template <std::floating_point S>
std::vector<Var<S>> combine_motion(const std::vector<Var<S>>& rho, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  Var<S> total = rho.front();
  for (std::size_t t = 1; t < rho.size(); ++t) total = add(total, rho[t]);
  const S l = static_cast<S>(lambda);
  Var<S> global = affine(total, l / static_cast<S>(rho.size()));
  std::vector<Var<S>> m;
  for (const auto& r : rho) m.push_back(add(affine(r, S{1} - l), global));
  return m;
}

template <std::floating_point S>
Var<S> sound_activation(const Var<S>& audio_row, const Var<S>& patches) {
  return cosine_rows(audio_row, patches);
}

}  // namespace ad

}  // namespace psot
