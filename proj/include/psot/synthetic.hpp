// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "psot/bundle.hpp"
#include "psot/errors.hpp"
#include "psot/model_config.hpp"
#include "psot/random.hpp"
#include "psot/tensor.hpp"

namespace psot {

enum class SyntheticTask { kWhichMoves, kWhichSounds, kWhichSoundsFirst, kCountSounding };

inline const char* to_string(SyntheticTask task) {
  switch (task) {
    case SyntheticTask::kWhichMoves: return "which_moves";
    case SyntheticTask::kWhichSounds: return "which_sounds";
    case SyntheticTask::kWhichSoundsFirst: return "which_sounds_first";
    case SyntheticTask::kCountSounding: return "count_sounding";
  }
  return "unknown";
}

inline SyntheticTask parse_task(const std::string& name) {
  for (auto t : {SyntheticTask::kWhichMoves, SyntheticTask::kWhichSounds, SyntheticTask::kWhichSoundsFirst,
                 SyntheticTask::kCountSounding}) {
    if (name == to_string(t)) return t;
  }
  throw ConfigError("unknown synthetic task '" + name + "'");
}

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t T = 4;
  std::size_t N = 4;
  std::size_t d = 32;
  std::size_t K = 6;
  std::size_t C = 8;
  SyntheticTask task = SyntheticTask::kWhichMoves;
  double noise_sigma = 0.0;
};

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"seed", s.seed}, {"T", s.T}, {"N", s.N}, {"d", s.d}, {"K", s.K},
          {"C", s.C}, {"task", to_string(s.task)}, {"noise_sigma", s.noise_sigma}};
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  detail::check_keys(j, to_json(s), "synthetic spec");
  detail::read_field(j, "seed", s.seed);
  detail::read_field(j, "T", s.T);
  detail::read_field(j, "N", s.N);
  detail::read_field(j, "d", s.d);
  detail::read_field(j, "K", s.K);
  detail::read_field(j, "C", s.C);
  if (j.contains("task")) s.task = parse_task(j.at("task").get<std::string>());
  detail::read_field(j, "noise_sigma", s.noise_sigma);
  return s;
}

namespace detail {

using Vec = std::vector<double>;

inline Vec normalized(Vec v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

inline Vec random_unit(Rng& rng, std::size_t d) {
  Vec v(d);
  for (double& x : v) x = rng.normal();
  return normalized(std::move(v));
}

inline Vec mix(const Vec& a, double wa, const Vec& b, double wb) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

// `count` unit vectors; orthonormal (Gram-Schmidt) while count <= d.
inline std::vector<Vec> basis(Rng& rng, std::size_t count, std::size_t d) {
  std::vector<Vec> out;
  for (std::size_t c = 0; c < count; ++c) {
    Vec v = random_unit(rng, d);
    if (c < d) {
      for (const auto& u : out) {
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += v[i] * u[i];
        for (std::size_t i = 0; i < d; ++i) v[i] -= proj * u[i];
      }
      v = normalized(std::move(v));
    }
    out.push_back(std::move(v));
  }
  return out;
}

// Unit vector plus isotropic Gaussian noise, re-normalized.
inline Vec jitter(const Vec& v, double sigma, Rng& rng) {
  if (sigma == 0.0) return v;
  Vec out = v;
  for (double& x : out) x += sigma * rng.normal();
  return normalized(std::move(out));
}

}  // namespace detail

// Labeled scenes whose answers follow from the motion, sound, and question
// cues by construction.
//
// Patch i < C shows the object of class i, the remaining patches show
// per-sample background. Every object carries a shared "foreground"
// component that the question words also carry, so question similarity
// separates objects from background.
//
//   which_moves         the object at patch `label` changes appearance every
//                       segment, everything else is static; audio is noise.
//   which_sounds        audio equals the object of class `label`.
//   which_sounds_first  audio is an even mix of the target and one distractor
//                       object; only the target moves, during the first half
//                       of the segments.
//   count_sounding      `label` patches (at random positions) show the
//                       sounding object; the rest is background.
template <std::floating_point S>
std::vector<FeatureBundle<S>> generate_synthetic(const SyntheticSpec& spec, std::size_t count) {
  const std::size_t patches = spec.N * spec.N;
  if (spec.T < 2) throw ConfigError("synthetic scenes need T >= 2");
  if (spec.N == 0 || spec.d == 0 || spec.K == 0 || spec.C == 0) throw ConfigError("synthetic dims must be positive");
  if (spec.task == SyntheticTask::kCountSounding ? spec.C > patches + 1 : spec.C > patches) {
    throw ConfigError("infeasible synthetic spec: C=" + std::to_string(spec.C) + " with " + std::to_string(patches) +
                      " patches");
  }
  if (spec.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");

  using detail::Vec;
  const std::size_t d = spec.d;
  Rng rng(spec.seed);

  // Shared vocabulary: foreground, one direction per class, one per task.
  auto dirs = detail::basis(rng, 1 + spec.C + 4, d);
  const Vec& foreground = dirs[0];
  std::vector<Vec> objects;
  for (std::size_t c = 0; c < spec.C; ++c) objects.push_back(detail::normalized(detail::mix(foreground, 0.6, dirs[1 + c], 0.8)));
  const Vec& task_dir = dirs[1 + spec.C + static_cast<std::size_t>(spec.task)];

  std::vector<FeatureBundle<S>> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    // Clean scene: per-segment patch vectors and audio.
    std::vector<std::vector<Vec>> scene(spec.T, std::vector<Vec>(patches));
    std::vector<Vec> audio(spec.T);

    std::vector<Vec> layout(patches);
    for (std::size_t i = 0; i < patches; ++i) layout[i] = i < spec.C ? objects[i] : detail::random_unit(rng, d);

    std::size_t label = 0;
    auto moving = [&](const Vec& base) { return detail::normalized(detail::mix(base, 1.0, detail::random_unit(rng, d), 1.0)); };

    switch (spec.task) {
      case SyntheticTask::kWhichMoves: {
        label = rng.index(spec.C);
        const Vec noise_audio = detail::random_unit(rng, d);
        for (std::size_t t = 0; t < spec.T; ++t) {
          for (std::size_t i = 0; i < patches; ++i) scene[t][i] = i == label ? moving(layout[i]) : layout[i];
          audio[t] = noise_audio;
        }
        break;
      }
      case SyntheticTask::kWhichSounds: {
        label = rng.index(spec.C);
        for (std::size_t t = 0; t < spec.T; ++t) {
          scene[t] = layout;
          audio[t] = objects[label];
        }
        break;
      }
      case SyntheticTask::kWhichSoundsFirst: {
        label = rng.index(spec.C);
        std::size_t other = rng.index(spec.C - 1);
        if (other >= label) ++other;
        if (spec.C == 1) other = label;
        const Vec mixed = detail::normalized(detail::mix(objects[label], 1.0, objects[other], 1.0));
        const std::size_t early = (spec.T + 1) / 2;
        for (std::size_t t = 0; t < spec.T; ++t) {
          scene[t] = layout;
          if (t < early) scene[t][label] = moving(layout[label]);
          audio[t] = mixed;
        }
        break;
      }
      case SyntheticTask::kCountSounding: {
        label = rng.index(spec.C);
        const Vec& sounding = objects[rng.index(spec.C)];
        std::vector<std::size_t> positions(patches);
        for (std::size_t i = 0; i < patches; ++i) positions[i] = i;
        rng.shuffle(positions);
        for (std::size_t i = 0; i < patches; ++i) layout[i] = detail::random_unit(rng, d);
        for (std::size_t k = 0; k < label; ++k) layout[positions[k]] = sounding;
        for (std::size_t t = 0; t < spec.T; ++t) {
          scene[t] = layout;
          audio[t] = sounding;
        }
        break;
      }
    }

    FeatureBundle<S> b;
    b.audio = Tensor<S>({spec.T, d});
    b.visual = Tensor<S>({spec.T, patches, d});
    b.question = Tensor<S>({spec.K, d});
    for (std::size_t t = 0; t < spec.T; ++t) {
      const Vec a = detail::jitter(audio[t], spec.noise_sigma, rng);
      for (std::size_t k = 0; k < d; ++k) b.audio(t, k) = static_cast<S>(a[k]);
      for (std::size_t i = 0; i < patches; ++i) {
        const Vec v = detail::jitter(scene[t][i], spec.noise_sigma, rng);
        for (std::size_t k = 0; k < d; ++k) b.visual(t, i, k) = static_cast<S>(v[k]);
      }
    }
    for (std::size_t w = 0; w < spec.K; ++w) {
      Vec word = detail::mix(detail::mix(foreground, 0.6, task_dir, 0.6), 1.0, detail::random_unit(rng, d), 0.5);
      word = detail::jitter(detail::normalized(std::move(word)), spec.noise_sigma, rng);
      for (std::size_t k = 0; k < d; ++k) b.question(w, k) = static_cast<S>(word[k]);
    }
    b.answer = static_cast<std::uint32_t>(label);
    b.num_classes = static_cast<std::uint32_t>(spec.C);
    b.sample_id = std::string(to_string(spec.task)) + "-" + std::to_string(spec.seed) + "-" + std::to_string(n);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace psot
