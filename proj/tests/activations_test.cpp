// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "psot/activations.hpp"
#include "psot/gradcheck.hpp"
#include "test_util.hpp"

namespace psot {
namespace {

using testing::random_tensor;
using testing::ref_cos;

Tensor<double> two_frames(std::vector<double> first, std::vector<double> second) {
  Tensor<double> v({2, 1, first.size()});
  for (std::size_t k = 0; k < first.size(); ++k) {
    v(0, 0, k) = first[k];
    v(1, 0, k) = second[k];
  }
  return v;
}

TEST(LocalMotion, Examples) {
  EXPECT_DOUBLE_EQ(compute_local_motion(two_frames({1, 0}, {1, 0}))(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(compute_local_motion(two_frames({1, 0}, {0, 1}))(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(compute_local_motion(two_frames({1, 0}, {-1, 0}))(0, 0), 2.0);
}

TEST(LocalMotion, LastSegmentReplicatesPrevious) {
  Rng rng(3);
  auto v = random_tensor<double>(rng, {4, 3, 5});
  auto rho = compute_local_motion(v);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(rho(3, i), rho(2, i));
}

TEST(LocalMotion, SingleSegmentIsConfigError) {
  EXPECT_THROW(compute_local_motion(Tensor<double>({1, 4, 2})), ConfigError);
}

TEST(LocalMotion, MatchesTripleLoopOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 2 + rng.index(5), P = 1 + rng.index(16), d = 1 + rng.index(32);
    auto v = random_tensor<double>(rng, {T, P, d});
    auto rho = compute_local_motion(v);
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t a = t + 1 < T ? t : T - 2;
      for (std::size_t i = 0; i < P; ++i) {
        double uv = 0, uu = 0, ww = 0;
        for (std::size_t k = 0; k < d; ++k) {
          uv += v(a, i, k) * v(a + 1, i, k);
          uu += v(a, i, k) * v(a, i, k);
          ww += v(a + 1, i, k) * v(a + 1, i, k);
        }
        const double expect = 1.0 - uv / (std::max(std::sqrt(uu), 1e-8) * std::max(std::sqrt(ww), 1e-8));
        ASSERT_NEAR(rho(t, i), expect, 1e-6);
      }
    }
  }
}

TEST(LocalMotion, InvariantToPositiveRescaling) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto v = random_tensor<float>(rng, {3, 4, 8});
    auto scaled = v;
    const float c = static_cast<float>(rng.uniform(0.01, 100.0));
    for (auto& x : scaled.values()) x *= c;
    EXPECT_LE(max_abs_diff(compute_local_motion(v), compute_local_motion(scaled)), 1e-5);
  }
}

TEST(CombineMotion, Endpoints) {
  Rng rng(6);
  auto rho = random_tensor<double>(rng, {5, 6}, 0, 2);
  const auto zero = combine_motion(rho, 0.0);
  EXPECT_EQ(zero.m, rho);
  const auto one = combine_motion(rho, 1.0);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(one.m(t, i), one.mu_bar[i]);
}

TEST(CombineMotion, HandCase) {
  // rho rows [1,3] and [3,1] give mu_bar [2,2].
  auto maps = combine_motion(Tensor<double>::matrix({{1, 3}, {3, 1}}), 0.2);
  EXPECT_NEAR(maps.mu_bar[0], 2.0, 1e-12);
  EXPECT_NEAR(maps.m(0, 0), 1.2, 1e-6);
  EXPECT_NEAR(maps.m(0, 1), 2.8, 1e-6);
}

TEST(CombineMotion, LambdaOutOfRange) {
  EXPECT_THROW(combine_motion(Tensor<double>({2, 2}), -0.1), ConfigError);
  EXPECT_THROW(combine_motion(Tensor<double>({2, 2}), 1.1), ConfigError);
}

TEST(SoundActivation, Examples) {
  const std::vector<double> a{1, 0}, diag{1, 1};
  EXPECT_DOUBLE_EQ(compute_sound_activation<double>(a, Tensor<double>::matrix({{2, 0}}))[0], 1.0);
  EXPECT_DOUBLE_EQ(compute_sound_activation<double>(a, Tensor<double>::matrix({{0, 5}}))[0], 0.0);
  EXPECT_NEAR(compute_sound_activation<double>(diag, Tensor<double>::matrix({{1, 0}}))[0], 0.70710678118654752,
              1e-12);
}

TEST(SoundActivation, ScaleInvariantInBothArguments) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_tensor<float>(rng, {6});
    auto v = random_tensor<float>(rng, {5, 6});
    auto a2 = a, v2 = v;
    for (auto& x : a2.values()) x *= 3.5f;
    for (auto& x : v2.values()) x *= 0.02f;
    EXPECT_LE(max_abs_diff(compute_sound_activation<float>(a.values(), v),
                           compute_sound_activation<float>(a2.values(), v2)),
              1e-5);
  }
}

TEST(Bounds, MotionAndSoundIncludingNearZero) {
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const double scale = trial % 4 == 0 ? 1e-10 : 1.0;
    auto v = random_tensor<float>(rng, {3, 4, 5}, -scale, scale);
    auto a = random_tensor<float>(rng, {3, 5});
    if (trial % 7 == 0) std::fill(v.data(), v.data() + 5, 0.0f);
    const auto rho = compute_local_motion(v);
    const auto s = compute_sound_maps(a, v).s;
    for (float x : rho.values()) {
      ASSERT_GE(x, -1e-6f);
      ASSERT_LE(x, 2.0f + 1e-6f);
    }
    for (float x : s.values()) {
      ASSERT_GE(x, -1.0f - 1e-6f);
      ASSERT_LE(x, 1.0f + 1e-6f);
    }
  }
}

TEST(QuestionSimilarity, Examples) {
  auto patch = Tensor<double>::matrix({{0.3, -0.4}, {1, 0}});
  auto same = compute_question_similarity(Tensor<double>::matrix({{0.3, -0.4}, {0.6, -0.8}}), patch);
  EXPECT_NEAR(same[0], 1.0, 1e-12);
  auto ortho = compute_question_similarity(Tensor<double>::matrix({{0, 0, 1}}), Tensor<double>::matrix({{1, 0, 0}, {0, 2, 0}}));
  EXPECT_EQ(ortho, Tensor<double>({2}));
  auto half = compute_question_similarity(Tensor<double>::matrix({{1, 0}, {0, 1}}), Tensor<double>::matrix({{1, 0}}));
  EXPECT_NEAR(half[0], 0.5, 1e-12);
}

TEST(TopR, Examples) {
  EXPECT_EQ(topr_mask(Tensor<double>::vector({0.3, 0.1, 0.2}), 1.0), Tensor<double>::vector({1, 1, 1}));
  EXPECT_EQ(topr_mask(Tensor<double>::vector({0.9, 0.1, 0.5, 0.7}), 0.5), Tensor<double>::vector({1, 0, 0, 1}));
  EXPECT_EQ(topr_mask(Tensor<double>::vector({0.5, 0.5, 0.1, 0.1}), 0.5), Tensor<double>::vector({1, 1, 0, 0}));
}

TEST(TopR, RatioOutOfRange) {
  EXPECT_THROW(topr_mask(Tensor<double>::vector({1, 2}), 0.0), ConfigError);
  EXPECT_THROW(topr_mask(Tensor<double>::vector({1, 2}), 1.5), ConfigError);
}

TEST(TopR, StableSortOracle) {
  Rng rng(9);
  for (int tenths : {2, 4, 5, 6, 8, 10}) {
    const double r = tenths / 10.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 1 + rng.index(64);
      Tensor<float> alpha({n});
      // Coarse values so ties are common.
      for (auto& x : alpha.values()) x = static_cast<float>(rng.index(5)) / 4.0f;
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return alpha[a] > alpha[b]; });
      const std::size_t keep = (n * tenths + 9) / 10;  // exact ceil(n·r)
      Tensor<float> expect({n});
      for (std::size_t k = 0; k < keep; ++k) expect[order[k]] = 1.0f;
      ASSERT_EQ(topr_mask(alpha, r), expect) << "n=" << n << " r=" << r;
    }
  }
}

TEST(Differentiable, MapsMatchPlainVersions) {
  Rng rng(10);
  auto v = random_tensor<double>(rng, {3, 4, 5});
  const auto a = random_tensor<double>(rng, {3, 5});
  ad::Tape<double> tape;
  std::vector<ad::Var<double>> patches;
  for (std::size_t t = 0; t < 3; ++t) patches.push_back(tape.constant(v.matrix_at(t)));
  const auto m = ad::combine_motion(ad::local_motion(patches), 0.2);
  const auto plain = combine_motion(compute_local_motion(v), 0.2);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(m[t].value()[i], plain.m(t, i), 1e-12);
  const auto s = ad::sound_activation(tape.constant(Tensor<double>({1, 5}, testing::as_double(a.row(1)))), patches[1]);
  const auto sp = compute_sound_activation(a.row(1), v.matrix_at(1));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.value()[i], sp[i], 1e-12);
}

TEST(Differentiable, MotionAndSoundGradients) {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(200 + seed);
    ParameterStore<double> store;
    for (int t = 0; t < 3; ++t) store.add("v" + std::to_string(t), random_tensor<double>(rng, {4, 5}));
    store.add("a", random_tensor<double>(rng, {1, 5}));
    const LossBuilder<double> f = [](ad::Tape<double>& tape, ParameterStore<double>& s) {
      std::vector<ad::Var<double>> p;
      for (int t = 0; t < 3; ++t) p.push_back(tape.parameter(s.at("v" + std::to_string(t))));
      auto m = ad::combine_motion(ad::local_motion(p), 0.2);
      auto snd = ad::sound_activation(tape.parameter(s.at("a")), p[0]);
      auto total = ad::sum(ad::square(m[0]));
      total = ad::add(total, ad::sum(ad::square(m[2])));
      return ad::add(total, ad::sum(ad::square(snd)));
    };
    const auto r = gradient_check(f, store, 1e-6, 1e-5);
    ASSERT_TRUE(r.passed) << r.max_rel_error << " " << r.worst_parameter;
  }
}

}  // namespace
}  // namespace psot
