// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "psot/ablation.hpp"
#include "psot/gradcheck.hpp"
#include "psot/model.hpp"
#include "psot/synthetic.hpp"
#include "test_util.hpp"

namespace psot {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.T = 3;
  c.N = 2;
  c.d = 6;
  c.K = 2;
  c.C = 4;
  c.seed = 5;
  return c;
}

FeatureBundle<double> bundle_for(const ModelConfig& c, std::uint64_t seed = 1, double sigma = 0.2) {
  SyntheticSpec spec{seed, c.T, c.N, c.d, c.K, c.C, SyntheticTask::kWhichSoundsFirst, sigma};
  return generate_synthetic<double>(spec, 1).front();
}

ModelConfig random_config(Rng& rng) {
  ModelConfig c;
  c.T = 2 + rng.index(3);
  c.N = 2 + rng.index(2);
  c.d = 2 + rng.index(7);
  c.K = 1 + rng.index(3);
  c.C = 1 + rng.index(c.N * c.N);
  c.lambda = rng.uniform();
  c.r = 0.1 + 0.9 * rng.uniform();
  c.layers_m = 1 + rng.index(3);
  c.layers_s = 1 + rng.index(3);
  c.layers_q = 1 + rng.index(3);
  c.layers_mma = 1 + rng.index(2);
  c.exec_mode = static_cast<ExecMode>(rng.index(3));
  c.enable_mkpt = rng.uniform() < 0.7;
  c.enable_skpt = rng.uniform() < 0.7;
  c.enable_qkpt = rng.uniform() < 0.7;
  c.adjacency_mode_m = rng.uniform() < 0.5 ? AdjacencyMode::kDriven : AdjacencyMode::kVanilla;
  c.adjacency_mode_s = rng.uniform() < 0.5 ? AdjacencyMode::kDriven : AdjacencyMode::kVanilla;
  c.mma_use_audio = rng.uniform() < 0.7;
  c.mma_use_patch_visual = rng.uniform() < 0.7;
  c.mma_use_segment_visual = !c.mma_use_audio && !c.mma_use_patch_visual ? true : rng.uniform() < 0.7;
  c.qkpt_recompute_mask = rng.uniform() < 0.2;
  c.recompute_adjacency_per_layer = rng.uniform() < 0.2;
  c.adjacency_row_softmax = rng.uniform() < 0.2;
  c.mma_patch_graph_per_segment = rng.uniform() < 0.2;
  c.seed = rng.next();
  return c;
}

TEST(Model, ProbabilitySimplexOnRandomConfigs) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    auto cfg = random_config(rng);
    cfg.recompute_adjacency_per_layer = false;  // cubic growth per layer
    const auto b = testing::unit_rows(testing::random_bundle<double>(rng, cfg.T, cfg.N, cfg.d, cfg.K, cfg.C));
    const auto trace = forward(b, init_parameters<double>(cfg), cfg);
    double total = 0;
    for (double p : trace.probs.values()) {
      ASSERT_GE(p, 0.0) << trial << " " << to_json(cfg).dump();
      total += p;
    }
    ASSERT_NEAR(total, 1.0, 1e-6) << to_json(cfg).dump();
  }
}

TEST(Model, FloatSimplexOnParallelConfigs) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    auto cfg = random_config(rng);
    cfg.exec_mode = ExecMode::kParallel;
    cfg.recompute_adjacency_per_layer = false;
    cfg.d = 8 + rng.index(16);
    const auto b = testing::unit_rows(testing::random_bundle<float>(rng, cfg.T, cfg.N, cfg.d, cfg.K, cfg.C));
    const auto trace = forward(b, init_parameters<float>(cfg), cfg);
    double total = 0;
    for (float p : trace.probs.values()) total += p;
    ASSERT_NEAR(total, 1.0, 1e-6) << to_json(cfg).dump();
  }
}

TEST(Model, MmaOnlyConfigurationIsValid) {
  auto cfg = small_config();
  cfg.enable_mkpt = cfg.enable_skpt = cfg.enable_qkpt = false;
  const auto b = bundle_for(cfg);
  const auto trace = forward(b, init_parameters<double>(cfg), cfg);
  double total = 0;
  for (double p : trace.probs.values()) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Model, DisabledStageOnePassesInputsThrough) {
  auto cfg = small_config();
  cfg.enable_mkpt = cfg.enable_skpt = false;
  const auto b = bundle_for(cfg);
  const auto trace = forward(b, init_parameters<double>(cfg), cfg);
  EXPECT_EQ(trace.v_prime, b.visual);
  EXPECT_EQ(trace.a_prime, b.audio);
}

TEST(Model, FullRetentionKeepsEveryPatch) {
  auto cfg = small_config();
  cfg.r = 1.0;
  const auto trace = forward(bundle_for(cfg), init_parameters<double>(cfg), cfg);
  for (double beta : trace.mask.beta.values()) EXPECT_EQ(beta, 1.0);
}

TEST(Model, DroppedPatchesAreExactlyZero) {
  auto cfg = small_config();
  cfg.N = 3;
  cfg.r = 0.4;
  for (bool recompute : {false, true}) {
    cfg.qkpt_recompute_mask = recompute;
    const auto trace = forward(bundle_for(cfg), init_parameters<double>(cfg), cfg);
    const std::size_t P = cfg.patches();
    std::size_t dropped = 0;
    for (std::size_t t = 0; t < cfg.T; ++t)
      for (std::size_t i = 0; i < P; ++i) {
        if (trace.mask.beta(t, i) != 0.0) continue;
        ++dropped;
        for (std::size_t k = 0; k < cfg.d; ++k) ASSERT_EQ(trace.v_hat(t, i, k), 0.0);
      }
    EXPECT_EQ(dropped, cfg.T * (P - retained_count(P, cfg.r)));
  }
}

TEST(Model, DroppedPatchesReceiveNoGradientThroughQuestionGraph) {
  // The Q-KPT value path in isolation: masked patch rows as parameters.
  Rng rng(22);
  const std::size_t P = 4, K = 2, d = 3;
  ParameterStore<double> store;
  store.add("patches", testing::random_tensor<double>(rng, {P, d}));
  store.add_uniform("w0", d, d, rng);
  store.add_uniform("w1", d, d, rng);
  const auto q = testing::random_tensor<double>(rng, {K, d});
  const auto beta = Tensor<double>::vector({1, 0, 1, 0});
  store.zero_grad();
  ad::Tape<double> tape;
  auto v = tape.parameter(store.at("patches"));
  auto nodes = ad::concat_rows<double>({ad::scale_rows(v, tape.constant(beta)), tape.constant(q)});
  Tensor<double> keep({P + K}, 1.0);
  for (std::size_t i = 0; i < P; ++i) keep[i] = beta[i];
  ad::GraphOptions<double> options;
  options.after_layer = [&](const ad::Var<double>& x, std::size_t) { return ad::scale_rows(x, tape.constant(keep)); };
  auto out = ad::graph_forward(nodes, ad::gram(nodes), {tape.parameter(store.at("w0")), tape.parameter(store.at("w1"))}, options);
  tape.backward(ad::sum(ad::square(out)));
  const auto& g = store.at("patches").gradient;
  for (std::size_t k = 0; k < d; ++k) {
    EXPECT_EQ(g(1, k), 0.0);
    EXPECT_EQ(g(3, k), 0.0);
  }
}

TEST(Model, SoundMapInvariantToAudioScale) {
  auto cfg = small_config();
  auto b = bundle_for(cfg);
  const auto params = init_parameters<double>(cfg);
  const auto before = forward(b, params, cfg).sound.s;
  for (auto& x : b.audio.values()) x *= 7.5;
  EXPECT_LE(max_abs_diff(before, forward(b, params, cfg).sound.s), 1e-12);
}

TEST(Model, ForwardIsBitwiseDeterministic) {
  auto cfg = small_config();
  const auto b = bundle_for(cfg).cast<float>();
  const auto p1 = init_parameters<float>(cfg);
  const auto p2 = init_parameters<float>(cfg);
  EXPECT_TRUE(p1 == p2);
  EXPECT_EQ(forward(b, p1, cfg).probs, forward(b, p2, cfg).probs);
}

TEST(Model, ParameterLayoutIndependentOfSwitches) {
  auto cfg = small_config();
  const auto full = init_parameters<float>(cfg);
  for (const auto& nc : ablation_matrix(cfg)) {
    if (nc.grid == "layers") continue;
    const auto other = init_parameters<float>(nc.config);
    ASSERT_TRUE(other == full) << nc.name;
  }
}

TEST(Model, ExecutionModesDiffer) {
  auto cfg = small_config();
  const auto b = bundle_for(cfg);
  const auto params = init_parameters<double>(cfg);
  std::vector<Tensor<double>> probs;
  for (auto mode : {ExecMode::kParallel, ExecMode::kMThenS, ExecMode::kSThenM}) {
    cfg.exec_mode = mode;
    probs.push_back(forward(b, params, cfg).probs);
  }
  EXPECT_NE(probs[0], probs[1]);
  EXPECT_NE(probs[1], probs[2]);
}

TEST(Model, Errors) {
  auto cfg = small_config();
  const auto b = bundle_for(cfg);
  auto params = init_parameters<double>(cfg);
  auto none = cfg;
  none.mma_use_audio = none.mma_use_patch_visual = none.mma_use_segment_visual = false;
  EXPECT_THROW(forward(b, params, none), ConfigError);
  auto wrong = cfg;
  wrong.C = 3;
  EXPECT_THROW(forward(b, init_parameters<double>(wrong), wrong), DimensionError);
  const auto trace = forward(b, params, cfg);
  EXPECT_THROW(loss(trace, cfg.C), IndexError);
}

TEST(Model, LossExamples) {
  ForwardTrace<double> trace;
  trace.probs = Tensor<double>({8}, 0.125);
  EXPECT_NEAR(loss(trace, 3), std::log(8.0), 1e-12);
  trace.probs = Tensor<double>::vector({0, 0, 1, 0});
  EXPECT_EQ(loss(trace, 2), 0.0);
}

TEST(Model, TapeLossMatchesPlainForward) {
  auto cfg = small_config();
  const auto b = bundle_for(cfg);
  auto params = init_parameters<double>(cfg);
  const double plain = loss(forward(b, params, cfg), b.answer);
  ad::Tape<double> tape;
  EXPECT_NEAR(record_loss(tape, b, params, cfg).value()[0], plain, 1e-14);
}

TEST(Model, GradientCheckSmallConfigs) {
  auto cfg = small_config();
  cfg.layers_m = cfg.layers_s = cfg.layers_q = 1;
  for (auto mode : {ExecMode::kParallel, ExecMode::kMThenS, ExecMode::kSThenM}) {
    cfg.exec_mode = mode;
    const auto b = bundle_for(cfg, 3, 0.3).cast<long double>();
    auto store = init_parameters<long double>(cfg);
    const LossBuilder<long double> f = [&](ad::Tape<long double>& tape, ParameterStore<long double>& p) {
      return record_loss(tape, b, p, cfg);
    };
    const auto r = gradient_check(f, store, 1e-5, 1e-4);
    EXPECT_TRUE(r.passed) << to_string(mode) << " " << r.max_rel_error << " " << r.worst_parameter;
  }
}

TEST(Ablation, GridSizes) {
  const ModelConfig base;
  EXPECT_EQ(ablation_grid(base, AblationGrid::kModules).size(), 6u);
  EXPECT_EQ(ablation_grid(base, AblationGrid::kAdjacency).size(), 4u);
  EXPECT_EQ(ablation_grid(base, AblationGrid::kExec).size(), 3u);
  EXPECT_EQ(ablation_grid(base, AblationGrid::kLambda).size(), 5u);
  EXPECT_EQ(ablation_grid(base, AblationGrid::kRatio).size(), 5u);
  EXPECT_EQ(ablation_grid(base, AblationGrid::kLayers).size(), 15u);
  EXPECT_EQ(ablation_grid(base, AblationGrid::kMma).size(), 4u);
  EXPECT_EQ(ablation_matrix(base).size(), 42u);
  for (const auto& nc : ablation_matrix(base)) EXPECT_NO_THROW(nc.config.validate()) << nc.name;
}

TEST(Ablation, GridValues) {
  const ModelConfig base;
  std::vector<double> lambdas, ratios;
  for (const auto& nc : ablation_grid(base, AblationGrid::kLambda)) lambdas.push_back(nc.config.lambda);
  for (const auto& nc : ablation_grid(base, AblationGrid::kRatio)) ratios.push_back(nc.config.r);
  EXPECT_EQ(lambdas, (std::vector<double>{0.0, 0.2, 0.4, 0.8, 1.0}));
  EXPECT_EQ(ratios, (std::vector<double>{1.0, 0.8, 0.6, 0.4, 0.2}));
  const auto modules = ablation_grid(base, AblationGrid::kModules);
  EXPECT_FALSE(modules[1].config.enable_mkpt);
  EXPECT_TRUE(modules[1].config.enable_skpt);
  EXPECT_FALSE(modules[5].config.enable_qkpt);
  EXPECT_EQ(parse_grid("r"), AblationGrid::kRatio);
  EXPECT_THROW(parse_grid("nope"), ConfigError);
}

TEST(ModelConfig, DefaultsAndJson) {
  const ModelConfig c;
  EXPECT_EQ(c.lambda, 0.2);
  EXPECT_EQ(c.r, 0.8);
  EXPECT_EQ(c.layers_m, 3u);
  EXPECT_EQ(c.layers_s, 3u);
  EXPECT_EQ(c.layers_q, 2u);
  EXPECT_EQ(c.layers_mma, 1u);
  auto j = to_json(small_config());
  j["exec_mode"] = "s_then_m";
  j["adjacency_mode_m"] = "vanilla";
  const auto back = model_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_THROW(model_config_from_json({{"layers", 3}}), ConfigError);
  EXPECT_THROW(model_config_from_json({{"exec_mode", "sideways"}}), ConfigError);
  EXPECT_THROW(model_config_from_json({{"d", "wide"}}), ConfigError);
  EXPECT_EQ(model_config_from_json(nlohmann::json::object()).d, 512u);
}

TEST(ModelConfig, Validation) {
  auto c = small_config();
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.r = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.T = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c.enable_mkpt = false;
  EXPECT_NO_THROW(c.validate());
}

}  // namespace
}  // namespace psot
