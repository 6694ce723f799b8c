// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "psot/model_gradcheck.hpp"

namespace psot {
namespace {

TEST(ModelGradcheck, TinyFullModel) {
  const auto cfg = tiny_model_config();
  const auto report = model_gradient_check(cfg);
  EXPECT_TRUE(report.passed) << report.max_rel_error << " at " << report.worst_parameter;
  EXPECT_EQ(report.parameters.size(), init_parameters<double>(cfg).size());
}

TEST(ModelGradcheck, ExtensionSwitches) {
  auto base = tiny_model_config();
  for (int which = 0; which < 4; ++which) {
    auto cfg = base;
    cfg.qkpt_recompute_mask = which == 0;
    cfg.recompute_adjacency_per_layer = which == 1;
    cfg.adjacency_row_softmax = which == 2;
    cfg.mma_patch_graph_per_segment = which == 3;
    // Smaller step: with row softmax one pre-activation sits within 1e-5 of
    // the ReLU kink at this sample.
    const auto report = model_gradient_check(cfg, 1e-6);
    EXPECT_TRUE(report.passed) << which << ": " << report.max_rel_error << " at " << report.worst_parameter;
  }
}

TEST(ModelGradcheck, LambdaAndRatioExtremes) {
  auto cfg = tiny_model_config();
  cfg.lambda = 1.0;
  cfg.r = 0.25;
  cfg.T = 3;
  const auto report = model_gradient_check(cfg);
  EXPECT_TRUE(report.passed) << report.max_rel_error << " at " << report.worst_parameter;
}

TEST(ModelGradcheck, ReportIsDeterministic) {
  const auto cfg = tiny_model_config();
  const auto a = model_gradient_check(cfg);
  const auto b = model_gradient_check(cfg);
  EXPECT_EQ(a.max_rel_error, b.max_rel_error);
  EXPECT_EQ(a.worst_parameter, b.worst_parameter);
}

}  // namespace
}  // namespace psot
