// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "psot/ablation.hpp"
#include "psot/gradcheck.hpp"
#include "psot/model.hpp"
#include "psot/synthetic.hpp"

namespace psot {

// Smallest model shape the full pipeline supports.
inline ModelConfig tiny_model_config(std::uint64_t seed = 3) {
  ModelConfig c;
  c.T = 2;
  c.N = 2;
  c.d = 8;
  c.K = 3;
  c.C = 4;
  c.seed = seed;
  return c;
}

struct ModelGradientCheck {
  std::string name;
  GradientCheckReport report;
};

// Extended precision: the deepest weights see gradients near 1e-9, below
// what double-precision central differences resolve.
using CheckScalar = long double;

// Full-model check on one jittered synthetic sample.
template <std::floating_point S = CheckScalar>
GradientCheckReport model_gradient_check(const ModelConfig& cfg, double eps = 1e-5, double tol = 1e-4,
                                         std::uint64_t data_seed = 11) {
  SyntheticSpec spec{data_seed, cfg.T, cfg.N, cfg.d, cfg.K, cfg.C, SyntheticTask::kWhichSoundsFirst, 0.3};
  const auto bundle = generate_synthetic<S>(spec, 1).front();
  auto store = init_parameters<S>(cfg);
  const LossBuilder<S> loss = [&](ad::Tape<S>& tape, ParameterStore<S>& params) {
    return record_loss(tape, bundle, params, cfg);
  };
  return gradient_check(loss, store, eps, tol);
}

// The full model followed by every module, adjacency and execution-order
// ablation row.
inline std::vector<ModelGradientCheck> tiny_gradient_checks(double eps = 1e-5, double tol = 1e-4) {
  const ModelConfig base = tiny_model_config();
  std::vector<ModelGradientCheck> out;
  out.push_back({"full", model_gradient_check(base, eps, tol)});
  for (auto grid : {AblationGrid::kModules, AblationGrid::kAdjacency, AblationGrid::kExec}) {
    for (const auto& nc : ablation_grid(base, grid)) {
      out.push_back({nc.grid + "/" + nc.name, model_gradient_check(nc.config, eps, tol)});
    }
  }
  return out;
}

}  // namespace psot
