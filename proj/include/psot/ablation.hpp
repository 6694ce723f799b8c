// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "psot/model_config.hpp"

namespace psot {

enum class AblationGrid { kModules, kAdjacency, kExec, kLambda, kRatio, kLayers, kMma };

inline const char* to_string(AblationGrid g) {
  switch (g) {
    case AblationGrid::kModules: return "modules";
    case AblationGrid::kAdjacency: return "adjacency";
    case AblationGrid::kExec: return "exec";
    case AblationGrid::kLambda: return "lambda";
    case AblationGrid::kRatio: return "r";
    case AblationGrid::kLayers: return "layers";
    case AblationGrid::kMma: return "mma";
  }
  return "unknown";
}

inline constexpr AblationGrid kAllGrids[] = {AblationGrid::kModules, AblationGrid::kAdjacency, AblationGrid::kExec,
                                             AblationGrid::kLambda,  AblationGrid::kRatio,     AblationGrid::kLayers,
                                             AblationGrid::kMma};

inline AblationGrid parse_grid(const std::string& name) {
  for (auto g : kAllGrids)
    if (name == to_string(g)) return g;
  throw ConfigError("unknown ablation grid '" + name + "'");
}

struct NamedConfig {
  std::string grid;
  std::string name;
  ModelConfig config;
};

// One configuration per row of the corresponding ablation table, each a
// copy of `base` with the ablated switch changed.
inline std::vector<NamedConfig> ablation_grid(const ModelConfig& base, AblationGrid grid) {
  std::vector<NamedConfig> out;
  const std::string g = to_string(grid);
  auto add = [&](std::string name, auto&& edit) {
    ModelConfig c = base;
    edit(c);
    out.push_back({g, std::move(name), c});
  };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return std::string(buf);
  };

  switch (grid) {
    case AblationGrid::kModules:
      add("a_full", [](ModelConfig&) {});
      add("b_no_mkpt", [](ModelConfig& c) { c.enable_mkpt = false; });
      add("c_no_skpt", [](ModelConfig& c) { c.enable_skpt = false; });
      add("d_no_qkpt", [](ModelConfig& c) { c.enable_qkpt = false; });
      add("e_no_mkpt_skpt", [](ModelConfig& c) { c.enable_mkpt = c.enable_skpt = false; });
      add("f_mma_only", [](ModelConfig& c) { c.enable_mkpt = c.enable_skpt = c.enable_qkpt = false; });
      break;
    case AblationGrid::kAdjacency:
      add("a_driven_both", [](ModelConfig&) {});
      add("b_vanilla_m", [](ModelConfig& c) { c.adjacency_mode_m = AdjacencyMode::kVanilla; });
      add("c_vanilla_s", [](ModelConfig& c) { c.adjacency_mode_s = AdjacencyMode::kVanilla; });
      add("d_vanilla_both", [](ModelConfig& c) {
        c.adjacency_mode_m = c.adjacency_mode_s = AdjacencyMode::kVanilla;
      });
      break;
    case AblationGrid::kExec:
      add("a_m_then_s", [](ModelConfig& c) { c.exec_mode = ExecMode::kMThenS; });
      add("b_s_then_m", [](ModelConfig& c) { c.exec_mode = ExecMode::kSThenM; });
      add("c_parallel", [](ModelConfig& c) { c.exec_mode = ExecMode::kParallel; });
      break;
    case AblationGrid::kLambda:
      for (double l : {0.0, 0.2, 0.4, 0.8, 1.0}) add("lambda_" + fmt(l), [l](ModelConfig& c) { c.lambda = l; });
      break;
    case AblationGrid::kRatio:
      for (double r : {1.0, 0.8, 0.6, 0.4, 0.2}) add("r_" + fmt(r), [r](ModelConfig& c) { c.r = r; });
      break;
    case AblationGrid::kLayers:
      for (std::size_t l = 1; l <= 5; ++l) add("layers_m_" + std::to_string(l), [l](ModelConfig& c) { c.layers_m = l; });
      for (std::size_t l = 1; l <= 5; ++l) add("layers_s_" + std::to_string(l), [l](ModelConfig& c) { c.layers_s = l; });
      for (std::size_t l = 1; l <= 5; ++l) add("layers_q_" + std::to_string(l), [l](ModelConfig& c) { c.layers_q = l; });
      break;
    case AblationGrid::kMma:
      add("a_full", [](ModelConfig&) {});
      add("b_no_audio", [](ModelConfig& c) { c.mma_use_audio = false; });
      add("c_no_patch_visual", [](ModelConfig& c) { c.mma_use_patch_visual = false; });
      add("d_no_segment_visual", [](ModelConfig& c) { c.mma_use_segment_visual = false; });
      break;
  }
  return out;
}

// Every grid, concatenated in kAllGrids order.
inline std::vector<NamedConfig> ablation_matrix(const ModelConfig& base) {
  std::vector<NamedConfig> out;
  for (auto g : kAllGrids) {
    auto rows = ablation_grid(base, g);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

}  // namespace psot
