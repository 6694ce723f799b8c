// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "json.hpp"
#include "psot/errors.hpp"

namespace psot {

enum class ExecMode { kParallel, kMThenS, kSThenM };
enum class AdjacencyMode { kDriven, kVanilla };

inline const char* to_string(ExecMode m) {
  switch (m) {
    case ExecMode::kParallel: return "parallel";
    case ExecMode::kMThenS: return "m_then_s";
    case ExecMode::kSThenM: return "s_then_m";
  }
  return "unknown";
}

inline const char* to_string(AdjacencyMode m) { return m == AdjacencyMode::kDriven ? "driven" : "vanilla"; }

inline ExecMode parse_exec_mode(const std::string& s) {
  if (s == "parallel") return ExecMode::kParallel;
  if (s == "m_then_s") return ExecMode::kMThenS;
  if (s == "s_then_m") return ExecMode::kSThenM;
  throw ConfigError("unknown exec_mode '" + s + "'");
}

inline AdjacencyMode parse_adjacency_mode(const std::string& s) {
  if (s == "driven") return AdjacencyMode::kDriven;
  if (s == "vanilla") return AdjacencyMode::kVanilla;
  throw ConfigError("unknown adjacency mode '" + s + "'");
}

// Hyperparameters and ablation switches. Defaults are the full model.
struct ModelConfig {
  std::size_t T = 10;
  std::size_t N = 8;
  std::size_t d = 512;
  std::size_t K = 14;
  std::size_t C = 42;

  double lambda = 0.2;
  double r = 0.8;

  std::size_t layers_m = 3;
  std::size_t layers_s = 3;
  std::size_t layers_q = 2;
  std::size_t layers_mma = 1;

  ExecMode exec_mode = ExecMode::kParallel;
  bool enable_mkpt = true;
  bool enable_skpt = true;
  bool enable_qkpt = true;
  AdjacencyMode adjacency_mode_m = AdjacencyMode::kDriven;
  AdjacencyMode adjacency_mode_s = AdjacencyMode::kDriven;

  bool mma_use_audio = true;
  bool mma_use_patch_visual = true;
  bool mma_use_segment_visual = true;

  // Extensions, all off by default.
  bool qkpt_recompute_mask = false;
  bool recompute_adjacency_per_layer = false;
  bool adjacency_row_softmax = false;
  bool mma_patch_graph_per_segment = false;

  std::uint64_t seed = 0;

  std::size_t patches() const noexcept { return N * N; }

  void validate() const {
    if (T == 0 || N == 0 || d == 0 || K == 0 || C == 0) throw ConfigError("T, N, d, K and C must be positive");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("r must lie in (0, 1]");
    if (layers_m == 0 || layers_s == 0 || layers_q == 0 || layers_mma == 0) {
      throw ConfigError("every graph needs at least one layer");
    }
    if (!mma_use_audio && !mma_use_patch_visual && !mma_use_segment_visual) {
      throw ConfigError("all MMA inputs disabled: no evidence reaches the answer head");
    }
    if (enable_mkpt && T < 2) throw ConfigError("motion tracking needs T >= 2");
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"T", c.T},
      {"N", c.N},
      {"d", c.d},
      {"K", c.K},
      {"C", c.C},
      {"lambda", c.lambda},
      {"r", c.r},
      {"layers_m", c.layers_m},
      {"layers_s", c.layers_s},
      {"layers_q", c.layers_q},
      {"layers_mma", c.layers_mma},
      {"exec_mode", to_string(c.exec_mode)},
      {"enable_mkpt", c.enable_mkpt},
      {"enable_skpt", c.enable_skpt},
      {"enable_qkpt", c.enable_qkpt},
      {"adjacency_mode_m", to_string(c.adjacency_mode_m)},
      {"adjacency_mode_s", to_string(c.adjacency_mode_s)},
      {"mma_use_audio", c.mma_use_audio},
      {"mma_use_patch_visual", c.mma_use_patch_visual},
      {"mma_use_segment_visual", c.mma_use_segment_visual},
      {"qkpt_recompute_mask", c.qkpt_recompute_mask},
      {"recompute_adjacency_per_layer", c.recompute_adjacency_per_layer},
      {"adjacency_row_softmax", c.adjacency_row_softmax},
      {"mma_patch_graph_per_segment", c.mma_patch_graph_per_segment},
      {"seed", c.seed},
  };
}

namespace detail {

// Rejects keys that are not fields of the target struct.
inline void check_keys(const nlohmann::json& j, const nlohmann::json& reference, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!reference.contains(key)) throw ConfigError(std::string("unknown ") + what + " key '" + key + "'");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

// Missing keys keep their defaults.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  detail::check_keys(j, to_json(c), "model config");
  detail::read_field(j, "T", c.T);
  detail::read_field(j, "N", c.N);
  detail::read_field(j, "d", c.d);
  detail::read_field(j, "K", c.K);
  detail::read_field(j, "C", c.C);
  detail::read_field(j, "lambda", c.lambda);
  detail::read_field(j, "r", c.r);
  detail::read_field(j, "layers_m", c.layers_m);
  detail::read_field(j, "layers_s", c.layers_s);
  detail::read_field(j, "layers_q", c.layers_q);
  detail::read_field(j, "layers_mma", c.layers_mma);
  std::string text;
  if (j.contains("exec_mode")) {
    detail::read_field(j, "exec_mode", text);
    c.exec_mode = parse_exec_mode(text);
  }
  detail::read_field(j, "enable_mkpt", c.enable_mkpt);
  detail::read_field(j, "enable_skpt", c.enable_skpt);
  detail::read_field(j, "enable_qkpt", c.enable_qkpt);
  if (j.contains("adjacency_mode_m")) {
    detail::read_field(j, "adjacency_mode_m", text);
    c.adjacency_mode_m = parse_adjacency_mode(text);
  }
  if (j.contains("adjacency_mode_s")) {
    detail::read_field(j, "adjacency_mode_s", text);
    c.adjacency_mode_s = parse_adjacency_mode(text);
  }
  detail::read_field(j, "mma_use_audio", c.mma_use_audio);
  detail::read_field(j, "mma_use_patch_visual", c.mma_use_patch_visual);
  detail::read_field(j, "mma_use_segment_visual", c.mma_use_segment_visual);
  detail::read_field(j, "qkpt_recompute_mask", c.qkpt_recompute_mask);
  detail::read_field(j, "recompute_adjacency_per_layer", c.recompute_adjacency_per_layer);
  detail::read_field(j, "adjacency_row_softmax", c.adjacency_row_softmax);
  detail::read_field(j, "mma_patch_graph_per_segment", c.mma_patch_graph_per_segment);
  detail::read_field(j, "seed", c.seed);
  return c;
}

}  // namespace psot
