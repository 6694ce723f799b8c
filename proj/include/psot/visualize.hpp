// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "psot/bundle.hpp"
#include "psot/graphs.hpp"
#include "psot/model.hpp"

namespace psot {

enum class MapKind { kMotion, kSound, kMask, kAdjacencyWeight };

inline const char* to_string(MapKind k) {
  switch (k) {
    case MapKind::kMotion: return "motion";
    case MapKind::kSound: return "sound";
    case MapKind::kMask: return "mask";
    case MapKind::kAdjacencyWeight: return "adjacency_weight";
  }
  return "unknown";
}

inline MapKind parse_map_kind(const std::string& s) {
  for (auto k : {MapKind::kMotion, MapKind::kSound, MapKind::kMask, MapKind::kAdjacencyWeight})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown map '" + s + "'");
}

// Which stage-1 graph `adjacency_weight` reads.
enum class AdjacencySource { kMotion, kSound };

inline AdjacencySource parse_adjacency_source(const std::string& s) {
  if (s == "motion") return AdjacencySource::kMotion;
  if (s == "sound") return AdjacencySource::kSound;
  throw ConfigError("unknown adjacency source '" + s + "'");
}

// An N×N map, row-major over the patch grid.
struct PatchMap {
  std::size_t grid = 0;
  std::vector<double> values;
  bool binary = false;
};

// Per-patch aggregated edge weight: row sums of the patch block of an
// adjacency, excluding the self edge and the audio node.
template <std::floating_point S>
std::vector<double> adjacency_row_weights(const Tensor<S>& adjacency, std::size_t patches) {
  std::vector<double> out(patches, 0.0);
  for (std::size_t i = 0; i < patches; ++i)
    for (std::size_t j = 0; j < patches; ++j)
      if (j != i) out[i] += static_cast<double>(adjacency(i, j));
  return out;
}

template <std::floating_point S>
PatchMap extract_map(const FeatureBundle<S>& bundle, const ParameterStore<S>& params, const ModelConfig& cfg,
                     std::size_t t, MapKind kind, AdjacencySource source = AdjacencySource::kMotion) {
  if (t >= bundle.segments()) {
    throw IndexError("segment " + std::to_string(t) + " out of range for T=" + std::to_string(bundle.segments()));
  }
  const auto trace = forward(bundle, params, cfg);
  const std::size_t P = cfg.patches();
  PatchMap map{cfg.N, std::vector<double>(P), kind == MapKind::kMask};
  auto copy = [&](const Tensor<S>& rows) {
    auto row = rows.row(t);
    for (std::size_t i = 0; i < P; ++i) map.values[i] = static_cast<double>(row[i]);
  };
  switch (kind) {
    case MapKind::kMotion: copy(trace.motion.m); break;
    case MapKind::kSound: copy(trace.sound.s); break;
    case MapKind::kMask: copy(trace.mask.beta); break;
    case MapKind::kAdjacencyWeight: {
      const Tensor<S> patches = bundle.visual.matrix_at(t);
      const auto audio = bundle.audio.row(t);
      const auto& activation = source == AdjacencySource::kMotion ? trace.motion.m : trace.sound.s;
      const auto w = activation.row(t);
      const AdjacencyMode mode = source == AdjacencySource::kMotion ? cfg.adjacency_mode_m : cfg.adjacency_mode_s;
      Tensor<S> adj;
      if (mode == AdjacencyMode::kVanilla) adj = build_vanilla_adjacency(patches, audio);
      else if (source == AdjacencySource::kMotion) adj = build_motion_adjacency(patches, audio, w);
      else adj = build_sound_adjacency(patches, audio, w);
      map.values = adjacency_row_weights(adj, P);
      break;
    }
  }
  return map;
}

// Per-map min-max to [0, 255]; a constant map becomes mid gray. Binary maps
// go straight to black/white.
inline std::vector<std::uint8_t> to_gray(const PatchMap& map) {
  std::vector<std::uint8_t> px(map.values.size());
  if (map.binary) {
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = map.values[i] > 0.5 ? 255 : 0;
    return px;
  }
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  const double range = *hi - *lo;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (!(range > 0.0)) {
      px[i] = 128;
      continue;
    }
    px[i] = static_cast<std::uint8_t>(std::lround(255.0 * (map.values[i] - *lo) / range));
  }
  return px;
}

inline void write_map_csv(const PatchMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatErrc::kIo, path.string(), "cannot open for writing");
  char buf[64];
  for (std::size_t r = 0; r < map.grid; ++r) {
    for (std::size_t c = 0; c < map.grid; ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", map.values[r * map.grid + c]);
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

// Binary (P5) portable graymap.
inline void write_pgm(const std::vector<std::uint8_t>& pixels, std::size_t width, std::size_t height,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatErrc::kIo, path.string(), "cannot open for writing");
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

// Writes <prefix>.csv and <prefix>.pgm.
inline void write_map(const PatchMap& map, const std::string& prefix) {
  write_map_csv(map, prefix + ".csv");
  write_pgm(to_gray(map), map.grid, map.grid, prefix + ".pgm");
}

}  // namespace psot
