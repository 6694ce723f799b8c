// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "psot/binary_io.hpp"
#include "psot/model_config.hpp"
#include "psot/parameters.hpp"

namespace psot {

inline constexpr std::uint8_t kCheckpointMagic[6] = {0x50, 0x53, 0x4F, 0x54, 0x57, 0x31};  // "PSOTW1"
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, little-endian:
//   magic[6] version:u32 scalar_width:u32 seed:u64
//   config_len:u32 config_json[config_len]
//   count:u32
//   per parameter: name_len:u32 name rank:u32 dims:u64[rank] payload
template <std::floating_point S>
struct Checkpoint {
  ModelConfig config;
  ParameterStore<S> params;
};

template <std::floating_point S>
std::vector<std::uint8_t> encode_checkpoint(const ParameterStore<S>& params, const ModelConfig& cfg) {
  const std::size_t width = sizeof(S) <= 4 ? 4 : 8;
  io::ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(width));
  w.u64(params.seed());
  const std::string config = to_json(cfg).dump();
  w.u32(static_cast<std::uint32_t>(config.size()));
  w.bytes(config);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t dim : p.value.shape()) w.u64(dim);
    for (S v : p.value.values()) w.scalar(v, width);
  }
  return w.take();
}

template <std::floating_point S>
Checkpoint<S> decode_checkpoint(std::span<const std::uint8_t> data) {
  io::ByteReader r(data);
  auto magic = r.bytes(sizeof(kCheckpointMagic), "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError(FormatErrc::kBadMagic, "magic", "not a PSOTW1 checkpoint");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrc::kVersionMismatch, "version", "got " + std::to_string(version));
  }
  const std::uint32_t width = r.u32("scalar_width");
  if (width != 4 && width != 8) {
    throw FormatError(FormatErrc::kScalarWidth, "scalar_width", "got " + std::to_string(width));
  }
  const std::uint64_t seed = r.u64("seed");
  const std::uint32_t config_len = r.u32("config_len");
  auto config_bytes = r.bytes(config_len, "config");
  Checkpoint<S> out{{}, ParameterStore<S>(seed)};
  try {
    out.config = model_config_from_json(nlohmann::json::parse(config_bytes.begin(), config_bytes.end()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrc::kDimension, "config", e.what());
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrc::kDimension, "config", e.what());
  }
  const std::uint32_t count = r.u32("count");
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string field = "parameter " + std::to_string(k);
    const std::uint32_t name_len = r.u32(field + " name_len");
    auto name_bytes = r.bytes(name_len, field + " name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint32_t rank = r.u32(name + " rank");
    if (rank == 0 || rank > 3) throw FormatError(FormatErrc::kDimension, name, "rank " + std::to_string(rank));
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& dim : shape) {
      dim = static_cast<std::size_t>(r.u64(name + " dims"));
      if (dim == 0) throw FormatError(FormatErrc::kDimension, name, "zero dimension");
      total *= dim;
    }
    r.require(static_cast<std::size_t>(total * width), name);
    std::vector<S> values(static_cast<std::size_t>(total));
    for (auto& v : values) {
      v = static_cast<S>(r.scalar(width, name));
      if (!std::isfinite(v)) throw FormatError(FormatErrc::kNonFinite, name, "non-finite weight");
    }
    out.params.add(name, Tensor<S>(shape, std::move(values)));
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatErrc::kPayloadLengthMismatch, "payload",
                      std::to_string(r.remaining()) + " trailing bytes");
  }
  return out;
}

template <std::floating_point S>
void write_checkpoint(const ParameterStore<S>& params, const ModelConfig& cfg, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(params, cfg));
}

template <std::floating_point S>
Checkpoint<S> read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_checkpoint<S>(bytes);
}

}  // namespace psot
