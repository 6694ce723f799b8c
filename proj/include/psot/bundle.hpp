// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "psot/binary_io.hpp"
#include "psot/errors.hpp"
#include "psot/tensor.hpp"

namespace psot {

// Answer value for bundles exported without a label.
inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

inline constexpr std::uint8_t kBundleMagic[6] = {0x50, 0x53, 0x4F, 0x54, 0x31, 0x00};  // "PSOT1\0"
inline constexpr std::uint32_t kBundleVersion = 1;

// One sample: audio [T×d], visual patches [T×N²×d], question words [K×d].
template <std::floating_point S>
struct FeatureBundle {
  Tensor<S> audio;
  Tensor<S> visual;
  Tensor<S> question;
  std::uint32_t answer = 0;
  std::uint32_t num_classes = 0;
  std::string sample_id;

  std::size_t segments() const { return audio.dim(0); }
  std::size_t patches() const { return visual.dim(1); }
  std::size_t grid() const { return static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(patches())))); }
  std::size_t dim() const { return audio.dim(1); }
  std::size_t words() const { return question.dim(0); }
  bool labeled() const { return answer != kUnlabeled; }

  void validate() const {
    if (audio.rank() != 2 || visual.rank() != 3 || question.rank() != 2) {
      throw DimensionError("bundle '" + sample_id + "' tensors must be [T×d], [T×N²×d], [K×d]");
    }
    const std::size_t d = audio.dim(1);
    if (visual.dim(0) != audio.dim(0) || visual.dim(2) != d || question.dim(1) != d) {
      throw DimensionError("bundle '" + sample_id + "' shapes disagree: audio " + shape_string(audio.shape()) +
                           ", visual " + shape_string(visual.shape()) + ", question " +
                           shape_string(question.shape()));
    }
    if (labeled() && answer >= num_classes) {
      throw IndexError("bundle '" + sample_id + "' answer " + std::to_string(answer) + " out of range for " +
                       std::to_string(num_classes) + " classes");
    }
  }

  template <std::floating_point T>
  FeatureBundle<T> cast() const {
    return {audio.template cast<T>(), visual.template cast<T>(), question.template cast<T>(), answer, num_classes,
            sample_id};
  }

  friend bool operator==(const FeatureBundle& a, const FeatureBundle& b) {
    return a.audio == b.audio && a.visual == b.visual && a.question == b.question && a.answer == b.answer &&
           a.num_classes == b.num_classes && a.sample_id == b.sample_id;
  }
};

// Serialized scalars: 4·(T·d + T·N2·d + K·d) bytes at width 4.
inline std::uint64_t bundle_payload_bytes(std::uint64_t T, std::uint64_t N2, std::uint64_t d, std::uint64_t K,
                                          std::uint64_t width) {
  return width * (T * d + T * N2 * d + K * d);
}

template <std::floating_point S>
std::vector<std::uint8_t> encode_bundle(const FeatureBundle<S>& b) {
  b.validate();
  const std::size_t width = sizeof(S) <= 4 ? 4 : 8;
  io::ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(kBundleMagic));
  w.u32(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(b.segments()));
  w.u32(static_cast<std::uint32_t>(b.patches()));
  w.u32(static_cast<std::uint32_t>(b.dim()));
  w.u32(static_cast<std::uint32_t>(b.words()));
  w.u32(b.num_classes);
  w.u32(b.answer);
  w.u32(static_cast<std::uint32_t>(b.sample_id.size()));
  w.bytes(b.sample_id);
  w.u8(static_cast<std::uint8_t>(width));
  for (const Tensor<S>* t : {&b.audio, &b.visual, &b.question})
    for (S v : t->values()) w.scalar(v, width);
  return w.take();
}

// Strict decoding rejects non-finite payload values and non-square patch
// counts in addition to the structural checks.
template <std::floating_point S>
FeatureBundle<S> decode_bundle(std::span<const std::uint8_t> data, bool strict = true) {
  io::ByteReader r(data);
  auto magic = r.bytes(sizeof(kBundleMagic), "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kBundleMagic))) {
    throw FormatError(FormatErrc::kBadMagic, "magic", "expected \"PSOT1\\0\"");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kBundleVersion) {
    throw FormatError(FormatErrc::kVersionMismatch, "version",
                      "expected " + std::to_string(kBundleVersion) + ", got " + std::to_string(version));
  }
  const std::uint32_t T = r.u32("T");
  const std::uint32_t N2 = r.u32("N2");
  const std::uint32_t d = r.u32("d");
  const std::uint32_t K = r.u32("K");
  const std::uint32_t C = r.u32("C");
  const std::uint32_t answer = r.u32("answer");
  const std::uint32_t id_len = r.u32("sample_id_len");

  const std::pair<const char*, std::uint32_t> dims[] = {{"T", T}, {"N2", N2}, {"d", d}, {"K", K}, {"C", C}};
  for (const auto& [field, value] : dims) {
    if (value == 0) throw FormatError(FormatErrc::kDimension, field, "must be positive");
  }
  if (strict) {
    const auto side = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(N2))));
    if (side * side != N2) {
      throw FormatError(FormatErrc::kDimension, "N2", std::to_string(N2) + " is not a square patch count");
    }
  }
  if (answer != kUnlabeled && answer >= C) {
    throw FormatError(FormatErrc::kAnswerRange, "answer",
                      std::to_string(answer) + " out of range for C=" + std::to_string(C));
  }

  auto id_bytes = r.bytes(id_len, "sample_id");
  std::string sample_id(id_bytes.begin(), id_bytes.end());

  const std::uint8_t width = r.u8("scalar_width");
  if (width != 4 && width != 8) {
    throw FormatError(FormatErrc::kScalarWidth, "scalar_width", "expected 4 or 8, got " + std::to_string(width));
  }

  const std::uint64_t expected = bundle_payload_bytes(T, N2, d, K, width);
  if (r.remaining() > expected) {
    throw FormatError(FormatErrc::kPayloadLengthMismatch, "payload",
                      "header implies " + std::to_string(expected) + " payload bytes, file has " +
                          std::to_string(r.remaining()));
  }

  auto read_section = [&](const char* field, Shape shape) {
    const std::size_t count = shape_product(shape);
    r.require(count * width, field);
    std::vector<S> values(count);
    for (auto& v : values) {
      v = static_cast<S>(r.scalar(width, field));
      if (strict && !std::isfinite(v)) throw FormatError(FormatErrc::kNonFinite, field, "non-finite value");
    }
    return Tensor<S>(std::move(shape), std::move(values));
  };

  FeatureBundle<S> b;
  b.audio = read_section("audio", {T, d});
  b.visual = read_section("visual", {T, N2, d});
  b.question = read_section("question", {K, d});
  b.answer = answer;
  b.num_classes = C;
  b.sample_id = std::move(sample_id);
  return b;
}

template <std::floating_point S>
void write_bundle(const FeatureBundle<S>& b, const std::filesystem::path& path) {
  io::write_file(path, encode_bundle(b));
}

template <std::floating_point S>
FeatureBundle<S> read_bundle(const std::filesystem::path& path, bool strict = true) {
  const auto data = io::read_file(path);
  return decode_bundle<S>(data, strict);
}

// A dataset directory: *.psot files plus manifest.txt with one relative
// path per line.
template <std::floating_point S>
void write_dataset(const std::filesystem::path& dir, const std::vector<FeatureBundle<S>>& bundles) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw FormatError(FormatErrc::kIo, (dir / "manifest.txt").string(), "cannot open for writing");
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%06zu.psot", i);
    write_bundle(bundles[i], dir / name);
    manifest << name << '\n';
  }
}

template <std::floating_point S>
std::vector<FeatureBundle<S>> read_dataset(const std::filesystem::path& dir, bool strict = true) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw FormatError(FormatErrc::kIo, (dir / "manifest.txt").string(), "cannot open manifest");
  std::vector<FeatureBundle<S>> out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(read_bundle<S>(dir / line, strict));
  }
  return out;
}

}  // namespace psot
