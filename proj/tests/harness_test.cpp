// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <utility>
#include <sstream>

#include "psot/ablation_runner.hpp"
#include "psot/binary_io.hpp"
#include "psot/checkpoint.hpp"
#include "psot/model_gradcheck.hpp"
#include "psot/synthetic.hpp"
#include "psot/visualize.hpp"

namespace psot {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("psot_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

FormatErrc decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_checkpoint<float>(bytes);
  } catch (const FormatError& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode accepted corrupt checkpoint";
  return FormatErrc::kIo;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

TEST(Checkpoint, RoundTripFloatAndDouble) {
  auto cfg = tiny_model_config(17);
  cfg.layers_q = 3;
  const auto pf = init_parameters<float>(cfg);
  const auto back = decode_checkpoint<float>(encode_checkpoint(pf, cfg));
  EXPECT_TRUE(back.params == pf);
  EXPECT_EQ(back.params.seed(), 17u);
  EXPECT_EQ(to_json(back.config), to_json(cfg));

  const auto pd = init_parameters<double>(cfg);
  const auto dir = scratch("ckpt");
  write_checkpoint(pd, cfg, dir / "w.bin");
  EXPECT_TRUE(read_checkpoint<double>(dir / "w.bin").params == pd);
}

TEST(Checkpoint, HeaderBytes) {
  const auto cfg = tiny_model_config();
  const auto bytes = encode_checkpoint(init_parameters<float>(cfg), cfg);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), "PSOTW1");
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[10], 4);
}

TEST(Checkpoint, Corruptions) {
  const auto cfg = tiny_model_config();
  const auto good = encode_checkpoint(init_parameters<float>(cfg), cfg);
  auto b = good;
  b[0] = 'X';
  EXPECT_EQ(decode_error(b), FormatErrc::kBadMagic);
  b = good;
  put_u32(b, 6, 2);
  EXPECT_EQ(decode_error(b), FormatErrc::kVersionMismatch);
  b = good;
  put_u32(b, 10, 2);
  EXPECT_EQ(decode_error(b), FormatErrc::kScalarWidth);
  b = good;
  b.resize(b.size() - 3);
  EXPECT_EQ(decode_error(b), FormatErrc::kTruncated);
  b = good;
  b.push_back(0);
  EXPECT_EQ(decode_error(b), FormatErrc::kPayloadLengthMismatch);
  b = good;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(b.data() + b.size() - 4, &nan, 4);
  EXPECT_EQ(decode_error(b), FormatErrc::kNonFinite);
  b = good;
  b[27] = '!';  // inside the config JSON
  EXPECT_EQ(decode_error(b), FormatErrc::kDimension);
  b.clear();
  EXPECT_EQ(decode_error(b), FormatErrc::kTruncated);
}

TEST(Visualize, GrayScaling) {
  PatchMap constant{2, {0.3, 0.3, 0.3, 0.3}, false};
  EXPECT_EQ(to_gray(constant), (std::vector<std::uint8_t>(4, 128)));
  PatchMap ramp{2, {0.0, 1.0, 0.5, 0.25}, false};
  EXPECT_EQ(to_gray(ramp), (std::vector<std::uint8_t>{0, 255, 128, 64}));
  PatchMap mask{2, {1, 0, 0, 1}, true};
  EXPECT_EQ(to_gray(mask), (std::vector<std::uint8_t>{255, 0, 0, 255}));
}

TEST(Visualize, MotionPeaksAtMovingPatch) {
  auto cfg = tiny_model_config();
  cfg.N = 3;
  cfg.T = 4;
  cfg.C = 5;
  SyntheticSpec spec{5, cfg.T, cfg.N, cfg.d, cfg.K, cfg.C, SyntheticTask::kWhichMoves, 0.0};
  const auto data = generate_synthetic<double>(spec, 20);
  const auto params = init_parameters<double>(cfg);
  for (const auto& b : data) {
    const auto map = extract_map(b, params, cfg, 0, MapKind::kMotion);
    const auto peak = std::max_element(map.values.begin(), map.values.end()) - map.values.begin();
    EXPECT_EQ(static_cast<std::uint32_t>(peak), b.answer);
  }
}

TEST(Visualize, MaskHasRetainedCount) {
  auto cfg = tiny_model_config();
  cfg.N = 3;
  cfg.C = 5;
  SyntheticSpec spec{6, cfg.T, cfg.N, cfg.d, cfg.K, cfg.C, SyntheticTask::kWhichSounds, 0.1};
  const auto b = generate_synthetic<double>(spec, 1).front();
  const auto params = init_parameters<double>(cfg);
  for (double r : {0.2, 0.5, 0.8, 1.0}) {
    cfg.r = r;
    const auto gray = to_gray(extract_map(b, params, cfg, 1, MapKind::kMask));
    EXPECT_EQ(static_cast<std::size_t>(std::count(gray.begin(), gray.end(), 255)), retained_count(9, r));
  }
}

TEST(Visualize, AdjacencyWeightsAndFiles) {
  const auto cfg = tiny_model_config();
  SyntheticSpec spec{6, cfg.T, cfg.N, cfg.d, cfg.K, cfg.C, SyntheticTask::kWhichSounds, 0.1};
  const auto b = generate_synthetic<double>(spec, 1).front();
  const auto params = init_parameters<double>(cfg);
  const auto map = extract_map(b, params, cfg, 1, MapKind::kAdjacencyWeight, AdjacencySource::kSound);
  const auto sound = forward(b, params, cfg).sound.s;
  const auto adj = build_sound_adjacency(b.visual.matrix_at(1), b.audio.row(1), sound.row(1));
  for (std::size_t i = 0; i < 4; ++i) {
    double expected = 0;
    for (std::size_t j = 0; j < 4; ++j)
      if (j != i) expected += adj(i, j);
    EXPECT_NEAR(map.values[i], expected, 1e-12);
  }
  EXPECT_THROW(extract_map(b, params, cfg, cfg.T, MapKind::kSound), IndexError);

  const auto dir = scratch("viz");
  write_map(map, (dir / "m").string());
  std::ifstream pgm(dir / "m.pgm", std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  pgm >> magic >> w >> h >> maxval;
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(w, 2u);
  EXPECT_EQ(h, 2u);
  EXPECT_EQ(maxval, 255u);
  EXPECT_EQ(fs::file_size(dir / "m.pgm"), 11u + 4u);
  std::ifstream csv(dir / "m.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) {
    ++lines;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 1);
  }
  EXPECT_EQ(lines, 2u);
  EXPECT_EQ(parse_map_kind("adjacency_weight"), MapKind::kAdjacencyWeight);
  EXPECT_THROW(parse_map_kind("heat"), ConfigError);
}

std::vector<FeatureBundle<float>> ablation_data(const ModelConfig& cfg) {
  SyntheticSpec spec{8, cfg.T, cfg.N, cfg.d, cfg.K, cfg.C, SyntheticTask::kWhichMoves, 0.05};
  return generate_synthetic<float>(spec, 10);
}

TrainConfig one_epoch() {
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  tc.learning_rate = 1e-3;
  return tc;
}

std::string csv_of(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  write_ablation_csv(out, rows);
  return out.str();
}

TEST(AblationRunner, OneRowPerConfigAndStableBytes) {
  const auto cfg = tiny_model_config();
  const auto data = ablation_data(cfg);
  const auto grid = ablation_grid(cfg, AblationGrid::kModules);
  const auto first = csv_of(run_ablations(data, grid, one_epoch()));
  const auto second = csv_of(run_ablations(data, grid, one_epoch()));
  EXPECT_EQ(first, second);
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 7);
  EXPECT_EQ(first.substr(0, first.find('\n')),
            "grid,config,status,final_loss,final_train_accuracy,final_accuracy,fingerprint,error");
  EXPECT_EQ(csv_of({}), "grid,config,status,final_loss,final_train_accuracy,final_accuracy,fingerprint,error\n");
}

TEST(AblationRunner, FailingRowDoesNotStopOthers) {
  const auto cfg = tiny_model_config();
  const auto data = ablation_data(cfg);
  auto grid = ablation_grid(cfg, AblationGrid::kExec);
  grid[1].config.C = 3;  // disagrees with the data
  const auto rows = run_ablations(data, grid, one_epoch());
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].ok);
  EXPECT_FALSE(rows[1].ok);
  EXPECT_FALSE(rows[1].error.empty());
  EXPECT_TRUE(rows[2].ok);
  const auto csv = csv_of(rows);
  EXPECT_NE(csv.find(",error,"), std::string::npos);
}

}  // namespace
}  // namespace psot
