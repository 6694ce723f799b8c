// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: dataset generation, training, evaluation, ablation
// sweeps, map export and the tiny-model gradient check.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "psot/psot.hpp"

namespace fs = std::filesystem;
using psot::FeatureBundle;
using psot::ModelConfig;
using psot::TrainConfig;

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw psot::ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw psot::ConfigError("'" + path + "': " + e.what());
  }
}

// Shape fields absent from the file are taken from the dataset.
ModelConfig load_model_config(const std::string& path, const FeatureBundle<float>& sample) {
  nlohmann::json j = path.empty() ? nlohmann::json::object() : load_json(path);
  if (!j.is_object()) throw psot::ConfigError("model config must be a JSON object");
  auto fill = [&](const char* key, std::size_t v) {
    if (!j.contains(key)) j[key] = v;
  };
  fill("T", sample.segments());
  fill("N", sample.grid());
  fill("d", sample.dim());
  fill("K", sample.words());
  fill("C", sample.num_classes);
  return psot::model_config_from_json(j);
}

TrainConfig load_train_config(const std::string& path) {
  return path.empty() ? TrainConfig{} : psot::train_config_from_json(load_json(path));
}

std::vector<FeatureBundle<float>> load_data(const std::string& dir) {
  auto data = psot::read_dataset<float>(dir);
  if (data.empty()) throw psot::ConfigError("no bundles in '" + dir + "'");
  return data;
}

int cmd_gen(const std::string& spec_path, const std::string& out, std::size_t count) {
  const auto spec = psot::synthetic_spec_from_json(load_json(spec_path));
  const auto data = psot::generate_synthetic<float>(spec, count);
  fs::create_directories(out);
  psot::write_dataset(out, data);
  std::printf("wrote %zu %s bundles to %s\n", data.size(), psot::to_string(spec.task), out.c_str());
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& model_path, const std::string& train_path,
              const std::string& out, const std::string& report_path) {
  const auto data = load_data(data_dir);
  const ModelConfig cfg = load_model_config(model_path, data.front());
  const TrainConfig tc = load_train_config(train_path);
  auto result = psot::train(data, cfg, tc, [](const psot::EpochLog& e) {
    std::printf("epoch %3zu  lr %.3g  loss %.6f  train %.4f  eval %.4f\n", e.epoch, e.learning_rate, e.loss,
                e.train_accuracy, e.eval_accuracy);
    std::fflush(stdout);
  });
  psot::write_checkpoint(result.params, cfg, out);
  const std::string report = result.report.to_json().dump(2);
  if (!report_path.empty()) {
    std::ofstream(report_path) << report << '\n';
  }
  std::printf("final eval accuracy %.4f  (%s, %.1fs)\n", result.report.final_accuracy,
              result.report.fingerprint.c_str(), result.report.wall_time_seconds);
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt) {
  const auto data = load_data(data_dir);
  const auto cp = psot::read_checkpoint<float>(ckpt);
  const double acc = psot::evaluate(data, cp.params, cp.config);
  std::printf("accuracy %.6f over %zu bundles\n", acc, data.size());
  return 0;
}

int cmd_ablate(const std::string& data_dir, const std::string& grid, const std::string& out,
               const std::string& model_path, const std::string& train_path) {
  const auto data = load_data(data_dir);
  const ModelConfig base = load_model_config(model_path, data.front());
  const TrainConfig tc = load_train_config(train_path);
  const auto configs = psot::ablation_grid(base, psot::parse_grid(grid));
  const auto rows = psot::run_ablations(data, configs, tc, [](const psot::AblationRow& r) {
    if (r.ok) std::printf("%s/%s  eval %.4f\n", r.grid.c_str(), r.name.c_str(), r.report.final_accuracy);
    else std::printf("%s/%s  error: %s\n", r.grid.c_str(), r.name.c_str(), r.error.c_str());
    std::fflush(stdout);
  });
  std::ofstream csv(out, std::ios::binary);
  if (!csv) throw psot::ConfigError("cannot open '" + out + "'");
  psot::write_ablation_csv(csv, rows);
  return 0;
}

int cmd_viz(const std::string& bundle_path, const std::string& ckpt, std::size_t segment, const std::string& map,
            const std::string& adjacency, const std::string& prefix) {
  const auto bundle = psot::read_bundle<float>(bundle_path);
  const auto cp = psot::read_checkpoint<float>(ckpt);
  const auto m = psot::extract_map(bundle, cp.params, cp.config, segment, psot::parse_map_kind(map),
                                   psot::parse_adjacency_source(adjacency));
  psot::write_map(m, prefix);
  std::printf("wrote %s.csv and %s.pgm\n", prefix.c_str(), prefix.c_str());
  return 0;
}

int cmd_gradcheck() {
  bool ok = true;
  for (const auto& c : psot::tiny_gradient_checks()) {
    std::printf("%-28s max rel err %.3e  (%s)  %s\n", c.name.c_str(), c.report.max_rel_error,
                c.report.worst_parameter.c_str(), c.report.passed ? "ok" : "FAIL");
    ok = ok && c.report.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PSOT audio-visual question answering engine"};
  app.require_subcommand(1);

  std::string spec, out, data, model_cfg, train_cfg, ckpt, grid, bundle, map, report, adjacency = "motion";
  std::size_t count = 0, segment = 0;
  bool tiny = false;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--spec", spec, "Synthetic spec JSON")->required();
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--count", count, "Number of samples")->required();

  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("--data", data, "Dataset directory")->required();
  train->add_option("--model-config", model_cfg, "Model config JSON")->required();
  train->add_option("--train-config", train_cfg, "Train config JSON")->required();
  train->add_option("--out", out, "Checkpoint path")->required();
  train->add_option("--report", report, "Write the run report as JSON");

  auto* eval = app.add_subcommand("eval", "Accuracy of a checkpoint on a dataset");
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--ckpt", ckpt, "Checkpoint path")->required();

  auto* ablate = app.add_subcommand("ablate", "Train every row of an ablation grid");
  ablate->add_option("--data", data, "Dataset directory")->required();
  ablate->add_option("--grid", grid, "Grid name")
      ->required()
      ->check(CLI::IsMember({"modules", "adjacency", "lambda", "r", "layers", "mma", "exec"}));
  ablate->add_option("--out", out, "CSV path")->required();
  ablate->add_option("--model-config", model_cfg, "Base model config JSON");
  ablate->add_option("--train-config", train_cfg, "Train config JSON");

  auto* viz = app.add_subcommand("viz", "Export one per-patch map as CSV and PGM");
  viz->add_option("--bundle", bundle, "Bundle file")->required();
  viz->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  viz->add_option("--segment", segment, "Segment index")->required();
  viz->add_option("--map", map, "Map to export")
      ->required()
      ->check(CLI::IsMember({"motion", "sound", "mask", "adjacency_weight"}));
  viz->add_option("--adjacency", adjacency, "Graph read by adjacency_weight")
      ->check(CLI::IsMember({"motion", "sound"}));
  viz->add_option("--out", out, "Output prefix")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  gradcheck->add_flag("--tiny", tiny, "Tiny model in extended precision (the only size supported)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(spec, out, count);
    if (*train) return cmd_train(data, model_cfg, train_cfg, out, report);
    if (*eval) return cmd_eval(data, ckpt);
    if (*ablate) return cmd_ablate(data, grid, out, model_cfg, train_cfg);
    if (*viz) return cmd_viz(bundle, ckpt, segment, map, adjacency, out);
    if (*gradcheck) return cmd_gradcheck();
  } catch (const psot::FormatError& e) {
    std::fprintf(stderr, "format error [%s]: %s\n", psot::to_string(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
