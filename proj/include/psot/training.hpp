// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "psot/batching.hpp"
#include "psot/bundle.hpp"
#include "psot/model.hpp"
#include "psot/model_config.hpp"
#include "psot/optimizer.hpp"

namespace psot {

struct TrainConfig {
  double learning_rate = 1e-4;
  double decay_factor = 0.1;
  std::size_t decay_every_epochs = 16;
  std::size_t epochs = 35;
  std::size_t batch_size = 16;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  // lr · decay_factor^floor(epoch / decay_every_epochs)
  double learning_rate_at(std::size_t epoch) const {
    const std::size_t every = decay_every_epochs == 0 ? 1 : decay_every_epochs;
    return learning_rate * std::pow(decay_factor, static_cast<double>(epoch / every));
  }

  void validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (decay_every_epochs == 0) throw ConfigError("decay_every_epochs must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"decay_factor", c.decay_factor},
          {"decay_every_epochs", c.decay_every_epochs}, {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"weight_decay", c.weight_decay},
          {"beta1", c.beta1}, {"beta2", c.beta2},
          {"epsilon", c.epsilon}, {"train_fraction", c.train_fraction},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  detail::check_keys(j, to_json(c), "train config");
  detail::read_field(j, "learning_rate", c.learning_rate);
  detail::read_field(j, "decay_factor", c.decay_factor);
  detail::read_field(j, "decay_every_epochs", c.decay_every_epochs);
  detail::read_field(j, "epochs", c.epochs);
  detail::read_field(j, "batch_size", c.batch_size);
  detail::read_field(j, "weight_decay", c.weight_decay);
  detail::read_field(j, "beta1", c.beta1);
  detail::read_field(j, "beta2", c.beta2);
  detail::read_field(j, "epsilon", c.epsilon);
  detail::read_field(j, "train_fraction", c.train_fraction);
  detail::read_field(j, "seed", c.seed);
  return c;
}

// FNV-1a over the canonical JSON of both configs.
inline std::string config_fingerprint(const ModelConfig& model, const TrainConfig& train) {
  const std::string text = to_json(model).dump() + "|" + to_json(train).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RunReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_train_accuracy;
  std::vector<double> epoch_eval_accuracy;
  std::vector<double> epoch_learning_rate;
  double final_train_accuracy = 0.0;
  double final_accuracy = 0.0;  // eval split
  std::string fingerprint;
  double wall_time_seconds = 0.0;

  // Wall time is the only non-deterministic field; leave it out when
  // comparing runs.
  nlohmann::json to_json(bool include_timing = true) const {
    nlohmann::json j = {{"epoch_loss", epoch_loss},
                        {"epoch_train_accuracy", epoch_train_accuracy},
                        {"epoch_eval_accuracy", epoch_eval_accuracy},
                        {"epoch_learning_rate", epoch_learning_rate},
                        {"final_train_accuracy", final_train_accuracy},
                        {"final_accuracy", final_accuracy},
                        {"fingerprint", fingerprint}};
    if (include_timing) j["wall_time_seconds"] = wall_time_seconds;
    return j;
  }
};

// Training stopped on a non-finite loss.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch, const std::string& sample)
      : NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                       " (sample '" + sample + "')"),
        epoch_(epoch),
        batch_(batch) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_, batch_;
};

// Fraction of labeled samples whose argmax prediction (lowest index on ties)
// equals the label.
template <std::floating_point S>
double evaluate(const std::vector<FeatureBundle<S>>& data, const std::vector<std::size_t>& indices,
                const ParameterStore<S>& params, const ModelConfig& cfg) {
  std::size_t labeled = 0, correct = 0;
  for (std::size_t i : indices) {
    const auto& b = data[i];
    if (!b.labeled()) continue;
    ++labeled;
    const auto trace = forward(b, params, cfg);
    if (argmax(trace.probs.values()) == b.answer) ++correct;
  }
  return labeled ? static_cast<double>(correct) / static_cast<double>(labeled) : 0.0;
}

template <std::floating_point S>
double evaluate(const std::vector<FeatureBundle<S>>& data, const ParameterStore<S>& params, const ModelConfig& cfg) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return evaluate(data, all, params, cfg);
}

// Accuracy from precomputed probabilities.
template <std::floating_point S>
double accuracy_from_probs(const std::vector<Tensor<S>>& probs, const std::vector<std::size_t>& labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (argmax(probs[i].values()) == labels[i]) ++correct;
  return probs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(probs.size());
}

struct EpochLog {
  std::size_t epoch;
  double loss;
  double train_accuracy;
  double eval_accuracy;
  double learning_rate;
};

template <std::floating_point S>
struct TrainResult {
  ParameterStore<S> params;
  RunReport report;
};

// AdamW over seeded mini-batches with a step-decay schedule. Batch gradients
// are the mean of per-sample gradients, summed in batch order.
template <std::floating_point S>
TrainResult<S> train(const std::vector<FeatureBundle<S>>& data, const ModelConfig& cfg, const TrainConfig& tc,
                     const std::function<void(const EpochLog&)>& on_epoch = nullptr) {
  if (data.empty()) throw ConfigError("training needs a non-empty dataset");
  for (const auto& b : data)
    if (!b.labeled()) throw ConfigError("bundle '" + b.sample_id + "' has no answer label");
  cfg.validate();
  tc.validate();
  const auto started = std::chrono::steady_clock::now();

  TrainResult<S> result{init_parameters<S>(cfg), {}};
  auto& params = result.params;
  auto& report = result.report;
  report.fingerprint = config_fingerprint(cfg, tc);

  const DataSplit split = split_and_batch(data.size(), tc.train_fraction, tc.batch_size, tc.seed);
  if (split.train_size() == 0) throw ConfigError("train split is empty");
  std::vector<std::size_t> train_indices;
  for (const auto& b : split.train_batches) train_indices.insert(train_indices.end(), b.begin(), b.end());

  AdamW<S> optimizer(tc.beta1, tc.beta2, tc.epsilon, tc.weight_decay);
  Rng order_rng(tc.seed ^ 0x9e3779b97f4a7c15ull);

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = tc.learning_rate_at(epoch);
    const auto batches = epoch == 0 ? split.train_batches : rebatch(split, tc.batch_size, order_rng);
    double loss_total = 0.0;
    std::size_t seen = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      params.zero_grad();
      const S weight = S{1} / static_cast<S>(batch.size());
      for (std::size_t idx : batch) {
        const S l = accumulate_gradients(data[idx], params, cfg, weight);
        if (!std::isfinite(l)) throw DivergenceError(epoch, bi, data[idx].sample_id);
        loss_total += static_cast<double>(l);
        ++seen;
      }
      optimizer.step(params, lr);
    }
    report.epoch_loss.push_back(loss_total / static_cast<double>(seen));
    report.epoch_learning_rate.push_back(lr);
    report.epoch_train_accuracy.push_back(evaluate(data, train_indices, params, cfg));
    report.epoch_eval_accuracy.push_back(split.eval.empty() ? 0.0 : evaluate(data, split.eval, params, cfg));
    if (on_epoch) {
      on_epoch({epoch, report.epoch_loss.back(), report.epoch_train_accuracy.back(),
                report.epoch_eval_accuracy.back(), lr});
    }
  }
  if (!report.epoch_loss.empty()) {
    report.final_train_accuracy = report.epoch_train_accuracy.back();
    report.final_accuracy = report.epoch_eval_accuracy.back();
  }
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace psot
