// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "psot/autodiff.hpp"
#include "psot/numerics.hpp"
#include "psot/parameters.hpp"
#include "psot/tensor.hpp"

namespace psot {

namespace detail {

template <std::floating_point S>
void require_patch_audio(const Tensor<S>& patches, std::span<const S> audio, std::size_t weights) {
  if (patches.rank() != 2 || patches.cols() != audio.size()) {
    throw DimensionError("adjacency: patches " + shape_string(patches.shape()) + " vs audio of length " +
                         std::to_string(audio.size()));
  }
  if (weights != patches.rows()) {
    throw DimensionError("adjacency: " + std::to_string(weights) + " activation weights for " +
                         std::to_string(patches.rows()) + " patches");
  }
}

}  // namespace detail

// Rows [w ⊙ v; a] with the audio row left unscaled.
template <std::floating_point S>
Tensor<S> activated_nodes(const Tensor<S>& patches, std::span<const S> audio, std::span<const S> weights) {
  detail::require_patch_audio(patches, audio, weights.size());
  const std::size_t n = patches.rows(), d = patches.cols();
  Tensor<S> x({n + 1, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) x(i, k) = weights[i] * patches(i, k);
  for (std::size_t k = 0; k < d; ++k) x(n, k) = audio[k];
  return x;
}

// Motion-driven adjacency: Gram matrix of [m ⊙ v; a].
template <std::floating_point S>
Tensor<S> build_motion_adjacency(const Tensor<S>& patches, std::span<const S> audio, std::span<const S> motion) {
  return ad::gram(activated_nodes(patches, audio, motion));
}

// Sound-driven adjacency: Gram matrix of [s ⊙ v; a].
template <std::floating_point S>
Tensor<S> build_sound_adjacency(const Tensor<S>& patches, std::span<const S> audio, std::span<const S> sound) {
  return ad::gram(activated_nodes(patches, audio, sound));
}

// Gram matrix of the raw audio-visual nodes [v; a].
template <std::floating_point S>
Tensor<S> build_vanilla_adjacency(const Tensor<S>& patches, std::span<const S> audio) {
  const std::vector<S> ones(patches.rows(), S{1});
  return ad::gram(activated_nodes(patches, audio, std::span<const S>(ones)));
}

// Gram matrix of [v; q].
template <std::floating_point S>
Tensor<S> build_question_adjacency(const Tensor<S>& patches, const Tensor<S>& question) {
  if (patches.cols() != question.cols()) {
    throw DimensionError("question adjacency: " + shape_string(patches.shape()) + " vs " +
                         shape_string(question.shape()));
  }
  Tensor<S> nodes({patches.rows() + question.rows(), patches.cols()});
  std::copy(patches.values().begin(), patches.values().end(), nodes.data());
  std::copy(question.values().begin(), question.values().end(), nodes.data() + patches.size());
  return ad::gram(nodes);
}

// One graph network instance: nodes, a fixed adjacency, and one d×d weight
// per layer.
template <std::floating_point S>
struct GraphSpec {
  Tensor<S> nodes;
  Tensor<S> adjacency;
  std::vector<const Parameter<S>*> weights;

  std::size_t layer_count() const noexcept { return weights.size(); }

  void validate() const {
    const std::size_t n = nodes.rows();
    if (adjacency.rank() != 2 || adjacency.rows() != n || adjacency.cols() != n) {
      throw DimensionError("graph adjacency " + shape_string(adjacency.shape()) + " does not match " +
                           std::to_string(n) + " nodes");
    }
    if (weights.empty()) throw ConfigError("graph needs at least one layer");
    for (const auto* w : weights) {
      if (w->value.rank() != 2 || w->value.rows() != nodes.cols() || w->value.cols() != nodes.cols()) {
        throw DimensionError("graph weight '" + w->name + "' " + shape_string(w->value.shape()) +
                             " does not match node width " + std::to_string(nodes.cols()));
      }
    }
  }
};

// nodes_{l+1} = ReLU(A · nodes_l · W_l), adjacency fixed across layers.
template <std::floating_point S>
Tensor<S> graph_forward(const GraphSpec<S>& g) {
  g.validate();
  Tensor<S> x = g.nodes;
  for (const auto* w : g.weights) x = relu(matmul(matmul(g.adjacency, x), w->value));
  return x;
}

// [nodes_m | nodes_s] · W, no bias or activation.
template <std::floating_point S>
Tensor<S> fuse_parallel(const Tensor<S>& nodes_m, const Tensor<S>& nodes_s, const Tensor<S>& fusion) {
  if (nodes_m.shape() != nodes_s.shape()) {
    throw DimensionError("fuse_parallel: " + shape_string(nodes_m.shape()) + " vs " + shape_string(nodes_s.shape()));
  }
  const std::size_t n = nodes_m.rows(), d = nodes_m.cols();
  Tensor<S> joined({n, 2 * d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      joined(i, k) = nodes_m(i, k);
      joined(i, d + k) = nodes_s(i, k);
    }
  return matmul(joined, fusion);
}

namespace ad {

// Gram matrix of [w ⊙ patches; audio] on the tape.
template <std::floating_point S>
Var<S> driven_adjacency(const Var<S>& patches, const Var<S>& audio_row, const Var<S>& weights) {
  return gram(concat_rows<S>({scale_rows(patches, weights), audio_row}));
}

template <std::floating_point S>
struct GraphOptions {
  bool row_softmax = false;
  // When set, the adjacency is rebuilt from the current nodes before every
  // layer after the first.
  std::function<Var<S>(const Var<S>&)> rebuild_adjacency;
  // Applied to each layer's output; receives the layer index.
  std::function<Var<S>(const Var<S>&, std::size_t)> after_layer;
};

template <std::floating_point S>
Var<S> graph_forward(Var<S> nodes, Var<S> adjacency, const std::vector<Var<S>>& weights,
                     const GraphOptions<S>& options = {}) {
  if (weights.empty()) throw ConfigError("graph needs at least one layer");
  const std::size_t n = nodes.value().rows();
  if (adjacency.value().rows() != n || adjacency.value().cols() != n) {
    throw DimensionError("graph adjacency " + shape_string(adjacency.shape()) + " does not match " +
                         std::to_string(n) + " nodes");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (l > 0 && options.rebuild_adjacency) adjacency = options.rebuild_adjacency(nodes);
    const Var<S> a = options.row_softmax ? row_softmax(adjacency) : adjacency;
    nodes = relu(matmul(matmul(a, nodes), weights[l]));
    if (options.after_layer) nodes = options.after_layer(nodes, l);
  }
  return nodes;
}

template <std::floating_point S>
Var<S> fuse_parallel(const Var<S>& nodes_m, const Var<S>& nodes_s, const Var<S>& fusion) {
  if (nodes_m.shape() != nodes_s.shape()) {
    throw DimensionError("fuse_parallel: " + shape_string(nodes_m.shape()) + " vs " + shape_string(nodes_s.shape()));
  }
  return matmul(concat_cols(nodes_m, nodes_s), fusion);
}

}  // namespace ad

}  // namespace psot
