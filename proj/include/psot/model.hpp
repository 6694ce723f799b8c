// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include "psot/activations.hpp"
#include "psot/autodiff.hpp"
#include "psot/bundle.hpp"
#include "psot/graphs.hpp"
#include "psot/model_config.hpp"
#include "psot/parameters.hpp"
#include "psot/random.hpp"

namespace psot {

namespace param_names {

inline std::string layer(const char* graph, std::size_t l) { return std::string(graph) + ".W" + std::to_string(l); }

inline constexpr const char* kMotion = "mkpt";
inline constexpr const char* kSound = "skpt";
inline constexpr const char* kQuestion = "qkpt";
inline constexpr const char* kMmaAudio = "mma.qa";
inline constexpr const char* kMmaPatch = "mma.qv_patch";
inline constexpr const char* kMmaSegment = "mma.qv_segment";
inline constexpr const char* kFusion = "fusion.W";
inline constexpr const char* kHeadWeight = "head.W";
inline constexpr const char* kHeadBias = "head.b";

}  // namespace param_names

// Every stage's weights are created regardless of which stages are enabled,
// so ablations share one parameter layout and one RNG stream.
template <std::floating_point S>
ParameterStore<S> init_parameters(const ModelConfig& cfg) {
  cfg.validate();
  namespace pn = param_names;
  ParameterStore<S> store(cfg.seed);
  Rng rng(cfg.seed);
  const std::size_t d = cfg.d;
  for (std::size_t l = 0; l < cfg.layers_m; ++l) store.add_uniform(pn::layer(pn::kMotion, l), d, d, rng);
  for (std::size_t l = 0; l < cfg.layers_s; ++l) store.add_uniform(pn::layer(pn::kSound, l), d, d, rng);
  store.add_uniform(pn::kFusion, 2 * d, d, rng);
  for (std::size_t l = 0; l < cfg.layers_q; ++l) store.add_uniform(pn::layer(pn::kQuestion, l), d, d, rng);
  for (const char* g : {pn::kMmaAudio, pn::kMmaPatch, pn::kMmaSegment})
    for (std::size_t l = 0; l < cfg.layers_mma; ++l) store.add_uniform(pn::layer(g, l), d, d, rng);
  store.add_uniform(pn::kHeadWeight, d, cfg.C, rng);
  store.add(pn::kHeadBias, Tensor<S>({1, cfg.C}));
  return store;
}

// Intermediate values of one forward pass.
template <std::floating_point S>
struct ForwardTrace {
  MotionMaps<S> motion;
  SoundMaps<S> sound;
  RetentionMask<S> mask;
  Tensor<S> a_prime;  // [T×d]
  Tensor<S> v_prime;  // [T×N²×d]
  Tensor<S> v_hat;    // [T×N²×d]
  Tensor<S> v_bar;    // [T×d]
  Tensor<S> q_bar;    // [K×d] aggregated question nodes before pooling
  Tensor<S> probs;    // [C]
};

template <std::floating_point S>
struct RecordedForward {
  ForwardTrace<S> trace;
  ad::Var<S> probs;  // [1×C] on the tape
};

namespace detail {

template <std::floating_point S>
Tensor<S> stack_segments(const std::vector<ad::Var<S>>& rows) {
  const std::size_t first = rows.front().value().rows();
  const std::size_t width = rows.front().value().cols();
  const bool vectors = rows.front().value().rank() == 1;
  Tensor<S> out = vectors ? Tensor<S>({rows.size(), rows.front().value().size()})
                          : Tensor<S>({rows.size(), first, width});
  const std::size_t stride = rows.front().value().size();
  for (std::size_t t = 0; t < rows.size(); ++t)
    std::copy(rows[t].value().values().begin(), rows[t].value().values().end(), out.data() + t * stride);
  return out;
}

template <std::floating_point S>
Tensor<S> first_row_block(const std::vector<ad::Var<S>>& rows) {
  Tensor<S> out({rows.size(), rows.front().value().cols()});
  for (std::size_t t = 0; t < rows.size(); ++t) {
    auto r = rows[t].value().row(0);
    std::copy(r.begin(), r.end(), out.data() + t * out.cols());
  }
  return out;
}

template <std::floating_point S>
void copy_row(Tensor<S>& dst, std::size_t t, std::span<const S> src) {
  std::copy(src.begin(), src.end(), dst.data() + t * src.size());
}

// Binds `name` on the tape: trainable for a mutable store, constant otherwise.
template <std::floating_point S, typename Store>
ad::Var<S> bind_parameter(ad::Tape<S>& tape, Store& store, const std::string& name) {
  return tape.parameter(store.at(name));
}

template <std::floating_point S, typename Store>
std::vector<ad::Var<S>> bind_layers(ad::Tape<S>& tape, Store& store, const char* graph, std::size_t layers) {
  std::vector<ad::Var<S>> out;
  for (std::size_t l = 0; l < layers; ++l) out.push_back(bind_parameter<S>(tape, store, param_names::layer(graph, l)));
  return out;
}

}  // namespace detail

// Records the full pipeline for one bundle on `tape`:
//   M-KPT / S-KPT (parallel or serial) -> Q-KPT -> MMA -> softmax head.
// `Store` is ParameterStore<S> (trainable) or const ParameterStore<S>.
template <std::floating_point S, typename Store>
RecordedForward<S> record_forward(ad::Tape<S>& tape, const FeatureBundle<S>& bundle, Store& params,
                                  const ModelConfig& cfg) {
  static_assert(std::is_same_v<std::remove_const_t<Store>, ParameterStore<S>>);
  namespace pn = param_names;
  using ad::Var;
  cfg.validate();
  bundle.validate();
  const std::size_t T = cfg.T, P = cfg.patches(), d = cfg.d, K = cfg.K;
  if (bundle.segments() != T || bundle.patches() != P || bundle.dim() != d || bundle.words() != K ||
      bundle.num_classes != cfg.C) {
    throw DimensionError("bundle '" + bundle.sample_id + "' does not match the model config (T=" + std::to_string(T) +
                         ", N2=" + std::to_string(P) + ", d=" + std::to_string(d) + ", K=" + std::to_string(K) +
                         ", C=" + std::to_string(cfg.C) + ")");
  }

  ForwardTrace<S> trace;
  const ad::GraphOptions<S> plain{cfg.adjacency_row_softmax, nullptr, nullptr};

  // Per-segment inputs.
  std::vector<Var<S>> v(T), a(T);
  for (std::size_t t = 0; t < T; ++t) {
    v[t] = tape.constant(bundle.visual.matrix_at(t));
    auto row = bundle.audio.row(t);
    a[t] = tape.constant(Tensor<S>({1, d}, std::vector<S>(row.begin(), row.end())));
  }

  // One motion- or sound-driven graph over the nodes [patches; audio].
  auto run_branch = [&](const Var<S>& patches, const Var<S>& audio, const Var<S>& activation, AdjacencyMode mode,
                        const std::vector<Var<S>>& weights) {
    const Var<S> nodes = ad::concat_rows<S>({patches, audio});
    auto build = [&, activation, mode](const Var<S>& current) {
      if (mode == AdjacencyMode::kVanilla) return ad::gram(current);
      return ad::driven_adjacency(ad::slice_rows(current, 0, P), ad::slice_rows(current, P, 1), activation);
    };
    ad::GraphOptions<S> options = plain;
    if (cfg.recompute_adjacency_per_layer) options.rebuild_adjacency = build;
    return ad::graph_forward(nodes, build(nodes), weights, options);
  };

  const auto w_motion = detail::bind_layers<S>(tape, params, pn::kMotion, cfg.layers_m);
  const auto w_sound = detail::bind_layers<S>(tape, params, pn::kSound, cfg.layers_s);

  // Activation maps from the given per-segment features. Maps of input
  // features are constants; maps of learned features (serial execution) stay
  // on the tape so gradients flow through them.
  auto motion_from = [&](const std::vector<Var<S>>& patches) {
    Tensor<S> stacked = detail::stack_segments(patches);
    trace.motion = combine_motion(compute_local_motion(stacked), cfg.lambda);
    std::vector<Var<S>> m(T);
    if (patches.front().needs_grad()) return ad::combine_motion(ad::local_motion(patches), cfg.lambda);
    for (std::size_t t = 0; t < T; ++t) {
      auto row = trace.motion.m.row(t);
      m[t] = tape.constant(Tensor<S>({P}, std::vector<S>(row.begin(), row.end())));
    }
    return m;
  };
  auto sound_from = [&](const std::vector<Var<S>>& patches, const std::vector<Var<S>>& audio) {
    std::vector<Var<S>> s(T);
    trace.sound.s = Tensor<S>({T, P});
    for (std::size_t t = 0; t < T; ++t) {
      s[t] = ad::sound_activation(audio[t], patches[t]);
      detail::copy_row(trace.sound.s, t, s[t].value().values());
    }
    return s;
  };

  // Stage 1: motion- and sound-driven tracking.
  std::vector<Var<S>> stage(T);
  auto split = [&](const std::vector<Var<S>>& nodes, std::vector<Var<S>>& patches, std::vector<Var<S>>& audio) {
    for (std::size_t t = 0; t < T; ++t) {
      patches[t] = ad::slice_rows(nodes[t], 0, P);
      audio[t] = ad::slice_rows(nodes[t], P, 1);
    }
  };
  auto motion_stage = [&](const std::vector<Var<S>>& patches, const std::vector<Var<S>>& audio) {
    const auto m = motion_from(patches);
    std::vector<Var<S>> out(T);
    for (std::size_t t = 0; t < T; ++t) out[t] = run_branch(patches[t], audio[t], m[t], cfg.adjacency_mode_m, w_motion);
    return out;
  };
  auto sound_stage = [&](const std::vector<Var<S>>& patches, const std::vector<Var<S>>& audio) {
    const auto s = sound_from(patches, audio);
    std::vector<Var<S>> out(T);
    for (std::size_t t = 0; t < T; ++t) out[t] = run_branch(patches[t], audio[t], s[t], cfg.adjacency_mode_s, w_sound);
    return out;
  };
  auto identity_stage = [&](const std::vector<Var<S>>& patches, const std::vector<Var<S>>& audio) {
    std::vector<Var<S>> out(T);
    for (std::size_t t = 0; t < T; ++t) out[t] = ad::concat_rows<S>({patches[t], audio[t]});
    return out;
  };

  if (cfg.T >= 2) motion_from(v);
  sound_from(v, a);

  if (!cfg.enable_mkpt && !cfg.enable_skpt) {
    stage = identity_stage(v, a);
  } else if (cfg.exec_mode == ExecMode::kParallel || !cfg.enable_mkpt || !cfg.enable_skpt) {
    // A single enabled branch feeds forward directly, without fusion.
    std::vector<Var<S>> out_m, out_s;
    if (cfg.enable_mkpt) out_m = motion_stage(v, a);
    if (cfg.enable_skpt) out_s = sound_stage(v, a);
    if (cfg.enable_mkpt && cfg.enable_skpt) {
      const Var<S> fusion = detail::bind_parameter(tape, params, pn::kFusion);
      for (std::size_t t = 0; t < T; ++t) stage[t] = ad::fuse_parallel(out_m[t], out_s[t], fusion);
    } else {
      stage = cfg.enable_mkpt ? out_m : out_s;
    }
  } else {
    // Serial: the second module runs on the first module's output nodes,
    // with its activation map recomputed from those features.
    std::vector<Var<S>> mid_v(T), mid_a(T);
    const auto first = cfg.exec_mode == ExecMode::kMThenS ? motion_stage(v, a) : sound_stage(v, a);
    split(first, mid_v, mid_a);
    stage = cfg.exec_mode == ExecMode::kMThenS ? sound_stage(mid_v, mid_a) : motion_stage(mid_v, mid_a);
  }

  std::vector<Var<S>> v_prime(T), a_prime(T);
  split(stage, v_prime, a_prime);
  trace.v_prime = detail::stack_segments(v_prime);
  trace.a_prime = detail::first_row_block(a_prime);

  // Stage 2: question-driven patch retention and graph.
  const Var<S> q = tape.constant(bundle.question);
  const auto w_question = detail::bind_layers<S>(tape, params, pn::kQuestion, cfg.layers_q);
  trace.mask.r = cfg.enable_qkpt ? cfg.r : 1.0;
  trace.mask.alpha = Tensor<S>({T, P});
  trace.mask.beta = Tensor<S>({T, P}, S{1});
  std::vector<Var<S>> v_hat(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor<S> alpha = compute_question_similarity(bundle.question, v_prime[t].value());
    detail::copy_row(trace.mask.alpha, t, alpha.values());
    if (!cfg.enable_qkpt) {
      v_hat[t] = v_prime[t];
      continue;
    }
    const Tensor<S> beta = topr_mask(alpha, cfg.r);
    detail::copy_row(trace.mask.beta, t, beta.values());

    // Dropped patches are zeroed before the graph and stay zero after
    // every layer; the mask itself is a constant.
    auto node_mask = [&](const Tensor<S>& patch_mask) {
      Tensor<S> w({P + K}, S{1});
      std::copy(patch_mask.values().begin(), patch_mask.values().end(), w.data());
      return tape.constant(std::move(w));
    };
    const Var<S> nodes = ad::concat_rows<S>({ad::scale_rows(v_prime[t], tape.constant(beta)), q});
    ad::GraphOptions<S> options = plain;
    if (cfg.recompute_adjacency_per_layer) options.rebuild_adjacency = [](const Var<S>& x) { return ad::gram(x); };
    options.after_layer = [&, beta](const Var<S>& x, std::size_t) {
      Tensor<S> keep = beta;
      if (cfg.qkpt_recompute_mask) {
        // Copies: a second push onto the tape may move the first value.
        const Tensor<S> words = ad::slice_rows(x, P, K).value();
        const Tensor<S> kept = ad::slice_rows(x, 0, P).value();
        const Tensor<S> updated_alpha = compute_question_similarity(words, kept);
        keep = topr_mask(updated_alpha, cfg.r);
        for (std::size_t i = 0; i < P; ++i) keep[i] *= beta[i];
      }
      return ad::scale_rows(x, node_mask(keep));
    };
    v_hat[t] = ad::slice_rows(ad::graph_forward(nodes, ad::gram(nodes), w_question, options), 0, P);
  }
  trace.v_hat = detail::stack_segments(v_hat);

  // Stage 3: question-conditioned aggregation over audio, patch-level and
  // segment-level visual context.
  std::vector<Var<S>> v_bar(T);
  for (std::size_t t = 0; t < T; ++t) v_bar[t] = ad::mean_rows(v_hat[t]);
  const Var<S> audio_ctx = ad::concat_rows(a_prime);
  const Var<S> segment_ctx = ad::concat_rows(v_bar);
  trace.v_bar = segment_ctx.value();

  auto question_graph = [&](const char* graph, const Var<S>& context) {
    const auto weights = detail::bind_layers<S>(tape, params, graph, cfg.layers_mma);
    const Var<S> nodes = ad::concat_rows<S>({q, context});
    ad::GraphOptions<S> options = plain;
    if (cfg.recompute_adjacency_per_layer) options.rebuild_adjacency = [](const Var<S>& x) { return ad::gram(x); };
    return ad::slice_rows(ad::graph_forward(nodes, ad::gram(nodes), weights, options), 0, K);
  };

  std::vector<Var<S>> readouts;
  if (cfg.mma_use_audio) readouts.push_back(question_graph(pn::kMmaAudio, audio_ctx));
  if (cfg.mma_use_patch_visual) {
    if (cfg.mma_patch_graph_per_segment) {
      Var<S> total = question_graph(pn::kMmaPatch, v_hat[0]);
      for (std::size_t t = 1; t < T; ++t) total = ad::add(total, question_graph(pn::kMmaPatch, v_hat[t]));
      readouts.push_back(ad::affine(total, S{1} / static_cast<S>(T)));
    } else {
      readouts.push_back(question_graph(pn::kMmaPatch, ad::concat_rows(v_hat)));
    }
  }
  if (cfg.mma_use_segment_visual) readouts.push_back(question_graph(pn::kMmaSegment, segment_ctx));

  Var<S> q_bar = readouts.front();
  for (std::size_t i = 1; i < readouts.size(); ++i) q_bar = ad::add(q_bar, readouts[i]);
  trace.q_bar = q_bar.value();

  const Var<S> pooled = ad::mean_rows(q_bar);
  const Var<S> logits = ad::add_row(ad::matmul(pooled, detail::bind_parameter(tape, params, pn::kHeadWeight)),
                                    detail::bind_parameter(tape, params, pn::kHeadBias));
  const Var<S> probs = ad::row_softmax(logits);
  trace.probs = probs.value().reshaped({cfg.C});
  return {std::move(trace), probs};
}

template <std::floating_point S>
ForwardTrace<S> forward(const FeatureBundle<S>& bundle, const ParameterStore<S>& params, const ModelConfig& cfg) {
  ad::Tape<S> tape;
  return record_forward(tape, bundle, params, cfg).trace;
}

template <std::floating_point S>
S loss(const ForwardTrace<S>& trace, std::size_t label) {
  return cross_entropy(trace.probs, label);
}

// Adds weight · d(loss)/d(params) into the store's gradients; returns the loss.
template <std::floating_point S>
S accumulate_gradients(const FeatureBundle<S>& bundle, ParameterStore<S>& params, const ModelConfig& cfg,
                       S weight = S{1}) {
  ad::Tape<S> tape;
  auto rec = record_forward(tape, bundle, params, cfg);
  auto root = ad::cross_entropy(rec.probs, bundle.answer);
  tape.backward(root, weight);
  return root.value()[0];
}

// Loss on the tape, for gradient checking.
template <std::floating_point S>
ad::Var<S> record_loss(ad::Tape<S>& tape, const FeatureBundle<S>& bundle, ParameterStore<S>& params,
                       const ModelConfig& cfg) {
  return ad::cross_entropy(record_forward(tape, bundle, params, cfg).probs, bundle.answer);
}

}  // namespace psot
