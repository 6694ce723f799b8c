// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "psot/numerics.hpp"
#include "psot/parameters.hpp"
#include "psot/tensor.hpp"

namespace psot::ad {

template <std::floating_point S>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <std::floating_point S>
struct Var {
  Tape<S>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<S>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
  bool needs_grad() const { return tape->needs_grad(id); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
// sweep visits every node after all of its consumers.
template <std::floating_point S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> constant(Tensor<S> value) { return push(std::move(value), false, nullptr); }

  // Leaf bound to a parameter; backward() adds into parameter.gradient.
  Var<S> parameter(Parameter<S>& p) {
    Var<S> v = push(p.value, true, nullptr);
    nodes_[v.id].param = &p;
    return v;
  }

  // Parameter used as a constant (evaluation without gradients).
  Var<S> parameter(const Parameter<S>& p) { return constant(p.value); }

  // Generic node. `backward` receives the output gradient and must add the
  // contributions into the parents' gradient buffers via accumulate().
  Var<S> record(Tensor<S> value, std::initializer_list<Var<S>> parents,
                std::function<void(const Tensor<S>&)> backward) {
    bool any = false;
    for (const auto& p : parents) any = any || needs_grad(p.id);
    return push(std::move(value), any, any ? std::move(backward) : nullptr);
  }

  Var<S> record(Tensor<S> value, const std::vector<Var<S>>& parents,
                std::function<void(const Tensor<S>&)> backward) {
    bool any = false;
    for (const auto& p : parents) any = any || needs_grad(p.id);
    return push(std::move(value), any, any ? std::move(backward) : nullptr);
  }

  const Tensor<S>& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient buffer of a node, allocated on first use.
  Tensor<S>& grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor<S>(n.value.shape());
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return nodes_[id].grad.shape() == nodes_[id].value.shape(); }

  void accumulate(const Var<S>& v, const Tensor<S>& g) {
    if (!needs_grad(v.id)) return;
    auto& dst = grad(v.id);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }

  // Seeds d(root)/d(root) = weight (root must be a single scalar) and sweeps
  // backwards, adding leaf gradients into bound parameters.
  void backward(const Var<S>& root, S weight = S{1}) {
    if (root.value().size() != 1) {
      throw DimensionError("backward needs a scalar root, got " + shape_string(root.shape()));
    }
    if (!needs_grad(root.id)) return;
    grad(root.id)[0] += weight;
    for (std::size_t id = root.id + 1; id-- > 0;) {
      auto& n = nodes_[id];
      if (!n.needs_grad || !has_grad(id)) continue;
      if (n.backward) {
        // Copy: the closure may grow other nodes' buffers but never this one.
        const Tensor<S> g = n.grad;
        n.backward(g);
      }
      if (n.param) {
        auto& dst = n.param->gradient;
        for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += n.grad[i];
      }
    }
  }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool needs_grad = false;
    std::function<void(const Tensor<S>&)> backward;
    Parameter<S>* param = nullptr;
  };

  Var<S> push(Tensor<S> value, bool needs, std::function<void(const Tensor<S>&)> backward) {
    nodes_.push_back({std::move(value), Tensor<S>(), needs, std::move(backward), nullptr});
    return Var<S>{this, nodes_.size() - 1};
  }

  // Deque: references to earlier values stay valid as nodes are added.
  std::deque<Node> nodes_;
};

namespace detail {

template <std::floating_point S>
void require_same_tape(const Var<S>& a, const Var<S>& b) {
  if (a.tape != b.tape) throw Error("vars recorded on different tapes");
}

template <std::floating_point S>
void require_matrix(const Var<S>& a, const char* op) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + " needs a matrix, got " + shape_string(a.shape()));
  }
}

}  // namespace detail

template <std::floating_point S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  detail::require_same_tape(a, b);
  Tensor<S> out = psot::matmul(a.value(), b.value());
  Tape<S>* tape = a.tape;
  return tape->record(std::move(out), {a, b}, [tape, a, b](const Tensor<S>& g) {
    const auto& av = a.value();
    const auto& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (a.needs_grad()) {
      // dA = G · Bᵀ
      auto& ga = tape->grad(a.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          S acc{0};
          for (std::size_t j = 0; j < n; ++j) acc += g(i, j) * bv(p, j);
          ga(i, p) += acc;
        }
    }
    if (b.needs_grad()) {
      // dB = Aᵀ · G
      auto& gb = tape->grad(b.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const S scale = av(i, p);
          if (scale == S{0}) continue;
          for (std::size_t j = 0; j < n; ++j) gb(p, j) += scale * g(i, j);
        }
    }
  });
}

template <std::floating_point S>
Var<S> transpose(const Var<S>& a) {
  detail::require_matrix(a, "transpose");
  Tape<S>* tape = a.tape;
  return tape->record(psot::transpose(a.value()), {a},
                      [tape, a](const Tensor<S>& g) { tape->accumulate(a, psot::transpose(g)); });
}

template <std::floating_point S>
Var<S> relu(const Var<S>& a) {
  Tape<S>* tape = a.tape;
  return tape->record(psot::relu(a.value()), {a}, [tape, a](const Tensor<S>& g) {
    auto& ga = tape->grad(a.id);
    const auto& x = a.value();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > S{0}) ga[i] += g[i];
  });
}

template <std::floating_point S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  detail::require_same_tape(a, b);
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor<S> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  Tape<S>* tape = a.tape;
  return tape->record(std::move(out), {a, b}, [tape, a, b](const Tensor<S>& g) {
    tape->accumulate(a, g);
    tape->accumulate(b, g);
  });
}

// a[m×n] + bias[1×n] broadcast over rows.
template <std::floating_point S>
Var<S> add_row(const Var<S>& a, const Var<S>& bias) {
  detail::require_same_tape(a, bias);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (bias.value().size() != n) {
    throw DimensionError("add_row bias " + shape_string(bias.shape()) + " vs rows of " + shape_string(a.shape()));
  }
  Tensor<S> out = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += bias.value()[j];
  Tape<S>* tape = a.tape;
  return tape->record(std::move(out), {a, bias}, [tape, a, bias, m, n](const Tensor<S>& g) {
    tape->accumulate(a, g);
    if (bias.needs_grad()) {
      auto& gb = tape->grad(bias.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g(i, j);
    }
  });
}

// mul·a + offset, elementwise.
template <std::floating_point S>
Var<S> affine(const Var<S>& a, S mul, S offset = S{0}) {
  Tensor<S> out = a.value();
  for (auto& v : out.values()) v = mul * v + offset;
  Tape<S>* tape = a.tape;
  return tape->record(std::move(out), {a}, [tape, a, mul](const Tensor<S>& g) {
    auto& ga = tape->grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += mul * g[i];
  });
}

template <std::floating_point S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t n = parts.front().value().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.value().cols() != n) {
      throw DimensionError("concat_rows column mismatch: " + shape_string(parts.front().shape()) + " vs " +
                           shape_string(p.shape()));
    }
    m += p.value().rows();
  }
  Tensor<S> out({m, n});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + offset);
    offset += p.value().size();
  }
  Tape<S>* tape = parts.front().tape;
  return tape->record(std::move(out), parts, [tape, parts](const Tensor<S>& g) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t count = p.value().size();
      if (p.needs_grad()) {
        auto& gp = tape->grad(p.id);
        for (std::size_t i = 0; i < count; ++i) gp[i] += g[off + i];
      }
      off += count;
    }
  });
}

// [a | b] along the feature axis.
template <std::floating_point S>
Var<S> concat_cols(const Var<S>& a, const Var<S>& b) {
  detail::require_same_tape(a, b);
  const std::size_t m = a.value().rows();
  if (b.value().rows() != m) {
    throw DimensionError("concat_cols row mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const std::size_t na = a.value().cols(), nb = b.value().cols();
  Tensor<S> out({m, na + nb});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) out(i, j) = a.value()(i, j);
    for (std::size_t j = 0; j < nb; ++j) out(i, na + j) = b.value()(i, j);
  }
  Tape<S>* tape = a.tape;
  return tape->record(std::move(out), {a, b}, [tape, a, b, m, na, nb](const Tensor<S>& g) {
    if (a.needs_grad()) {
      auto& ga = tape->grad(a.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < na; ++j) ga(i, j) += g(i, j);
    }
    if (b.needs_grad()) {
      auto& gb = tape->grad(b.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nb; ++j) gb(i, j) += g(i, na + j);
    }
  });
}

template <std::floating_point S>
Var<S> slice_rows(const Var<S>& a, std::size_t begin, std::size_t count) {
  detail::require_matrix(a, "slice_rows");
  const std::size_t n = a.value().cols();
  if (begin + count > a.value().rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + shape_string(a.shape()));
  }
  auto src = a.value().values().subspan(begin * n, count * n);
  Tensor<S> out({count, n}, std::vector<S>(src.begin(), src.end()));
  Tape<S>* tape = a.tape;
  return tape->record(std::move(out), {a}, [tape, a, begin, n](const Tensor<S>& g) {
    auto& ga = tape->grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
  });
}

// Row i of x multiplied by w[i]; w has one entry per row of x.
template <std::floating_point S>
Var<S> scale_rows(const Var<S>& x, const Var<S>& w) {
  detail::require_same_tape(x, w);
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (w.value().size() != m) {
    throw DimensionError("scale_rows weights " + shape_string(w.shape()) + " vs " + shape_string(x.shape()));
  }
  Tensor<S> out = x.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) *= w.value()[i];
  Tape<S>* tape = x.tape;
  return tape->record(std::move(out), {x, w}, [tape, x, w, m, n](const Tensor<S>& g) {
    if (x.needs_grad()) {
      auto& gx = tape->grad(x.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx(i, j) += g(i, j) * w.value()[i];
    }
    if (w.needs_grad()) {
      auto& gw = tape->grad(w.id);
      for (std::size_t i = 0; i < m; ++i) {
        S acc{0};
        for (std::size_t j = 0; j < n; ++j) acc += g(i, j) * x.value()(i, j);
        gw[i] += acc;
      }
    }
  });
}

// Column mean: [m×n] -> [1×n].
template <std::floating_point S>
Var<S> mean_rows(const Var<S>& x) {
  const std::size_t m = x.value().rows(), n = x.value().cols();
  Tensor<S> out({1, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += x.value()(i, j);
  const S inv = S{1} / static_cast<S>(m);
  for (auto& v : out.values()) v *= inv;
  Tape<S>* tape = x.tape;
  return tape->record(std::move(out), {x}, [tape, x, m, n, inv](const Tensor<S>& g) {
    auto& gx = tape->grad(x.id);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx(i, j) += g[j] * inv;
  });
}

template <std::floating_point S>
Var<S> sum(const Var<S>& x) {
  Tensor<S> out({1});
  for (S v : x.value().values()) out[0] += v;
  Tape<S>* tape = x.tape;
  return tape->record(std::move(out), {x}, [tape, x](const Tensor<S>& g) {
    auto& gx = tape->grad(x.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  });
}

template <std::floating_point S>
Var<S> square(const Var<S>& x) {
  Tensor<S> out = x.value();
  for (auto& v : out.values()) v *= v;
  Tape<S>* tape = x.tape;
  return tape->record(std::move(out), {x}, [tape, x](const Tensor<S>& g) {
    auto& gx = tape->grad(x.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += S{2} * x.value()[i] * g[i];
  });
}

// X · Xᵀ, computed on the upper triangle and mirrored so the result is
// exactly symmetric.
template <std::floating_point S>
Tensor<S> gram(const Tensor<S>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  Tensor<S> out({m, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      S acc{0};
      for (std::size_t k = 0; k < n; ++k) acc += x(i, k) * x(j, k);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  return out;
}

template <std::floating_point S>
Var<S> gram(const Var<S>& x) {
  detail::require_matrix(x, "gram");
  Tape<S>* tape = x.tape;
  return tape->record(gram(x.value()), {x}, [tape, x](const Tensor<S>& g) {
    // d(X Xᵀ) = (G + Gᵀ) X
    const auto& xv = x.value();
    const std::size_t m = xv.rows(), n = xv.cols();
    auto& gx = tape->grad(x.id);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const S w = g(i, j) + g(j, i);
        if (w == S{0}) continue;
        for (std::size_t k = 0; k < n; ++k) gx(i, k) += w * xv(j, k);
      }
  });
}

template <std::floating_point S>
Var<S> row_softmax(const Var<S>& x) {
  detail::require_matrix(x, "row_softmax");
  Tape<S>* tape = x.tape;
  return tape->record(psot::row_softmax(x.value()), {x}, [tape, x](const Tensor<S>& g) {
    const Tensor<S> p = psot::row_softmax(x.value());
    const std::size_t m = p.rows(), n = p.cols();
    auto& gx = tape->grad(x.id);
    for (std::size_t i = 0; i < m; ++i) {
      S inner{0};
      for (std::size_t j = 0; j < n; ++j) inner += g(i, j) * p(i, j);
      for (std::size_t j = 0; j < n; ++j) gx(i, j) += p(i, j) * (g(i, j) - inner);
    }
  });
}

// -ln(max(p[label], eps)); p is a probability vector of any matrix shape.
template <std::floating_point S>
Var<S> cross_entropy(const Var<S>& p, std::size_t label, S eps = static_cast<S>(kNormEps)) {
  const S value = psot::cross_entropy(p.value(), label, eps);
  Tape<S>* tape = p.tape;
  return tape->record(Tensor<S>({1}, std::vector<S>{value}), {p}, [tape, p, label, eps](const Tensor<S>& g) {
    const S pl = p.value()[label];
    if (pl > eps) tape->grad(p.id)[label] += -g[0] / pl;
  });
}

// Cosine similarity of row i of u with row i of v. A single-row u is
// broadcast against every row of v. Output shape [rows(v)].
template <std::floating_point S>
Var<S> cosine_rows(const Var<S>& u, const Var<S>& v, S eps = static_cast<S>(kNormEps)) {
  detail::require_same_tape(u, v);
  const auto& uv = u.value();
  const auto& vv = v.value();
  const std::size_t m = vv.rows(), n = vv.cols();
  const bool broadcast = uv.rows() == 1 && m != 1;
  if (uv.cols() != n || (!broadcast && uv.rows() != m)) {
    throw DimensionError("cosine_rows shape mismatch: " + shape_string(u.shape()) + " vs " + shape_string(v.shape()));
  }
  Tensor<S> out({m});
  for (std::size_t i = 0; i < m; ++i) out[i] = cosine_similarity(uv.row(broadcast ? 0 : i), vv.row(i), eps);
  Tape<S>* tape = u.tape;
  return tape->record(std::move(out), {u, v}, [tape, u, v, m, n, broadcast, eps](const Tensor<S>& g) {
    const auto& uv = u.value();
    const auto& vv = v.value();
    for (std::size_t i = 0; i < m; ++i) {
      if (g[i] == S{0}) continue;
      const std::size_t ui = broadcast ? 0 : i;
      const auto ur = uv.row(ui);
      const auto vr = vv.row(i);
      const S nu_raw = l2_norm(ur), nv_raw = l2_norm(vr);
      const S nu = std::max(nu_raw, eps), nv = std::max(nv_raw, eps);
      const S c = dot(ur, vr) / (nu * nv);
      // Below eps the norm is clamped to a constant and contributes no gradient.
      const S ku = nu_raw > eps ? c / (nu * nu) : S{0};
      const S kv = nv_raw > eps ? c / (nv * nv) : S{0};
      if (u.needs_grad()) {
        auto& gu = tape->grad(u.id);
        for (std::size_t k = 0; k < n; ++k) gu(ui, k) += g[i] * (vr[k] / (nu * nv) - ku * ur[k]);
      }
      if (v.needs_grad()) {
        auto& gv = tape->grad(v.id);
        for (std::size_t k = 0; k < n; ++k) gv(i, k) += g[i] * (ur[k] / (nu * nv) - kv * vr[k]);
      }
    }
  });
}

}  // namespace psot::ad
