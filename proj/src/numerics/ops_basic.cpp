// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include "sgtn/ops.hpp"

namespace sgtn {
namespace {

template <typename T>
void require_same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) {
    throw InvalidShape(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void accumulate(Graph<T>& g, const Var<T>& v, const Tensor<T>& delta, T factor = T{1}) {
  if (!g.requires_grad(v)) return;
  auto& slot = g.grad_slot(v);
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += factor * delta[i];
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape("add", a, b);
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.graph().record("add", std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& go) {
    accumulate(g, a, go);
    accumulate(g, b, go);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape("sub", a, b);
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.graph().record("sub", std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& go) {
    accumulate(g, a, go);
    accumulate(g, b, go, T{-1});
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape("mul", a, b);
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.graph().record("mul", std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& go) {
    if (g.requires_grad(a)) {
      auto& ga = g.grad_slot(a);
      const auto& bv = b.value();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * bv[i];
    }
    if (g.requires_grad(b)) {
      auto& gb = g.grad_slot(b);
      const auto& av = a.value();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.vec()) v *= s;
  return a.graph().record("scale", std::move(out), {a}, [a, s](Graph<T>& g, const Tensor<T>& go) {
    accumulate(g, a, go, s);
  });
}

template <typename T>
Var<T> mul_scalar(Var<T> s, Var<T> x) {
  if (s.size() != 1) throw InvalidShape("mul_scalar: scale must be a single element, got " + shape_str(s.shape()));
  const T sv = s.item();
  Tensor<T> out = x.value();
  for (auto& v : out.vec()) v *= sv;
  return x.graph().record("mul_scalar", std::move(out), {s, x}, [s, x](Graph<T>& g, const Tensor<T>& go) {
    if (g.requires_grad(s)) {
      const auto& xv = x.value();
      T acc = 0;
      for (std::size_t i = 0; i < go.size(); ++i) acc += go[i] * xv[i];
      g.grad_slot(s)[0] += acc;
    }
    accumulate(g, x, go, s.item());
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  const int c = x.dim(-1);
  if (bias.size() != static_cast<std::size_t>(c)) {
    throw InvalidShape("add_bias: bias " + shape_str(bias.shape()) + " does not match channels of " + shape_str(x.shape()));
  }
  Tensor<T> out = x.value();
  const auto& bv = bias.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % c];
  return x.graph().record("add_bias", std::move(out), {x, bias}, [x, bias, c](Graph<T>& g, const Tensor<T>& go) {
    accumulate(g, x, go);
    if (g.requires_grad(bias)) {
      auto& gb = g.grad_slot(bias);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i % c] += go[i];
    }
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.vec()) v = v > T{0} ? v : T{0};
  return x.graph().record("relu", std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& go) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad_slot(x);
    const auto& xv = x.value();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xv[i] > T{0}) gx[i] += go[i];
    }
  });
}

// Exact (erf) GELU.
template <typename T>
Var<T> gelu(Var<T> x) {
  Tensor<T> out = x.value();
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  for (auto& v : out.vec()) v = T(0.5) * v * (T{1} + std::erf(v * kInvSqrt2));
  return x.graph().record("gelu", std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& go) {
    if (!g.requires_grad(x)) return;
    constexpr T kInvSqrt2 = T(0.70710678118654752440);
    const T kInvSqrt2Pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    auto& gx = g.grad_slot(x);
    const auto& xv = x.value();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const T v = xv[i];
      const T cdf = T(0.5) * (T{1} + std::erf(v * kInvSqrt2));
      const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
      gx[i] += go[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.vec()) v = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
  return x.graph().record("sigmoid", std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& go) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad_slot(x);
    const auto& xv = x.value();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const T v = xv[i];
      const T s = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
      gx[i] += go[i] * s * (T{1} - s);
    }
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T s = 0;
  for (T v : x.value().vec()) s += v;
  return x.graph().record("sum", Tensor<T>({1}, s), {x}, [x](Graph<T>& g, const Tensor<T>& go) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad_slot(x);
    for (auto& v : gx.vec()) v += go[0];
  });
}

template <typename T>
Var<T> mean(Var<T> x) {
  if (x.size() == 0) throw InvalidShape("mean of an empty tensor");
  return scale(sum(x), T{1} / static_cast<T>(x.size()));
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  Tensor<T> out = x.value().reshape(std::move(shape));
  return x.graph().record("reshape", std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& go) {
    accumulate(g, x, go);
  });
}

template <typename T>
Var<T> gather(Var<T> x, IndexMap index, Shape out_shape) {
  if (static_cast<std::int64_t>(index->size()) != numel(out_shape)) {
    throw InvalidShape("gather: index length " + std::to_string(index->size()) + " does not match " + shape_str(out_shape));
  }
  const auto& xv = x.value();
  const int limit = static_cast<int>(xv.size());
  Tensor<T> out(std::move(out_shape));
  const auto& idx = *index;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int s = idx[i];
    if (s >= limit) throw InvalidArgument("gather: index " + std::to_string(s) + " out of range");
    out[i] = s >= 0 ? xv[static_cast<std::size_t>(s)] : T{0};
  }
  return x.graph().record("gather", std::move(out), {x}, [x, index](Graph<T>& g, const Tensor<T>& go) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad_slot(x);
    const auto& idx = *index;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= 0) gx[static_cast<std::size_t>(idx[i])] += go[i];
    }
  });
}

template <typename T>
Var<T> concat_lastdim(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw InvalidShape("concat_lastdim: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  int total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    Shape l = p.shape();
    widths.push_back(l.back());
    l.pop_back();
    if (l != lead) throw InvalidShape("concat_lastdim: leading extents differ: " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    total += widths.back();
  }
  const std::size_t rows = static_cast<std::size_t>(numel(lead));
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor<T> out(out_shape);
  int off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].value();
    const int w = widths[k];
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * w, w, out.data() + r * total + off);
    }
    off += w;
  }
  return parts[0].graph().record("concat", std::move(out), parts, [parts, widths, rows, total](Graph<T>& g, const Tensor<T>& go) {
    int off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const int w = widths[k];
      if (g.requires_grad(parts[k])) {
        auto& gp = g.grad_slot(parts[k]);
        for (std::size_t r = 0; r < rows; ++r) {
          for (int j = 0; j < w; ++j) gp[r * w + j] += go[r * total + off + j];
        }
      }
      off += w;
    }
  });
}

#define SGTN_INSTANTIATE(T)                                                   \
  template Var<T> add(Var<T>, Var<T>);                                        \
  template Var<T> sub(Var<T>, Var<T>);                                        \
  template Var<T> mul(Var<T>, Var<T>);                                        \
  template Var<T> scale(Var<T>, T);                                           \
  template Var<T> mul_scalar(Var<T>, Var<T>);                                 \
  template Var<T> add_bias(Var<T>, Var<T>);                                   \
  template Var<T> relu(Var<T>);                                               \
  template Var<T> gelu(Var<T>);                                               \
  template Var<T> sigmoid(Var<T>);                                            \
  template Var<T> sum(Var<T>);                                                \
  template Var<T> mean(Var<T>);                                               \
  template Var<T> reshape(Var<T>, Shape);                                     \
  template Var<T> gather(Var<T>, IndexMap, Shape);                            \
  template Var<T> concat_lastdim(const std::vector<Var<T>>&);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
