// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "sgtn/kernels.hpp"
#include "sgtn/ops.hpp"

namespace sgtn {

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.dim(1) != b.dim(0)) {
    throw InvalidShape("matmul: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out({m, n});
  kernels::gemm(false, false, m, n, k, a.value().data(), b.value().data(), out.data(), false);
  return a.graph().record("matmul", std::move(out), {a, b}, [a, b, m, n, k](Graph<T>& g, const Tensor<T>& go) {
    if (g.requires_grad(a)) kernels::gemm(false, true, m, k, n, go.data(), b.value().data(), g.grad_slot(a).data(), true);
    if (g.requires_grad(b)) kernels::gemm(true, false, k, n, m, a.value().data(), go.data(), g.grad_slot(b).data(), true);
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  const auto& w = weight.value();
  if (w.rank() != 2 || x.dim(-1) != w.dim(0)) {
    throw InvalidShape("linear: input " + shape_str(x.shape()) + " incompatible with weight " + shape_str(w.shape()));
  }
  const int in = w.dim(0), outc = w.dim(1);
  if (bias.valid() && bias.size() != static_cast<std::size_t>(outc)) {
    throw InvalidShape("linear: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(outc) + " outputs");
  }
  const int rows = static_cast<int>(x.size() / static_cast<std::size_t>(in));
  Shape out_shape = x.shape();
  out_shape.back() = outc;
  Tensor<T> out(out_shape);
  kernels::gemm(false, false, rows, outc, in, x.value().data(), w.data(), out.data(), false);
  if (bias.valid()) {
    const auto& bv = bias.value();
    for (int r = 0; r < rows; ++r) {
      T* o = out.data() + static_cast<std::size_t>(r) * outc;
      for (int j = 0; j < outc; ++j) o[j] += bv[static_cast<std::size_t>(j)];
    }
  }
  std::vector<Var<T>> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return x.graph().record("linear", std::move(out), parents,
                          [x, weight, bias, rows, in, outc](Graph<T>& g, const Tensor<T>& go) {
                            if (g.requires_grad(x)) {
                              kernels::gemm(false, true, rows, in, outc, go.data(), weight.value().data(),
                                            g.grad_slot(x).data(), true);
                            }
                            if (g.requires_grad(weight)) {
                              kernels::gemm(true, false, in, outc, rows, x.value().data(), go.data(),
                                            g.grad_slot(weight).data(), true);
                            }
                            if (bias.valid() && g.requires_grad(bias)) {
                              auto& gb = g.grad_slot(bias);
                              for (int r = 0; r < rows; ++r) {
                                const T* gr = go.data() + static_cast<std::size_t>(r) * outc;
                                for (int j = 0; j < outc; ++j) gb[static_cast<std::size_t>(j)] += gr[j];
                              }
                            }
                          });
}

template <typename T>
Var<T> bmm(Var<T> a, Var<T> b, bool trans_b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0)) {
    throw InvalidShape("bmm: incompatible " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  const int batch = av.dim(0), m = av.dim(1), k = av.dim(2);
  const int n = trans_b ? bv.dim(1) : bv.dim(2);
  if ((trans_b ? bv.dim(2) : bv.dim(1)) != k) {
    throw InvalidShape("bmm: inner extents differ " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  Tensor<T> out({batch, m, n});
  const std::size_t sa = static_cast<std::size_t>(m) * k, sb = static_cast<std::size_t>(k) * n,
                    sc = static_cast<std::size_t>(m) * n;
  for (int i = 0; i < batch; ++i) {
    kernels::gemm(false, trans_b, m, n, k, av.data() + i * sa, bv.data() + i * sb, out.data() + i * sc, false);
  }
  return a.graph().record("bmm", std::move(out), {a, b},
                          [a, b, trans_b, batch, m, n, k, sa, sb, sc](Graph<T>& g, const Tensor<T>& go) {
                            const auto& av = a.value();
                            const auto& bv = b.value();
                            if (g.requires_grad(a)) {
                              auto& ga = g.grad_slot(a);
                              for (int i = 0; i < batch; ++i) {
                                // dA = dC * B^T  (or dC * B when B was used transposed)
                                kernels::gemm(false, !trans_b, m, k, n, go.data() + i * sc, bv.data() + i * sb,
                                              ga.data() + i * sa, true);
                              }
                            }
                            if (g.requires_grad(b)) {
                              auto& gb = g.grad_slot(b);
                              for (int i = 0; i < batch; ++i) {
                                if (trans_b) {
                                  kernels::gemm(true, false, n, k, m, go.data() + i * sc, av.data() + i * sa,
                                                gb.data() + i * sb, true);
                                } else {
                                  kernels::gemm(true, false, k, n, m, av.data() + i * sa, go.data() + i * sc,
                                                gb.data() + i * sb, true);
                                }
                              }
                            }
                          });
}

template <typename T>
Var<T> softmax_lastdim(Var<T> x) {
  if (x.size() == 0 || x.value().rank() == 0 || x.dim(-1) < 1) {
    throw InvalidShape("softmax_lastdim: empty tensor " + shape_str(x.shape()));
  }
  const int n = x.dim(-1);
  const std::size_t rows = x.size() / static_cast<std::size_t>(n);
  Tensor<T> out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = out.data() + r * n;
    const T mx = *std::max_element(row, row + n);
    T s = 0;
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    const T inv = T{1} / s;
    for (int j = 0; j < n; ++j) row[j] *= inv;
  }
  auto probs = std::make_shared<Tensor<T>>(out);
  return x.graph().record("softmax", std::move(out), {x}, [x, probs, n, rows](Graph<T>& g, const Tensor<T>& go) {
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad_slot(x);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* s = probs->data() + r * n;
      const T* gr = go.data() + r * n;
      T dotp = 0;
      for (int j = 0; j < n; ++j) dotp += gr[j] * s[j];
      T* dst = gx.data() + r * n;
      for (int j = 0; j < n; ++j) dst[j] += s[j] * (gr[j] - dotp);
    }
  });
}

template <typename T>
Var<T> add_attention_bias(Var<T> logits, Var<T> bias, const Tensor<T>* mask) {
  const auto& lv = logits.value();
  if (lv.rank() != 4 || lv.dim(2) != lv.dim(3)) throw InvalidShape("add_attention_bias: logits must be [G,H,n,n], got " + shape_str(lv.shape()));
  const int groups = lv.dim(0), heads = lv.dim(1), n = lv.dim(2);
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  if (bias.valid() && bias.shape() != Shape{heads, n, n}) {
    throw InvalidShape("add_attention_bias: bias " + shape_str(bias.shape()) + " expected " + shape_str({heads, n, n}));
  }
  int mask_groups = 0;
  if (mask) {
    if (mask->rank() != 3 || mask->dim(1) != n || mask->dim(2) != n || mask->dim(0) < 1 || groups % mask->dim(0) != 0) {
      throw InvalidShape("add_attention_bias: mask " + shape_str(mask->shape()) + " incompatible with logits " + shape_str(lv.shape()));
    }
    mask_groups = mask->dim(0);
  }
  Tensor<T> out = lv;
  for (int gi = 0; gi < groups; ++gi) {
    for (int h = 0; h < heads; ++h) {
      T* dst = out.data() + (static_cast<std::size_t>(gi) * heads + h) * nn;
      if (bias.valid()) {
        const T* b = bias.value().data() + static_cast<std::size_t>(h) * nn;
        for (std::size_t i = 0; i < nn; ++i) dst[i] += b[i];
      }
      if (mask) {
        const T* mk = mask->data() + static_cast<std::size_t>(gi % mask_groups) * nn;
        for (std::size_t i = 0; i < nn; ++i) dst[i] += mk[i];
      }
    }
  }
  std::vector<Var<T>> parents{logits};
  if (bias.valid()) parents.push_back(bias);
  return logits.graph().record("attention_bias", std::move(out), parents,
                               [logits, bias, groups, heads, nn](Graph<T>& g, const Tensor<T>& go) {
                                 if (g.requires_grad(logits)) {
                                   auto& gl = g.grad_slot(logits);
                                   for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += go[i];
                                 }
                                 if (bias.valid() && g.requires_grad(bias)) {
                                   auto& gb = g.grad_slot(bias);
                                   for (int gi = 0; gi < groups; ++gi) {
                                     for (int h = 0; h < heads; ++h) {
                                       const T* src = go.data() + (static_cast<std::size_t>(gi) * heads + h) * nn;
                                       T* dst = gb.data() + static_cast<std::size_t>(h) * nn;
                                       for (std::size_t i = 0; i < nn; ++i) dst[i] += src[i];
                                     }
                                   }
                                 }
                               });
}

#define SGTN_INSTANTIATE(T)                                         \
  template Var<T> matmul(Var<T>, Var<T>);                           \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                   \
  template Var<T> bmm(Var<T>, Var<T>, bool);                        \
  template Var<T> softmax_lastdim(Var<T>);                          \
  template Var<T> add_attention_bias(Var<T>, Var<T>, const Tensor<T>*);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
