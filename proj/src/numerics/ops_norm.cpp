// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <memory>

#include "sgtn/ops.hpp"

namespace sgtn {
namespace {

// A family of strided 1-D groups normalized independently.
struct GroupLayout {
  int count = 0;
  int len = 0;
  std::size_t stride = 1;
  std::function<std::size_t(int)> base;
};

template <typename T>
struct Normalized {
  Tensor<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
Normalized<T> normalize(const Tensor<T>& x, const GroupLayout& layout, T eps) {
  Normalized<T> r{Tensor<T>(x.shape()), std::vector<T>(static_cast<std::size_t>(layout.count))};
  const T n = static_cast<T>(layout.len);
  for (int gi = 0; gi < layout.count; ++gi) {
    const std::size_t b = layout.base(gi);
    T mu = 0;
    for (int j = 0; j < layout.len; ++j) mu += x[b + j * layout.stride];
    mu /= n;
    T var = 0;
    for (int j = 0; j < layout.len; ++j) {
      const T d = x[b + j * layout.stride] - mu;
      var += d * d;
    }
    var /= n;
    const T inv = T{1} / std::sqrt(var + eps);
    r.inv_std[static_cast<std::size_t>(gi)] = inv;
    for (int j = 0; j < layout.len; ++j) {
      const std::size_t o = b + j * layout.stride;
      r.xhat[o] = (x[o] - mu) * inv;
    }
  }
  return r;
}

// dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)), accumulated.
template <typename T>
void normalize_backward(const Tensor<T>& dxhat, const Tensor<T>& xhat, const std::vector<T>& inv_std,
                        const GroupLayout& layout, Tensor<T>& dx) {
  const T n = static_cast<T>(layout.len);
  for (int gi = 0; gi < layout.count; ++gi) {
    const std::size_t b = layout.base(gi);
    T m1 = 0, m2 = 0;
    for (int j = 0; j < layout.len; ++j) {
      const std::size_t o = b + j * layout.stride;
      m1 += dxhat[o];
      m2 += dxhat[o] * xhat[o];
    }
    m1 /= n;
    m2 /= n;
    const T inv = inv_std[static_cast<std::size_t>(gi)];
    for (int j = 0; j < layout.len; ++j) {
      const std::size_t o = b + j * layout.stride;
      dx[o] += inv * (dxhat[o] - m1 - xhat[o] * m2);
    }
  }
}

GroupLayout last_dim_layout(std::size_t total, int c) {
  return GroupLayout{static_cast<int>(total / static_cast<std::size_t>(c)), c, 1,
                     [c](int gi) { return static_cast<std::size_t>(gi) * c; }};
}

struct Nhwc {
  int n, h, w, c;
};

Nhwc as_nhwc(const Shape& s, const char* op) {
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3]};
  throw InvalidShape(std::string(op) + ": expected HWC or NHWC, got " + shape_str(s));
}

}  // namespace

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  if (x.value().rank() == 0 || x.dim(-1) == 0) throw InvalidShape("layer_norm: channel extent is zero in " + shape_str(x.shape()));
  const int c = x.dim(-1);
  if (gamma.size() != static_cast<std::size_t>(c) || beta.size() != static_cast<std::size_t>(c)) {
    throw InvalidShape("layer_norm: affine parameters do not match " + std::to_string(c) + " channels");
  }
  const GroupLayout layout = last_dim_layout(x.size(), c);
  auto norm = std::make_shared<Normalized<T>>(normalize(x.value(), layout, eps));
  Tensor<T> out = norm->xhat;
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * gv[i % c] + bv[i % c];
  return x.graph().record("layer_norm", std::move(out), {x, gamma, beta},
                          [x, gamma, beta, norm, layout, c](Graph<T>& g, const Tensor<T>& go) {
                            const auto& xhat = norm->xhat;
                            if (g.requires_grad(gamma)) {
                              auto& gg = g.grad_slot(gamma);
                              for (std::size_t i = 0; i < go.size(); ++i) gg[i % c] += go[i] * xhat[i];
                            }
                            if (g.requires_grad(beta)) {
                              auto& gb = g.grad_slot(beta);
                              for (std::size_t i = 0; i < go.size(); ++i) gb[i % c] += go[i];
                            }
                            if (g.requires_grad(x)) {
                              Tensor<T> dxhat = go;
                              const auto& gv = gamma.value();
                              for (std::size_t i = 0; i < dxhat.size(); ++i) dxhat[i] *= gv[i % c];
                              normalize_backward(dxhat, xhat, norm->inv_std, layout, g.grad_slot(x));
                            }
                          });
}

template <typename T>
Var<T> axial_instance_norm(Var<T> x, Axis axis, T eps) {
  const Nhwc d = as_nhwc(x.shape(), "axial_instance_norm");
  GroupLayout layout;
  const std::size_t plane = static_cast<std::size_t>(d.h) * d.w * d.c;
  if (axis == Axis::kColumn) {
    // group = (n, column, channel), h values strided by one image row
    layout = GroupLayout{d.n * d.w * d.c, d.h, static_cast<std::size_t>(d.w) * d.c, [d, plane](int gi) {
                           const int n = gi / (d.w * d.c);
                           const int rem = gi % (d.w * d.c);
                           return n * plane + static_cast<std::size_t>(rem);
                         }};
  } else {
    // group = (n, row, channel), w values strided by c
    layout = GroupLayout{d.n * d.h * d.c, d.w, static_cast<std::size_t>(d.c), [d](int gi) {
                           const int row = gi / d.c;  // n * h + r
                           const int ch = gi % d.c;
                           return static_cast<std::size_t>(row) * d.w * d.c + ch;
                         }};
  }
  auto norm = std::make_shared<Normalized<T>>(normalize(x.value(), layout, eps));
  Tensor<T> out = norm->xhat;
  return x.graph().record("axial_instance_norm", std::move(out), {x}, [x, norm, layout](Graph<T>& g, const Tensor<T>& go) {
    if (g.requires_grad(x)) normalize_backward(go, norm->xhat, norm->inv_std, layout, g.grad_slot(x));
  });
}

template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, Parameter<T>& running_mean, Parameter<T>& running_var,
                  BatchNormOptions opts) {
  const int c = x.dim(-1);
  if (gamma.size() != static_cast<std::size_t>(c) || running_mean.value.size() != static_cast<std::size_t>(c)) {
    throw InvalidShape("batch_norm: parameters do not match " + std::to_string(c) + " channels");
  }
  const std::size_t rows = x.size() / static_cast<std::size_t>(c);
  const T eps = static_cast<T>(opts.eps);
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  Graph<T>& graph = x.graph();

  if (!graph.training()) {
    std::vector<T> inv(static_cast<std::size_t>(c));
    Tensor<T> out = x.value();
    for (int j = 0; j < c; ++j) inv[static_cast<std::size_t>(j)] = T{1} / std::sqrt(running_var.value[static_cast<std::size_t>(j)] + eps);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const std::size_t j = i % c;
      out[i] = (out[i] - running_mean.value[j]) * inv[j] * gv[j] + bv[j];
    }
    auto xhat = std::make_shared<Tensor<T>>(x.value());
    for (std::size_t i = 0; i < xhat->size(); ++i) {
      const std::size_t j = i % c;
      (*xhat)[i] = ((*xhat)[i] - running_mean.value[j]) * inv[j];
    }
    return graph.record("batch_norm_eval", std::move(out), {x, gamma, beta},
                        [x, gamma, beta, xhat, inv, c](Graph<T>& g, const Tensor<T>& go) {
                          if (g.requires_grad(gamma)) {
                            auto& gg = g.grad_slot(gamma);
                            for (std::size_t i = 0; i < go.size(); ++i) gg[i % c] += go[i] * (*xhat)[i];
                          }
                          if (g.requires_grad(beta)) {
                            auto& gb = g.grad_slot(beta);
                            for (std::size_t i = 0; i < go.size(); ++i) gb[i % c] += go[i];
                          }
                          if (g.requires_grad(x)) {
                            auto& gx = g.grad_slot(x);
                            const auto& gv = gamma.value();
                            for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * gv[i % c] * inv[i % c];
                          }
                        });
  }

  GroupLayout layout{c, static_cast<int>(rows), static_cast<std::size_t>(c), [](int gi) { return static_cast<std::size_t>(gi); }};
  auto norm = std::make_shared<Normalized<T>>(normalize(x.value(), layout, eps));

  // running statistics; variance stored unbiased
  const auto& xv = x.value();
  for (int j = 0; j < c; ++j) {
    T mu = 0;
    for (std::size_t r = 0; r < rows; ++r) mu += xv[r * c + j];
    mu /= static_cast<T>(rows);
    T var = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const T dlt = xv[r * c + j] - mu;
      var += dlt * dlt;
    }
    var /= static_cast<T>(rows > 1 ? rows - 1 : 1);
    const T m = static_cast<T>(opts.momentum);
    running_mean.value[static_cast<std::size_t>(j)] = m * running_mean.value[static_cast<std::size_t>(j)] + (T{1} - m) * mu;
    running_var.value[static_cast<std::size_t>(j)] = m * running_var.value[static_cast<std::size_t>(j)] + (T{1} - m) * var;
  }

  Tensor<T> out = norm->xhat;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * gv[i % c] + bv[i % c];
  return graph.record("batch_norm", std::move(out), {x, gamma, beta},
                      [x, gamma, beta, norm, layout, c](Graph<T>& g, const Tensor<T>& go) {
                        const auto& xhat = norm->xhat;
                        if (g.requires_grad(gamma)) {
                          auto& gg = g.grad_slot(gamma);
                          for (std::size_t i = 0; i < go.size(); ++i) gg[i % c] += go[i] * xhat[i];
                        }
                        if (g.requires_grad(beta)) {
                          auto& gb = g.grad_slot(beta);
                          for (std::size_t i = 0; i < go.size(); ++i) gb[i % c] += go[i];
                        }
                        if (g.requires_grad(x)) {
                          Tensor<T> dxhat = go;
                          const auto& gv = gamma.value();
                          for (std::size_t i = 0; i < dxhat.size(); ++i) dxhat[i] *= gv[i % c];
                          normalize_backward(dxhat, xhat, norm->inv_std, layout, g.grad_slot(x));
                        }
                      });
}

#define SGTN_INSTANTIATE(T)                                                                         \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                            \
  template Var<T> axial_instance_norm(Var<T>, Axis, T);                                             \
  template Var<T> batch_norm(Var<T>, Var<T>, Var<T>, Parameter<T>&, Parameter<T>&, BatchNormOptions);

SGTN_INSTANTIATE(float)
SGTN_INSTANTIATE(double)
#undef SGTN_INSTANTIATE

}  // namespace sgtn
