// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <vector>

#include "sgtn/autograd.hpp"

// Differentiable operations over Graph variables. Spatial tensors are NHWC
// (rank 4) or HWC (rank 3, an implicit batch of one). Explicitly instantiated
// for float (training/inference) and double (gradient checks).

namespace sgtn {

// ---- elementwise & structural -------------------------------------------

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T s);
/// s must hold a single element; returns s * x.
template <typename T> Var<T> mul_scalar(Var<T> s, Var<T> x);
/// x[..., c] + bias[c]
template <typename T> Var<T> add_bias(Var<T> x, Var<T> bias);
template <typename T> Var<T> relu(Var<T> x);
template <typename T> Var<T> gelu(Var<T> x);
template <typename T> Var<T> sigmoid(Var<T> x);
template <typename T> Var<T> sum(Var<T> x);
template <typename T> Var<T> mean(Var<T> x);
template <typename T> Var<T> reshape(Var<T> x, Shape shape);

/// Index map for gather(): out[i] = in[index[i]], or 0 where index[i] < 0.
using IndexMap = std::shared_ptr<const std::vector<int>>;
template <typename T> Var<T> gather(Var<T> x, IndexMap index, Shape out_shape);

/// Concatenates along the last axis; leading extents must agree.
template <typename T> Var<T> concat_lastdim(const std::vector<Var<T>>& parts);

// ---- linear algebra --------------------------------------------------------

/// [m,k] x [k,n]
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// x[..., in] * weight[in, out] (+ bias[out]); bias may be an invalid Var.
template <typename T> Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias);
/// Batched [B,m,k] x [B,k,n], or [B,m,k] x [B,n,k]^T when trans_b.
template <typename T> Var<T> bmm(Var<T> a, Var<T> b, bool trans_b);
template <typename T> Var<T> softmax_lastdim(Var<T> x);

/// logits[G, H, n, n] + bias[H, n, n] (optional, differentiable) + mask[Gm, n, n]
/// (optional constant, group g uses mask[g % Gm]).
template <typename T> Var<T> add_attention_bias(Var<T> logits, Var<T> bias, const Tensor<T>* mask);

// ---- normalization ---------------------------------------------------------

enum class Axis { kRow, kColumn };

template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps);
/// Per (group, channel) normalization along one spatial axis of [N,h,w,c]:
/// kColumn normalizes each column's h values, kRow each row's w values. No affine.
template <typename T> Var<T> axial_instance_norm(Var<T> x, Axis axis, T eps);

struct BatchNormOptions {
  double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double eps = 1e-5;
};
/// Per-channel normalization over all leading positions. Uses batch statistics
/// and updates the running buffers in Phase::kTrain, running statistics otherwise.
template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, Parameter<T>& running_mean, Parameter<T>& running_var,
                  BatchNormOptions opts = {});

// ---- convolution -----------------------------------------------------------

struct Conv2dOptions {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};
/// Cross-correlation; kernel layout (c_out, c_in, k, k); bias optional.
template <typename T> Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, Conv2dOptions opts);
/// Stride-2 transposed convolution, kernel layout (c_in, c_out, 2, 2); output (2h, 2w).
template <typename T> Var<T> deconv2d_s2(Var<T> x, Var<T> kernel, Var<T> bias);

struct RoiBox {
  int batch = 0;
  double x = 0, y = 0, w = 0, h = 0;  // image pixels
};
/// Bilinear RoI Align with sampling x sampling points per bin. Feature
/// coordinates are image coordinates times spatial_scale. Output [R,out,out,c].
template <typename T>
Var<T> roi_align(Var<T> feat, const std::vector<RoiBox>& boxes, int out, double spatial_scale, int sampling = 2);

}  // namespace sgtn
