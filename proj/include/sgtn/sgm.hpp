// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "sgtn/instance.hpp"
#include "sgtn/layers.hpp"
#include "sgtn/losses.hpp"

namespace sgtn {

struct SgmConfig {
  int encoder_dim = 24;
  int detail_dim = 32;  // shallow branch width
  int dim = 32;         // guided feature width
};

/// Shallow detail branch on the x4-downsampled image: dilated 3x3 conv-BN-ReLU
/// layers (dilation 1, 2, 4, each fed by the previous one), their outputs
/// concatenated and fused by a 1x1 conv-BN-ReLU.
template <typename T>
struct ArfemParams {
  std::array<ConvBnRelu<T>, 3> branches;
  ConvBnRelu<T> fuse;

  static ArfemParams create(ParameterStore<T>& store, const std::string& name, int out_dim, Initializer& init);
};

template <typename T>
struct SgmParams {
  SgmConfig cfg;
  ArfemParams<T> arfem;
  std::array<ConvBnRelu<T>, 4> refine;
  ConvBnRelu<T> head1, head2;
  Conv<T> out;  // 1x1, 3 channels: foreground, edge, corner

  static SgmParams create(ParameterStore<T>& store, const std::string& name, const SgmConfig& cfg, Initializer& init);
};

template <typename T>
struct ShapeGuidanceOutput {
  Var<T> guided;  // [N, h, w, dim]
  Var<T> logits;  // [N, h, w, 3]
  Var<T> probs;
};

/// Bilinear x4 reduction of an [N,H,W,3] (or HWC) image with half-pixel centers.
template <typename T>
Tensor<T> downsample_image4(const Tensor<T>& image);

template <typename T>
Var<T> arfem(Graph<T>& g, Var<T> image_down4, const ArfemParams<T>& p);

template <typename T>
ShapeGuidanceOutput<T> sgm_forward(Graph<T>& g, Var<T> encoder_feat, Var<T> detail_feat, const SgmParams<T>& p);

/// Stride-4 supervision maps. `corner_vertices` holds the simplified contour
/// vertices before the 3x3 dilation that gives `corner`.
struct ShapeTargets {
  Mask fg, edge, corner, corner_vertices;
};

inline constexpr double kCornerTolerance = 1.5;

ShapeTargets derive_shape_targets(const InstanceList& instances, int height, int width);

/// 4 on corner pixels, else 2 on edge pixels, else 1. Shape [h, w].
template <typename T>
Tensor<T> shape_weight_map(const ShapeTargets& t);

/// Three weighted BCE terms (sgm_fg, sgm_edge, sgm_corner) sharing one weight map.
/// `targets` has one entry per batch image.
template <typename T>
LossValue<T> sgm_loss(const ShapeGuidanceOutput<T>& out, const std::vector<ShapeTargets>& targets);

}  // namespace sgtn
