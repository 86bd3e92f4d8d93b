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

inline constexpr int kFeatureStride = 4;
inline constexpr int kBoxRoi = 7;
inline constexpr int kMaskRoi = 14;
inline constexpr int kMaskSize = 28;

struct HeadsConfig {
  int num_classes = 3;
  int feat_dim = 24;   // stride-4 encoder feature (center heads)
  int roi_dim = 32;    // feature the RoI branches crop from
  int head_dim = 32;   // center sub-head width
  int fc_dim = 256;
  int mask_dim = 32;
};

// ---- center-based proposals ---------------------------------------------

template <typename T>
struct CenterHeadParams {
  // each sub-head: 3x3 conv, ReLU, 1x1 conv
  Conv<T> heat1, heat2, size1, size2, offset1, offset2;

  static CenterHeadParams create(ParameterStore<T>& store, const std::string& name, const HeadsConfig& cfg,
                                 Initializer& init);
};

template <typename T>
struct CenterOutput {
  Var<T> heat;    // [N, h, w, C] probabilities
  Var<T> size;    // [N, h, w, 2] box (w, h) in pixels
  Var<T> offset;  // [N, h, w, 2] center (dx, dy) in pixels from 4 * cell
};

template <typename T>
CenterOutput<T> cbgm_forward(Graph<T>& g, Var<T> feat, const CenterHeadParams<T>& p);

struct ProposalSet {
  std::vector<Box> boxes;
  std::vector<double> scores;
  std::vector<int> classes;

  std::size_t size() const noexcept { return boxes.size(); }
};

/// Peaks of one image's heads ([h, w, C], [h, w, 2], [h, w, 2]). A cell survives
/// when no 3x3 neighbor in its channel scores higher, or scores equal with a
/// smaller index. Ordered by score, then decode index; at most k_max kept.
template <typename T>
ProposalSet cbgm_decode(const Tensor<T>& heat, const Tensor<T>& size, const Tensor<T>& offset, int image_h,
                        int image_w, int k_max, double score_thresh);

/// CenterNet radius for a box of (h, w) cells at minimum overlap 0.7.
double gaussian_radius(double h, double w, double min_overlap = 0.7);

/// Splats one Gaussian per instance on an [h, w, C] map (elementwise max).
Tensor<float> center_heatmap(const InstanceList& instances, int feat_h, int feat_w, int num_classes);

/// Focal term (cbgm_heat) plus L1 size and offset at center cells (cbgm_size,
/// cbgm_offset), the latter averaged over instances.
template <typename T>
LossValue<T> cbgm_loss(const CenterOutput<T>& out, const std::vector<InstanceList>& gts);

// ---- RoI branches ----------------------------------------------------------

template <typename T>
struct BoxHeadParams {
  Linear<T> fc1, fc2, cls, delta;

  static BoxHeadParams create(ParameterStore<T>& store, const std::string& name, const HeadsConfig& cfg,
                              Initializer& init);
};

template <typename T>
struct BoxHeadOutput {
  Var<T> class_logits;  // [R, C + 1], column 0 is background
  Var<T> deltas;        // [R, 4] class-agnostic (dx, dy, log dw, log dh)
};

template <typename T>
BoxHeadOutput<T> bbox_head(Graph<T>& g, Var<T> feat, const std::vector<RoiBox>& rois, const BoxHeadParams<T>& p);

template <typename T>
struct MaskHeadParams {
  std::array<Conv<T>, 4> convs;
  Parameter<T>* up_kernel = nullptr;  // (mask_dim, mask_dim, 2, 2)
  Parameter<T>* up_bias = nullptr;
  Conv<T> out;

  static MaskHeadParams create(ParameterStore<T>& store, const std::string& name, const HeadsConfig& cfg,
                               Initializer& init);
};

/// [R, 28, 28, C] probabilities.
template <typename T>
Var<T> mask_head(Graph<T>& g, Var<T> feat, const std::vector<RoiBox>& rois, const MaskHeadParams<T>& p);

/// A full-resolution mask sampled on the 28x28 grid of `box` (bin centers), thresholded at 0.5.
Tensor<float> mask_target(const Mask& mask, const Box& box);

/// mask_bce (unit weights) plus mask_dice on the ground-truth class channel of each row.
template <typename T>
LossValue<T> mask_losses(Var<T> probs, const std::vector<int>& classes, const std::vector<Tensor<float>>& targets);

// ---- fusion ------------------------------------------------------------------

/// M_s, M_c and M_i over the integer pixel crop of a box.
struct MaskTriplet {
  int x0 = 0, y0 = 0, w = 0, h = 0;
  std::vector<float> ms;  // soft instance mask
  Mask mc;                // binarized foreground crop
  Mask mi;                // binarized M_c * M_s

  /// M_i placed on an (height, width) canvas.
  Mask full(int height, int width) const;
};

/// `fg` is the stride-4 foreground probability map (fg_h x fg_w), or empty for M_c = 1.
MaskTriplet paste_and_fuse(const std::vector<float>& mask28, const Box& box, const std::vector<float>& fg, int fg_h,
                           int fg_w, int height, int width);

}  // namespace sgtn
