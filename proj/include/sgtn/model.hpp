// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgtn/encoder.hpp"
#include "sgtn/heads.hpp"
#include "sgtn/sgm.hpp"

namespace sgtn {

struct ModelConfig {
  EncoderConfig encoder;
  int num_classes = 3;
  bool sgm_enabled = true;
  int sgm_dim = 32;
  int head_dim = 32;
  int fc_dim = 256;
  int mask_dim = 32;

  int train_proposals = 16;  // decoded proposals per image added to the training RoIs
  int jitter_per_gt = 2;     // jittered copies of each ground-truth box added to the training RoIs
  double fg_iou = 0.5;
  int k_max = 100;
  double score_thresh = 0.05;
  double nms_iou = 0.5;

  void validate() const;
  HeadsConfig heads() const;
  SgmConfig sgm() const;

  static ModelConfig desk() { return {}; }
  static ModelConfig paper_scale();
};

/// One predicted instance.
struct Prediction {
  int category = 0;
  double score = 0;
  Box box;
  Mask mask;
};

template <typename T>
struct ModelForward {
  EncoderOutput<T> enc;
  CenterOutput<T> center;
  std::optional<ShapeGuidanceOutput<T>> sgm;
  Var<T> roi_feat;  // guided feature when SGM is on, else the encoder feature
};

template <typename T>
class SgtnModel {
 public:
  static SgtnModel create(ParameterStore<T>& store, const ModelConfig& cfg, std::uint64_t seed);

  /// images [N, H, W, 3] with H, W divisible by 32, values in [0, 1].
  ModelForward<T> forward(Graph<T>& g, const Tensor<T>& images) const;

  /// Total training loss. `step_seed` drives the RoI jitter.
  LossValue<T> loss(Graph<T>& g, const Tensor<T>& images, const std::vector<InstanceList>& gts,
                    std::uint64_t step_seed) const;

  /// Inference on a batch; one prediction list per image.
  std::vector<std::vector<Prediction>> predict(const Tensor<T>& images) const;

  const ModelConfig& config() const noexcept { return cfg_; }
  const Encoder<T>& encoder() const noexcept { return encoder_; }

 private:
  ModelConfig cfg_;
  Encoder<T> encoder_;
  std::optional<SgmParams<T>> sgm_;
  CenterHeadParams<T> center_;
  BoxHeadParams<T> box_;
  MaskHeadParams<T> mask_;
};

/// Names of every loss term the model can emit, in log-column order.
const std::vector<std::string>& loss_term_names();

/// Greedy class-wise non-maximum suppression; returns kept indices in score order.
std::vector<std::size_t> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                             const std::vector<int>& classes, double iou_thresh);

}  // namespace sgtn
