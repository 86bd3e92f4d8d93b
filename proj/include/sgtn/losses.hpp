// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sgtn/autograd.hpp"
#include "sgtn/geometry.hpp"

namespace sgtn {

/// A differentiable total plus a per-term breakdown. `scalar` is the double
/// sum of `terms`, so the two always agree regardless of T.
template <typename T>
struct LossValue {
  Var<T> total;
  double scalar = 0.0;
  std::map<std::string, double> terms;
};

/// Sums named scalar Vars into a LossValue.
template <typename T>
LossValue<T> sum_terms(const std::vector<std::pair<std::string, Var<T>>>& terms);

/// Flattens several LossValues (term names kept) into one.
template <typename T>
LossValue<T> merge_losses(const std::vector<LossValue<T>>& parts);

inline constexpr double kProbClamp = 1e-7;

enum class Reduction {
  kWeightedMean,  // divide by the sum of weights
  kSum,
};

/// -w * [t ln p + (1-t) ln(1-p)] with p clamped to [1e-7, 1-1e-7]; weights must be >= 0.
template <typename T>
LossValue<T> weighted_bce(Var<T> pred, const Tensor<T>& target, const Tensor<T>& weight,
                          Reduction reduction = Reduction::kWeightedMean, const std::string& term = "bce");

/// 1 - (2 sum(p t) + eps) / (sum(p) + sum(t) + eps)
template <typename T>
LossValue<T> dice_loss(Var<T> pred, const Tensor<T>& target, T eps = T{1}, const std::string& term = "dice");

/// Penalty-reduced pixel focal loss on probabilities (alpha 2, beta 4), normalized by max(1, #peaks).
template <typename T>
Var<T> focal_loss(Var<T> pred, const Tensor<T>& target);

/// Sum of smooth-L1 (transition at beta) over all elements.
template <typename T>
Var<T> smooth_l1(Var<T> x, const Tensor<T>& target, T beta = T{1});

/// Sum of |x - target|.
template <typename T>
Var<T> l1_loss(Var<T> x, const Tensor<T>& target);

/// Softmax cross-entropy over logits [R, C], summed over rows.
template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, const std::vector<int>& labels);

/// Complete-IoU loss 1 - IoU + rho^2/c^2 + alpha v between two boxes.
double ciou_loss_value(const Box& pred, const Box& gt);

/// Sum over rows of CIoU(decode(deltas[r], proposals[r]), gts[r]); deltas [R, 4].
template <typename T>
Var<T> ciou_loss(Var<T> deltas, const std::vector<Box>& proposals, const std::vector<Box>& gts);

/// smooth-L1 on deltas (beta 1) plus CIoU on decoded boxes, each averaged over rows.
template <typename T>
LossValue<T> box_losses(Var<T> deltas, const std::vector<Box>& proposals, const std::vector<Box>& gts);

}  // namespace sgtn
