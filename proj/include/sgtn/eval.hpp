// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "sgtn/mask.hpp"

namespace sgtn {

struct EvalDetection {
  int image_id = 0;
  int category = 0;
  double score = 0;
  Mask mask;
};

struct EvalGroundTruth {
  int image_id = 0;
  int category = 0;
  Mask mask;
};

/// Ground-truth mask area range [lo, hi).
struct AreaRange {
  double lo = 0;
  double hi = std::numeric_limits<double>::infinity();
};

inline constexpr AreaRange kAreaAll{};
inline constexpr AreaRange kAreaSmall{0, 32.0 * 32.0};
inline constexpr AreaRange kAreaMedium{32.0 * 32.0, 96.0 * 96.0};
inline constexpr AreaRange kAreaLarge{96.0 * 96.0, std::numeric_limits<double>::infinity()};

inline constexpr int kMaxDetsPerImage = 100;
inline constexpr double kMissing = -1.0;  // bucket or class without ground truth

/// IoU thresholds 0.50, 0.55, ..., 0.95.
std::array<double, 10> iou_thresholds();

/// 101-point interpolated AP of one category at one IoU threshold. Detections are
/// matched greedily in descending score order, each to the unmatched ground truth
/// of highest IoU >= t. Returns kMissing when the category has no ground truth in range.
double category_ap(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts, int category,
                   double t, AreaRange range = kAreaAll);

/// Mean of category_ap over categories that have ground truth; kMissing when none do.
double ap_at_threshold(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts, double t,
                       AreaRange range = kAreaAll);

struct ApFields {
  double ap = kMissing, ap50 = kMissing, ap75 = kMissing;
  double ap_s = kMissing, ap_m = kMissing, ap_l = kMissing;
};

struct EvalReport : ApFields {
  std::array<double, 10> ap_by_threshold{};
  std::map<int, ApFields> per_class;
};

EvalReport coco_ap_suite(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts);

std::string report_json(const EvalReport& r, const std::map<int, std::string>& names = {});
std::string report_table(const EvalReport& r, const std::map<int, std::string>& names = {});

}  // namespace sgtn
