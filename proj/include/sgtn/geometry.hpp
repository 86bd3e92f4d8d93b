// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace sgtn {

/// Axis-aligned box in image pixels: top-left corner plus extent.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  double cx() const noexcept { return x + 0.5 * w; }
  double cy() const noexcept { return y + 0.5 * h; }
  double x2() const noexcept { return x + w; }
  double y2() const noexcept { return y + h; }
  double area() const noexcept { return std::max(0.0, w) * std::max(0.0, h); }

  friend bool operator==(const Box&, const Box&) = default;
};

inline double box_iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x, b.x));
  const double ih = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y, b.y));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

/// (dx, dy, log dw, log dh) of `target` relative to `proposal`.
inline std::array<double, 4> encode_deltas(const Box& proposal, const Box& target) {
  return {(target.cx() - proposal.cx()) / proposal.w, (target.cy() - proposal.cy()) / proposal.h,
          std::log(target.w / proposal.w), std::log(target.h / proposal.h)};
}

inline Box decode_deltas(const Box& proposal, const std::array<double, 4>& d) {
  const double cx = proposal.cx() + d[0] * proposal.w;
  const double cy = proposal.cy() + d[1] * proposal.h;
  const double w = proposal.w * std::exp(d[2]);
  const double h = proposal.h * std::exp(d[3]);
  return {cx - 0.5 * w, cy - 0.5 * h, w, h};
}

inline Box clip_box(const Box& b, double width, double height) {
  const double x1 = std::clamp(b.x, 0.0, width), y1 = std::clamp(b.y, 0.0, height);
  const double x2 = std::clamp(b.x2(), 0.0, width), y2 = std::clamp(b.y2(), 0.0, height);
  return {x1, y1, x2 - x1, y2 - y1};
}

}  // namespace sgtn
