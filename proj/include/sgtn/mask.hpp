// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sgtn/errors.hpp"
#include "sgtn/geometry.hpp"

namespace sgtn {

/// Binary mask, row-major, one byte per pixel (0 or 1).
struct Mask {
  int h = 0, w = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int height, int width, std::uint8_t fill = 0)
      : h(height), w(width), data(static_cast<std::size_t>(height) * width, fill) {
    if (height < 0 || width < 0) throw InvalidShape("mask: negative extent");
  }

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
  /// Out-of-bounds pixels read as 0.
  std::uint8_t get(int y, int x) const { return (y < 0 || x < 0 || y >= h || x >= w) ? 0 : at(y, x); }

  long long area() const;
  bool empty() const { return area() == 0; }
  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Tight bounding box in pixel-edge coordinates (a single pixel at (y, x) is {x, y, 1, 1}).
/// Empty masks give a zero box.
Box tight_box(const Mask& m);

/// |a and b| / |a or b|, 0 when both are empty.
double mask_iou(const Mask& a, const Mask& b);

Mask mask_union(const Mask& a, const Mask& b);

/// Each output pixel is the max over its stride x stride block (ceil division).
Mask downsample_max(const Mask& m, int stride);

/// 3x3 erosion (pixels outside the mask extent count as 0) and dilation.
Mask erode3x3(const Mask& m);
Mask dilate3x3(const Mask& m);

/// m minus its 3x3 erosion.
Mask inner_boundary(const Mask& m);

struct Point {
  int y = 0, x = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Outer boundary of every 8-connected component, traced clockwise with the
/// Moore-neighbor rule starting from the component's first pixel in raster order.
std::vector<std::vector<Point>> outer_contours(const Mask& m);

/// Douglas-Peucker simplification of a closed contour; returns the kept vertices.
std::vector<Point> simplify_closed(const std::vector<Point>& contour, double tolerance);

/// Bilinear sample of a row-major grid at continuous (fy, fx), coordinates clamped to the grid.
double sample_bilinear(const std::vector<float>& src, int h, int w, double fy, double fx);

/// Bilinear resampling of a row-major float grid (half-pixel centers, edge clamped).
std::vector<float> resize_bilinear(const std::vector<float>& src, int sh, int sw, int dh, int dw);

}  // namespace sgtn
