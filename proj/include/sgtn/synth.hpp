// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgtn/instance.hpp"
#include "sgtn/tensor.hpp"

namespace sgtn {

/// PCG32 (XSH RR 64/32).
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 54);

  std::uint32_t next();
  /// Uniform in [0, bound); bound > 0.
  std::uint32_t bounded(std::uint32_t bound);
  /// Uniform in [0, 1) with 32 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  int range(int lo, int hi);

 private:
  std::uint64_t state_ = 0, inc_ = 0;
};

/// Category ids are the enum values.
enum class ShapeClass { kRectangle = 0, kLShape = 1, kEllipse = 2 };

inline constexpr int kNumShapeClasses = 3;

const char* shape_class_name(ShapeClass c);
std::optional<ShapeClass> parse_shape_class(const std::string& name);

struct SceneSpec {
  std::uint64_t seed = 0;
  int height = 64, width = 64;  // multiples of 32
  int min_instances = 2, max_instances = 4;
  std::vector<ShapeClass> shape_classes = {ShapeClass::kRectangle, ShapeClass::kLShape, ShapeClass::kEllipse};
  double rotation_min = -30, rotation_max = 30;  // degrees
  double overlap_max = 0.1;                      // IoU cap between any two shapes
  double size_min = 12, size_max = 28;           // shape extent before rotation, px

  void validate() const;
};

/// 8-bit interleaved RGB.
struct RgbImage {
  int h = 0, w = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int height, int width) : h(height), w(width), data(std::size_t(height) * width * 3, 0) {}
  std::uint8_t& at(int y, int x, int c) { return data[(std::size_t(y) * w + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const { return data[(std::size_t(y) * w + x) * 3 + c]; }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct Scene {
  RgbImage image;
  InstanceList instances;  // visible masks, tight boxes
  bool placement_warning = false;  // fewer instances than requested could be placed
};

/// Pure function of the SceneSpec. Later shapes occlude earlier ones; masks are the visible parts.
Scene generate_scene(const SceneSpec& spec);

/// Seed of scene `index` in a dataset generated from `base_seed`.
std::uint64_t scene_seed(std::uint64_t base_seed, std::uint64_t index);

/// Stack images into [N, H, W, 3] with values in [0, 1]. All images must share one extent.
template <typename T>
Tensor<T> images_to_batch(const std::vector<const RgbImage*>& images);

}  // namespace sgtn
