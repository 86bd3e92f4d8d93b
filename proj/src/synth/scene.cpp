// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sgtn/synth.hpp"

namespace sgtn {

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) : inc_((stream << 1u) | 1u) {
  next();
  state_ += seed;
  next();
}

std::uint32_t Pcg32::next() {
  const std::uint64_t old = state_;
  state_ = old * 6364136223846793005ULL + inc_;
  const auto xorshifted = std::uint32_t(((old >> 18u) ^ old) >> 27u);
  const auto rot = std::uint32_t(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

std::uint32_t Pcg32::bounded(std::uint32_t bound) {
  if (bound == 0) throw InvalidArgument("Pcg32::bounded: bound must be positive");
  const std::uint32_t threshold = (0u - bound) % bound;
  for (;;) {
    const std::uint32_t r = next();
    if (r >= threshold) return r % bound;
  }
}

double Pcg32::uniform() { return next() * (1.0 / 4294967296.0); }

int Pcg32::range(int lo, int hi) {
  if (hi < lo) throw InvalidArgument("Pcg32::range: empty range");
  return lo + int(bounded(std::uint32_t(hi - lo) + 1u));
}

const char* shape_class_name(ShapeClass c) {
  switch (c) {
    case ShapeClass::kRectangle: return "rectangle";
    case ShapeClass::kLShape: return "L-shape";
    case ShapeClass::kEllipse: return "ellipse";
  }
  return "?";
}

std::optional<ShapeClass> parse_shape_class(const std::string& name) {
  for (int c = 0; c < kNumShapeClasses; ++c)
    if (name == shape_class_name(ShapeClass(c))) return ShapeClass(c);
  return std::nullopt;
}

void SceneSpec::validate() const {
  if (height <= 0 || width <= 0 || height % 32 || width % 32)
    throw InvalidArgument("scene extent must be positive multiples of 32, got " + std::to_string(height) + "x" +
                          std::to_string(width));
  if (min_instances < 0 || max_instances < min_instances) throw InvalidArgument("bad instance count range");
  if (shape_classes.empty()) throw InvalidArgument("shape_classes is empty");
  if (rotation_max < rotation_min) throw InvalidArgument("bad rotation range");
  if (!(overlap_max >= 0 && overlap_max <= 1)) throw InvalidArgument("overlap_max must lie in [0, 1]");
  if (!(size_min >= 2 && size_max >= size_min)) throw InvalidArgument("bad shape size range");
}

std::uint64_t scene_seed(std::uint64_t base_seed, std::uint64_t index) {
  std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

struct Primitive {
  ShapeClass cls;
  double cx, cy, w, h, angle;  // angle in radians

  // Approximate signed distance in px, negative inside.
  double sdf(double px, double py) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dx = px - cx, dy = py - cy;
    const double u = c * dx + s * dy, v = -s * dx + c * dy;
    switch (cls) {
      case ShapeClass::kRectangle: return box_sdf(u, v, 0, 0, w / 2, h / 2);
      case ShapeClass::kLShape: {
        // vertical bar on the left, horizontal bar along the bottom
        const double tw = 0.4 * w, th = 0.4 * h;
        const double a = box_sdf(u, v, -w / 2 + tw / 2, 0, tw / 2, h / 2);
        const double b = box_sdf(u, v, 0, h / 2 - th / 2, w / 2, th / 2);
        return std::min(a, b);
      }
      case ShapeClass::kEllipse: {
        const double a = w / 2, b = h / 2;
        const double f = (u * u) / (a * a) + (v * v) / (b * b) - 1;
        const double gx = 2 * u / (a * a), gy = 2 * v / (b * b);
        const double g = std::sqrt(gx * gx + gy * gy);
        return g > 1e-12 ? f / g : -std::min(a, b);
      }
    }
    return 1;
  }

  static double box_sdf(double u, double v, double bx, double by, double hx, double hy) {
    const double qx = std::abs(u - bx) - hx, qy = std::abs(v - by) - hy;
    const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
    return std::sqrt(ox * ox + oy * oy) + std::min(std::max(qx, qy), 0.0);
  }
};

Mask rasterize(const Primitive& s, int H, int W) {
  Mask m(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) m.at(y, x) = s.sdf(x + 0.5, y + 0.5) < 0;
  return m;
}

struct Color {
  double r, g, b;
};

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  const int H = spec.height, W = spec.width;
  Pcg32 rng(spec.seed);
  Scene scene;

  const int want = spec.min_instances == spec.max_instances ? spec.min_instances
                                                            : rng.range(spec.min_instances, spec.max_instances);
  std::vector<Primitive> shapes;
  std::vector<Mask> full;     // unoccluded rasterization
  std::vector<Mask> visible;  // after occlusion by later shapes
  int attempts = 0;
  while (int(shapes.size()) < want && attempts < 1000) {
    // The class is drawn once per instance and kept across placement retries so rejections
    // do not skew the class balance.
    const ShapeClass cls = spec.shape_classes[rng.bounded(std::uint32_t(spec.shape_classes.size()))];
    bool placed = false;
    while (!placed && attempts < 1000) {
      ++attempts;
      Primitive s{cls, 0, 0, rng.uniform(spec.size_min, spec.size_max), rng.uniform(spec.size_min, spec.size_max),
              rng.uniform(spec.rotation_min, spec.rotation_max) * std::numbers::pi / 180.0};
      const double half = 0.5 * std::hypot(s.w, s.h);
      s.cx = W > 2 * half ? rng.uniform(half, W - half) : W / 2.0;
      s.cy = H > 2 * half ? rng.uniform(half, H - half) : H / 2.0;
      Mask m = rasterize(s, H, W);
      if (m.empty()) continue;
      bool ok = true;
      for (std::size_t i = 0; i < full.size() && ok; ++i) {
        if (mask_iou(m, full[i]) > spec.overlap_max) ok = false;
        // an earlier instance must keep some visible pixels
        long long left = 0;
        for (std::size_t p = 0; p < m.data.size(); ++p) left += visible[i].data[p] && !m.data[p];
        if (left == 0) ok = false;
      }
      if (!ok) continue;
      for (auto& v : visible)
        for (std::size_t p = 0; p < m.data.size(); ++p) v.data[p] = v.data[p] && !m.data[p];
      shapes.push_back(s);
      visible.push_back(m);
      full.push_back(std::move(m));
      placed = true;
    }
  }
  scene.placement_warning = int(shapes.size()) < want;

  // background: base color plus low-frequency waves and per-pixel noise
  const Color base{rng.uniform(20, 80), rng.uniform(20, 80), rng.uniform(20, 80)};
  const double fx = rng.uniform(0.05, 0.25), fy = rng.uniform(0.05, 0.25), ph = rng.uniform(0, 6.283);
  const double amp = rng.uniform(4, 12);
  std::vector<double> img(std::size_t(H) * W * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double wave = amp * std::sin(fx * x + ph) * std::cos(fy * y - ph);
      const double noise = rng.uniform(-6, 6);
      double* px = &img[(std::size_t(y) * W + x) * 3];
      px[0] = base.r + wave + noise;
      px[1] = base.g + wave + noise;
      px[2] = base.b + wave + noise;
    }
  for (const Primitive& s : shapes) {
    const Color fill{rng.uniform(110, 250), rng.uniform(110, 250), rng.uniform(110, 250)};
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        // 2-px linear ramp centred on the boundary
        const double a = std::clamp((1.0 - s.sdf(x + 0.5, y + 0.5)) / 2.0, 0.0, 1.0);
        if (a <= 0) continue;
        double* px = &img[(std::size_t(y) * W + x) * 3];
        px[0] = px[0] * (1 - a) + fill.r * a;
        px[1] = px[1] * (1 - a) + fill.g * a;
        px[2] = px[2] * (1 - a) + fill.b * a;
      }
  }
  scene.image = RgbImage(H, W);
  for (std::size_t i = 0; i < img.size(); ++i) scene.image.data[i] = std::uint8_t(std::lround(std::clamp(img[i], 0.0, 255.0)));

  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Instance inst;
    inst.category = int(shapes[i].cls);
    inst.box = tight_box(visible[i]);
    inst.mask = std::move(visible[i]);
    scene.instances.push_back(std::move(inst));
  }
  return scene;
}

template <typename T>
Tensor<T> images_to_batch(const std::vector<const RgbImage*>& images) {
  if (images.empty()) throw InvalidArgument("images_to_batch: no images");
  const int H = images[0]->h, W = images[0]->w;
  Tensor<T> out({int(images.size()), H, W, 3});
  std::size_t o = 0;
  for (const RgbImage* im : images) {
    if (im->h != H || im->w != W) throw InvalidShape("images_to_batch: images differ in extent");
    for (std::uint8_t v : im->data) out[o++] = T(v) / T(255);
  }
  return out;
}

template Tensor<float> images_to_batch<float>(const std::vector<const RgbImage*>&);
template Tensor<double> images_to_batch<double>(const std::vector<const RgbImage*>&);

}  // namespace sgtn
