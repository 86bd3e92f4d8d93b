// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "sgtn/instance.hpp"
#include "sgtn/tensor.hpp"

namespace sgtn::testing {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.vec()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

/// Random rectangles and ellipses (some may overlap or touch the border).
inline InstanceList random_instances(std::mt19937_64& rng, int h, int w, int count, int num_classes = 3) {
  InstanceList out;
  std::uniform_int_distribution<int> cy(0, h - 1), cx(0, w - 1), ext(2, std::max(3, std::min(h, w) / 2)),
      cls(0, num_classes - 1), kind(0, 1);
  for (int i = 0; i < count; ++i) {
    Instance inst;
    inst.category = cls(rng);
    inst.mask = Mask(h, w);
    const int y0 = cy(rng), x0 = cx(rng), eh = ext(rng), ew = ext(rng);
    const bool ellipse = kind(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double u = (y - y0) / (0.5 * eh), v = (x - x0) / (0.5 * ew);
        const bool in = ellipse ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
        if (in) inst.mask.at(y, x) = 1;
      }
    if (inst.mask.empty()) inst.mask.at(y0, x0) = 1;
    inst.box = tight_box(inst.mask);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace sgtn::testing
