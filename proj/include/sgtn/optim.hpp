// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "sgtn/autograd.hpp"

namespace sgtn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // global gradient norm cap, <= 0 disables
};

/// Learning rate at `step` (0-based) under cosine decay to zero over `total` steps.
double cosine_lr(double base, std::int64_t step, std::int64_t total);

/// Adam over the trainable parameters of one store. Moment buffers are keyed
/// by parameter position, so the store must not grow between steps.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update with learning rate `lr` and returns the pre-clip gradient norm.
  double step(ParameterStore<T>& store, double lr);

  std::int64_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace sgtn
