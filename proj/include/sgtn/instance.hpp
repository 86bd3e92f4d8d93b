// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "sgtn/geometry.hpp"
#include "sgtn/mask.hpp"

namespace sgtn {

/// One annotated object: full-resolution mask, its box and a category id in [0, num_classes).
struct Instance {
  int category = 0;
  Box box;
  Mask mask;
  friend bool operator==(const Instance&, const Instance&) = default;
};

using InstanceList = std::vector<Instance>;

}  // namespace sgtn
