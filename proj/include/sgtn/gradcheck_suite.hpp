// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgtn/gradcheck.hpp"

namespace sgtn {

struct GradcheckCase {
  std::string name;
  GradcheckReport report;
};

inline constexpr double kGradcheckTolerance = 1e-5;

/// Finite-difference checks, in double, of every differentiable op and of the
/// composite paths: one LSwin block, sgm_forward + sgm_loss, and the heads with their losses.
std::vector<GradcheckCase> run_gradcheck_suite(std::uint64_t seed);

}  // namespace sgtn
