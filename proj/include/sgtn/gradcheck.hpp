// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgtn/autograd.hpp"

namespace sgtn {

/// Central-difference check of reverse-mode gradients, always in double.
/// Per-component error is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
struct GradcheckReport {
  std::vector<double> rel_errors;
  std::vector<std::string> labels;  // component names, parallel to rel_errors
  double max_rel_error = 0.0;
  std::string worst;

  bool passed(double tol) const { return max_rel_error <= tol; }
};

using ScalarFn = std::function<Var<double>(Graph<double>&, Var<double>)>;
using ModelFn = std::function<Var<double>(Graph<double>&)>;

/// Gradient of f w.r.t. every component of x.
GradcheckReport finite_diff_gradcheck(const ScalarFn& f, const Tensor<double>& x, double h = 1e-5);

/// Gradient of f w.r.t. the trainable parameters of `store`; at most
/// `max_per_parameter` randomly chosen components per parameter (0 = all).
GradcheckReport gradcheck_parameters(const ModelFn& f, ParameterStore<double>& store, std::size_t max_per_parameter,
                                     std::uint64_t seed, double h = 1e-5);

}  // namespace sgtn
