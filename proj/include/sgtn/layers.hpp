// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "sgtn/autograd.hpp"
#include "sgtn/ops.hpp"

namespace sgtn {

/// Deterministic weight initialization. Each tensor draws from its own stream
/// keyed by (seed, parameter name), so values do not depend on creation order.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : seed_(seed) {}

  /// Normal(0, std) truncated to +-2 std.
  template <typename T>
  Tensor<T> trunc_normal(const std::string& name, Shape shape, double std) const {
    std::mt19937_64 rng(stream_seed(name));
    Tensor<T> t(std::move(shape));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : t.vec()) {
      double z;
      do {
        z = dist(rng);
      } while (std::abs(z) > 2.0);
      v = static_cast<T>(z * std);
    }
    return t;
  }

  /// He-normal for ReLU fan-in.
  template <typename T>
  Tensor<T> kaiming(const std::string& name, Shape shape, int fan_in) const {
    return trunc_normal<T>(name, std::move(shape), std::sqrt(2.0 / std::max(1, fan_in)));
  }

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t stream_seed(const std::string& name) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : name) h = (h ^ ch) * 1099511628211ULL;
    std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (h | 1);  // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

template <typename T>
struct Linear {
  Parameter<T>* weight = nullptr;  // [in, out]
  Parameter<T>* bias = nullptr;    // [out], optional

  static Linear create(ParameterStore<T>& store, const std::string& name, int in, int out, Initializer& init,
                       bool with_bias = true, double std = 0.02) {
    Linear l;
    l.weight = &store.create(name + ".weight", init.trunc_normal<T>(name + ".weight", {in, out}, std));
    if (with_bias) l.bias = &store.create(name + ".bias", Tensor<T>({out}));
    return l;
  }

  Var<T> operator()(Graph<T>& g, Var<T> x) const {
    return linear(x, g.param(*weight), bias ? g.param(*bias) : Var<T>());
  }
};

template <typename T>
struct LayerNorm {
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;

  static LayerNorm create(ParameterStore<T>& store, const std::string& name, int c) {
    return {&store.create(name + ".gamma", Tensor<T>({c}, T{1})), &store.create(name + ".beta", Tensor<T>({c}))};
  }

  Var<T> operator()(Graph<T>& g, Var<T> x) const {
    return layer_norm(x, g.param(*gamma), g.param(*beta), static_cast<T>(1e-5));
  }
};

/// Plain convolution with bias (used for prediction layers).
template <typename T>
struct Conv {
  Parameter<T>* kernel = nullptr;
  Parameter<T>* bias = nullptr;
  Conv2dOptions opts;

  static Conv create(ParameterStore<T>& store, const std::string& name, int cin, int cout, int k, Initializer& init,
                     double bias_init = 0.0) {
    Conv c;
    c.kernel = &store.create(name + ".kernel", init.kaiming<T>(name + ".kernel", {cout, cin, k, k}, cin * k * k));
    c.bias = &store.create(name + ".bias", Tensor<T>({cout}, static_cast<T>(bias_init)));
    c.opts = Conv2dOptions{1, k / 2, 1};
    return c;
  }

  Var<T> operator()(Graph<T>& g, Var<T> x) const {
    return conv2d(x, g.param(*kernel), g.param(*bias), opts);
  }
};

/// 3x3 (or k x k) convolution -> BatchNorm -> ReLU, shape-preserving.
template <typename T>
struct ConvBnRelu {
  Parameter<T>* kernel = nullptr;
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;
  Parameter<T>* running_mean = nullptr;
  Parameter<T>* running_var = nullptr;
  Conv2dOptions opts;

  static ConvBnRelu create(ParameterStore<T>& store, const std::string& name, int cin, int cout, int k,
                           Initializer& init, int dilation = 1) {
    ConvBnRelu c;
    c.kernel = &store.create(name + ".kernel", init.kaiming<T>(name + ".kernel", {cout, cin, k, k}, cin * k * k));
    c.gamma = &store.create(name + ".bn.gamma", Tensor<T>({cout}, T{1}));
    c.beta = &store.create(name + ".bn.beta", Tensor<T>({cout}));
    c.running_mean = &store.create(name + ".bn.running_mean", Tensor<T>({cout}), false);
    c.running_var = &store.create(name + ".bn.running_var", Tensor<T>({cout}, T{1}), false);
    c.opts = Conv2dOptions{1, dilation * (k / 2), dilation};
    return c;
  }

  Var<T> operator()(Graph<T>& g, Var<T> x) const {
    Var<T> y = conv2d(x, g.param(*kernel), Var<T>(), opts);
    y = batch_norm(y, g.param(*gamma), g.param(*beta), *running_mean, *running_var);
    return relu(y);
  }
};

}  // namespace sgtn
