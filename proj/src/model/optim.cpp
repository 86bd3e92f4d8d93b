// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgtn/optim.hpp"

#include <cmath>
#include <numbers>

namespace sgtn {

double cosine_lr(double base, std::int64_t step, std::int64_t total) {
  if (total <= 0) return base;
  const double t = std::min(1.0, double(step) / double(total));
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

template <typename T>
double Adam<T>::step(ParameterStore<T>& store, double lr) {
  auto& params = store.all();
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw InvalidArgument("Adam: parameter store changed size between steps");

  double sq = 0;
  for (const auto& p : params) {
    if (!p.trainable || p.grad.empty()) continue;
    for (T gv : p.grad.vec()) sq += double(gv) * double(gv);
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericalError("Adam: non-finite gradient norm");
  const double clip = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable || p.grad.empty()) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double gk = double(p.grad[k]) * clip;
      m[k] = cfg_.beta1 * m[k] + (1 - cfg_.beta1) * gk;
      v[k] = cfg_.beta2 * v[k] + (1 - cfg_.beta2) * gk * gk;
      p.value[k] -= static_cast<T>(lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps));
    }
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace sgtn
