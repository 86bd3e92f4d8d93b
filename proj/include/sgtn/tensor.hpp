// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sgtn/errors.hpp"

namespace sgtn {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

/// Dense row-major n-dimensional array. Gradients live in the autograd graph,
/// not here, so a Tensor is a plain value type.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    for (int d : shape_) {
      if (d < 0) throw InvalidShape("negative extent in shape " + shape_str(shape_));
    }
    data_.assign(static_cast<std::size_t>(numel(shape_)), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != numel(shape_)) {
      throw InvalidShape("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }

  int dim(int axis) const {
    const int r = rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) {
      throw InvalidShape("axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
    }
    return shape_[static_cast<std::size_t>(axis)];
  }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& vec() noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... I>
  T& at(I... idx) {
    return data_[offset(idx...)];
  }
  template <typename... I>
  const T& at(I... idx) const {
    return data_[offset(idx...)];
  }

  Tensor reshape(Shape shape) const& {
    Tensor out = *this;
    return std::move(out).reshape(std::move(shape));
  }
  Tensor reshape(Shape shape) && {
    if (numel(shape) != static_cast<std::int64_t>(data_.size())) {
      throw InvalidShape("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  template <typename... I>
  std::size_t offset(I... idx) const {
    const std::size_t ids[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizeof...(I); ++k) off = off * static_cast<std::size_t>(shape_[k]) + ids[k];
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace sgtn
