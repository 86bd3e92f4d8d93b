// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include "sgtn/kernels.hpp"

namespace sgtn::kernels::scalar {
namespace {

template <typename T>
void gemm_impl(bool trans_a, bool trans_b, int m, int n, int k, const T* a, const T* b, T* c,
               bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(T) * static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = trans_a ? a[static_cast<std::size_t>(p) * m + i] : a[static_cast<std::size_t>(i) * k + p];
      if (trans_b) {
        for (int j = 0; j < n; ++j) crow[j] += av * b[static_cast<std::size_t>(j) * k + p];
      } else {
        const T* brow = b + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <typename T>
T dot_impl(const T* x, const T* y, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

void gemm(bool ta, bool tb, int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  gemm_impl(ta, tb, m, n, k, a, b, c, acc);
}
void gemm(bool ta, bool tb, int m, int n, int k, const double* a, const double* b, double* c, bool acc) {
  gemm_impl(ta, tb, m, n, k, a, b, c, acc);
}
float dot(const float* x, const float* y, std::size_t n) { return dot_impl(x, y, n); }
double dot(const double* x, const double* y, std::size_t n) { return dot_impl(x, y, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { axpy_impl(alpha, x, y, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { axpy_impl(alpha, x, y, n); }

}  // namespace sgtn::kernels::scalar
