// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2 -mfma. Only reached through the runtime dispatcher
// after CPUID confirms support.

#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "sgtn/kernels.hpp"

namespace sgtn::kernels::avx2 {
namespace {

template <typename T>
struct Lanes;

template <>
struct Lanes<float> {
  using Reg = __m256;
  static constexpr int kWidth = 8;
  static Reg zero() { return _mm256_setzero_ps(); }
  static Reg set1(float v) { return _mm256_set1_ps(v); }
  static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  static Reg load(const float* p, __m256i m) { return _mm256_maskload_ps(p, m); }
  static void store(float* p, Reg v) { _mm256_storeu_ps(p, v); }
  static void store(float* p, __m256i m, Reg v) { _mm256_maskstore_ps(p, m, v); }
  static Reg fma(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
  static __m256i mask(int rem) {
    return _mm256_cmpgt_epi32(_mm256_set1_epi32(rem), _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7));
  }
  static float hsum(Reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, lo);
    lo = _mm_add_ss(lo, sh);
    return _mm_cvtss_f32(lo);
  }
};

template <>
struct Lanes<double> {
  using Reg = __m256d;
  static constexpr int kWidth = 4;
  static Reg zero() { return _mm256_setzero_pd(); }
  static Reg set1(double v) { return _mm256_set1_pd(v); }
  static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  static Reg load(const double* p, __m256i m) { return _mm256_maskload_pd(p, m); }
  static void store(double* p, Reg v) { _mm256_storeu_pd(p, v); }
  static void store(double* p, __m256i m, Reg v) { _mm256_maskstore_pd(p, m, v); }
  static Reg fma(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
  static __m256i mask(int rem) {
    return _mm256_cmpgt_epi64(_mm256_set1_epi64x(rem), _mm256_setr_epi64x(0, 1, 2, 3));
  }
  static double hsum(Reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  }
};

// R rows of C by up to two vector widths of columns, reduced over all of k.
template <typename T, int R, bool Full>
void micro_kernel(const T* a, int k, const T* b, int n, T* c, int cols, bool accumulate) {
  using L = Lanes<T>;
  constexpr int W = L::kWidth;
  const __m256i m0 = L::mask(std::min(cols, W));
  const __m256i m1 = L::mask(std::max(0, cols - W));
  const bool two = Full || cols > W;

  typename L::Reg acc0[R];
  typename L::Reg acc1[R];
  for (int r = 0; r < R; ++r) {
    T* crow = c + static_cast<std::size_t>(r) * n;
    if (accumulate) {
      acc0[r] = Full ? L::load(crow) : L::load(crow, m0);
      acc1[r] = two ? (Full ? L::load(crow + W) : L::load(crow + W, m1)) : L::zero();
    } else {
      acc0[r] = L::zero();
      acc1[r] = L::zero();
    }
  }
  for (int p = 0; p < k; ++p) {
    const T* brow = b + static_cast<std::size_t>(p) * n;
    const auto b0 = Full ? L::load(brow) : L::load(brow, m0);
    const auto b1 = two ? (Full ? L::load(brow + W) : L::load(brow + W, m1)) : L::zero();
    for (int r = 0; r < R; ++r) {
      const auto av = L::set1(a[static_cast<std::size_t>(r) * k + p]);
      acc0[r] = L::fma(av, b0, acc0[r]);
      if (two) acc1[r] = L::fma(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < R; ++r) {
    T* crow = c + static_cast<std::size_t>(r) * n;
    if (Full) {
      L::store(crow, acc0[r]);
      L::store(crow + W, acc1[r]);
    } else {
      L::store(crow, m0, acc0[r]);
      if (two) L::store(crow + W, m1, acc1[r]);
    }
  }
}

template <typename T, int R>
void row_block(const T* a, int k, const T* b, int n, T* c, bool accumulate) {
  constexpr int kCols = 2 * Lanes<T>::kWidth;
  int j = 0;
  for (; j + kCols <= n; j += kCols) micro_kernel<T, R, true>(a, k, b + j, n, c + j, kCols, accumulate);
  if (j < n) micro_kernel<T, R, false>(a, k, b + j, n, c + j, n - j, accumulate);
}

template <typename T>
void transpose_into(const T* src, int rows, int cols, std::vector<T>& dst) {
  dst.resize(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int q = 0; q < cols; ++q) dst[static_cast<std::size_t>(q) * rows + r] = src[static_cast<std::size_t>(r) * cols + q];
  }
}

template <typename T>
void gemm_impl(bool trans_a, bool trans_b, int m, int n, int k, const T* a, const T* b, T* c,
               bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::memset(c, 0, sizeof(T) * static_cast<std::size_t>(m) * n);
    return;
  }
  thread_local std::vector<T> a_pack;
  thread_local std::vector<T> b_pack;
  const T* arows = a;
  const T* brows = b;
  if (trans_a) {
    transpose_into(a, k, m, a_pack);
    arows = a_pack.data();
  }
  if (trans_b) {
    transpose_into(b, n, k, b_pack);
    brows = b_pack.data();
  }
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    row_block<T, 4>(arows + static_cast<std::size_t>(i) * k, k, brows, n, c + static_cast<std::size_t>(i) * n, accumulate);
  }
  for (; i < m; ++i) {
    row_block<T, 1>(arows + static_cast<std::size_t>(i) * k, k, brows, n, c + static_cast<std::size_t>(i) * n, accumulate);
  }
}

template <typename T>
T dot_impl(const T* x, const T* y, std::size_t n) {
  using L = Lanes<T>;
  constexpr std::size_t W = L::kWidth;
  auto acc = L::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) acc = L::fma(L::load(x + i), L::load(y + i), acc);
  T s = L::hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, std::size_t n) {
  using L = Lanes<T>;
  constexpr std::size_t W = L::kWidth;
  const auto av = L::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) L::store(y + i, L::fma(av, L::load(x + i), L::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
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

}  // namespace sgtn::kernels::avx2
