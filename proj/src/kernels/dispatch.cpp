// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string_view>
#include <thread>
#include <vector>

#include "sgtn/errors.hpp"
#include "sgtn/kernels.hpp"

namespace sgtn::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() noexcept {
  const Isa hw = cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
  if (const char* env = std::getenv("SGTN_ISA")) {
    if (std::string_view(env) == "scalar") return Isa::kScalar;
  }
  return hw;
}

int initial_threads() noexcept {
  if (const char* env = std::getenv("SGTN_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return std::min(n, 256);
  }
  return 1;
}

std::atomic<Isa>& isa_slot() {
  static std::atomic<Isa> slot{initial_isa()};
  return slot;
}

std::atomic<int>& thread_slot() {
  static std::atomic<int> slot{initial_threads()};
  return slot;
}

constexpr long long kParallelWork = 1LL << 20;

template <typename T>
void gemm_dispatch(bool ta, bool tb, int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
  const bool simd = active_isa() == Isa::kAvx2;
  auto run = [&](bool ta2, int rows, const T* a2, T* c2) {
    if (simd) {
      avx2::gemm(ta2, tb, rows, n, k, a2, b, c2, acc);
    } else {
      scalar::gemm(ta2, tb, rows, n, k, a2, b, c2, acc);
    }
  };
  const int threads = std::min(max_threads(), m);
  if (threads <= 1 || static_cast<long long>(m) * n * k < kParallelWork) {
    run(ta, m, a, c);
    return;
  }
  // Row-partition; transposed A is packed first so each slice is contiguous.
  std::vector<T> packed;
  const T* arows = a;
  if (ta) {
    packed.resize(static_cast<std::size_t>(m) * k);
    for (int p = 0; p < k; ++p) {
      for (int i = 0; i < m; ++i) packed[static_cast<std::size_t>(i) * k + p] = a[static_cast<std::size_t>(p) * m + i];
    }
    arows = packed.data();
  }
  std::vector<std::jthread> pool;
  const int chunk = (m + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int r0 = t * chunk;
    const int r1 = std::min(m, r0 + chunk);
    if (r0 >= r1) break;
    pool.emplace_back([&, r0, r1] {
      run(false, r1 - r0, arows + static_cast<std::size_t>(r0) * k, c + static_cast<std::size_t>(r0) * n);
    });
  }
}

}  // namespace

Isa detected_isa() noexcept { return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar; }
Isa active_isa() noexcept { return isa_slot().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !cpu_has_avx2()) throw InvalidArgument("AVX2+FMA not supported by this CPU");
  isa_slot().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) noexcept { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

int max_threads() noexcept { return thread_slot().load(std::memory_order_relaxed); }
void set_max_threads(int n) noexcept { thread_slot().store(std::max(1, n), std::memory_order_relaxed); }

void gemm(bool ta, bool tb, int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  gemm_dispatch(ta, tb, m, n, k, a, b, c, acc);
}
void gemm(bool ta, bool tb, int m, int n, int k, const double* a, const double* b, double* c, bool acc) {
  gemm_dispatch(ta, tb, m, n, k, a, b, c, acc);
}

float dot(const float* x, const float* y, std::size_t n) {
  return active_isa() == Isa::kAvx2 ? avx2::dot(x, y, n) : scalar::dot(x, y, n);
}
double dot(const double* x, const double* y, std::size_t n) {
  return active_isa() == Isa::kAvx2 ? avx2::dot(x, y, n) : scalar::dot(x, y, n);
}
void axpy(float alpha, const float* x, float* y, std::size_t n) {
  active_isa() == Isa::kAvx2 ? avx2::axpy(alpha, x, y, n) : scalar::axpy(alpha, x, y, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active_isa() == Isa::kAvx2 ? avx2::axpy(alpha, x, y, n) : scalar::axpy(alpha, x, y, n);
}

}  // namespace sgtn::kernels
