// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

// Dense arithmetic kernels. Every kernel has a portable scalar reference and
// an AVX2+FMA variant; the variant is chosen once at startup from CPUID and
// can be overridden with SGTN_ISA=scalar|avx2 or set_isa().
//
// All matrices are row-major and densely packed. gemm computes
//   C[m,n] (+)= op(A)[m,k] * op(B)[k,n]
// where op(A) = A^T when trans_a is set (A is then stored as [k,m]).
// Each output element is reduced over k in ascending order by exactly one
// thread, so results are bit-reproducible for a fixed ISA.

namespace sgtn::kernels {

enum class Isa { kScalar, kAvx2 };

Isa detected_isa() noexcept;
Isa active_isa() noexcept;
void set_isa(Isa isa);
const char* isa_name(Isa isa) noexcept;

/// Upper bound on worker threads used by large gemm calls (SGTN_THREADS, default 1).
int max_threads() noexcept;
void set_max_threads(int n) noexcept;

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a, const float* b, float* c,
          bool accumulate);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b, double* c,
          bool accumulate);

float dot(const float* x, const float* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);

/// y += alpha * x
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

namespace scalar {
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a, const float* b, float* c,
          bool accumulate);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b, double* c,
          bool accumulate);
float dot(const float* x, const float* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a, const float* b, float* c,
          bool accumulate);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b, double* c,
          bool accumulate);
float dot(const float* x, const float* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2

}  // namespace sgtn::kernels
