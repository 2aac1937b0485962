// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA variants. This file is the only one compiled with -mavx2 -mfma;
// callers reach it through the dispatch table only.

#include "dvm/kernels/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace dvm::kern {

namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
    return _mm_cvtss_f32(s);
}

float dot_f(const float* x, const float* y, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    }
    float acc = hsum8(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

float sum_f(const float* x, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) acc0 = _mm256_add_ps(acc0, _mm256_loadu_ps(x + i));
    float acc = hsum8(acc0);
    for (; i < n; ++i) acc += x[i];
    return acc;
}

void axpy_f(float a, const float* x, float* y, std::size_t n) {
    __m256 va = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_loadu_ps(y + i);
        vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_f(const float* x, const float* y, float* o, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) o[i] = x[i] + y[i];
}

void sub_f(const float* x, const float* y, float* o, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) o[i] = x[i] - y[i];
}

void mul_f(const float* x, const float* y, float* o, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) o[i] = x[i] * y[i];
}

void scale_f(float a, const float* x, float* o, std::size_t n) {
    __m256 va = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) o[i] = a * x[i];
}

void clamp_f(float lo, float hi, const float* x, float* o, std::size_t n) {
    __m256 vlo = _mm256_set1_ps(lo);
    __m256 vhi = _mm256_set1_ps(hi);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        v = _mm256_max_ps(v, vlo);
        v = _mm256_min_ps(v, vhi);
        _mm256_storeu_ps(o + i, v);
    }
    for (; i < n; ++i) {
        float v = x[i];
        o[i] = v < lo ? lo : (v > hi ? hi : v);
    }
}

void relu_f(const float* x, float* o, std::size_t n) {
    __m256 z = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, _mm256_max_ps(_mm256_loadu_ps(x + i), z));
    for (; i < n; ++i) o[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_f(const float* x, const float* g, float* a, std::size_t n) {
    __m256 z = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), z, _CMP_GT_OQ);
        __m256 inc = _mm256_and_ps(mask, _mm256_loadu_ps(g + i));
        _mm256_storeu_ps(a + i, _mm256_add_ps(_mm256_loadu_ps(a + i), inc));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0f) a[i] += g[i];
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable t = {
        dot_f, sum_f, axpy_f, add_f, sub_f, mul_f, scale_f, clamp_f, relu_f, relu_bwd_f, "avx2",
    };
    return t;
}

}  // namespace dvm::kern

#else

namespace dvm::kern {

// Built without AVX2 support; dispatch falls back to scalar.
const KernelTable& avx2_table() { return scalar_table(); }

}  // namespace dvm::kern

#endif
