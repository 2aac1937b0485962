// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace dvm::kern {

// Flat float kernels behind a runtime-dispatched table. The scalar table is
// the reference; the AVX2 table must agree with it elementwise for the maps
// and within accumulation-order tolerance for the reductions.
struct KernelTable {
    float (*dot)(const float* x, const float* y, std::size_t n);
    float (*sum)(const float* x, std::size_t n);
    // y += a * x
    void (*axpy)(float a, const float* x, float* y, std::size_t n);
    void (*add)(const float* x, const float* y, float* out, std::size_t n);
    void (*sub)(const float* x, const float* y, float* out, std::size_t n);
    void (*mul)(const float* x, const float* y, float* out, std::size_t n);
    // out = a * x
    void (*scale)(float a, const float* x, float* out, std::size_t n);
    void (*clamp)(float lo, float hi, const float* x, float* out, std::size_t n);
    void (*relu)(const float* x, float* out, std::size_t n);
    // acc += (x > 0) ? g : 0
    void (*relu_bwd)(const float* x, const float* g, float* acc, std::size_t n);
    const char* name;
};

const KernelTable& scalar_table();
const KernelTable& avx2_table();
bool avx2_supported();

// Dispatched table. Honors DVM_KERNELS=scalar|avx2 (set before first use).
const KernelTable& active();
const char* active_name();

// Reference implementations, shared by the scalar float backend and by the
// double-precision paths (gradient checks run in 64-bit, always scalar).
template <class T>
inline T dot_ref(const T* x, const T* y, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <class T>
inline T sum_ref(const T* x, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <class T>
inline void axpy_ref(T a, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
inline void add_ref(const T* x, const T* y, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

template <class T>
inline void sub_ref(const T* x, const T* y, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

template <class T>
inline void mul_ref(const T* x, const T* y, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

template <class T>
inline void scale_ref(T a, const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

template <class T>
inline void clamp_ref(T lo, T hi, const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        T v = x[i];
        out[i] = v < lo ? lo : (v > hi ? hi : v);
    }
}

template <class T>
inline void relu_ref(const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
inline void relu_bwd_ref(const T* x, const T* g, T* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > T(0)) acc[i] += g[i];
}

// Dispatched float entry points.
inline float dot(const float* x, const float* y, std::size_t n) { return active().dot(x, y, n); }
inline float sum(const float* x, std::size_t n) { return active().sum(x, n); }
inline void axpy(float a, const float* x, float* y, std::size_t n) { active().axpy(a, x, y, n); }
inline void add(const float* x, const float* y, float* o, std::size_t n) { active().add(x, y, o, n); }
inline void sub(const float* x, const float* y, float* o, std::size_t n) { active().sub(x, y, o, n); }
inline void mul(const float* x, const float* y, float* o, std::size_t n) { active().mul(x, y, o, n); }
inline void scale(float a, const float* x, float* o, std::size_t n) { active().scale(a, x, o, n); }
inline void clamp(float lo, float hi, const float* x, float* o, std::size_t n) { active().clamp(lo, hi, x, o, n); }
inline void relu(const float* x, float* o, std::size_t n) { active().relu(x, o, n); }
inline void relu_bwd(const float* x, const float* g, float* a, std::size_t n) { active().relu_bwd(x, g, a, n); }

// Double entry points (scalar reference only).
inline double dot(const double* x, const double* y, std::size_t n) { return dot_ref(x, y, n); }
inline double sum(const double* x, std::size_t n) { return sum_ref(x, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { axpy_ref(a, x, y, n); }
inline void add(const double* x, const double* y, double* o, std::size_t n) { add_ref(x, y, o, n); }
inline void sub(const double* x, const double* y, double* o, std::size_t n) { sub_ref(x, y, o, n); }
inline void mul(const double* x, const double* y, double* o, std::size_t n) { mul_ref(x, y, o, n); }
inline void scale(double a, const double* x, double* o, std::size_t n) { scale_ref(a, x, o, n); }
inline void clamp(double lo, double hi, const double* x, double* o, std::size_t n) { clamp_ref(lo, hi, x, o, n); }
inline void relu(const double* x, double* o, std::size_t n) { relu_ref(x, o, n); }
inline void relu_bwd(const double* x, const double* g, double* a, std::size_t n) { relu_bwd_ref(x, g, a, n); }

}  // namespace dvm::kern
