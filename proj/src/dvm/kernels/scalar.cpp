// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/kernels/kernels.hpp"

namespace dvm::kern {

namespace {

float dot_f(const float* x, const float* y, std::size_t n) { return dot_ref(x, y, n); }
float sum_f(const float* x, std::size_t n) { return sum_ref(x, n); }
void axpy_f(float a, const float* x, float* y, std::size_t n) { axpy_ref(a, x, y, n); }
void add_f(const float* x, const float* y, float* o, std::size_t n) { add_ref(x, y, o, n); }
void sub_f(const float* x, const float* y, float* o, std::size_t n) { sub_ref(x, y, o, n); }
void mul_f(const float* x, const float* y, float* o, std::size_t n) { mul_ref(x, y, o, n); }
void scale_f(float a, const float* x, float* o, std::size_t n) { scale_ref(a, x, o, n); }
void clamp_f(float lo, float hi, const float* x, float* o, std::size_t n) { clamp_ref(lo, hi, x, o, n); }
void relu_f(const float* x, float* o, std::size_t n) { relu_ref(x, o, n); }
void relu_bwd_f(const float* x, const float* g, float* a, std::size_t n) { relu_bwd_ref(x, g, a, n); }

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t = {
        dot_f, sum_f, axpy_f, add_f, sub_f, mul_f, scale_f, clamp_f, relu_f, relu_bwd_f, "scalar",
    };
    return t;
}

}  // namespace dvm::kern
