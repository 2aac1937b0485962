// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "dvm/kernels/kernels.hpp"

namespace dvm {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
// op(A) is M x K, op(B) is K x N. The inner loops reduce to the dispatched
// dot/axpy kernels, so the float path picks up AVX2 when available.
template <class T>
void gemm(bool ta, bool tb, int M, int N, int K, T alpha, const T* A, int lda, const T* B, int ldb,
          T beta, T* C, int ldc) {
    const std::size_t un = static_cast<std::size_t>(N);
    if (beta == T(0)) {
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < N; ++j) C[static_cast<std::size_t>(i) * ldc + j] = T(0);
    } else if (beta != T(1)) {
        for (int i = 0; i < M; ++i)
            kern::scale(beta, C + static_cast<std::size_t>(i) * ldc,
                        C + static_cast<std::size_t>(i) * ldc, un);
    }
    if (!ta && !tb) {
        // C[i,:] += (alpha * A[i,k]) * B[k,:]
        for (int i = 0; i < M; ++i) {
            T* crow = C + static_cast<std::size_t>(i) * ldc;
            const T* arow = A + static_cast<std::size_t>(i) * lda;
            for (int k = 0; k < K; ++k) {
                const T a = alpha * arow[k];
                if (a != T(0)) kern::axpy(a, B + static_cast<std::size_t>(k) * ldb, crow, un);
            }
        }
    } else if (!ta && tb) {
        // C[i,j] += alpha * dot(A[i,:], B[j,:])
        for (int i = 0; i < M; ++i) {
            const T* arow = A + static_cast<std::size_t>(i) * lda;
            T* crow = C + static_cast<std::size_t>(i) * ldc;
            for (int j = 0; j < N; ++j)
                crow[j] += alpha * kern::dot(arow, B + static_cast<std::size_t>(j) * ldb,
                                             static_cast<std::size_t>(K));
        }
    } else if (ta && !tb) {
        // C[i,:] += (alpha * A[k,i]) * B[k,:]
        for (int k = 0; k < K; ++k) {
            const T* arow = A + static_cast<std::size_t>(k) * lda;
            const T* brow = B + static_cast<std::size_t>(k) * ldb;
            for (int i = 0; i < M; ++i) {
                const T a = alpha * arow[i];
                if (a != T(0)) kern::axpy(a, brow, C + static_cast<std::size_t>(i) * ldc, un);
            }
        }
    } else {
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < N; ++j) {
                T acc = T(0);
                for (int k = 0; k < K; ++k)
                    acc += A[static_cast<std::size_t>(k) * lda + i] *
                           B[static_cast<std::size_t>(j) * ldb + k];
                C[static_cast<std::size_t>(i) * ldc + j] += alpha * acc;
            }
    }
}

}  // namespace dvm
