// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace dvm::kern {

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const KernelTable* pick() {
    const char* env = std::getenv("DVM_KERNELS");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_table();
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return &avx2_table();
    }
    return avx2_supported() ? &avx2_table() : &scalar_table();
}

}  // namespace

const KernelTable& active() {
    static const KernelTable* t = pick();
    return *t;
}

const char* active_name() { return active().name; }

}  // namespace dvm::kern
