// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dvm/core/graph.hpp"
#include "dvm/core/rng.hpp"
#include "dvm/core/tensor.hpp"

namespace testutil {

template <class T>
dvm::TensorT<T> random_tensor(dvm::Rng& rng, std::initializer_list<int> dims, double lo = -1.0,
                              double hi = 1.0) {
    dvm::TensorT<T> t(dims);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

// Central finite-difference check of d(scalar_fn)/d(input) against the
// analytic gradient already accumulated in `grad`. Returns the max relative
// error max(|a-n| / max(|a|,|n|,floor)).
template <class T>
double fd_max_rel_error(const std::function<T(const dvm::TensorT<T>&)>& scalar_fn,
                        dvm::TensorT<T> x, const dvm::TensorT<T>& analytic, T step,
                        double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T keep = x[i];
        x[i] = keep + step;
        const double fp = static_cast<double>(scalar_fn(x));
        x[i] = keep - step;
        const double fm = static_cast<double>(scalar_fn(x));
        x[i] = keep;
        const double numeric = (fp - fm) / (2.0 * static_cast<double>(step));
        const double a = static_cast<double>(analytic[i]);
        const double denom = std::max({std::abs(a), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

inline bool all_finite(const dvm::Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(static_cast<double>(t[i]))) return false;
    return true;
}

}  // namespace testutil
