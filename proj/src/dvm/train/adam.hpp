// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "dvm/nn/module.hpp"

namespace dvm::train {

// Adam over a fixed parameter registry. Moment buffers follow the registry
// order, which makes checkpoints deterministic.
class Adam {
  public:
    Adam() = default;
    explicit Adam(const nn::ParamMap& params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    // Applies one update from the accumulated gradients, then zeroes them.
    void step(double lr);

    long t() const { return t_; }
    std::vector<Tensor>& moments_m() { return m_; }
    std::vector<Tensor>& moments_v() { return v_; }
    void set_t(long t) { t_ = t; }

  private:
    std::vector<nn::Node> params_;
    std::vector<Tensor> m_, v_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
};

}  // namespace dvm::train
