// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "dvm/nn/layers.hpp"

namespace dvm::nn {

// Cross-attention correlation over flattened (h*w) x c token matrices.
// Queries come from the target feature, keys from the reference feature, and
// values from the memory feature; the weighted memories are added to the
// target feature as residuals.
class CorrelationLayer {
  public:
    CorrelationLayer() = default;
    CorrelationLayer(int channels, Rng& rng);

    // S = rowsoftmax(Q(Ft) K(Fr)^T / sqrt(c)); shape (hw_t) x (hw_r).
    Node scores(const Node& ft_mat, const Node& fr_mat) const;

    // Ft + S · V(Mr); all inputs (hw) x c.
    Node forward(const Node& ft_mat, const Node& fr_mat, const Node& mr_mat) const;

    void reg(ParamMap& pm, const std::string& prefix) const;

    Node wq, wk, wv;  // c x c projections
    int channels = 0;
};

}  // namespace dvm::nn
