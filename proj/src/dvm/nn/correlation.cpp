// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/nn/correlation.hpp"

#include <cmath>

namespace dvm::nn {

CorrelationLayer::CorrelationLayer(int channels_, Rng& rng) : channels(channels_) {
    wq = make_param({channels, channels}, Init::Xavier, rng, channels, channels);
    wk = make_param({channels, channels}, Init::Xavier, rng, channels, channels);
    wv = make_param({channels, channels}, Init::Xavier, rng, channels, channels);
}

Node CorrelationLayer::scores(const Node& ft_mat, const Node& fr_mat) const {
    if (ft_mat->val.rank() != 2 || ft_mat->val.dim(1) != channels ||
        fr_mat->val.rank() != 2 || fr_mat->val.dim(1) != channels)
        throw std::invalid_argument("CorrelationLayer: (hw) x c inputs expected");
    Node q = ops::matmul(ft_mat, wq, false, true);
    Node k = ops::matmul(fr_mat, wk, false, true);
    Node logits = ops::mul_scalar(ops::matmul(q, k, false, true),
                                  1.0f / std::sqrt(static_cast<float>(channels)));
    return ops::softmax_rows(logits);
}

Node CorrelationLayer::forward(const Node& ft_mat, const Node& fr_mat, const Node& mr_mat) const {
    Node s = scores(ft_mat, fr_mat);
    Node v = ops::matmul(mr_mat, wv, false, true);
    return ops::add(ft_mat, ops::matmul(s, v));
}

void CorrelationLayer::reg(ParamMap& pm, const std::string& prefix) const {
    pm.add(prefix + ".wq", wq);
    pm.add(prefix + ".wk", wk);
    pm.add(prefix + ".wv", wv);
}

}  // namespace dvm::nn
