// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/train/adam.hpp"

#include <cmath>

namespace dvm::train {

Adam::Adam(const nn::ParamMap& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, p] : params.items) {
        (void)name;
        params_.push_back(p);
        m_.push_back(Tensor(p->val.dims()));
        v_.push_back(Tensor(p->val.dims()));
    }
}

void Adam::step(double lr) {
    ++t_;
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const float c1 = 1.0f - b1, c2 = 1.0f - b2;
    const float bias1 = 1.0f - static_cast<float>(std::pow(beta1_, t_));
    const float bias2 = 1.0f - static_cast<float>(std::pow(beta2_, t_));
    const float eps = static_cast<float>(eps_);
    const float step_lr = static_cast<float>(lr);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        nn::Node& p = params_[i];
        if (!p->has_grad()) continue;  // parameter unused in this graph
        Tensor& g = p->grad;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t j = 0; j < g.size(); ++j) {
            m[j] = b1 * m[j] + c1 * g[j];
            v[j] = b2 * v[j] + c2 * g[j] * g[j];
            const float mhat = m[j] / bias1;
            const float vhat = v[j] / bias2;
            p->val[j] -= step_lr * mhat / (std::sqrt(vhat) + eps);
        }
        p->zero_grad();
    }
}

}  // namespace dvm::train
