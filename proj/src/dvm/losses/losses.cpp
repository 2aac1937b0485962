// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/losses/losses.hpp"

#include "dvm/compositor/compositor.hpp"

namespace dvm::losses {

LossBatchT<float> make_batch(std::vector<NodeP<float>> preds, const std::vector<Tensor>& gt_alpha,
                             const std::vector<Tensor>& fg, const std::vector<Tensor>& bg,
                             const std::vector<Tensor>& comp,
                             const std::vector<comp::Trimap>& trimaps) {
    LossBatchT<float> b;
    b.pred = std::move(preds);
    b.gt = gt_alpha;
    b.fg = fg;
    b.bg = bg;
    b.comp = comp;
    for (const auto& t : trimaps) b.trans.push_back(comp::unknown_mask(t));
    return b;
}

}  // namespace dvm::losses
