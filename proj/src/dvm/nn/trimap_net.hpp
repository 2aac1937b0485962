// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>
#include <vector>

#include "dvm/compositor/compositor.hpp"
#include "dvm/nn/correlation.hpp"
#include "dvm/nn/layers.hpp"

namespace dvm::nn {

struct TrimapPropConfig {
    EncoderConfig encoder;            // channel count here is for the reference (4ch) branch
    std::vector<int> decoder_widths;  // one entry per 2x upsampling step
    std::string preset = "toy";

    static TrimapPropConfig toy();
    static TrimapPropConfig paper();
    void validate() const;
};

// Dual-encoder trimap propagation with a cross-attention correlation layer.
// The reference encoder consumes (image, trimap); the target encoder consumes
// the image alone; the reference feature also serves as the memory feature.
// The decoder upsamples back to input resolution, concatenating the target
// pyramid feature at each matching scale.
class TrimapPropNet {
  public:
    TrimapPropNet() = default;
    TrimapPropNet(const TrimapPropConfig& cfg, std::uint64_t seed);

    // Deepest-level features, flattened to (h*w) x c token matrices.
    Node encode_pair(const Tensor& image, const comp::Trimap& trimap) const;
    Node encode_target(const Tensor& image) const;

    // Full pipeline: encode -> correlate -> decode to 3 x H x W logits.
    Node propagate_logits(const Tensor& ref_image, const comp::Trimap& ref_trimap,
                          const Tensor& target_image) const;

    comp::Trimap propagate(const Tensor& ref_image, const comp::Trimap& ref_trimap,
                           const Tensor& target_image) const;

    void params(ParamMap& pm, const std::string& prefix = "trimap_prop") const;
    const TrimapPropConfig& config() const { return cfg_; }
    const CorrelationLayer& correlation() const { return corr_; }
    const Encoder& reference_encoder() const { return enc_ref_; }
    const Encoder& target_encoder() const { return enc_tgt_; }

  private:
    Node decode(const Node& feature_mat, const std::vector<Node>& target_pyramid) const;

    TrimapPropConfig cfg_;
    Encoder enc_ref_, enc_tgt_;
    CorrelationLayer corr_;
    std::vector<Conv2d> dec_;
    Conv2d head_;
};

// Nearest labeled frame; ties break toward the smaller index.
int pick_reference(int t, const std::vector<int>& labeled);

}  // namespace dvm::nn
