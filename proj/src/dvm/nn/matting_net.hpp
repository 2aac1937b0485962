// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dvm/compositor/compositor.hpp"
#include "dvm/nn/stfam.hpp"

namespace dvm::nn {

struct MattingConfig {
    EncoderConfig encoder;            // 4-channel input (RGB + trimap)
    std::vector<int> decoder_widths;  // one per pyramid level
    int n = 1;                        // temporal window half-size
    std::string fusion = "stfam";
    FusionOptions fusion_opt;
    std::string preset = "toy";

    static MattingConfig toy(int n);
    static MattingConfig paper(int n);
    void validate() const;
};

// Per-frame pyramid encoder over image+trimap, decoder with sub-pixel
// upsampling whose skip connections pass through the configured temporal
// fusion (ST-FAM by default), sigmoid alpha head.
class MattingNet {
  public:
    MattingNet() = default;
    MattingNet(const MattingConfig& cfg, std::uint64_t seed);

    std::vector<Node> encode(const Tensor& frame, const comp::Trimap& trimap) const;

    // window_pyramids: 2n+1 pyramids of identical geometry, target at index n.
    // Returns the 1 x H x W alpha node (sigmoid output).
    Node decode(const std::vector<std::vector<Node>>& window_pyramids) const;

    comp::AlphaClip predict_clip(const comp::Clip& clip,
                                 const std::vector<comp::Trimap>& trimaps) const;

    void params(ParamMap& pm, const std::string& prefix = "matting") const;
    const MattingConfig& config() const { return cfg_; }

  private:
    MattingConfig cfg_;
    Encoder enc_;
    Conv2d bottom_;
    std::vector<SubPixelUp> ups_;
    std::vector<std::unique_ptr<FusionModule>> fusions_;
    std::vector<Conv2d> post_;
    Conv2d head_;
};

}  // namespace dvm::nn
