// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dvm/nn/correlation.hpp"
#include "dvm/nn/layers.hpp"

namespace dvm::nn {

// Drop-in temporal fusion over a stack of 2n+1 per-frame features (target at
// index n), producing the decoder skip feature for one level.
class FusionModule {
  public:
    virtual ~FusionModule() = default;
    virtual Node forward(const std::vector<Node>& stack) const = 0;
    virtual void reg(ParamMap& pm, const std::string& prefix) const = 0;
};

struct FusionOptions {
    bool tfa_on = true;
    bool tff_on = true;
    bool channel_att = true;   // TFF channel attention
    bool spatial_att = true;   // TFF spatial attention
    int global_conv_k = 7;
    bool spatial_param_map = false;  // free-parameter spatial map instead of conv-computed
    int param_map_h = 0, param_map_w = 0;  // required when spatial_param_map
    // Wide-encoder levels are projected down to this many channels before
    // alignment (0 disables). Keeps ST-FAM tractable on the paper preset.
    int align_channel_cap = 128;
};

// Temporal feature alignment: per-neighbor offset head over
// concat(target, neighbor) driving a deformable convolution whose kernel
// weights are shared across the window. The offset head output layer is
// zero-initialized so the initial alignment is the identity.
class TFA {
  public:
    TFA() = default;
    TFA(int channels, int window, Rng& rng);  // window = 2n+1

    std::vector<Node> align(const std::vector<Node>& stack) const;
    // Offset field predicted for frame i of the stack (exposed for tests).
    Node offsets_for(const std::vector<Node>& stack, int i) const;
    void reg(ParamMap& pm, const std::string& prefix) const;

    struct Head {
        Conv2d off1, off2;
    };
    std::vector<Head> heads;
    DeformConv2d dconv;  // one kernel, applied to every frame of the window
    int window = 1;
};

// Temporal feature fusion: channel attention, spatial attention, 1x1 channel
// reduction, then a global convolution (two separable kx1/1xk branches).
class TFF {
  public:
    TFF() = default;
    TFF(int in_c, int window, int out_c, const FusionOptions& opt, Rng& rng);

    Node fuse(const std::vector<Node>& stack) const;
    void reg(ParamMap& pm, const std::string& prefix) const;

    Linear fc;        // channel attention
    Conv2d satt;      // spatial attention map (conv-computed form)
    Node satt_param;  // free-parameter form (optional)
    Conv2d reduce;    // 1x1 to out_c
    Conv2d g_kx1_a, g_1xk_a, g_1xk_b, g_kx1_b;  // global conv branches
    FusionOptions opt;
    int cat_c = 0, out_c = 0;
};

class STFAM : public FusionModule {
  public:
    STFAM() = default;
    STFAM(int in_c, int out_c, int n, const FusionOptions& opt, Rng& rng);

    std::vector<Node> tfa_align(const std::vector<Node>& stack) const;
    Node tff_fuse(const std::vector<Node>& aligned) const;

    Node forward(const std::vector<Node>& stack) const override;
    void reg(ParamMap& pm, const std::string& prefix) const override;

    TFA tfa;
    TFF tff;
    Conv2d proj;          // per-frame channel projection (align_channel_cap)
    Conv2d basic_reduce;  // used when tff is off: concat + 1x1 conv
    FusionOptions opt;
    int window = 1;
    bool has_proj = false;
    int work_c = 0;
};

// Several plain 3x3 convolutions over the channel-concatenated stack.
class NaiveFusion : public FusionModule {
  public:
    NaiveFusion() = default;
    NaiveFusion(int in_c, int out_c, int n, Rng& rng);

    Node forward(const std::vector<Node>& stack) const override;
    void reg(ParamMap& pm, const std::string& prefix) const override;

    Conv2d c1, c2, c3;
};

// Correlation layer matching each neighbor to the target, then 1x1 fusion.
class CrossAttentionFusion : public FusionModule {
  public:
    CrossAttentionFusion() = default;
    CrossAttentionFusion(int in_c, int out_c, int n, Rng& rng);

    Node forward(const std::vector<Node>& stack) const override;
    void reg(ParamMap& pm, const std::string& prefix) const override;

    CorrelationLayer corr;
    Conv2d reduce;
    int window = 1;
};

// name ∈ {"stfam", "naive", "cross-attention"}; unknown names are config
// errors.
std::unique_ptr<FusionModule> make_fusion(const std::string& name, int in_c, int out_c, int n,
                                          const FusionOptions& opt, Rng& rng);

}  // namespace dvm::nn
