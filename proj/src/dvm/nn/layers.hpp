// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dvm/core/ops.hpp"
#include "dvm/nn/module.hpp"

namespace dvm::nn {

class Conv2d {
  public:
    Conv2d() = default;
    Conv2d(int in_c, int out_c, int kh, int kw, int stride, Init init, Rng& rng, bool bias = true);
    Conv2d(int in_c, int out_c, int k, int stride, Init init, Rng& rng, bool bias = true)
        : Conv2d(in_c, out_c, k, k, stride, init, rng, bias) {}

    Node forward(const Node& x) const;
    void reg(ParamMap& pm, const std::string& prefix) const;

    Node w, b;
    int stride = 1, pad_y = 0, pad_x = 0;
};

class Linear {
  public:
    Linear() = default;
    Linear(int in, int out, Init init, Rng& rng, bool bias = true);

    Node forward(const Node& x) const;
    void reg(ParamMap& pm, const std::string& prefix) const;

    Node w, b;
};

class DeformConv2d {
  public:
    DeformConv2d() = default;
    DeformConv2d(int in_c, int out_c, int k, Init init, Rng& rng);

    // offsets: (2*k*k) x H x W.
    Node forward(const Node& x, const Node& offsets) const;
    void reg(ParamMap& pm, const std::string& prefix) const;

    Node w, b;
    int k = 3;
};

// Sub-pixel upsampling: conv to 4*out_c channels then depth-to-space by 2.
class SubPixelUp {
  public:
    SubPixelUp() = default;
    SubPixelUp(int in_c, int out_c, Rng& rng);

    Node forward(const Node& x) const;
    void reg(ParamMap& pm, const std::string& prefix) const;

    Conv2d conv;
};

class BasicBlock {
  public:
    BasicBlock() = default;
    BasicBlock(int in_c, int out_c, int stride, Rng& rng);

    Node forward(const Node& x) const;
    void reg(ParamMap& pm, const std::string& prefix) const;

    Conv2d c1, c2, proj;
    bool has_proj = false;
};

class Bottleneck {
  public:
    Bottleneck() = default;
    Bottleneck(int in_c, int out_c, int stride, Rng& rng);

    Node forward(const Node& x) const;
    void reg(ParamMap& pm, const std::string& prefix) const;

    Conv2d c1, c2, c3, proj;
    bool has_proj = false;
};

// --------------------------------------------------------------------------
// Residual pyramid encoder
// --------------------------------------------------------------------------

struct StageCfg {
    int width = 0;
    int stride = 2;
    int blocks = 1;
    bool bottleneck = false;
};

struct EncoderConfig {
    int in_channels = 4;
    bool has_stem = false;  // stride-2 stem conv contributing pyramid level 0
    int stem_width = 64;
    int stem_kernel = 7;
    std::vector<StageCfg> stages;
    std::string preset = "toy";

    static EncoderConfig toy(int in_c);
    static EncoderConfig paper_matting(int in_c);  // ResNet-50 geometry
    static EncoderConfig paper_trimap(int in_c);   // ResNet-34 geometry

    int levels() const { return static_cast<int>(stages.size()) + (has_stem ? 1 : 0); }
    int total_stride() const;
    std::vector<int> level_channels() const;
    // Receptive-field geometry of pyramid level `level`: center-to-center
    // input jump and conservative input radius.
    void level_geometry(int level, int* jump, int* radius) const;
    void validate() const;
};

class Encoder {
  public:
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, Rng& rng, bool zero_last_input = false);

    // Returns one feature node per pyramid level, coarsest last.
    std::vector<Node> forward(const Node& x) const;
    void reg(ParamMap& pm, const std::string& prefix) const;

    const EncoderConfig& config() const { return cfg_; }

  private:
    EncoderConfig cfg_;
    Conv2d stem_;
    std::vector<std::vector<BasicBlock>> basic_stages_;
    std::vector<std::vector<Bottleneck>> bottleneck_stages_;
};

// 4-channel network input: RGB frame plus trimap scaled to {0, 0.5, 1}.
Tensor pack_frame_trimap(const Tensor& frame, const std::vector<std::uint8_t>& trimap);

}  // namespace dvm::nn
