// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/nn/layers.hpp"

#include <stdexcept>

namespace dvm::nn {

Conv2d::Conv2d(int in_c, int out_c, int kh, int kw, int stride_, Init init, Rng& rng, bool bias)
    : stride(stride_), pad_y(kh / 2), pad_x(kw / 2) {
    const int fan_in = in_c * kh * kw;
    const int fan_out = out_c * kh * kw;
    w = make_param({out_c, in_c, kh, kw}, init, rng, fan_in, fan_out);
    if (bias) b = make_param({out_c}, Init::Zero, rng, fan_in, fan_out);
}

Node Conv2d::forward(const Node& x) const { return ops::conv2d(x, w, b, stride, pad_y, pad_x); }

void Conv2d::reg(ParamMap& pm, const std::string& prefix) const {
    pm.add(prefix + ".w", w);
    if (b) pm.add(prefix + ".b", b);
}

Linear::Linear(int in, int out, Init init, Rng& rng, bool bias) {
    w = make_param({out, in}, init, rng, in, out);
    if (bias) b = make_param({out}, Init::Zero, rng, in, out);
}

Node Linear::forward(const Node& x) const { return ops::linear(x, w, b); }

void Linear::reg(ParamMap& pm, const std::string& prefix) const {
    pm.add(prefix + ".w", w);
    if (b) pm.add(prefix + ".b", b);
}

DeformConv2d::DeformConv2d(int in_c, int out_c, int k_, Init init, Rng& rng) : k(k_) {
    const int fan_in = in_c * k * k;
    w = make_param({out_c, in_c, k, k}, init, rng, fan_in, out_c * k * k);
    b = make_param({out_c}, Init::Zero, rng, fan_in, out_c);
}

Node DeformConv2d::forward(const Node& x, const Node& offsets) const {
    return ops::deform_conv2d(x, offsets, w, b);
}

void DeformConv2d::reg(ParamMap& pm, const std::string& prefix) const {
    pm.add(prefix + ".w", w);
    pm.add(prefix + ".b", b);
}

SubPixelUp::SubPixelUp(int in_c, int out_c, Rng& rng) {
    conv = Conv2d(in_c, out_c * 4, 3, 1, Init::Xavier, rng);
}

Node SubPixelUp::forward(const Node& x) const { return ops::depth_to_space(conv.forward(x), 2); }

void SubPixelUp::reg(ParamMap& pm, const std::string& prefix) const {
    conv.reg(pm, prefix + ".conv");
}

BasicBlock::BasicBlock(int in_c, int out_c, int stride, Rng& rng) {
    c1 = Conv2d(in_c, out_c, 3, stride, Init::He, rng);
    c2 = Conv2d(out_c, out_c, 3, 1, Init::He, rng);
    has_proj = stride != 1 || in_c != out_c;
    if (has_proj) proj = Conv2d(in_c, out_c, 1, stride, Init::He, rng);
}

Node BasicBlock::forward(const Node& x) const {
    Node h = c2.forward(ops::relu(c1.forward(x)));
    Node s = has_proj ? proj.forward(x) : x;
    return ops::relu(ops::add(h, s));
}

void BasicBlock::reg(ParamMap& pm, const std::string& prefix) const {
    c1.reg(pm, prefix + ".c1");
    c2.reg(pm, prefix + ".c2");
    if (has_proj) proj.reg(pm, prefix + ".proj");
}

Bottleneck::Bottleneck(int in_c, int out_c, int stride, Rng& rng) {
    const int mid = out_c / 4;
    c1 = Conv2d(in_c, mid, 1, 1, Init::He, rng);
    c2 = Conv2d(mid, mid, 3, stride, Init::He, rng);
    c3 = Conv2d(mid, out_c, 1, 1, Init::He, rng);
    has_proj = stride != 1 || in_c != out_c;
    if (has_proj) proj = Conv2d(in_c, out_c, 1, stride, Init::He, rng);
}

Node Bottleneck::forward(const Node& x) const {
    Node h = ops::relu(c1.forward(x));
    h = ops::relu(c2.forward(h));
    h = c3.forward(h);
    Node s = has_proj ? proj.forward(x) : x;
    return ops::relu(ops::add(h, s));
}

void Bottleneck::reg(ParamMap& pm, const std::string& prefix) const {
    c1.reg(pm, prefix + ".c1");
    c2.reg(pm, prefix + ".c2");
    c3.reg(pm, prefix + ".c3");
    if (has_proj) proj.reg(pm, prefix + ".proj");
}

EncoderConfig EncoderConfig::toy(int in_c) {
    EncoderConfig c;
    c.in_channels = in_c;
    c.preset = "toy";
    for (int width : {16, 32, 64, 128}) c.stages.push_back({width, 2, 1, false});
    return c;
}

EncoderConfig EncoderConfig::paper_matting(int in_c) {
    EncoderConfig c;
    c.in_channels = in_c;
    c.preset = "paper";
    c.has_stem = true;
    c.stem_width = 64;
    c.stem_kernel = 7;
    c.stages = {{256, 2, 3, true}, {512, 2, 4, true}, {1024, 2, 6, true}, {2048, 2, 3, true}};
    return c;
}

EncoderConfig EncoderConfig::paper_trimap(int in_c) {
    EncoderConfig c;
    c.in_channels = in_c;
    c.preset = "paper";
    c.has_stem = true;
    c.stem_width = 64;
    c.stem_kernel = 7;
    c.stages = {{64, 2, 3, false}, {128, 2, 4, false}, {256, 2, 6, false}, {512, 2, 3, false}};
    return c;
}

int EncoderConfig::total_stride() const {
    int s = has_stem ? 2 : 1;
    for (const auto& st : stages) s *= st.stride;
    return s;
}

std::vector<int> EncoderConfig::level_channels() const {
    std::vector<int> out;
    if (has_stem) out.push_back(stem_width);
    for (const auto& st : stages) out.push_back(st.width);
    return out;
}

void EncoderConfig::level_geometry(int level, int* jump, int* radius) const {
    // rf tracks the receptive-field size, j the input-center jump.
    int rf = 1, j = 1;
    int cur = -1;
    auto conv = [&](int k, int s) {
        rf += (k - 1) * j;
        j *= s;
    };
    if (has_stem) {
        conv(stem_kernel, 2);
        if (++cur == level) {
            *jump = j;
            *radius = (rf - 1) / 2 + 1;
            return;
        }
    }
    for (const auto& st : stages) {
        for (int blk = 0; blk < st.blocks; ++blk) {
            const int s = blk == 0 ? st.stride : 1;
            if (st.bottleneck) {
                conv(1, 1);
                conv(3, s);
                conv(1, 1);
            } else {
                conv(3, s);
                conv(3, 1);
            }
        }
        if (++cur == level) {
            *jump = j;
            *radius = (rf - 1) / 2 + 1;
            return;
        }
    }
    throw std::out_of_range("level_geometry: bad level");
}

void EncoderConfig::validate() const {
    if (stages.size() + (has_stem ? 1 : 0) < 2)
        throw std::invalid_argument("encoder needs at least 2 pyramid levels");
    for (const auto& st : stages)
        if (st.width < 1 || st.stride < 1 || st.blocks < 1)
            throw std::invalid_argument("bad encoder stage config");
}

Encoder::Encoder(const EncoderConfig& cfg, Rng& rng, bool zero_last_input) : cfg_(cfg) {
    cfg_.validate();
    int in_c = cfg.in_channels;
    if (cfg.has_stem) {
        stem_ = Conv2d(in_c, cfg.stem_width, cfg.stem_kernel, 2,
                       zero_last_input ? Init::HeZeroLastInput : Init::He, rng);
        in_c = cfg.stem_width;
    }
    bool first_conv_pending = !cfg.has_stem && zero_last_input;
    for (const auto& st : cfg.stages) {
        if (st.bottleneck) {
            std::vector<Bottleneck> blocks;
            for (int i = 0; i < st.blocks; ++i) {
                blocks.emplace_back(in_c, st.width, i == 0 ? st.stride : 1, rng);
                in_c = st.width;
            }
            bottleneck_stages_.push_back(std::move(blocks));
            basic_stages_.emplace_back();
        } else {
            std::vector<BasicBlock> blocks;
            for (int i = 0; i < st.blocks; ++i) {
                blocks.emplace_back(in_c, st.width, i == 0 ? st.stride : 1, rng);
                in_c = st.width;
            }
            if (first_conv_pending) {
                // Zero the trimap input channel of the very first convolution.
                Tensor& w = blocks[0].c1.w->val;
                for (int o = 0; o < w.dim(0); ++o)
                    for (int y = 0; y < w.dim(2); ++y)
                        for (int x = 0; x < w.dim(3); ++x) w.at(o, w.dim(1) - 1, y, x) = 0.0f;
                if (blocks[0].has_proj) {
                    Tensor& pw = blocks[0].proj.w->val;
                    for (int o = 0; o < pw.dim(0); ++o)
                        for (int y = 0; y < pw.dim(2); ++y)
                            for (int x = 0; x < pw.dim(3); ++x) pw.at(o, pw.dim(1) - 1, y, x) = 0.0f;
                }
                first_conv_pending = false;
            }
            basic_stages_.push_back(std::move(blocks));
            bottleneck_stages_.emplace_back();
        }
    }
}

std::vector<Node> Encoder::forward(const Node& x) const {
    if (x->val.rank() != 3 || x->val.dim(0) != cfg_.in_channels)
        throw std::invalid_argument("encoder: bad input channels");
    std::vector<Node> pyramid;
    Node h = x;
    if (cfg_.has_stem) {
        h = ops::relu(stem_.forward(h));
        pyramid.push_back(h);
    }
    for (std::size_t s = 0; s < cfg_.stages.size(); ++s) {
        if (cfg_.stages[s].bottleneck)
            for (const auto& blk : bottleneck_stages_[s]) h = blk.forward(h);
        else
            for (const auto& blk : basic_stages_[s]) h = blk.forward(h);
        pyramid.push_back(h);
    }
    return pyramid;
}

void Encoder::reg(ParamMap& pm, const std::string& prefix) const {
    if (cfg_.has_stem) stem_.reg(pm, prefix + ".stem");
    for (std::size_t s = 0; s < cfg_.stages.size(); ++s) {
        const std::string sp = prefix + ".stage" + std::to_string(s);
        if (cfg_.stages[s].bottleneck)
            for (std::size_t i = 0; i < bottleneck_stages_[s].size(); ++i)
                bottleneck_stages_[s][i].reg(pm, sp + ".block" + std::to_string(i));
        else
            for (std::size_t i = 0; i < basic_stages_[s].size(); ++i)
                basic_stages_[s][i].reg(pm, sp + ".block" + std::to_string(i));
    }
}

Tensor pack_frame_trimap(const Tensor& frame, const std::vector<std::uint8_t>& trimap) {
    if (frame.rank() != 3 || frame.dim(0) != 3)
        throw std::invalid_argument("pack_frame_trimap: 3xHxW frame expected");
    const int h = frame.dim(1), w = frame.dim(2);
    if (trimap.size() != static_cast<std::size_t>(h) * w)
        throw std::invalid_argument("pack_frame_trimap: trimap size mismatch");
    Tensor out({4, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::copy(frame.data(), frame.data() + 3 * plane, out.data());
    for (std::size_t i = 0; i < plane; ++i) out[3 * plane + i] = trimap[i] * 0.5f;
    return out;
}

}  // namespace dvm::nn
