// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/nn/matting_net.hpp"

#include <algorithm>
#include <stdexcept>

namespace dvm::nn {

MattingConfig MattingConfig::toy(int n) {
    MattingConfig c;
    c.encoder = EncoderConfig::toy(4);
    c.decoder_widths = {16, 32, 64, 128};
    c.n = n;
    c.preset = "toy";
    return c;
}

MattingConfig MattingConfig::paper(int n) {
    MattingConfig c;
    c.encoder = EncoderConfig::paper_matting(4);
    c.decoder_widths = {64, 256, 256, 256, 256};
    c.n = n;
    c.preset = "paper";
    return c;
}

void MattingConfig::validate() const {
    encoder.validate();
    if (encoder.in_channels != 4)
        throw std::invalid_argument("matting encoder takes 4 input channels");
    if (static_cast<int>(decoder_widths.size()) != encoder.levels())
        throw std::invalid_argument("decoder_widths must have one entry per pyramid level");
    if (n < 0) throw std::invalid_argument("n must be >= 0");
    if (fusion != "stfam" && fusion != "naive" && fusion != "cross-attention")
        throw std::invalid_argument("unknown fusion variant: " + fusion);
}

MattingNet::MattingNet(const MattingConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    enc_ = Encoder(cfg.encoder, rng, /*zero_last_input=*/true);
    const std::vector<int> ec = cfg.encoder.level_channels();
    const std::vector<int>& dc = cfg.decoder_widths;
    const int L = cfg.encoder.levels();

    bottom_ = Conv2d(ec[L - 1], dc[L - 1], 3, 1, Init::Xavier, rng);
    // Levels L-1..1: upsample then fuse the per-frame stack of level l-1.
    for (int l = L - 1; l >= 1; --l) {
        ups_.emplace_back(dc[l], dc[l - 1], rng);
        fusions_.push_back(make_fusion(cfg.fusion, ec[l - 1], dc[l - 1], cfg.n, cfg.fusion_opt, rng));
        post_.emplace_back(dc[l - 1], dc[l - 1], 3, 1, Init::Xavier, rng);
    }
    // Final upsample to full resolution (no skip at the input scale).
    ups_.emplace_back(dc[0], dc[0], rng);
    post_.emplace_back(dc[0], dc[0], 3, 1, Init::Xavier, rng);
    head_ = Conv2d(dc[0], 1, 3, 1, Init::Xavier, rng);
}

std::vector<Node> MattingNet::encode(const Tensor& frame, const comp::Trimap& trimap) const {
    if (frame.dim(1) != trimap.h || frame.dim(2) != trimap.w)
        throw std::invalid_argument("encode: trimap size mismatch");
    const int stride = cfg_.encoder.total_stride();
    if (frame.dim(1) % stride != 0 || frame.dim(2) % stride != 0)
        throw std::invalid_argument("encode: frame size must be divisible by encoder stride");
    return enc_.forward(make_const(pack_frame_trimap(frame, trimap.m)));
}

Node MattingNet::decode(const std::vector<std::vector<Node>>& window_pyramids) const {
    const int W = static_cast<int>(window_pyramids.size());
    if (W != 2 * cfg_.n + 1)
        throw std::invalid_argument("decode: expected 2n+1 pyramids");
    const int L = cfg_.encoder.levels();
    for (const auto& pyr : window_pyramids) {
        if (static_cast<int>(pyr.size()) != L)
            throw std::invalid_argument("decode: pyramid level count mismatch");
        for (int l = 0; l < L; ++l)
            if (!pyr[l]->val.same_shape(window_pyramids[0][l]->val))
                throw std::invalid_argument("decode: mismatched pyramid geometry");
    }
    const int target = cfg_.n;

    Node x = ops::relu(bottom_.forward(window_pyramids[target][L - 1]));
    for (int l = L - 1; l >= 1; --l) {
        const std::size_t i = static_cast<std::size_t>(L - 1 - l);
        x = ups_[i].forward(x);
        std::vector<Node> stack;
        stack.reserve(window_pyramids.size());
        for (const auto& pyr : window_pyramids) stack.push_back(pyr[l - 1]);
        Node skip = fusions_[i]->forward(stack);
        x = ops::relu(post_[i].forward(ops::add(x, skip)));
    }
    x = ops::relu(post_.back().forward(ups_.back().forward(x)));
    return ops::sigmoid(head_.forward(x));
}

comp::AlphaClip MattingNet::predict_clip(const comp::Clip& clip,
                                         const std::vector<comp::Trimap>& trimaps) const {
    const int T = clip.length();
    if (static_cast<int>(trimaps.size()) != T)
        throw std::invalid_argument("predict_clip: trimap count mismatch");
    NoGrad ng;
    // Each frame is encoded once; windows reuse the cached pyramids.
    std::vector<std::vector<Node>> pyramids;
    pyramids.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) pyramids.push_back(encode(clip.frames[t], trimaps[t]));

    comp::AlphaClip out;
    for (int t = 0; t < T; ++t) {
        std::vector<std::vector<Node>> window;
        for (int d = -cfg_.n; d <= cfg_.n; ++d)
            window.push_back(pyramids[std::clamp(t + d, 0, T - 1)]);
        Node alpha = decode(window);
        Tensor a({alpha->val.dim(1), alpha->val.dim(2)});
        std::copy(alpha->val.data(), alpha->val.data() + a.size(), a.data());
        out.frames.push_back(std::move(a));
    }
    return out;
}

void MattingNet::params(ParamMap& pm, const std::string& prefix) const {
    enc_.reg(pm, prefix + ".enc");
    bottom_.reg(pm, prefix + ".bottom");
    for (std::size_t i = 0; i < ups_.size(); ++i)
        ups_[i].reg(pm, prefix + ".up" + std::to_string(i));
    for (std::size_t i = 0; i < fusions_.size(); ++i)
        fusions_[i]->reg(pm, prefix + ".fuse" + std::to_string(i));
    for (std::size_t i = 0; i < post_.size(); ++i)
        post_[i].reg(pm, prefix + ".post" + std::to_string(i));
    head_.reg(pm, prefix + ".head");
}

}  // namespace dvm::nn
