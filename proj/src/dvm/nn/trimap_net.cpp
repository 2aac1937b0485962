// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/nn/trimap_net.hpp"

#include <cstdlib>
#include <stdexcept>

namespace dvm::nn {

TrimapPropConfig TrimapPropConfig::toy() {
    TrimapPropConfig c;
    c.encoder = EncoderConfig::toy(4);
    c.decoder_widths = {64, 32, 16, 8};
    c.preset = "toy";
    return c;
}

TrimapPropConfig TrimapPropConfig::paper() {
    TrimapPropConfig c;
    c.encoder = EncoderConfig::paper_trimap(4);
    c.decoder_widths = {256, 128, 64, 32, 16};
    c.preset = "paper";
    return c;
}

void TrimapPropConfig::validate() const {
    encoder.validate();
    int stride = 1;
    for (std::size_t i = 0; i < decoder_widths.size(); ++i) stride *= 2;
    if (stride != encoder.total_stride())
        throw std::invalid_argument("trimap decoder steps must undo the encoder stride");
}

TrimapPropNet::TrimapPropNet(const TrimapPropConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    EncoderConfig ref_cfg = cfg.encoder;
    ref_cfg.in_channels = 4;
    EncoderConfig tgt_cfg = cfg.encoder;
    tgt_cfg.in_channels = 3;
    enc_ref_ = Encoder(ref_cfg, rng);
    enc_tgt_ = Encoder(tgt_cfg, rng);
    const std::vector<int> level_c = cfg.encoder.level_channels();
    corr_ = CorrelationLayer(level_c.back(), rng);
    int in_c = level_c.back();
    const int L = cfg.encoder.levels();
    for (std::size_t i = 0; i < cfg.decoder_widths.size(); ++i) {
        // After the i-th 2x upsample the map sits at pyramid level L-2-i;
        // that target feature is concatenated when one exists.
        const int skip_level = L - 2 - static_cast<int>(i);
        const int skip_c = skip_level >= 0 ? level_c[static_cast<std::size_t>(skip_level)] : 0;
        dec_.emplace_back(in_c + skip_c, cfg.decoder_widths[i], 3, 1, Init::Xavier, rng);
        in_c = cfg.decoder_widths[i];
    }
    head_ = Conv2d(in_c, 3, 1, 1, Init::Xavier, rng);
}

Node TrimapPropNet::encode_pair(const Tensor& image, const comp::Trimap& trimap) const {
    if (image.dim(1) != trimap.h || image.dim(2) != trimap.w)
        throw std::invalid_argument("encode_pair: trimap size mismatch");
    Node x = make_const(pack_frame_trimap(image, trimap.m));
    Node f = enc_ref_.forward(x).back();
    return ops::chw_to_mat(f);
}

Node TrimapPropNet::encode_target(const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("encode_target: 3xHxW image expected");
    Node f = enc_tgt_.forward(make_const(image)).back();
    return ops::chw_to_mat(f);
}

Node TrimapPropNet::decode(const Node& feature_mat, const std::vector<Node>& target_pyramid) const {
    const int L = cfg_.encoder.levels();
    const Node& deepest = target_pyramid[static_cast<std::size_t>(L - 1)];
    Node x = ops::mat_to_chw(feature_mat, deepest->val.dim(1), deepest->val.dim(2));
    for (std::size_t i = 0; i < dec_.size(); ++i) {
        x = ops::upsample_nearest2(x);
        const int skip_level = L - 2 - static_cast<int>(i);
        if (skip_level >= 0)
            x = ops::concat_c<float>({x, target_pyramid[static_cast<std::size_t>(skip_level)]});
        x = ops::relu(dec_[i].forward(x));
    }
    return head_.forward(x);
}

Node TrimapPropNet::propagate_logits(const Tensor& ref_image, const comp::Trimap& ref_trimap,
                                     const Tensor& target_image) const {
    if (ref_image.dim(1) != target_image.dim(1) || ref_image.dim(2) != target_image.dim(2))
        throw std::invalid_argument("propagate: frame sizes differ");
    const int stride = cfg_.encoder.total_stride();
    if (target_image.dim(1) % stride != 0 || target_image.dim(2) % stride != 0)
        throw std::invalid_argument("propagate: frame size must be divisible by encoder stride");
    Node fr = encode_pair(ref_image, ref_trimap);
    std::vector<Node> tgt_pyramid = enc_tgt_.forward(make_const(target_image));
    Node ft = ops::chw_to_mat(tgt_pyramid.back());
    Node enhanced = corr_.forward(ft, fr, fr);  // memory = reference feature
    return decode(enhanced, tgt_pyramid);
}

comp::Trimap TrimapPropNet::propagate(const Tensor& ref_image, const comp::Trimap& ref_trimap,
                                      const Tensor& target_image) const {
    NoGrad ng;
    Node logits = propagate_logits(ref_image, ref_trimap, target_image);
    const int h = logits->val.dim(1), w = logits->val.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    comp::Trimap out;
    out.h = h;
    out.w = w;
    out.m.resize(plane);
    for (std::size_t p = 0; p < plane; ++p) {
        int best = 0;
        float bv = logits->val[p];
        for (int c = 1; c < 3; ++c) {
            const float v = logits->val[c * plane + p];
            if (v > bv) {
                bv = v;
                best = c;
            }
        }
        out.m[p] = static_cast<std::uint8_t>(best);
    }
    return out;
}

void TrimapPropNet::params(ParamMap& pm, const std::string& prefix) const {
    enc_ref_.reg(pm, prefix + ".enc_ref");
    enc_tgt_.reg(pm, prefix + ".enc_tgt");
    corr_.reg(pm, prefix + ".corr");
    for (std::size_t i = 0; i < dec_.size(); ++i)
        dec_[i].reg(pm, prefix + ".dec" + std::to_string(i));
    head_.reg(pm, prefix + ".head");
}

int pick_reference(int t, const std::vector<int>& labeled) {
    if (labeled.empty()) throw std::invalid_argument("pick_reference: empty labeled set");
    int best = labeled[0];
    for (int r : labeled) {
        const int d = std::abs(t - r), bd = std::abs(t - best);
        if (d < bd || (d == bd && r < best)) best = r;
    }
    return best;
}

}  // namespace dvm::nn
