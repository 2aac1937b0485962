// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/nn/stfam.hpp"

#include <stdexcept>

namespace dvm::nn {

namespace {

void check_stack(const std::vector<Node>& stack) {
    if (stack.empty() || stack.size() % 2 == 0)
        throw std::invalid_argument("fusion: stack length must be odd");
    for (const auto& f : stack)
        if (!f->val.same_shape(stack[0]->val))
            throw std::invalid_argument("fusion: stack features must share shape");
}

}  // namespace

TFA::TFA(int channels, int window_, Rng& rng) : window(window_) {
    for (int i = 0; i < window; ++i) {
        Head h;
        h.off1 = Conv2d(2 * channels, channels, 3, 1, Init::He, rng);
        h.off2 = Conv2d(channels, 2 * 9, 3, 1, Init::Zero, rng);  // zero-init: identity start
        heads.push_back(std::move(h));
    }
    dconv = DeformConv2d(channels, channels, 3, Init::He, rng);
}

Node TFA::offsets_for(const std::vector<Node>& stack, int i) const {
    const int target = window / 2;
    Node cat = ops::concat_c<float>({stack[target], stack[i]});
    return heads[i].off2.forward(ops::relu(heads[i].off1.forward(cat)));
}

std::vector<Node> TFA::align(const std::vector<Node>& stack) const {
    check_stack(stack);
    if (static_cast<int>(stack.size()) != window)
        throw std::invalid_argument("TFA: stack size != configured window");
    std::vector<Node> out;
    for (int i = 0; i < window; ++i)
        out.push_back(dconv.forward(stack[i], offsets_for(stack, i)));
    return out;
}

void TFA::reg(ParamMap& pm, const std::string& prefix) const {
    for (int i = 0; i < window; ++i) {
        const std::string hp = prefix + ".dt" + std::to_string(i);
        heads[i].off1.reg(pm, hp + ".off1");
        heads[i].off2.reg(pm, hp + ".off2");
    }
    dconv.reg(pm, prefix + ".dconv");
}

TFF::TFF(int in_c, int window, int out_c_, const FusionOptions& opt_, Rng& rng)
    : opt(opt_), cat_c(in_c * window), out_c(out_c_) {
    fc = Linear(cat_c, cat_c, Init::Xavier, rng);
    if (opt.spatial_param_map) {
        if (opt.param_map_h < 1 || opt.param_map_w < 1)
            throw std::invalid_argument("TFF: parameter-map form needs fixed spatial dims");
        satt_param = make_param({1, opt.param_map_h, opt.param_map_w}, Init::Zero, rng, 1, 1);
    } else {
        satt = Conv2d(cat_c, 1, 3, 1, Init::Xavier, rng);
    }
    reduce = Conv2d(cat_c, out_c, 1, 1, Init::Xavier, rng);
    const int k = opt.global_conv_k;
    g_kx1_a = Conv2d(out_c, out_c, k, 1, 1, Init::Xavier, rng);
    g_1xk_a = Conv2d(out_c, out_c, 1, k, 1, Init::Xavier, rng);
    g_1xk_b = Conv2d(out_c, out_c, 1, k, 1, Init::Xavier, rng);
    g_kx1_b = Conv2d(out_c, out_c, k, 1, 1, Init::Xavier, rng);
}

Node TFF::fuse(const std::vector<Node>& stack) const {
    check_stack(stack);
    Node x = stack.size() == 1 ? stack[0] : ops::concat_c(stack);
    if (x->val.dim(0) != cat_c) throw std::invalid_argument("TFF: channel mismatch");
    if (opt.channel_att) {
        Node ac = ops::sigmoid(fc.forward(ops::global_avg_pool(x)));
        x = ops::channel_scale(x, ac);
    }
    if (opt.spatial_att) {
        Node as = opt.spatial_param_map ? ops::sigmoid(satt_param)
                                        : ops::sigmoid(satt.forward(x));
        x = ops::mul_bcast1(x, as);
    }
    x = ops::relu(reduce.forward(x));
    Node b1 = g_kx1_a.forward(g_1xk_a.forward(x));
    Node b2 = g_1xk_b.forward(g_kx1_b.forward(x));
    return ops::add(b1, b2);
}

void TFF::reg(ParamMap& pm, const std::string& prefix) const {
    fc.reg(pm, prefix + ".fc");
    if (opt.spatial_param_map)
        pm.add(prefix + ".satt_map", satt_param);
    else
        satt.reg(pm, prefix + ".satt");
    reduce.reg(pm, prefix + ".reduce");
    g_kx1_a.reg(pm, prefix + ".g_kx1_a");
    g_1xk_a.reg(pm, prefix + ".g_1xk_a");
    g_1xk_b.reg(pm, prefix + ".g_1xk_b");
    g_kx1_b.reg(pm, prefix + ".g_kx1_b");
}

STFAM::STFAM(int in_c, int out_c, int n, const FusionOptions& opt_, Rng& rng)
    : opt(opt_), window(2 * n + 1) {
    work_c = (opt.align_channel_cap > 0 && in_c > opt.align_channel_cap) ? opt.align_channel_cap
                                                                         : in_c;
    has_proj = work_c != in_c;
    if (has_proj) proj = Conv2d(in_c, work_c, 1, 1, Init::Xavier, rng);
    if (opt.tfa_on) tfa = TFA(work_c, window, rng);
    if (opt.tff_on)
        tff = TFF(work_c, window, out_c, opt, rng);
    else
        basic_reduce = Conv2d(work_c * window, out_c, 1, 1, Init::Xavier, rng);
}

std::vector<Node> STFAM::tfa_align(const std::vector<Node>& stack) const {
    check_stack(stack);
    std::vector<Node> s = stack;
    if (has_proj)
        for (auto& f : s) f = proj.forward(f);
    return opt.tfa_on ? tfa.align(s) : s;
}

Node STFAM::tff_fuse(const std::vector<Node>& aligned) const {
    if (opt.tff_on) return tff.fuse(aligned);
    Node x = aligned.size() == 1 ? aligned[0] : ops::concat_c(aligned);
    return ops::relu(basic_reduce.forward(x));
}

Node STFAM::forward(const std::vector<Node>& stack) const { return tff_fuse(tfa_align(stack)); }

void STFAM::reg(ParamMap& pm, const std::string& prefix) const {
    if (has_proj) proj.reg(pm, prefix + ".proj");
    if (opt.tfa_on) tfa.reg(pm, prefix + ".tfa");
    if (opt.tff_on)
        tff.reg(pm, prefix + ".tff");
    else
        basic_reduce.reg(pm, prefix + ".basic_reduce");
}

NaiveFusion::NaiveFusion(int in_c, int out_c, int n, Rng& rng) {
    const int cat_c = in_c * (2 * n + 1);
    c1 = Conv2d(cat_c, out_c, 3, 1, Init::Xavier, rng);
    c2 = Conv2d(out_c, out_c, 3, 1, Init::Xavier, rng);
    c3 = Conv2d(out_c, out_c, 3, 1, Init::Xavier, rng);
}

Node NaiveFusion::forward(const std::vector<Node>& stack) const {
    check_stack(stack);
    Node x = stack.size() == 1 ? stack[0] : ops::concat_c(stack);
    x = ops::relu(c1.forward(x));
    x = ops::relu(c2.forward(x));
    return c3.forward(x);
}

void NaiveFusion::reg(ParamMap& pm, const std::string& prefix) const {
    c1.reg(pm, prefix + ".c1");
    c2.reg(pm, prefix + ".c2");
    c3.reg(pm, prefix + ".c3");
}

CrossAttentionFusion::CrossAttentionFusion(int in_c, int out_c, int n, Rng& rng)
    : window(2 * n + 1) {
    corr = CorrelationLayer(in_c, rng);
    reduce = Conv2d(in_c * window, out_c, 1, 1, Init::Xavier, rng);
}

Node CrossAttentionFusion::forward(const std::vector<Node>& stack) const {
    check_stack(stack);
    const int target = static_cast<int>(stack.size()) / 2;
    const int h = stack[0]->val.dim(1), w = stack[0]->val.dim(2);
    Node tgt_mat = ops::chw_to_mat(stack[target]);
    std::vector<Node> enhanced;
    for (const auto& f : stack) {
        Node nb_mat = ops::chw_to_mat(f);
        enhanced.push_back(ops::mat_to_chw(corr.forward(tgt_mat, nb_mat, nb_mat), h, w));
    }
    Node x = enhanced.size() == 1 ? enhanced[0] : ops::concat_c(enhanced);
    return ops::relu(reduce.forward(x));
}

void CrossAttentionFusion::reg(ParamMap& pm, const std::string& prefix) const {
    corr.reg(pm, prefix + ".corr");
    reduce.reg(pm, prefix + ".reduce");
}

std::unique_ptr<FusionModule> make_fusion(const std::string& name, int in_c, int out_c, int n,
                                          const FusionOptions& opt, Rng& rng) {
    if (name == "stfam") return std::make_unique<STFAM>(in_c, out_c, n, opt, rng);
    if (name == "naive") return std::make_unique<NaiveFusion>(in_c, out_c, n, rng);
    if (name == "cross-attention") return std::make_unique<CrossAttentionFusion>(in_c, out_c, n, rng);
    throw std::invalid_argument("unknown fusion variant: " + name);
}

}  // namespace dvm::nn
