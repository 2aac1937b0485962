// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "dvm/core/ops.hpp"

namespace dvm::losses {

// Matting losses over a clip batch. Predictions enter as graph nodes (H x W
// alpha maps); groundtruth enters as plain tensors. Everything differentiates
// w.r.t. the predictions, and every function instantiates for float and
// double (the gradient checks run in 64-bit).

template <class T>
struct LossBatchT {
    std::vector<NodeP<T>> pred;       // predicted alpha, H x W per frame
    std::vector<TensorT<T>> gt;       // groundtruth alpha, H x W
    std::vector<TensorT<T>> fg;       // groundtruth foreground, 3 x H x W
    std::vector<TensorT<T>> bg;       // groundtruth background, 3 x H x W
    std::vector<TensorT<T>> comp;     // groundtruth composite, 3 x H x W
    std::vector<TensorT<T>> trans;    // transition mask {0,1}, H x W

    int frames() const { return static_cast<int>(pred.size()); }
};

struct LossWeights {
    double alpha = 1, comp = 1, grad = 1, kl = 1, temporal = 1;
};

constexpr double kKlEps = 1e-8;

// Squared difference where the groundtruth alpha is exactly 0 or 1, absolute
// difference in the transition region.
template <class T>
NodeP<T> alpha_loss_map(const NodeP<T>& pred, const TensorT<T>& gt) {
    if (!pred->val.same_shape(gt)) throw std::invalid_argument("alpha_loss: shape mismatch");
    TensorT<T> hard(gt.dims()), soft(gt.dims());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool h = gt[i] == T(0) || gt[i] == T(1);
        hard[i] = h ? T(1) : T(0);
        soft[i] = h ? T(0) : T(1);
    }
    NodeP<T> d = ops::sub_const(pred, gt);
    return ops::add(ops::mul_const(ops::square(d), hard), ops::mul_const(ops::abs_val(d), soft));
}

// |alpha*F + (1-alpha)*B - I| averaged over color channels, on the transition
// mask only.
template <class T>
NodeP<T> composition_loss_map(const NodeP<T>& pred, const TensorT<T>& fg, const TensorT<T>& bg,
                              const TensorT<T>& comp, const TensorT<T>& trans) {
    const int h = pred->val.dim(0), w = pred->val.dim(1);
    if (fg.rank() != 3 || fg.dim(0) != 3 || fg.dim(1) != h || fg.dim(2) != w ||
        !fg.same_shape(bg) || !fg.same_shape(comp) || !pred->val.same_shape(trans))
        throw std::invalid_argument("composition_loss: shape mismatch");
    NodeP<T> a = ops::reshape(pred, {1, h, w});
    NodeP<T> one_minus = ops::rsub_scalar(T(1), a);
    NodeP<T> recon = ops::add(ops::mul_bcast1(make_const(fg), a),
                              ops::mul_bcast1(make_const(bg), one_minus));
    NodeP<T> diff = ops::abs_val(ops::sub_const(recon, comp));
    NodeP<T> mean_c = ops::mul_scalar(ops::sum_channels(diff), T(1) / T(3));
    return ops::mul_const(ops::reshape(mean_c, {h, w}), trans);
}

// Fixed 3x3 Sobel pair as conv weights: channel 0 = Gx, channel 1 = Gy.
template <class T>
TensorT<T> sobel_weights() {
    TensorT<T> w({2, 1, 3, 3});
    const T gx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    const T gy[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    for (int i = 0; i < 9; ++i) {
        w[i] = gx[i];
        w[9 + i] = gy[i];
    }
    return w;
}

// |Gx(a)-Gx(gt)| + |Gy(a)-Gy(gt)| per pixel (replicate padding), used as a
// spatial weight on the alpha loss map.
template <class T>
NodeP<T> gradient_loss_map(const NodeP<T>& pred, const TensorT<T>& gt) {
    if (!pred->val.same_shape(gt)) throw std::invalid_argument("gradient_loss: shape mismatch");
    const int h = pred->val.dim(0), w = pred->val.dim(1);
    NodeP<T> sob = make_const(sobel_weights<T>());
    auto grad_of = [&](const NodeP<T>& x) {
        NodeP<T> padded = ops::pad_replicate(ops::reshape(x, {1, h, w}), 1);
        return ops::conv2d(padded, sob, NodeP<T>{}, 1, 0);
    };
    NodeP<T> gp = grad_of(pred);
    TensorT<T> ggt;
    {
        NoGrad ng;
        ggt = grad_of(make_const(gt))->val;
    }
    NodeP<T> diff = ops::sum_channels(ops::abs_val(ops::sub_const(gp, ggt)));
    return ops::mul(ops::reshape(diff, {h, w}), alpha_loss_map(pred, gt));
}

// KL(pred/sum || gt/sum) over one frame; sums are eps-guarded and the eps also
// sits inside the logarithm. An all-zero groundtruth frame contributes 0 and
// raises the warning flag.
template <class T>
NodeP<T> kl_loss(const NodeP<T>& pred, const TensorT<T>& gt, bool* all_zero_gt = nullptr) {
    if (!pred->val.same_shape(gt)) throw std::invalid_argument("kl_loss: shape mismatch");
    const T eps = static_cast<T>(kKlEps);
    // Same reduction kernel as reduce_sum(pred): identical inputs then yield
    // bitwise-identical normalizers, making KL(pred==gt) exactly zero.
    const T gt_sum = kern::sum(gt.data(), gt.size());
    if (gt_sum == T(0)) {
        if (all_zero_gt != nullptr) *all_zero_gt = true;
        TensorT<T> z({1});
        return make_const(std::move(z));
    }
    TensorT<T> logq(gt.dims());
    const T inv_gt = T(1) / (gt_sum + eps);  // reciprocal form, as the pred path computes it
    for (std::size_t i = 0; i < gt.size(); ++i) logq[i] = std::log(gt[i] * inv_gt + eps);
    NodeP<T> p = ops::div_by_scalar_node(pred, ops::reduce_sum(pred), eps);
    NodeP<T> term = ops::mul(p, ops::sub_const(ops::log_eps(p, eps), logq));
    return ops::reduce_sum(term);
}

// ((a_{t+1}-a_t) - (gt_{t+1}-gt_t))^2 per pixel.
template <class T>
NodeP<T> temporal_loss_map(const NodeP<T>& pred_t, const NodeP<T>& pred_t1, const TensorT<T>& gt_t,
                           const TensorT<T>& gt_t1) {
    if (!pred_t->val.same_shape(pred_t1->val) || !gt_t.same_shape(gt_t1) ||
        !pred_t->val.same_shape(gt_t))
        throw std::invalid_argument("temporal_loss: shape mismatch");
    TensorT<T> gd(gt_t.dims());
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] = gt_t1[i] - gt_t[i];
    return ops::square(ops::sub_const(ops::sub(pred_t1, pred_t), gd));
}

template <class T>
struct LossTerms {
    NodeP<T> total;
    double alpha = 0, comp = 0, grad = 0, kl = 0, temporal = 0;
    bool kl_warning = false;
};

// Mean over pixels and frames of La + Lc + Lg + Ltc, plus the per-frame KL
// term averaged over frames. Unit weights by default.
template <class T>
LossTerms<T> total_loss(const LossBatchT<T>& batch, const LossWeights& w = {}) {
    const int T_frames = batch.frames();
    if (T_frames < 1) throw std::invalid_argument("total_loss: empty batch");
    const T invT = T(1) / static_cast<T>(T_frames);

    LossTerms<T> out;
    NodeP<T> a_sum, c_sum, g_sum, kl_sum, tc_sum;
    auto add_to = [](NodeP<T>& acc, const NodeP<T>& x) {
        acc = acc ? ops::add(acc, x) : x;
    };
    for (int t = 0; t < T_frames; ++t) {
        add_to(a_sum, ops::reduce_mean(alpha_loss_map(batch.pred[t], batch.gt[t])));
        add_to(c_sum, ops::reduce_mean(composition_loss_map(batch.pred[t], batch.fg[t],
                                                            batch.bg[t], batch.comp[t],
                                                            batch.trans[t])));
        add_to(g_sum, ops::reduce_mean(gradient_loss_map(batch.pred[t], batch.gt[t])));
        bool warn = false;
        add_to(kl_sum, kl_loss(batch.pred[t], batch.gt[t], &warn));
        out.kl_warning = out.kl_warning || warn;
    }
    for (int t = 0; t + 1 < T_frames; ++t)
        add_to(tc_sum, ops::reduce_mean(temporal_loss_map(batch.pred[t], batch.pred[t + 1],
                                                          batch.gt[t], batch.gt[t + 1])));

    NodeP<T> a_mean = ops::mul_scalar(a_sum, invT);
    NodeP<T> c_mean = ops::mul_scalar(c_sum, invT);
    NodeP<T> g_mean = ops::mul_scalar(g_sum, invT);
    NodeP<T> kl_mean = ops::mul_scalar(kl_sum, invT);
    NodeP<T> tc_mean = tc_sum ? ops::mul_scalar(tc_sum, T(1) / static_cast<T>(T_frames - 1))
                              : make_const(TensorT<T>({1}));

    out.alpha = static_cast<double>(a_mean->val[0]);
    out.comp = static_cast<double>(c_mean->val[0]);
    out.grad = static_cast<double>(g_mean->val[0]);
    out.kl = static_cast<double>(kl_mean->val[0]);
    out.temporal = static_cast<double>(tc_mean->val[0]);
    out.total = ops::add(
        ops::add(ops::mul_scalar(a_mean, static_cast<T>(w.alpha)),
                 ops::mul_scalar(c_mean, static_cast<T>(w.comp))),
        ops::add(ops::mul_scalar(g_mean, static_cast<T>(w.grad)),
                 ops::add(ops::mul_scalar(kl_mean, static_cast<T>(w.kl)),
                          ops::mul_scalar(tc_mean, static_cast<T>(w.temporal)))));
    return out;
}

}  // namespace dvm::losses

namespace dvm::comp {
struct Trimap;
}

namespace dvm::losses {

// Assembles a float batch from per-frame tensors; transition masks come from
// the trimap unknown regions.
LossBatchT<float> make_batch(std::vector<NodeP<float>> preds, const std::vector<Tensor>& gt_alpha,
                             const std::vector<Tensor>& fg, const std::vector<Tensor>& bg,
                             const std::vector<Tensor>& comp,
                             const std::vector<comp::Trimap>& trimaps);

}  // namespace dvm::losses
