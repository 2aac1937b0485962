// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dvm/losses/losses.hpp"

namespace dvm::train {

ClipData clip_from_sample(const comp::CompositeSample& s, std::vector<comp::Trimap> trimaps) {
    ClipData c;
    c.composite = s.composite;
    c.fg = s.fg;
    c.bg = s.bg;
    c.alpha = s.alpha;
    c.motion = s.motion;
    c.trimaps = std::move(trimaps);
    return c;
}

ClipData clip_from_disk(comp::SampleOnDisk s) {
    ClipData c;
    c.composite = std::move(s.composite);
    c.fg = std::move(s.fg);
    c.bg = std::move(s.bg);
    c.alpha = std::move(s.alpha);
    c.motion = std::move(s.motion);
    c.trimaps = std::move(s.trimaps);
    return c;
}

void write_log_header(std::ostream& os) { os << "step,lr,total,alpha,comp,grad,kl,tc\n"; }

void write_log_row(std::ostream& os, const StepLog& r) {
    os << r.step << "," << r.lr << "," << r.total << "," << r.alpha << "," << r.comp << ","
       << r.grad << "," << r.kl << "," << r.temporal << "\n";
}

namespace {

std::uint64_t stream_id(int epoch, int step, int item) {
    return (static_cast<std::uint64_t>(epoch) << 40) ^ (static_cast<std::uint64_t>(step) << 16) ^
           static_cast<std::uint64_t>(item);
}

void check_finite(double loss, long step) {
    if (!std::isfinite(loss))
        throw std::runtime_error("training diverged: loss is not finite at step " +
                                 std::to_string(step));
}

}  // namespace

TrainResult train_matting(nn::MattingNet& net, Adam& opt, const Dataset& data,
                          const TrainConfig& cfg, std::ostream* log, int start_epoch) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train_matting: empty dataset");
    const int stride = net.config().encoder.total_stride();
    if (cfg.crop_size % stride != 0)
        throw std::invalid_argument("train_matting: crop size must be divisible by the encoder stride");
    const int n = net.config().n;
    const int half = n + 1;  // cube spans two adjacent targets

    Rng master(cfg.seed);
    TrainResult result;
    result.steps = static_cast<long>(start_epoch) * cfg.steps_per_epoch;
    if (log != nullptr && start_epoch == 0) write_log_header(*log);

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            double batch_loss = 0;
            StepLog row;
            for (int item = 0; item < cfg.batch_size; ++item) {
                Rng rng = master.child(stream_id(epoch, step, item));
                // Bounded retries over clips/targets with empty unknown regions.
                std::optional<comp::TrainingCube> cube;
                for (int attempt = 0; attempt < 16 && !cube.has_value(); ++attempt) {
                    const ClipData& clip = data[rng.below(data.size())];
                    const int T = clip.length();
                    if (T < 2 * half + 1)
                        throw std::invalid_argument("train_matting: clip shorter than window");
                    const int t = static_cast<int>(
                        rng.below(static_cast<std::uint64_t>(T - 1)));  // t in [0, T-2]
                    const int kernel = rng.range_int(cfg.trimap_kernel_min, cfg.trimap_kernel_max);
                    const int iters = rng.range_int(cfg.trimap_iter_min, cfg.trimap_iter_max);
                    std::vector<comp::Trimap> trimaps;
                    trimaps.reserve(static_cast<std::size_t>(T));
                    for (int f = 0; f < T; ++f)
                        trimaps.push_back(comp::make_trimap(clip.alpha.frames[f], kernel, iters));
                    comp::CompositeSample view;
                    view.composite = clip.composite;
                    view.fg = clip.fg;
                    view.bg = clip.bg;
                    view.alpha = clip.alpha;
                    cube = comp::crop_cube(view, trimaps, t, half, cfg.crop_size, cfg.crop_scales,
                                           rng.u64());
                }
                if (!cube.has_value())
                    throw std::runtime_error("train_matting: no crops with unknown pixels found");

                // Encode each cube frame once; decode the two target windows.
                std::vector<std::vector<nn::Node>> pyramids;
                for (std::size_t f = 0; f < cube->composite.size(); ++f)
                    pyramids.push_back(net.encode(cube->composite[f], cube->trimap[f]));
                auto window_at = [&](int target_index) {
                    std::vector<std::vector<nn::Node>> w;
                    for (int d = -n; d <= n; ++d)
                        w.push_back(pyramids[static_cast<std::size_t>(target_index + d)]);
                    return w;
                };
                nn::Node a0 = net.decode(window_at(half));
                nn::Node a1 = net.decode(window_at(half + 1));
                const int ch = a0->val.dim(1), cw = a0->val.dim(2);

                losses::LossBatchT<float> batch;
                batch.pred = {ops::reshape(a0, {ch, cw}), ops::reshape(a1, {ch, cw})};
                batch.gt = {cube->alpha[static_cast<std::size_t>(half)],
                            cube->alpha[static_cast<std::size_t>(half) + 1]};
                batch.fg = {cube->fg[static_cast<std::size_t>(half)],
                            cube->fg[static_cast<std::size_t>(half) + 1]};
                batch.bg = {cube->bg[static_cast<std::size_t>(half)],
                            cube->bg[static_cast<std::size_t>(half) + 1]};
                batch.comp = {cube->composite[static_cast<std::size_t>(half)],
                              cube->composite[static_cast<std::size_t>(half) + 1]};
                batch.trans = {comp::unknown_mask(cube->trimap[static_cast<std::size_t>(half)]),
                               comp::unknown_mask(cube->trimap[static_cast<std::size_t>(half) + 1])};

                losses::LossTerms<float> terms = losses::total_loss(batch, cfg.loss_weights);
                const double item_loss = static_cast<double>(terms.total->val[0]);
                check_finite(item_loss, result.steps);
                batch_loss += item_loss / cfg.batch_size;
                row.alpha += terms.alpha / cfg.batch_size;
                row.comp += terms.comp / cfg.batch_size;
                row.grad += terms.grad / cfg.batch_size;
                row.kl += terms.kl / cfg.batch_size;
                row.temporal += terms.temporal / cfg.batch_size;
                backward(ops::mul_scalar(terms.total, 1.0f / static_cast<float>(cfg.batch_size)));
            }
            opt.step(lr);
            ++result.steps;
            if (result.steps == 1 + static_cast<long>(start_epoch) * cfg.steps_per_epoch)
                result.first_loss = batch_loss;
            result.final_loss = batch_loss;
            if (log != nullptr) {
                row.step = result.steps;
                row.lr = lr;
                row.total = batch_loss;
                write_log_row(*log, row);
            }
        }
        result.last_epoch = epoch;
    }
    return result;
}

TrainResult train_trimap(nn::TrimapPropNet& net, Adam& opt, const Dataset& data,
                         const TrainConfig& cfg, std::ostream* log, int start_epoch) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train_trimap: empty dataset");
    const int stride = net.config().encoder.total_stride();
    if (cfg.crop_size % stride != 0)
        throw std::invalid_argument("train_trimap: crop size must be divisible by the encoder stride");

    Rng master(cfg.seed);
    TrainResult result;
    result.steps = static_cast<long>(start_epoch) * cfg.steps_per_epoch;
    if (log != nullptr && start_epoch == 0) write_log_header(*log);

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            double batch_loss = 0;
            for (int item = 0; item < cfg.batch_size; ++item) {
                Rng rng = master.child(stream_id(epoch, step, item) ^ 0x9e37u);
                const ClipData& clip = data[rng.below(data.size())];
                const int T = clip.length();
                if (T < 2) throw std::invalid_argument("train_trimap: clips need >= 2 frames");
                // Two frames drawn uniformly without replacement.
                const int ref = static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
                int tgt = static_cast<int>(rng.below(static_cast<std::uint64_t>(T - 1)));
                if (tgt >= ref) ++tgt;

                const int H = clip.composite.height(), W = clip.composite.width();
                const int side = std::min({cfg.crop_size, H, W});
                const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(H - side + 1)));
                const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(W - side + 1)));
                const bool flip = rng.bernoulli(0.5);
                const float gain = static_cast<float>(rng.uniform(0.9, 1.1));
                const float bias = static_cast<float>(rng.uniform(-0.05, 0.05));
                const int kernel = rng.range_int(cfg.trimap_kernel_min, cfg.trimap_kernel_max);
                const int iters = rng.range_int(cfg.trimap_iter_min, cfg.trimap_iter_max);

                auto crop_img = [&](const Tensor& t) {
                    Tensor out({3, side, side});
                    for (int c = 0; c < 3; ++c)
                        for (int y = 0; y < side; ++y)
                            for (int x = 0; x < side; ++x) {
                                float v = gain * t.at(c, top + y, left + x) + bias;
                                out.at(c, y, x) = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
                            }
                    return flip ? img::hflip(out) : out;
                };
                auto crop_alpha = [&](const Tensor& t) {
                    Tensor out({side, side});
                    for (int y = 0; y < side; ++y)
                        for (int x = 0; x < side; ++x) out.at(y, x) = t.at(top + y, left + x);
                    return flip ? img::hflip(out) : out;
                };

                const Tensor ref_img = crop_img(clip.composite.frames[ref]);
                const Tensor tgt_img = crop_img(clip.composite.frames[tgt]);
                const comp::Trimap ref_tm =
                    comp::make_trimap(crop_alpha(clip.alpha.frames[ref]), kernel, iters);
                const comp::Trimap tgt_tm =
                    comp::make_trimap(crop_alpha(clip.alpha.frames[tgt]), kernel, iters);

                nn::Node logits = net.propagate_logits(ref_img, ref_tm, tgt_img);
                Tensor labels({side, side});
                for (std::size_t i = 0; i < labels.size(); ++i)
                    labels[i] = static_cast<float>(tgt_tm.m[i]);
                nn::Node loss = ops::softmax_ce(logits, labels);
                const double item_loss = static_cast<double>(loss->val[0]);
                check_finite(item_loss, result.steps);
                batch_loss += item_loss / cfg.batch_size;
                backward(ops::mul_scalar(loss, 1.0f / static_cast<float>(cfg.batch_size)));
            }
            opt.step(lr);
            ++result.steps;
            if (result.steps == 1 + static_cast<long>(start_epoch) * cfg.steps_per_epoch)
                result.first_loss = batch_loss;
            result.final_loss = batch_loss;
            if (log != nullptr) {
                StepLog row;
                row.step = result.steps;
                row.lr = lr;
                row.total = batch_loss;
                write_log_row(*log, row);
            }
        }
        result.last_epoch = epoch;
    }
    return result;
}

metrics::MetricReport evaluate_matting(const nn::MattingNet& net, const Dataset& data) {
    std::vector<metrics::MetricReport> reports;
    for (const auto& clip : data) {
        comp::AlphaClip pred = net.predict_clip(clip.composite, clip.trimaps);
        metrics::Masks masks = metrics::masks_from_trimaps(clip.trimaps);
        const comp::MotionField* motion = clip.motion.pairs.empty() ? nullptr : &clip.motion;
        reports.push_back(
            metrics::evaluate_clip(pred.frames, clip.alpha.frames, masks, motion));
    }
    return metrics::aggregate(reports);
}

metrics::MetricReport evaluate_matting_propagated(const nn::MattingNet& net,
                                                  const nn::TrimapPropNet& prop,
                                                  const Dataset& data,
                                                  const std::vector<int>& labeled_frames) {
    std::vector<metrics::MetricReport> reports;
    for (const auto& clip : data) {
        const int T = clip.length();
        std::vector<int> labeled;
        for (int t : labeled_frames)
            if (t >= 0 && t < T) labeled.push_back(t);
        if (labeled.empty()) throw std::invalid_argument("no labeled frames within the clip");

        std::vector<comp::Trimap> trimaps;
        for (int t = 0; t < T; ++t) {
            if (std::find(labeled.begin(), labeled.end(), t) != labeled.end()) {
                trimaps.push_back(clip.trimaps[static_cast<std::size_t>(t)]);
            } else {
                const int r = nn::pick_reference(t, labeled);
                trimaps.push_back(prop.propagate(clip.composite.frames[r],
                                                 clip.trimaps[static_cast<std::size_t>(r)],
                                                 clip.composite.frames[t]));
            }
        }
        comp::AlphaClip pred = net.predict_clip(clip.composite, trimaps);
        metrics::Masks masks = metrics::masks_from_trimaps(clip.trimaps);
        const comp::MotionField* motion = clip.motion.pairs.empty() ? nullptr : &clip.motion;
        reports.push_back(metrics::evaluate_clip(pred.frames, clip.alpha.frames, masks, motion));
    }
    return metrics::aggregate(reports);
}

double self_propagation_accuracy(const nn::TrimapPropNet& net, const Dataset& data) {
    double acc = 0;
    long frames = 0;
    for (const auto& clip : data)
        for (int t = 0; t < clip.length(); ++t) {
            const comp::Trimap& tm = clip.trimaps[static_cast<std::size_t>(t)];
            comp::Trimap out =
                net.propagate(clip.composite.frames[t], tm, clip.composite.frames[t]);
            long agree = 0;
            for (std::size_t i = 0; i < tm.m.size(); ++i) agree += out.m[i] == tm.m[i] ? 1 : 0;
            acc += static_cast<double>(agree) / static_cast<double>(tm.m.size());
            ++frames;
        }
    return frames == 0 ? 0.0 : acc / static_cast<double>(frames);
}

}  // namespace dvm::train
