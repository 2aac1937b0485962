// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <vector>

#include "dvm/compositor/dataset_io.hpp"
#include "dvm/metrics/metrics.hpp"
#include "dvm/nn/matting_net.hpp"
#include "dvm/nn/trimap_net.hpp"
#include "dvm/train/adam.hpp"
#include "dvm/train/config.hpp"

namespace dvm::train {

// Training-facing view of one clip.
struct ClipData {
    comp::Clip composite, fg, bg;
    comp::AlphaClip alpha;
    comp::MotionField motion;
    std::vector<comp::Trimap> trimaps;  // dataset trimaps (evaluation mask source)

    int length() const { return composite.length(); }
};

using Dataset = std::vector<ClipData>;

ClipData clip_from_sample(const comp::CompositeSample& s, std::vector<comp::Trimap> trimaps);
ClipData clip_from_disk(comp::SampleOnDisk s);

struct StepLog {
    long step = 0;
    double lr = 0;
    double total = 0, alpha = 0, comp = 0, grad = 0, kl = 0, temporal = 0;
};

struct TrainResult {
    double first_loss = 0, final_loss = 0;
    long steps = 0;
    int last_epoch = 0;
};

// CSV training log header + rows: step,lr,total,alpha,comp,grad,kl,tc.
void write_log_header(std::ostream& os);
void write_log_row(std::ostream& os, const StepLog& row);

// Runs the matting training loop. Deterministic given (cfg.seed, dataset).
// Throws on divergence (NaN loss). `log` may be null. `start_epoch` supports
// checkpoint resumption.
TrainResult train_matting(nn::MattingNet& net, Adam& opt, const Dataset& data,
                          const TrainConfig& cfg, std::ostream* log = nullptr,
                          int start_epoch = 0);

TrainResult train_trimap(nn::TrimapPropNet& net, Adam& opt, const Dataset& data,
                         const TrainConfig& cfg, std::ostream* log = nullptr, int start_epoch = 0);

// Predicts alphas for every clip with the given trimap inputs and evaluates
// against groundtruth (mask = unknown region of the dataset trimaps).
metrics::MetricReport evaluate_matting(const nn::MattingNet& net, const Dataset& data);

// Same, but trimaps come from propagation: frames in `labeled(t)` keep their
// dataset trimap, the rest are propagated from the nearest labeled frame.
metrics::MetricReport evaluate_matting_propagated(const nn::MattingNet& net,
                                                  const nn::TrimapPropNet& prop,
                                                  const Dataset& data,
                                                  const std::vector<int>& labeled_frames);

// Mean self-propagation pixel accuracy (target == reference) over clips.
double self_propagation_accuracy(const nn::TrimapPropNet& net, const Dataset& data);

}  // namespace dvm::train
