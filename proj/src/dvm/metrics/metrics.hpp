// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dvm/compositor/compositor.hpp"

namespace dvm::metrics {

// Reporting conventions (fixed here, documented in the README):
//   sad      per frame sum |d| / 1000, averaged over frames
//   mse      per frame mean of d^2 over the mask, averaged over frames
//   grad     per frame sum of squared Gaussian-derivative differences / 1000
//   conn     per frame connectivity degradation sum / 1000
//   dtssd    per pair sqrt(sum((dA - dGT)^2)/|mask|) * 100, averaged over pairs
//   messddt  mean over advected (pixel, pair) terms * 1000
struct MetricReport {
    double sad = 0, mse = 0, grad = 0, conn = 0, dtssd = 0, messddt = 0;
    int frames = 0;
    int pairs = 0;
    long masked_px = 0;
    bool has_messddt = false;
};

using Frames = std::vector<Tensor>;  // H x W alpha maps
using Masks = std::vector<Tensor>;   // H x W {0,1} masks

double sad(const Frames& pred, const Frames& gt, const Masks& mask);
double mse(const Frames& pred, const Frames& gt, const Masks& mask);
double grad_err(const Frames& pred, const Frames& gt, const Masks& mask, float sigma = 1.4f);
double conn_err(const Frames& pred, const Frames& gt, const Masks& mask);
double dtssd(const Frames& pred, const Frames& gt, const Masks& mask);
double messddt(const Frames& pred, const Frames& gt, const comp::MotionField& motion,
               const Masks& mask);

std::vector<double> per_frame_sad(const Frames& pred, const Frames& gt, const Masks& mask);

// Masks from the groundtruth trimaps (unknown region) or full-frame ones.
Masks masks_from_trimaps(const std::vector<comp::Trimap>& trimaps);
Masks full_masks(int frames, int h, int w);

// Computes all metrics; motion may be null (MESSDdt omitted).
MetricReport evaluate_clip(const Frames& pred, const Frames& gt, const Masks& mask,
                           const comp::MotionField* motion);

MetricReport aggregate(const std::vector<MetricReport>& reports);

nlohmann::json report_to_json(const MetricReport& r);

}  // namespace dvm::metrics
