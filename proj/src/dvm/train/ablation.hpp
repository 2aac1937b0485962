// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dvm/train/trainer.hpp"

namespace dvm::train {

// Network construction from a training config.
nn::MattingConfig matting_config_from(const TrainConfig& cfg);
nn::TrimapPropConfig trimap_config_from(const TrainConfig& cfg);

struct AblationRow {
    std::string variant;
    metrics::MetricReport report;
};

struct AblationResult {
    std::string study;
    std::vector<AblationRow> rows;
};

// study ∈ {"tfa_tff", "n_sweep", "fusion", "trimap_setting"}. An empty variant
// list selects the study's default variants; unknown names are config errors.
//   tfa_tff:        basic | +TFA | +TFA+TFF
//   n_sweep:        n=1 ... n=4
//   fusion:         naive | cross-attention | stfam
//   trimap_setting: full-trimap | <N>-frame | 1-trimap
struct AblationSpec {
    std::string study;
    std::vector<std::string> variants;
    TrainConfig matting_cfg;
    TrainConfig trimap_cfg;  // used by the trimap_setting study
    std::uint64_t model_seed = 1;
};

AblationResult run_ablation(const AblationSpec& spec, const Dataset& train_data,
                            const Dataset& eval_data);

}  // namespace dvm::train
