// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "dvm/nn/module.hpp"
#include "dvm/train/adam.hpp"

namespace dvm::train {

// Single binary archive: magic, JSON header (array names/shapes/dtype,
// epoch/step counters, config snapshot, rng state), then raw float32 payload.
// Round-trips are bitwise.

struct CheckpointMeta {
    int epoch = 0;
    long step = 0;
    std::string config_text;
    std::array<std::uint64_t, 4> rng_state{};
    std::string net;  // "matting" | "trimap"
};

void save_checkpoint(const std::string& path, const nn::ParamMap& params, const Adam* opt,
                     const CheckpointMeta& meta);

// Loads into an existing parameter registry; array names and shapes must
// match. `opt` may be null to skip optimizer state.
CheckpointMeta load_checkpoint(const std::string& path, const nn::ParamMap& params, Adam* opt);

// Reads just the metadata (to pick the right network before construction).
CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace dvm::train
