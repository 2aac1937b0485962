// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dvm/compositor/compositor.hpp"

namespace dvm::comp {

std::string frame_name(int index);  // frame_%05d.png
std::string pair_name(int index);   // pair_%05d.bin

// Trimap PNG byte codes.
constexpr std::uint8_t kTrimapBg = 0;
constexpr std::uint8_t kTrimapUnknown = 128;
constexpr std::uint8_t kTrimapFg = 255;

void write_trimap_png(const std::string& path, const Trimap& t);
Trimap read_trimap_png(const std::string& path);

// Motion file: little-endian header (int32 H, int32 W) followed by H*W
// (dx, dy) float32 pairs in row-major pixel order.
void write_motion(const std::string& path, const Tensor& motion);  // 2 x H x W
Tensor read_motion(const std::string& path);

struct SampleOnDisk {
    Clip composite, fg, bg;
    AlphaClip alpha;
    std::vector<Trimap> trimaps;
    MotionField motion;
    AffineTrack track;
    std::uint64_t seed = 0;
    std::string dir;
};

// Writes PNG sequences, motion files, and manifest.json under `dir`.
void write_sample(const std::string& dir, const CompositeSample& sample,
                  const std::vector<Trimap>& trimaps, std::uint64_t seed, int trimap_kernel,
                  int trimap_iterations);

SampleOnDisk load_sample(const std::string& dir);

void write_dataset_manifest(const std::string& dir, const std::vector<std::string>& sample_dirs,
                            const nlohmann::json& config);

// Returns absolute-ish sample paths (dataset dir joined with entries). Also
// accepts a single sample dir (one containing manifest.json).
std::vector<std::string> list_dataset_samples(const std::string& dir);

}  // namespace dvm::comp
