// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dvm/core/rng.hpp"
#include "dvm/core/tensor.hpp"
#include "dvm/image/warp.hpp"

namespace dvm::comp {

// --------------------------------------------------------------------------
// Domain types
// --------------------------------------------------------------------------

struct Clip {
    std::vector<Tensor> frames;  // each 3 x H x W in [0,1]
    std::optional<float> fps;

    int length() const { return static_cast<int>(frames.size()); }
    int height() const { return frames.at(0).dim(1); }
    int width() const { return frames.at(0).dim(2); }
};

struct AlphaClip {
    std::vector<Tensor> frames;  // each H x W in [0,1]
    int length() const { return static_cast<int>(frames.size()); }
};

// 3-class map: 0 background, 1 unknown, 2 foreground.
struct Trimap {
    int h = 0, w = 0;
    std::vector<std::uint8_t> m;

    std::uint8_t at(int y, int x) const { return m[static_cast<std::size_t>(y) * w + x]; }
};

struct AffinePose {
    float tx = 0, ty = 0;  // pixels
    float rot = 0;         // radians
    float scale = 1;
};

struct AffineTrack {
    std::vector<AffinePose> poses;
    int length() const { return static_cast<int>(poses.size()); }
};

// Per frame pair: 2 x H x W with channel 0 = dx, channel 1 = dy.
struct MotionField {
    std::vector<Tensor> pairs;
    int length() const { return static_cast<int>(pairs.size()); }
};

struct CompositeSample {
    Clip fg;          // warped foreground color
    Clip bg;
    AlphaClip alpha;  // warped groundtruth alpha
    Clip composite;   // exactly alpha*fg + (1-alpha)*bg in float
    AffineTrack track;
    MotionField motion;

    int length() const { return composite.length(); }
};

struct TrainingCube {
    std::vector<Tensor> composite, fg, bg;  // 3 x size x size each
    std::vector<Tensor> alpha;              // size x size
    std::vector<Trimap> trimap;
    int n = 0;             // target is at index n
    int center_y = 0, center_x = 0;
    int chosen_scale = 0;  // side drawn from the scale set, before clamping
    bool flipped = false;
};

// --------------------------------------------------------------------------
// Configuration
// --------------------------------------------------------------------------

struct TrackConfig {
    float trans_range = 24.0f;       // |tx|,|ty| bound in pixels
    float rot_range = 0.35f;         // |rot| bound in radians
    float scale_min = 0.75f, scale_max = 1.25f;
    float cap_trans = 2.5f;          // max per-frame translation delta (px)
    float cap_rot = 0.04f;           // max per-frame rotation delta (rad)
    float cap_scale = 0.02f;         // max per-frame scale delta
    int key_interval = 4;            // frames between velocity resampling
};

struct ForegroundConfig {
    int canvas = 96;       // square foreground canvas side
    float blur_sigma_frac = 0.10f;   // sigma = frac * canvas
    float band = 0.12f;    // soft edge width in normalized field units
};

struct BackgroundConfig {
    float blur_sigma_frac = 0.06f;
    float drift_x = 0.7f, drift_y = 0.3f;  // px per frame pan
    float frame_noise = 0.0f;              // per-frame iid sensor-style noise
};

// --------------------------------------------------------------------------
// Operations
// --------------------------------------------------------------------------

// I = alpha * fg + (1 - alpha) * bg, clamped to [0,1].
Tensor composite(const Tensor& fg, const Tensor& bg, const Tensor& alpha);

// Smooth random track: piecewise-linear interpolation between random
// keyframes; per-frame deltas bounded by the caps; deterministic in (seed).
AffineTrack generate_track(int length, const TrackConfig& cfg, std::uint64_t seed);

// Pose -> map from foreground canvas coordinates to frame coordinates
// (rotation and scaling about the canvas center, then translation about the
// frame center).
img::AffineMap pose_to_map(const AffinePose& pose, int fg_h, int fg_w, int frame_h, int frame_w);

// Closed-form motion of frame pair t: displacement of each pixel under
// A_{t+1} ∘ A_t^{-1}.
Tensor motion_from_poses(const AffinePose& cur, const AffinePose& next, int fg_h, int fg_w,
                         int frame_h, int frame_w);

// Composites a single foreground (image + alpha) over a background clip along
// a track. Warped fg/alpha are snapped to the 8-bit grid before Eq-style
// compositing so disk round-trips are lossless; the composite itself stays
// exact in float.
CompositeSample synthesize(const Tensor& fg_color, const Tensor& fg_alpha, const Clip& bg,
                           const AffineTrack& track);

// Clip-foreground variant; fg and fg_alpha must have >= track length frames.
CompositeSample synthesize_clip(const Clip& fg, const AlphaClip& fg_alpha, const Clip& bg,
                                const AffineTrack& track);

// Trimap from alpha: foreground where alpha == 1, background where alpha == 0,
// unknown = dilation(fg ∪ transition) minus erosion(fg). The structuring
// element is a square of radius (kernel - 1), applied `iterations` times.
Trimap make_trimap(const Tensor& alpha, int kernel, int iterations);

// Per-pixel unknown mask of a trimap as floats {0,1}.
Tensor unknown_mask(const Trimap& t);

// Random crop cube for training. Returns nullopt when the target frame has an
// empty unknown region (skip-sample signal).
std::optional<TrainingCube> crop_cube(const CompositeSample& sample,
                                      const std::vector<Trimap>& trimaps, int target_t, int n,
                                      int size, const std::vector<int>& scale_set,
                                      std::uint64_t seed);

// Procedural fixtures: soft-edged random blob foreground with analytic alpha,
// and a slowly panning smooth background clip. Both snapped to the 8-bit grid.
void make_procedural_foreground(Rng& rng, const ForegroundConfig& cfg, Tensor* color,
                                Tensor* alpha);
Clip make_procedural_background(Rng& rng, const BackgroundConfig& cfg, int frames, int h, int w);

// Snap every value to the k/255 grid (clamping to [0,1] first).
void snap_to_u8_grid(Tensor* t);

}  // namespace dvm::comp
