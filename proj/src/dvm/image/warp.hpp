// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "dvm/core/tensor.hpp"

namespace dvm::img {

// Bilinear sample of one H x W plane with zero padding outside.
float sample_bilinear_zero(const float* plane, int h, int w, float sy, float sx);

// Bilinear sample with edge clamping (used by resize).
float sample_bilinear_clamp(const float* plane, int h, int w, float sy, float sx);

// 2x3 affine map applied to pixel coordinates: (x,y) -> (a*x+b*y+c, d*x+e*y+f).
struct AffineMap {
    float a = 1, b = 0, c = 0;
    float d = 0, e = 1, f = 0;

    AffineMap inverse() const;
    AffineMap compose(const AffineMap& inner) const;  // this ∘ inner
    void apply(float x, float y, float* ox, float* oy) const;
};

// Warps src so that dst(p) = src(inv(p)); works on H x W or C x H x W tensors.
Tensor warp_affine(const Tensor& src, const AffineMap& dst_to_src, int out_h, int out_w);

// Bilinear resize with edge clamp; H x W or C x H x W.
Tensor resize_bilinear(const Tensor& src, int out_h, int out_w);

// Nearest-neighbor resize for categorical maps.
std::vector<std::uint8_t> resize_nearest_u8(const std::vector<std::uint8_t>& src, int h, int w,
                                            int out_h, int out_w);

Tensor hflip(const Tensor& src);  // H x W or C x H x W
std::vector<std::uint8_t> hflip_u8(const std::vector<std::uint8_t>& src, int h, int w);

// Separable Gaussian blur with radius ceil(3*sigma), replicate boundary.
Tensor gaussian_blur(const Tensor& src, float sigma);  // H x W only

}  // namespace dvm::img
