// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/image/morphology.hpp"

namespace dvm::img {

namespace {

// Two-pass (rows, then columns) window reduce; OR for dilation, AND for
// erosion. Pixels outside the frame count as 0.
std::vector<std::uint8_t> window_pass(const std::vector<std::uint8_t>& mask, int h, int w,
                                      int radius, bool dilate) {
    std::vector<std::uint8_t> tmp(mask.size()), out(mask.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t acc = dilate ? 0 : 1;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = x + i;
                const std::uint8_t v =
                    (xx >= 0 && xx < w) ? mask[static_cast<std::size_t>(y) * w + xx] : 0;
                acc = dilate ? (acc | v) : (acc & v);
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t acc = dilate ? 0 : 1;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = y + i;
                const std::uint8_t v =
                    (yy >= 0 && yy < h) ? tmp[static_cast<std::size_t>(yy) * w + x] : 0;
                acc = dilate ? (acc | v) : (acc & v);
            }
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    return out;
}

}  // namespace

std::vector<std::uint8_t> dilate_square(const std::vector<std::uint8_t>& mask, int h, int w,
                                        int radius) {
    if (radius <= 0) return mask;
    return window_pass(mask, h, w, radius, true);
}

std::vector<std::uint8_t> erode_square(const std::vector<std::uint8_t>& mask, int h, int w,
                                       int radius) {
    if (radius <= 0) return mask;
    return window_pass(mask, h, w, radius, false);
}

}  // namespace dvm::img
