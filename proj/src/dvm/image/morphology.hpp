// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace dvm::img {

// Binary morphology with a square structuring element of the given radius
// (side 2*radius+1). Masks are 0/1 byte matrices.
std::vector<std::uint8_t> dilate_square(const std::vector<std::uint8_t>& mask, int h, int w,
                                        int radius);
std::vector<std::uint8_t> erode_square(const std::vector<std::uint8_t>& mask, int h, int w,
                                       int radius);

}  // namespace dvm::img
