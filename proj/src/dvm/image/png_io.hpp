// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvm/core/tensor.hpp"

namespace dvm::img {

// 8-bit RGB PNG -> 3 x H x W in [0,1] (values on the k/255 grid).
Tensor read_png_rgb(const std::string& path);

// Grayscale PNG (8- or 16-bit) -> H x W in [0,1].
Tensor read_png_gray(const std::string& path);

// Grayscale 8-bit PNG -> raw byte matrix (used for trimap codes).
std::vector<std::uint8_t> read_png_gray_u8(const std::string& path, int* h, int* w);

void write_png_rgb8(const std::string& path, const Tensor& img);    // 3 x H x W
void write_png_gray8(const std::string& path, const Tensor& img);   // H x W
void write_png_gray16(const std::string& path, const Tensor& img);  // H x W
void write_png_gray_u8(const std::string& path, const std::vector<std::uint8_t>& v, int h, int w);

inline float quant8(float v) {
    float q = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    return static_cast<float>(static_cast<int>(q * 255.0f + 0.5f)) / 255.0f;
}

}  // namespace dvm::img
