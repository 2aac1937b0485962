// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/image/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace dvm::img {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decodes any PNG to 8- or 16-bit interleaved rows with a fixed channel count.
struct Decoded {
    int w = 0, h = 0, channels = 0, depth = 0;
    std::vector<std::uint8_t> rows;  // row-major, big-endian for 16-bit
};

Decoded decode(const std::string& path, bool want_color) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open PNG: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("PNG decode error: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    png_uint_32 w = 0, h = 0;
    int depth = 0, color = 0;
    png_get_IHDR(png, info, &w, &h, &depth, &color, nullptr, nullptr, nullptr);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (want_color) {
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
        if (depth == 16) png_set_strip_16(png);
    } else {
        if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
            color == PNG_COLOR_TYPE_PALETTE)
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);

    Decoded out;
    out.w = static_cast<int>(w);
    out.h = static_cast<int>(h);
    out.channels = static_cast<int>(png_get_channels(png, info));
    out.depth = static_cast<int>(png_get_bit_depth(png, info));
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out.rows.resize(rowbytes * h);
    std::vector<png_bytep> ptrs(h);
    for (png_uint_32 y = 0; y < h; ++y) ptrs[y] = out.rows.data() + y * rowbytes;
    png_read_image(png, ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void encode(const std::string& path, const std::uint8_t* rows, int h, int w, int channels,
            int depth) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot write PNG: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("PNG encode error: " + path);
    }
    png_init_io(png, f.get());
    const int color = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, w, h, depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t rowbytes = static_cast<std::size_t>(w) * channels * (depth / 8);
    std::vector<png_bytep> ptrs(h);
    for (int y = 0; y < h; ++y)
        ptrs[y] = const_cast<png_bytep>(rows + static_cast<std::size_t>(y) * rowbytes);
    png_write_image(png, ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

Tensor read_png_rgb(const std::string& path) {
    Decoded d = decode(path, true);
    if (d.channels != 3 || d.depth != 8) throw std::runtime_error("unexpected PNG layout: " + path);
    Tensor out({3, d.h, d.w});
    const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
    for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x) {
            const std::uint8_t* px = d.rows.data() + (static_cast<std::size_t>(y) * d.w + x) * 3;
            const std::size_t p = static_cast<std::size_t>(y) * d.w + x;
            out[p] = px[0] / 255.0f;
            out[plane + p] = px[1] / 255.0f;
            out[2 * plane + p] = px[2] / 255.0f;
        }
    return out;
}

Tensor read_png_gray(const std::string& path) {
    Decoded d = decode(path, false);
    if (d.channels != 1) throw std::runtime_error("unexpected PNG layout: " + path);
    Tensor out({d.h, d.w});
    if (d.depth == 8) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = d.rows[i] / 255.0f;
    } else if (d.depth == 16) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const std::uint16_t v =
                static_cast<std::uint16_t>((d.rows[2 * i] << 8) | d.rows[2 * i + 1]);
            out[i] = v / 65535.0f;
        }
    } else {
        throw std::runtime_error("unsupported gray depth: " + path);
    }
    return out;
}

std::vector<std::uint8_t> read_png_gray_u8(const std::string& path, int* h, int* w) {
    Decoded d = decode(path, false);
    if (d.channels != 1 || d.depth != 8)
        throw std::runtime_error("expected 8-bit gray PNG: " + path);
    *h = d.h;
    *w = d.w;
    return std::move(d.rows);
}

void write_png_rgb8(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.dim(0) != 3) throw std::invalid_argument("write_png_rgb8: 3xHxW");
    const int h = img.dim(1), w = img.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<std::uint8_t> rows(plane * 3);
    for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c) {
            float v = img[c * plane + p];
            v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
            rows[p * 3 + c] = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
        }
    encode(path, rows.data(), h, w, 3, 8);
}

void write_png_gray8(const std::string& path, const Tensor& img) {
    if (img.rank() != 2) throw std::invalid_argument("write_png_gray8: HxW");
    std::vector<std::uint8_t> rows(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        float v = img[i];
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        rows[i] = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
    }
    encode(path, rows.data(), img.dim(0), img.dim(1), 1, 8);
}

void write_png_gray16(const std::string& path, const Tensor& img) {
    if (img.rank() != 2) throw std::invalid_argument("write_png_gray16: HxW");
    std::vector<std::uint8_t> rows(img.size() * 2);
    for (std::size_t i = 0; i < img.size(); ++i) {
        float v = img[i];
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        const std::uint16_t q = static_cast<std::uint16_t>(v * 65535.0f + 0.5f);
        rows[2 * i] = static_cast<std::uint8_t>(q >> 8);
        rows[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    encode(path, rows.data(), img.dim(0), img.dim(1), 1, 16);
}

void write_png_gray_u8(const std::string& path, const std::vector<std::uint8_t>& v, int h, int w) {
    if (static_cast<std::size_t>(h) * w != v.size())
        throw std::invalid_argument("write_png_gray_u8: size mismatch");
    encode(path, v.data(), h, w, 1, 8);
}

}  // namespace dvm::img
