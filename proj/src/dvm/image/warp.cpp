// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/image/warp.hpp"

#include <cmath>
#include <stdexcept>

namespace dvm::img {

float sample_bilinear_zero(const float* plane, int h, int w, float sy, float sx) {
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const float fy = sy - y0, fx = sx - x0;
    auto v = [&](int y, int x) -> float {
        return (y >= 0 && y < h && x >= 0 && x < w) ? plane[static_cast<std::size_t>(y) * w + x]
                                                    : 0.0f;
    };
    return (1 - fy) * (1 - fx) * v(y0, x0) + (1 - fy) * fx * v(y0, x0 + 1) +
           fy * (1 - fx) * v(y0 + 1, x0) + fy * fx * v(y0 + 1, x0 + 1);
}

float sample_bilinear_clamp(const float* plane, int h, int w, float sy, float sx) {
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const float fy = sy - y0, fx = sx - x0;
    auto v = [&](int y, int x) -> float {
        y = y < 0 ? 0 : (y >= h ? h - 1 : y);
        x = x < 0 ? 0 : (x >= w ? w - 1 : x);
        return plane[static_cast<std::size_t>(y) * w + x];
    };
    return (1 - fy) * (1 - fx) * v(y0, x0) + (1 - fy) * fx * v(y0, x0 + 1) +
           fy * (1 - fx) * v(y0 + 1, x0) + fy * fx * v(y0 + 1, x0 + 1);
}

AffineMap AffineMap::inverse() const {
    const float det = a * e - b * d;
    if (std::abs(det) < 1e-12f) throw std::invalid_argument("AffineMap: singular");
    AffineMap r;
    r.a = e / det;
    r.b = -b / det;
    r.d = -d / det;
    r.e = a / det;
    r.c = -(r.a * c + r.b * f);
    r.f = -(r.d * c + r.e * f);
    return r;
}

AffineMap AffineMap::compose(const AffineMap& inner) const {
    AffineMap r;
    r.a = a * inner.a + b * inner.d;
    r.b = a * inner.b + b * inner.e;
    r.c = a * inner.c + b * inner.f + c;
    r.d = d * inner.a + e * inner.d;
    r.e = d * inner.b + e * inner.e;
    r.f = d * inner.c + e * inner.f + f;
    return r;
}

void AffineMap::apply(float x, float y, float* ox, float* oy) const {
    *ox = a * x + b * y + c;
    *oy = d * x + e * y + f;
}

namespace {

template <class F>
Tensor map_planes(const Tensor& src, int out_h, int out_w, F&& per_plane) {
    if (src.rank() == 2) {
        Tensor out({out_h, out_w});
        per_plane(src.data(), src.dim(0), src.dim(1), out.data());
        return out;
    }
    if (src.rank() == 3) {
        const int C = src.dim(0), h = src.dim(1), w = src.dim(2);
        Tensor out({C, out_h, out_w});
        const std::size_t splane = static_cast<std::size_t>(h) * w;
        const std::size_t dplane = static_cast<std::size_t>(out_h) * out_w;
        for (int c = 0; c < C; ++c) per_plane(src.data() + c * splane, h, w, out.data() + c * dplane);
        return out;
    }
    throw std::invalid_argument("expected HxW or CxHxW tensor");
}

}  // namespace

Tensor warp_affine(const Tensor& src, const AffineMap& dst_to_src, int out_h, int out_w) {
    return map_planes(src, out_h, out_w, [&](const float* sp, int h, int w, float* dp) {
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                float sx, sy;
                dst_to_src.apply(static_cast<float>(x), static_cast<float>(y), &sx, &sy);
                dp[static_cast<std::size_t>(y) * out_w + x] = sample_bilinear_zero(sp, h, w, sy, sx);
            }
    });
}

Tensor resize_bilinear(const Tensor& src, int out_h, int out_w) {
    const int ih = src.rank() == 2 ? src.dim(0) : src.dim(1);
    const int iw = src.rank() == 2 ? src.dim(1) : src.dim(2);
    // Pixel-center alignment.
    const float sy = static_cast<float>(ih) / out_h;
    const float sx = static_cast<float>(iw) / out_w;
    return map_planes(src, out_h, out_w, [&](const float* sp, int h, int w, float* dp) {
        for (int y = 0; y < out_h; ++y) {
            const float fy = (y + 0.5f) * sy - 0.5f;
            for (int x = 0; x < out_w; ++x) {
                const float fx = (x + 0.5f) * sx - 0.5f;
                dp[static_cast<std::size_t>(y) * out_w + x] = sample_bilinear_clamp(sp, h, w, fy, fx);
            }
        }
    });
}

std::vector<std::uint8_t> resize_nearest_u8(const std::vector<std::uint8_t>& src, int h, int w,
                                            int out_h, int out_w) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(out_h) * out_w);
    for (int y = 0; y < out_h; ++y) {
        int sy = static_cast<int>((y + 0.5f) * h / out_h);
        sy = sy < 0 ? 0 : (sy >= h ? h - 1 : sy);
        for (int x = 0; x < out_w; ++x) {
            int sx = static_cast<int>((x + 0.5f) * w / out_w);
            sx = sx < 0 ? 0 : (sx >= w ? w - 1 : sx);
            out[static_cast<std::size_t>(y) * out_w + x] = src[static_cast<std::size_t>(sy) * w + sx];
        }
    }
    return out;
}

Tensor hflip(const Tensor& src) {
    const int out_h = src.rank() == 2 ? src.dim(0) : src.dim(1);
    const int out_w = src.rank() == 2 ? src.dim(1) : src.dim(2);
    return map_planes(src, out_h, out_w, [&](const float* sp, int h, int w, float* dp) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                dp[static_cast<std::size_t>(y) * w + x] =
                    sp[static_cast<std::size_t>(y) * w + (w - 1 - x)];
    });
}

std::vector<std::uint8_t> hflip_u8(const std::vector<std::uint8_t>& src, int h, int w) {
    std::vector<std::uint8_t> out(src.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<std::size_t>(y) * w + x] = src[static_cast<std::size_t>(y) * w + (w - 1 - x)];
    return out;
}

Tensor gaussian_blur(const Tensor& src, float sigma) {
    if (src.rank() != 2) throw std::invalid_argument("gaussian_blur: HxW only");
    const int h = src.dim(0), w = src.dim(1);
    const int radius = static_cast<int>(std::ceil(3.0f * sigma));
    std::vector<float> k(2 * radius + 1);
    float norm = 0.0f;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5f * i * i / (sigma * sigma));
        norm += k[i + radius];
    }
    for (auto& v : k) v /= norm;

    Tensor tmp({h, w}), out({h, w});
    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * src.at(y, clampi(x + i, w - 1));
            tmp.at(y, x) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(clampi(y + i, h - 1), x);
            out.at(y, x) = acc;
        }
    return out;
}

}  // namespace dvm::img
