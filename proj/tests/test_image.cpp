// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "dvm/core/rng.hpp"
#include "dvm/image/morphology.hpp"
#include "dvm/image/png_io.hpp"
#include "dvm/image/warp.hpp"
#include "support/testutil.hpp"

using namespace dvm;
namespace fs = std::filesystem;

namespace {

std::string tmp_png(const char* tag) {
    return (fs::temp_directory_path() / (std::string("dvm_test_") + tag + ".png")).string();
}

}  // namespace

TEST_CASE("rgb8 png round-trip is exact on the 8-bit grid") {
    Rng rng(1);
    Tensor img = testutil::random_tensor<float>(rng, {3, 9, 13}, 0.0, 1.0);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = img::quant8(img[i]);
    const std::string path = tmp_png("rgb");
    img::write_png_rgb8(path, img);
    Tensor back = img::read_png_rgb(path);
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(back[i] == img[i]);
    fs::remove(path);
}

TEST_CASE("gray8 and gray16 png round-trips") {
    Rng rng(2);
    Tensor g = testutil::random_tensor<float>(rng, {7, 5}, 0.0, 1.0);
    const std::string p8 = tmp_png("g8");
    img::write_png_gray8(p8, g);
    Tensor b8 = img::read_png_gray(p8);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(b8[i] - g[i]) <= 0.5f / 255.0f);

    const std::string p16 = tmp_png("g16");
    img::write_png_gray16(p16, g);
    Tensor b16 = img::read_png_gray(p16);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(b16[i] - g[i]) <= 0.5f / 65535.0f);
    fs::remove(p8);
    fs::remove(p16);
}

TEST_CASE("trimap byte png round-trip") {
    std::vector<std::uint8_t> v = {0, 128, 255, 128, 0, 255};
    const std::string p = tmp_png("tm");
    img::write_png_gray_u8(p, v, 2, 3);
    int h = 0, w = 0;
    auto back = img::read_png_gray_u8(p, &h, &w);
    CHECK(h == 2);
    CHECK(w == 3);
    CHECK(back == v);
    fs::remove(p);
}

TEST_CASE("warp_affine identity and translation") {
    Rng rng(3);
    Tensor img = testutil::random_tensor<float>(rng, {6, 8}, 0.0, 1.0);
    img::AffineMap id;
    Tensor same = img::warp_affine(img, id, 6, 8);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(same[i] == doctest::Approx(img[i]));

    // dst(x,y) = src(x-2, y-1): content moves right/down by (2,1).
    img::AffineMap shift;
    shift.c = -2;
    shift.f = -1;
    Tensor moved = img::warp_affine(img, shift, 6, 8);
    for (int y = 1; y < 6; ++y)
        for (int x = 2; x < 8; ++x)
            CHECK(moved.at(y, x) == doctest::Approx(img.at(y - 1, x - 2)));
    CHECK(moved.at(0, 0) == 0.0f);  // zero padding
}

TEST_CASE("affine inverse and composition") {
    img::AffineMap m;
    m.a = 0.8f;
    m.b = -0.3f;
    m.c = 4.0f;
    m.d = 0.3f;
    m.e = 0.8f;
    m.f = -2.0f;
    const img::AffineMap inv = m.inverse();
    const img::AffineMap both = m.compose(inv);
    float x = 0, y = 0;
    both.apply(3.7f, -1.2f, &x, &y);
    CHECK(x == doctest::Approx(3.7f).epsilon(1e-4));
    CHECK(y == doctest::Approx(-1.2f).epsilon(1e-4));
}

TEST_CASE("resize_bilinear keeps constants and value range") {
    Tensor c = Tensor::full({5, 7}, 0.42f);
    Tensor up = img::resize_bilinear(c, 11, 13);
    for (std::size_t i = 0; i < up.size(); ++i) CHECK(up[i] == doctest::Approx(0.42f));

    Rng rng(5);
    Tensor r = testutil::random_tensor<float>(rng, {8, 8}, 0.0, 1.0);
    Tensor dn = img::resize_bilinear(r, 3, 3);
    for (std::size_t i = 0; i < dn.size(); ++i) {
        CHECK(dn[i] >= 0.0f);
        CHECK(dn[i] <= 1.0f);
    }
}

TEST_CASE("nearest resize preserves the categorical value set") {
    std::vector<std::uint8_t> t = {0, 1, 2, 2, 1, 0, 0, 1, 2};
    auto up = img::resize_nearest_u8(t, 3, 3, 7, 7);
    for (auto v : up) CHECK((v == 0 || v == 1 || v == 2));
}

TEST_CASE("morphology matches a pixel-by-pixel iterated oracle") {
    // Oracle: apply a side-(2k-1) square structuring element `iters` times,
    // growing/shrinking the set one application at a time.
    auto oracle = [](std::vector<std::uint8_t> m, int h, int w, int k, int iters, bool dil) {
        const int r = k - 1;
        for (int it = 0; it < iters; ++it) {
            std::vector<std::uint8_t> next(m.size());
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    std::uint8_t acc = dil ? 0 : 1;
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx) {
                            const int yy = y + dy, xx = x + dx;
                            const std::uint8_t v =
                                (yy >= 0 && yy < h && xx >= 0 && xx < w)
                                    ? m[static_cast<std::size_t>(yy) * w + xx]
                                    : 0;
                            acc = dil ? (acc | v) : (acc & v);
                        }
                    next[static_cast<std::size_t>(y) * w + x] = acc;
                }
            m = std::move(next);
        }
        return m;
    };

    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const int h = 11, w = 13;
        std::vector<std::uint8_t> m(static_cast<std::size_t>(h) * w);
        for (auto& v : m) v = rng.bernoulli(0.3) ? 1 : 0;
        const int k = rng.range_int(1, 3);
        const int iters = rng.range_int(0, 3);
        const int radius = (k - 1) * iters;
        CHECK(img::dilate_square(m, h, w, radius) == oracle(m, h, w, k, iters, true));
        CHECK(img::erode_square(m, h, w, radius) == oracle(m, h, w, k, iters, false));
    }
}

TEST_CASE("gaussian blur preserves constants") {
    Tensor c = Tensor::full({9, 9}, 0.7f);
    Tensor b = img::gaussian_blur(c, 1.5f);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i] == doctest::Approx(0.7f).epsilon(1e-5));
}
