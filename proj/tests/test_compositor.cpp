// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dvm/compositor/compositor.hpp"
#include "dvm/compositor/dataset_io.hpp"
#include "support/testutil.hpp"

using namespace dvm;
namespace fs = std::filesystem;

namespace {

comp::CompositeSample make_sample(std::uint64_t seed, int frames = 5, int size = 48) {
    Rng rng(seed);
    comp::ForegroundConfig fc;
    fc.canvas = size / 2 + 8;
    Tensor color, alpha;
    comp::make_procedural_foreground(rng, fc, &color, &alpha);
    comp::BackgroundConfig bc;
    comp::Clip bg = comp::make_procedural_background(rng, bc, frames, size, size);
    comp::TrackConfig tc;
    tc.trans_range = size * 0.15f;
    tc.cap_trans = size * 0.02f;
    return comp::synthesize(color, alpha, bg, comp::generate_track(frames, tc, rng.u64()));
}

}  // namespace

TEST_CASE("composite: alpha extremes and direct substitution") {
    Tensor fg = Tensor::full({3, 4, 4}, 0.8f);
    Tensor bg = Tensor::full({3, 4, 4}, 0.4f);

    Tensor a1 = Tensor::full({4, 4}, 1.0f);
    Tensor out = comp::composite(fg, bg, a1);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.8f);

    Tensor a0({4, 4});
    out = comp::composite(fg, bg, a0);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.4f);

    Tensor ah = Tensor::full({4, 4}, 0.5f);
    out = comp::composite(fg, bg, ah);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.6f));

    Tensor bad({3, 3});
    CHECK_THROWS_AS(comp::composite(fg, bg, bad), std::invalid_argument);
}

TEST_CASE("generate_track: determinism, degenerate cases, caps") {
    comp::TrackConfig cfg;
    CHECK_THROWS_AS(comp::generate_track(0, cfg, 1), std::invalid_argument);

    comp::AffineTrack one = comp::generate_track(1, cfg, 5);
    CHECK(one.length() == 1);

    comp::AffineTrack a = comp::generate_track(20, cfg, 99);
    comp::AffineTrack b = comp::generate_track(20, cfg, 99);
    REQUIRE(a.length() == 20);
    for (int t = 0; t < 20; ++t) {
        CHECK(a.poses[t].tx == b.poses[t].tx);
        CHECK(a.poses[t].rot == b.poses[t].rot);
        CHECK(a.poses[t].scale >= cfg.scale_min);
        CHECK(a.poses[t].scale <= cfg.scale_max);
    }
    for (int t = 1; t < 20; ++t) {
        CHECK(std::abs(a.poses[t].tx - a.poses[t - 1].tx) <= cfg.cap_trans + 1e-5f);
        CHECK(std::abs(a.poses[t].ty - a.poses[t - 1].ty) <= cfg.cap_trans + 1e-5f);
        CHECK(std::abs(a.poses[t].rot - a.poses[t - 1].rot) <= cfg.cap_rot + 1e-6f);
        CHECK(std::abs(a.poses[t].scale - a.poses[t - 1].scale) <= cfg.cap_scale + 1e-6f);
    }

    comp::TrackConfig still = cfg;
    still.cap_trans = 0;
    still.cap_rot = 0;
    still.cap_scale = 0;
    comp::AffineTrack s = comp::generate_track(10, still, 3);
    for (int t = 1; t < 10; ++t) {
        CHECK(s.poses[t].tx == s.poses[0].tx);
        CHECK(s.poses[t].rot == s.poses[0].rot);
        CHECK(s.poses[t].scale == s.poses[0].scale);
    }
}

TEST_CASE("synthesize: zero alpha leaves the background untouched") {
    Rng rng(21);
    comp::BackgroundConfig bc;
    comp::Clip bg = comp::make_procedural_background(rng, bc, 4, 32, 32);
    Tensor color = Tensor::full({3, 16, 16}, 0.9f);
    Tensor alpha({16, 16});  // all zero
    comp::TrackConfig tc;
    comp::AffineTrack track = comp::generate_track(4, tc, 7);
    comp::CompositeSample s = comp::synthesize(color, alpha, bg, track);
    for (int t = 0; t < 4; ++t)
        for (std::size_t i = 0; i < bg.frames[t].size(); ++i)
            CHECK(s.composite.frames[t][i] == bg.frames[t][i]);
}

TEST_CASE("motion field: pure translation is constant") {
    comp::AffinePose p0, p1;
    p0.tx = 3.0f;
    p0.ty = -1.0f;
    p1.tx = 5.5f;
    p1.ty = 0.5f;
    Tensor m = comp::motion_from_poses(p0, p1, 20, 20, 24, 24);
    const std::size_t plane = 24 * 24;
    for (std::size_t p = 0; p < plane; ++p) {
        CHECK(m[p] == doctest::Approx(2.5f).epsilon(1e-4));
        CHECK(m[plane + p] == doctest::Approx(1.5f).epsilon(1e-4));
    }
}

TEST_CASE("motion field: rotation about center matches the closed form") {
    comp::AffinePose p0, p1;
    p0.rot = 0.2f;
    p1.rot = 0.35f;
    const int H = 17, W = 17;
    Tensor m = comp::motion_from_poses(p0, p1, 17, 17, H, W);
    const float cx = (W - 1) * 0.5f, cy = (H - 1) * 0.5f;
    const float d = p1.rot - p0.rot;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const float rx = x - cx, ry = y - cy;
            const float ex = std::cos(d) * rx - std::sin(d) * ry - rx;
            const float ey = std::sin(d) * rx + std::cos(d) * ry - ry;
            const std::size_t p = static_cast<std::size_t>(y) * W + x;
            CHECK(m[p] == doctest::Approx(ex).epsilon(1e-3));
            CHECK(m[plane + p] == doctest::Approx(ey).epsilon(1e-3));
        }
}

TEST_CASE("motion field: general poses match an independent affine oracle") {
    // Test-local affine algebra, built from scratch: forward map of a pose and
    // numeric inversion via the adjugate.
    struct M {
        double a, b, c, d, e, f;
    };
    auto pose_map = [](const comp::AffinePose& p, double cfx, double cfy, double cx, double cy) {
        const double ca = std::cos(p.rot) * p.scale, sa = std::sin(p.rot) * p.scale;
        M m{ca, -sa, 0, sa, ca, 0};
        m.c = -(m.a * cfx + m.b * cfy) + cx + p.tx;
        m.f = -(m.d * cfx + m.e * cfy) + cy + p.ty;
        return m;
    };
    auto invert = [](const M& m) {
        const double det = m.a * m.e - m.b * m.d;
        M r{m.e / det, -m.b / det, 0, -m.d / det, m.a / det, 0};
        r.c = -(r.a * m.c + r.b * m.f);
        r.f = -(r.d * m.c + r.e * m.f);
        return r;
    };
    comp::AffinePose p0, p1;
    p0.tx = 2.5f;
    p0.ty = -1.0f;
    p0.rot = 0.12f;
    p0.scale = 1.1f;
    p1.tx = 3.0f;
    p1.ty = -0.4f;
    p1.rot = 0.18f;
    p1.scale = 1.05f;
    const int fgS = 15, H = 21, W = 19;
    Tensor m = comp::motion_from_poses(p0, p1, fgS, fgS, H, W);
    const double cfx = (fgS - 1) * 0.5, cfy = (fgS - 1) * 0.5;
    const double cx = (W - 1) * 0.5, cy = (H - 1) * 0.5;
    const M a0 = pose_map(p0, cfx, cfy, cx, cy);
    const M a1 = pose_map(p1, cfx, cfy, cx, cy);
    const M inv0 = invert(a0);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double ux = inv0.a * x + inv0.b * y + inv0.c;
            const double uy = inv0.d * x + inv0.e * y + inv0.f;
            const double px = a1.a * ux + a1.b * uy + a1.c;
            const double py = a1.d * ux + a1.e * uy + a1.f;
            const std::size_t p = static_cast<std::size_t>(y) * W + x;
            CHECK(m[p] == doctest::Approx(px - x).epsilon(1e-3));
            CHECK(m[plane + p] == doctest::Approx(py - y).epsilon(1e-3));
        }
}

TEST_CASE("synthesized samples satisfy the compositing identity exactly in float") {
    comp::CompositeSample s = make_sample(31);
    for (int t = 0; t < s.length(); ++t) {
        Tensor again = comp::composite(s.fg.frames[t], s.bg.frames[t], s.alpha.frames[t]);
        for (std::size_t i = 0; i < again.size(); ++i)
            CHECK(again[i] == s.composite.frames[t][i]);
    }
}

TEST_CASE("make_trimap: degenerate alphas") {
    Tensor zero({8, 8});
    comp::Trimap bg = comp::make_trimap(zero, 3, 2);
    for (auto v : bg.m) CHECK(v == 0);

    Tensor one = Tensor::full({8, 8}, 1.0f);
    comp::Trimap fg = comp::make_trimap(one, 3, 0);
    for (auto v : fg.m) CHECK(v == 2);

    CHECK_THROWS_AS(comp::make_trimap(zero, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(comp::make_trimap(zero, 3, -1), std::invalid_argument);
}

TEST_CASE("make_trimap: single soft pixel grows a 9x9 unknown block (k=3, iters=2)") {
    Tensor a({15, 15});
    a.at(7, 7) = 0.5f;
    comp::Trimap t = comp::make_trimap(a, 3, 2);
    int unknown = 0;
    for (int y = 0; y < 15; ++y)
        for (int x = 0; x < 15; ++x) {
            const bool inside = std::abs(y - 7) <= 4 && std::abs(x - 7) <= 4;
            CHECK(t.at(y, x) == (inside ? 1 : 0));
            unknown += t.at(y, x) == 1;
        }
    CHECK(unknown == 81);
}

TEST_CASE("make_trimap matches a brute-force morphology oracle on random alphas") {
    // The oracle expands/shrinks sets pixel-by-pixel, one structuring-element
    // application per iteration, then assembles the trimap by definition.
    auto oracle = [](const Tensor& alpha, int k, int iters) {
        const int h = alpha.dim(0), w = alpha.dim(1);
        auto apply = [&](std::vector<std::uint8_t> m, bool dil) {
            const int r = k - 1;
            for (int it = 0; it < iters; ++it) {
                std::vector<std::uint8_t> nx(m.size());
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
                        nx[static_cast<std::size_t>(y) * w + x] = acc;
                    }
                m = std::move(nx);
            }
            return m;
        };
        std::vector<std::uint8_t> fg(alpha.size()), known(alpha.size());
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            fg[i] = alpha[i] >= 1.0f;
            known[i] = alpha[i] > 0.0f;
        }
        const std::vector<std::uint8_t> dil = apply(known, true);
        const std::vector<std::uint8_t> ero = apply(fg, false);
        comp::Trimap t;
        t.h = h;
        t.w = w;
        t.m.resize(alpha.size());
        for (std::size_t i = 0; i < alpha.size(); ++i)
            t.m[i] = ero[i] ? 2 : (dil[i] ? 1 : 0);
        return t;
    };

    Rng rng(51);
    for (int trial = 0; trial < 8; ++trial) {
        Tensor a({12, 14});
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double u = rng.uniform();
            a[i] = u < 0.4 ? 0.0f : (u < 0.7 ? 1.0f : static_cast<float>(rng.uniform(0.01, 0.99)));
        }
        const int k = rng.range_int(1, 3);
        const int iters = rng.range_int(0, 3);
        CHECK(comp::make_trimap(a, k, iters).m == oracle(a, k, iters).m);
    }
}

TEST_CASE("make_trimap: monotone growth and label consistency") {
    Rng rng(53);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a({16, 16});
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double u = rng.uniform();
            a[i] = u < 0.5 ? 0.0f : (u < 0.8 ? 1.0f : static_cast<float>(rng.uniform(0.01, 0.99)));
        }
        comp::Trimap prev = comp::make_trimap(a, 2, 0);
        for (int iters = 1; iters <= 4; ++iters) {
            comp::Trimap cur = comp::make_trimap(a, 2, iters);
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (prev.m[i] == 1) CHECK(cur.m[i] == 1);  // unknown never shrinks
                if (a[i] == 0.0f) CHECK(cur.m[i] != 2);    // never fg where alpha = 0
                if (a[i] == 1.0f) CHECK(cur.m[i] != 0);    // never bg where alpha = 1
            }
            prev = cur;
        }
    }
}

TEST_CASE("crop_cube: single-frame window, determinism, skip signal") {
    comp::CompositeSample s = make_sample(61, 5, 48);
    std::vector<comp::Trimap> trimaps;
    for (const auto& a : s.alpha.frames) trimaps.push_back(comp::make_trimap(a, 2, 1));

    auto c0 = comp::crop_cube(s, trimaps, 2, 0, 32, {32, 40}, 7);
    REQUIRE(c0.has_value());
    CHECK(c0->composite.size() == 1);
    CHECK(c0->alpha[0].dim(0) == 32);

    auto c1 = comp::crop_cube(s, trimaps, 2, 1, 32, {32, 40}, 7);
    auto c2 = comp::crop_cube(s, trimaps, 2, 1, 32, {32, 40}, 7);
    REQUIRE(c1.has_value());
    REQUIRE(c2.has_value());
    CHECK(c1->center_x == c2->center_x);
    CHECK(c1->flipped == c2->flipped);
    for (std::size_t i = 0; i < c1->composite[0].size(); ++i)
        CHECK(c1->composite[0][i] == c2->composite[0][i]);

    // All-background trimaps: no unknown pixels anywhere -> skip.
    std::vector<comp::Trimap> empty_tm;
    for (int t = 0; t < 5; ++t) {
        comp::Trimap tm;
        tm.h = 48;
        tm.w = 48;
        tm.m.assign(48 * 48, 0);
        empty_tm.push_back(tm);
    }
    CHECK_FALSE(comp::crop_cube(s, empty_tm, 2, 1, 32, {32}, 7).has_value());

    CHECK_THROWS_AS(comp::crop_cube(s, trimaps, 2, 3, 32, {32}, 7), std::invalid_argument);
}

TEST_CASE("crop_cube: scale frequencies are ~1/3 each over 10k draws") {
    comp::CompositeSample s = make_sample(67, 1, 8);
    std::vector<comp::Trimap> trimaps;
    comp::Trimap all_unknown;
    all_unknown.h = 8;
    all_unknown.w = 8;
    all_unknown.m.assign(64, 1);
    trimaps.push_back(all_unknown);

    const std::vector<int> scales = {320, 480, 640};
    int counts[3] = {0, 0, 0};
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto cube = comp::crop_cube(s, trimaps, 0, 0, 8, scales, 1000 + i);
        REQUIRE(cube.has_value());
        for (int j = 0; j < 3; ++j)
            if (cube->chosen_scale == scales[j]) ++counts[j];
    }
    for (int j = 0; j < 3; ++j) {
        const double freq = static_cast<double>(counts[j]) / draws;
        CHECK(freq > 1.0 / 3.0 - 0.05);
        CHECK(freq < 1.0 / 3.0 + 0.05);
    }
}

TEST_CASE("crop_cube flips all planes consistently (identity-crop setup)") {
    // Crop side equals the frame side, so planes are exact flips: the
    // compositing identity must keep holding bitwise on the cube.
    comp::CompositeSample s = make_sample(71, 3, 32);
    std::vector<comp::Trimap> trimaps;
    for (const auto& a : s.alpha.frames) trimaps.push_back(comp::make_trimap(a, 2, 1));
    bool saw_flip = false, saw_noflip = false;
    for (std::uint64_t seed = 0; seed < 24 && !(saw_flip && saw_noflip); ++seed) {
        auto cube = comp::crop_cube(s, trimaps, 1, 1, 32, {32}, seed);
        REQUIRE(cube.has_value());
        saw_flip = saw_flip || cube->flipped;
        saw_noflip = saw_noflip || !cube->flipped;
        for (std::size_t f = 0; f < cube->composite.size(); ++f) {
            Tensor again = comp::composite(cube->fg[f], cube->bg[f], cube->alpha[f]);
            for (std::size_t i = 0; i < again.size(); ++i)
                CHECK(again[i] == cube->composite[f][i]);
        }
    }
    CHECK(saw_flip);
    CHECK(saw_noflip);
}

TEST_CASE("sample round-trip through PNG stays within 1/255") {
    comp::CompositeSample s = make_sample(73, 3, 40);
    std::vector<comp::Trimap> trimaps;
    for (const auto& a : s.alpha.frames) trimaps.push_back(comp::make_trimap(a, 3, 2));
    const std::string dir = (fs::temp_directory_path() / "dvm_test_sample").string();
    fs::remove_all(dir);
    comp::write_sample(dir, s, trimaps, 73, 3, 2);
    comp::SampleOnDisk back = comp::load_sample(dir);

    float max_err = 0.0f;
    for (int t = 0; t < 3; ++t) {
        // fg/bg/alpha were snapped before compositing, so they reload exactly
        for (std::size_t i = 0; i < back.fg.frames[t].size(); ++i) {
            CHECK(back.fg.frames[t][i] == s.fg.frames[t][i]);
            CHECK(back.bg.frames[t][i] == s.bg.frames[t][i]);
        }
        for (std::size_t i = 0; i < back.alpha.frames[t].size(); ++i)
            CHECK(back.alpha.frames[t][i] == s.alpha.frames[t][i]);
        Tensor rec = comp::composite(back.fg.frames[t], back.bg.frames[t], back.alpha.frames[t]);
        for (std::size_t i = 0; i < rec.size(); ++i)
            max_err = std::max(max_err, std::abs(rec[i] - back.composite.frames[t][i]));
    }
    CHECK(max_err <= 1.0f / 255.0f);

    // Motion files reload bit-exactly.
    for (int t = 0; t + 1 < 3; ++t)
        for (std::size_t i = 0; i < s.motion.pairs[t].size(); ++i)
            CHECK(back.motion.pairs[t][i] == s.motion.pairs[t][i]);
    fs::remove_all(dir);
}

TEST_CASE("synthesize rejects a background shorter than the track") {
    Rng rng(79);
    comp::BackgroundConfig bc;
    comp::Clip bg = comp::make_procedural_background(rng, bc, 3, 24, 24);
    Tensor color = Tensor::full({3, 12, 12}, 0.5f);
    Tensor alpha = Tensor::full({12, 12}, 1.0f);
    comp::TrackConfig tc;
    comp::AffineTrack track = comp::generate_track(5, tc, 7);
    CHECK_THROWS_AS(comp::synthesize(color, alpha, bg, track), std::invalid_argument);
}
