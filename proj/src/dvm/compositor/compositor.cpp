// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/compositor/compositor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dvm/image/morphology.hpp"
#include "dvm/kernels/kernels.hpp"

namespace dvm::comp {

Tensor composite(const Tensor& fg, const Tensor& bg, const Tensor& alpha) {
    if (!fg.same_shape(bg)) throw std::invalid_argument("composite: fg/bg shape mismatch");
    if (fg.rank() != 3 || alpha.rank() != 2 || alpha.dim(0) != fg.dim(1) ||
        alpha.dim(1) != fg.dim(2))
        throw std::invalid_argument("composite: alpha shape mismatch");
    const std::size_t plane = alpha.size();
    Tensor out(fg.dims());
    for (int c = 0; c < 3; ++c) {
        const float* f = fg.data() + c * plane;
        const float* b = bg.data() + c * plane;
        float* o = out.data() + c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            const float a = alpha[p];
            o[p] = a * f[p] + (1.0f - a) * b[p];
        }
    }
    kern::clamp(0.0f, 1.0f, out.data(), out.data(), out.size());
    return out;
}

AffineTrack generate_track(int length, const TrackConfig& cfg, std::uint64_t seed) {
    if (length < 1) throw std::invalid_argument("generate_track: length must be >= 1");
    if (cfg.scale_min <= 0.0f || cfg.scale_min > cfg.scale_max)
        throw std::invalid_argument("generate_track: bad scale range");
    Rng rng(seed);
    AffinePose pose;
    pose.tx = static_cast<float>(rng.uniform(-cfg.trans_range, cfg.trans_range));
    pose.ty = static_cast<float>(rng.uniform(-cfg.trans_range, cfg.trans_range));
    pose.rot = static_cast<float>(rng.uniform(-cfg.rot_range, cfg.rot_range));
    pose.scale = static_cast<float>(rng.uniform(cfg.scale_min, cfg.scale_max));

    AffineTrack track;
    track.poses.reserve(static_cast<std::size_t>(length));
    track.poses.push_back(pose);

    const int interval = std::max(1, cfg.key_interval);
    int t = 1;
    while (t < length) {
        const int span = std::min(interval, length - t);
        // Draw a keyframe target reachable within the velocity caps, then walk
        // toward it linearly; per-frame deltas stay within the caps.
        AffinePose target;
        auto step_to = [&rng](float cur, float cap, float lo, float hi, int steps) {
            const float v = static_cast<float>(rng.uniform(-cap, cap));
            float goal = cur + v * static_cast<float>(steps);
            return std::clamp(goal, lo, hi);
        };
        target.tx = step_to(pose.tx, cfg.cap_trans, -cfg.trans_range, cfg.trans_range, span);
        target.ty = step_to(pose.ty, cfg.cap_trans, -cfg.trans_range, cfg.trans_range, span);
        target.rot = step_to(pose.rot, cfg.cap_rot, -cfg.rot_range, cfg.rot_range, span);
        target.scale = step_to(pose.scale, cfg.cap_scale, cfg.scale_min, cfg.scale_max, span);
        for (int i = 1; i <= span; ++i) {
            const float u = static_cast<float>(i) / static_cast<float>(span);
            AffinePose p;
            p.tx = pose.tx + (target.tx - pose.tx) * u;
            p.ty = pose.ty + (target.ty - pose.ty) * u;
            p.rot = pose.rot + (target.rot - pose.rot) * u;
            p.scale = pose.scale + (target.scale - pose.scale) * u;
            track.poses.push_back(p);
        }
        pose = target;
        t += span;
    }
    return track;
}

img::AffineMap pose_to_map(const AffinePose& pose, int fg_h, int fg_w, int frame_h, int frame_w) {
    const float cfx = (fg_w - 1) * 0.5f, cfy = (fg_h - 1) * 0.5f;
    const float cx = (frame_w - 1) * 0.5f, cy = (frame_h - 1) * 0.5f;
    const float ca = std::cos(pose.rot) * pose.scale;
    const float sa = std::sin(pose.rot) * pose.scale;
    img::AffineMap m;
    m.a = ca;
    m.b = -sa;
    m.d = sa;
    m.e = ca;
    m.c = -(m.a * cfx + m.b * cfy) + cx + pose.tx;
    m.f = -(m.d * cfx + m.e * cfy) + cy + pose.ty;
    return m;
}

Tensor motion_from_poses(const AffinePose& cur, const AffinePose& next, int fg_h, int fg_w,
                         int frame_h, int frame_w) {
    const img::AffineMap a_cur = pose_to_map(cur, fg_h, fg_w, frame_h, frame_w);
    const img::AffineMap a_next = pose_to_map(next, fg_h, fg_w, frame_h, frame_w);
    const img::AffineMap m = a_next.compose(a_cur.inverse());
    Tensor out({2, frame_h, frame_w});
    const std::size_t plane = static_cast<std::size_t>(frame_h) * frame_w;
    for (int y = 0; y < frame_h; ++y)
        for (int x = 0; x < frame_w; ++x) {
            float nx, ny;
            m.apply(static_cast<float>(x), static_cast<float>(y), &nx, &ny);
            const std::size_t p = static_cast<std::size_t>(y) * frame_w + x;
            out[p] = nx - static_cast<float>(x);
            out[plane + p] = ny - static_cast<float>(y);
        }
    return out;
}

void snap_to_u8_grid(Tensor* t) {
    for (std::size_t i = 0; i < t->size(); ++i) {
        float v = (*t)[i];
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        (*t)[i] = static_cast<float>(static_cast<int>(v * 255.0f + 0.5f)) / 255.0f;
    }
}

namespace {

CompositeSample synthesize_impl(const std::vector<const Tensor*>& fg_frames,
                                const std::vector<const Tensor*>& alpha_frames, const Clip& bg,
                                const AffineTrack& track) {
    const int L = track.length();
    if (bg.length() < L) throw std::invalid_argument("synthesize: background shorter than track");
    if (L < 1) throw std::invalid_argument("synthesize: empty track");
    const int H = bg.height(), W = bg.width();
    const int fh = alpha_frames[0]->dim(0), fw = alpha_frames[0]->dim(1);

    CompositeSample s;
    s.track = track;
    s.bg.frames.assign(bg.frames.begin(), bg.frames.begin() + L);
    s.bg.fps = bg.fps;
    for (int t = 0; t < L; ++t) {
        const img::AffineMap inv = pose_to_map(track.poses[t], fh, fw, H, W).inverse();
        Tensor wfg = img::warp_affine(*fg_frames[std::min<int>(t, fg_frames.size() - 1)], inv, H, W);
        Tensor wal = img::warp_affine(*alpha_frames[std::min<int>(t, alpha_frames.size() - 1)],
                                      inv, H, W);
        kern::clamp(0.0f, 1.0f, wal.data(), wal.data(), wal.size());
        snap_to_u8_grid(&wfg);
        snap_to_u8_grid(&wal);
        s.composite.frames.push_back(composite(wfg, s.bg.frames[t], wal));
        s.fg.frames.push_back(std::move(wfg));
        s.alpha.frames.push_back(std::move(wal));
        if (t > 0)
            s.motion.pairs.push_back(
                motion_from_poses(track.poses[t - 1], track.poses[t], fh, fw, H, W));
    }
    return s;
}

}  // namespace

CompositeSample synthesize(const Tensor& fg_color, const Tensor& fg_alpha, const Clip& bg,
                           const AffineTrack& track) {
    if (fg_color.rank() != 3 || fg_alpha.rank() != 2 || fg_color.dim(1) != fg_alpha.dim(0) ||
        fg_color.dim(2) != fg_alpha.dim(1))
        throw std::invalid_argument("synthesize: foreground must be 3xHxW with paired HxW alpha");
    return synthesize_impl({&fg_color}, {&fg_alpha}, bg, track);
}

CompositeSample synthesize_clip(const Clip& fg, const AlphaClip& fg_alpha, const Clip& bg,
                                const AffineTrack& track) {
    if (fg.length() < track.length() || fg_alpha.length() < track.length())
        throw std::invalid_argument("synthesize_clip: foreground shorter than track");
    std::vector<const Tensor*> f, a;
    for (int t = 0; t < track.length(); ++t) {
        f.push_back(&fg.frames[t]);
        a.push_back(&fg_alpha.frames[t]);
    }
    return synthesize_impl(f, a, bg, track);
}

Trimap make_trimap(const Tensor& alpha, int kernel, int iterations) {
    if (alpha.rank() != 2) throw std::invalid_argument("make_trimap: HxW alpha expected");
    if (kernel < 1) throw std::invalid_argument("make_trimap: kernel must be >= 1");
    if (iterations < 0) throw std::invalid_argument("make_trimap: iterations must be >= 0");
    const int h = alpha.dim(0), w = alpha.dim(1);
    const std::size_t n = alpha.size();
    std::vector<std::uint8_t> fg(n), known(n);
    for (std::size_t i = 0; i < n; ++i) {
        fg[i] = alpha[i] >= 1.0f ? 1 : 0;
        known[i] = (alpha[i] >= 1.0f || alpha[i] > 0.0f) ? 1 : 0;  // fg ∪ transition
    }
    const int radius = (kernel - 1) * iterations;
    std::vector<std::uint8_t> dil = img::dilate_square(known, h, w, radius);
    std::vector<std::uint8_t> ero = img::erode_square(fg, h, w, radius);
    Trimap t;
    t.h = h;
    t.w = w;
    t.m.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (ero[i])
            t.m[i] = 2;
        else if (dil[i])
            t.m[i] = 1;
        else
            t.m[i] = 0;
    }
    return t;
}

Tensor unknown_mask(const Trimap& t) {
    Tensor m({t.h, t.w});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = t.m[i] == 1 ? 1.0f : 0.0f;
    return m;
}

std::optional<TrainingCube> crop_cube(const CompositeSample& sample,
                                      const std::vector<Trimap>& trimaps, int target_t, int n,
                                      int size, const std::vector<int>& scale_set,
                                      std::uint64_t seed) {
    const int T = sample.length();
    if (n < 0 || T < 2 * n + 1) throw std::invalid_argument("crop_cube: sample length < 2n+1");
    if (target_t < 0 || target_t >= T) throw std::invalid_argument("crop_cube: bad target frame");
    if (static_cast<int>(trimaps.size()) != T)
        throw std::invalid_argument("crop_cube: trimap count mismatch");
    if (scale_set.empty() || size < 1) throw std::invalid_argument("crop_cube: bad sizes");

    const int H = sample.composite.height(), W = sample.composite.width();
    const Trimap& tgt = trimaps[static_cast<std::size_t>(target_t)];
    std::vector<int> unknown;
    for (int i = 0; i < H * W; ++i)
        if (tgt.m[static_cast<std::size_t>(i)] == 1) unknown.push_back(i);
    if (unknown.empty()) return std::nullopt;

    Rng rng(seed);
    const int center = unknown[rng.below(unknown.size())];
    const int cy = center / W, cx = center % W;
    const int chosen = scale_set[rng.below(scale_set.size())];
    const bool flip = rng.bernoulli(0.5);

    const int side = std::min({chosen, H, W});
    int top = std::clamp(cy - side / 2, 0, H - side);
    int left = std::clamp(cx - side / 2, 0, W - side);

    auto crop_plane = [&](const Tensor& t) {
        if (t.rank() == 2) {
            Tensor out({side, side});
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) out.at(y, x) = t.at(top + y, left + x);
            return out;
        }
        Tensor out({t.dim(0), side, side});
        for (int c = 0; c < t.dim(0); ++c)
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) out.at(c, y, x) = t.at(c, top + y, left + x);
        return out;
    };

    TrainingCube cube;
    cube.n = n;
    cube.center_y = cy;
    cube.center_x = cx;
    cube.chosen_scale = chosen;
    cube.flipped = flip;
    for (int d = -n; d <= n; ++d) {
        const int t = std::clamp(target_t + d, 0, T - 1);
        Tensor comp = img::resize_bilinear(crop_plane(sample.composite.frames[t]), size, size);
        Tensor fg = img::resize_bilinear(crop_plane(sample.fg.frames[t]), size, size);
        Tensor bg = img::resize_bilinear(crop_plane(sample.bg.frames[t]), size, size);
        Tensor al = img::resize_bilinear(crop_plane(sample.alpha.frames[t]), size, size);
        kern::clamp(0.0f, 1.0f, al.data(), al.data(), al.size());

        const Trimap& tm = trimaps[static_cast<std::size_t>(t)];
        std::vector<std::uint8_t> tcrop(static_cast<std::size_t>(side) * side);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                tcrop[static_cast<std::size_t>(y) * side + x] = tm.at(top + y, left + x);
        std::vector<std::uint8_t> tr = img::resize_nearest_u8(tcrop, side, side, size, size);

        if (flip) {
            comp = img::hflip(comp);
            fg = img::hflip(fg);
            bg = img::hflip(bg);
            al = img::hflip(al);
            tr = img::hflip_u8(tr, size, size);
        }
        cube.composite.push_back(std::move(comp));
        cube.fg.push_back(std::move(fg));
        cube.bg.push_back(std::move(bg));
        cube.alpha.push_back(std::move(al));
        cube.trimap.push_back(Trimap{size, size, std::move(tr)});
    }
    return cube;
}

void make_procedural_foreground(Rng& rng, const ForegroundConfig& cfg, Tensor* color,
                                Tensor* alpha) {
    const int S = cfg.canvas;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Tensor noise({S, S});
        for (std::size_t i = 0; i < noise.size(); ++i)
            noise[i] = static_cast<float>(rng.uniform());
        Tensor field = img::gaussian_blur(noise, cfg.blur_sigma_frac * S);
        float lo = field[0], hi = field[0];
        for (std::size_t i = 0; i < field.size(); ++i) {
            lo = std::min(lo, field[i]);
            hi = std::max(hi, field[i]);
        }
        const float span = std::max(hi - lo, 1e-6f);
        for (std::size_t i = 0; i < field.size(); ++i) field[i] = (field[i] - lo) / span;

        // Threshold at a quantile so a solid foreground core always exists.
        std::vector<float> sorted(field.data(), field.data() + field.size());
        std::sort(sorted.begin(), sorted.end());
        const float theta = sorted[static_cast<std::size_t>(0.68 * sorted.size())];

        Tensor a({S, S});
        bool has_solid = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            float u = (field[i] - (theta - cfg.band * 0.5f)) / cfg.band;
            u = u < 0.f ? 0.f : (u > 1.f ? 1.f : u);
            a[i] = u * u * (3.0f - 2.0f * u);  // smoothstep
            if (a[i] >= 1.0f) has_solid = true;
        }
        if (!has_solid) continue;

        Tensor col({3, S, S});
        for (int c = 0; c < 3; ++c) {
            Tensor cn({S, S});
            for (std::size_t i = 0; i < cn.size(); ++i)
                cn[i] = static_cast<float>(rng.uniform());
            Tensor cf = img::gaussian_blur(cn, cfg.blur_sigma_frac * S * 0.7f);
            float clo = cf[0], chi = cf[0];
            for (std::size_t i = 0; i < cf.size(); ++i) {
                clo = std::min(clo, cf[i]);
                chi = std::max(chi, cf[i]);
            }
            const float cspan = std::max(chi - clo, 1e-6f);
            for (std::size_t i = 0; i < cf.size(); ++i)
                col[c * cf.size() + i] = 0.15f + 0.80f * (cf[i] - clo) / cspan;
        }
        snap_to_u8_grid(&col);
        snap_to_u8_grid(&a);
        *color = std::move(col);
        *alpha = std::move(a);
        return;
    }
    throw std::runtime_error("make_procedural_foreground: failed to grow a solid blob");
}

Clip make_procedural_background(Rng& rng, const BackgroundConfig& cfg, int frames, int h, int w) {
    if (frames < 1) throw std::invalid_argument("make_procedural_background: frames >= 1");
    const int margin = static_cast<int>(std::ceil(
                           std::max(std::abs(cfg.drift_x), std::abs(cfg.drift_y)) * frames)) +
                       2;
    const int bh = h + 2 * margin, bw = w + 2 * margin;
    Tensor base({3, bh, bw});
    for (int c = 0; c < 3; ++c) {
        Tensor noise({bh, bw});
        for (std::size_t i = 0; i < noise.size(); ++i)
            noise[i] = static_cast<float>(rng.uniform());
        Tensor f = img::gaussian_blur(noise, cfg.blur_sigma_frac * std::min(bh, bw));
        float lo = f[0], hi = f[0];
        for (std::size_t i = 0; i < f.size(); ++i) {
            lo = std::min(lo, f[i]);
            hi = std::max(hi, f[i]);
        }
        const float span = std::max(hi - lo, 1e-6f);
        for (int y = 0; y < bh; ++y)
            for (int x = 0; x < bw; ++x) {
                const float g = 0.25f + 0.5f * static_cast<float>(y) / bh;  // gentle gradient
                base.at(c, y, x) = 0.5f * g + 0.5f * (f.at(y, x) - lo) / span;
            }
    }
    Clip clip;
    for (int t = 0; t < frames; ++t) {
        const float oy = margin + cfg.drift_y * t;
        const float ox = margin + cfg.drift_x * t;
        Tensor frame({3, h, w});
        const std::size_t bplane = static_cast<std::size_t>(bh) * bw;
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    frame.at(c, y, x) = img::sample_bilinear_clamp(base.data() + c * bplane, bh, bw,
                                                                   oy + y, ox + x);
        if (cfg.frame_noise > 0.0f)
            for (std::size_t i = 0; i < frame.size(); ++i)
                frame[i] += cfg.frame_noise * static_cast<float>(rng.normal());
        snap_to_u8_grid(&frame);
        clip.frames.push_back(std::move(frame));
    }
    return clip;
}

}  // namespace dvm::comp
