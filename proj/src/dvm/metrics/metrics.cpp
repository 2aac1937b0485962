// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/metrics/metrics.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dvm/image/warp.hpp"

namespace dvm::metrics {

namespace {

void check_aligned(const Frames& pred, const Frames& gt, const Masks& mask) {
    if (pred.empty() || pred.size() != gt.size() || pred.size() != mask.size())
        throw std::invalid_argument("metrics: sequence lengths differ");
    for (std::size_t t = 0; t < pred.size(); ++t)
        if (!pred[t].same_shape(gt[t]) || !pred[t].same_shape(mask[t]))
            throw std::invalid_argument("metrics: frame shapes differ");
}

long mask_count(const Tensor& m) {
    long n = 0;
    for (std::size_t i = 0; i < m.size(); ++i) n += m[i] > 0.5f ? 1 : 0;
    return n;
}

// Separable convolution with replicate padding; kx applies along x, ky along
// y. Double precision throughout so the metric matches its 64-bit definition.
std::vector<double> sep_filter(const Tensor& img, const std::vector<double>& kx,
                               const std::vector<double>& ky) {
    const int h = img.dim(0), w = img.dim(1);
    const int rx = static_cast<int>(kx.size()) / 2, ry = static_cast<int>(ky.size()) / 2;
    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    std::vector<double> tmp(static_cast<std::size_t>(h) * w), out(tmp.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -rx; i <= rx; ++i)
                acc += kx[i + rx] * img.at(y, clampi(x + i, w - 1));
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -ry; i <= ry; ++i)
                acc += ky[i + ry] * tmp[static_cast<std::size_t>(clampi(y + i, h - 1)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    return out;
}

double bilinear_clamp_d(const Tensor& img, double y, double x) {
    const int h = img.dim(0), w = img.dim(1);
    const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0, fx = x - x0;
    auto v = [&](int yy, int xx) {
        yy = yy < 0 ? 0 : (yy >= h ? h - 1 : yy);
        xx = xx < 0 ? 0 : (xx >= w ? w - 1 : xx);
        return static_cast<double>(img.at(yy, xx));
    };
    return (1 - fy) * (1 - fx) * v(y0, x0) + (1 - fy) * fx * v(y0, x0 + 1) +
           fy * (1 - fx) * v(y0 + 1, x0) + fy * fx * v(y0 + 1, x0 + 1);
}

void gaussian_kernels(float sigma, std::vector<double>* g, std::vector<double>* dg) {
    const int r = static_cast<int>(std::ceil(3.0f * sigma));
    g->assign(2 * r + 1, 0.0);
    dg->assign(2 * r + 1, 0.0);
    double norm = 0;
    for (int i = -r; i <= r; ++i) {
        const double e = std::exp(-0.5 * i * i / (sigma * sigma));
        (*g)[i + r] = e;
        norm += e;
    }
    for (int i = -r; i <= r; ++i) {
        (*g)[i + r] /= norm;
        (*dg)[i + r] = -(static_cast<double>(i) / (sigma * sigma)) *
                       std::exp(-0.5 * i * i / (sigma * sigma)) / norm;
    }
}

// Union-find largest 4-connected component; ties resolved toward the
// component containing the smallest pixel index. Returns a 0/1 byte map.
std::vector<std::uint8_t> largest_component(const std::vector<std::uint8_t>& bin, int h, int w) {
    const int n = h * w;
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int p = y * w + x;
            if (!bin[p]) continue;
            if (x + 1 < w && bin[p + 1]) unite(p, p + 1);
            if (y + 1 < h && bin[p + w]) unite(p, p + w);
        }
    std::vector<int> size(n, 0);
    for (int p = 0; p < n; ++p)
        if (bin[p]) ++size[find(p)];
    int best_root = -1, best_size = 0;
    for (int p = 0; p < n; ++p) {
        // Roots are their own representatives; the min-index tie-break falls
        // out of scanning order because roots are minimal in each set.
        if (bin[p] && find(p) == p && size[p] > best_size) {
            best_size = size[p];
            best_root = p;
        }
    }
    std::vector<std::uint8_t> out(n, 0);
    if (best_root >= 0)
        for (int p = 0; p < n; ++p)
            if (bin[p] && find(p) == best_root) out[p] = 1;
    return out;
}

}  // namespace

std::vector<double> per_frame_sad(const Frames& pred, const Frames& gt, const Masks& mask) {
    check_aligned(pred, gt, mask);
    std::vector<double> out;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (mask_count(mask[t]) == 0) throw std::invalid_argument("sad: empty mask");
        double acc = 0;
        for (std::size_t i = 0; i < pred[t].size(); ++i)
            if (mask[t][i] > 0.5f) acc += std::abs(static_cast<double>(pred[t][i]) - gt[t][i]);
        out.push_back(acc / 1000.0);
    }
    return out;
}

double sad(const Frames& pred, const Frames& gt, const Masks& mask) {
    const std::vector<double> per = per_frame_sad(pred, gt, mask);
    return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

double mse(const Frames& pred, const Frames& gt, const Masks& mask) {
    check_aligned(pred, gt, mask);
    double acc = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        const long count = mask_count(mask[t]);
        if (count == 0) throw std::invalid_argument("mse: empty mask");
        double frame = 0;
        for (std::size_t i = 0; i < pred[t].size(); ++i)
            if (mask[t][i] > 0.5f) {
                const double d = static_cast<double>(pred[t][i]) - gt[t][i];
                frame += d * d;
            }
        acc += frame / static_cast<double>(count);
    }
    return acc / static_cast<double>(pred.size());
}

double grad_err(const Frames& pred, const Frames& gt, const Masks& mask, float sigma) {
    check_aligned(pred, gt, mask);
    std::vector<double> g, dg;
    gaussian_kernels(sigma, &g, &dg);
    double acc = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        const std::vector<double> pgx = sep_filter(pred[t], dg, g), pgy = sep_filter(pred[t], g, dg);
        const std::vector<double> ggx = sep_filter(gt[t], dg, g), ggy = sep_filter(gt[t], g, dg);
        double frame = 0;
        for (std::size_t i = 0; i < pred[t].size(); ++i)
            if (mask[t][i] > 0.5f) {
                const double dx = pgx[i] - ggx[i];
                const double dy = pgy[i] - ggy[i];
                frame += dx * dx + dy * dy;
            }
        acc += frame / 1000.0;
    }
    return acc / static_cast<double>(pred.size());
}

double conn_err(const Frames& pred, const Frames& gt, const Masks& mask) {
    check_aligned(pred, gt, mask);
    const int h = pred[0].dim(0), w = pred[0].dim(1);
    const int n = h * w;
    double acc = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        std::vector<float> lmap(n, -1.0f);
        for (int i = 1; i <= 9; ++i) {
            const float theta = 0.1f * i;
            std::vector<std::uint8_t> bin(n);
            for (int p = 0; p < n; ++p)
                bin[p] = (pred[t][p] >= theta && gt[t][p] >= theta) ? 1 : 0;
            std::vector<std::uint8_t> omega = largest_component(bin, h, w);
            const float prev = 0.1f * (i - 1);
            for (int p = 0; p < n; ++p)
                if (lmap[p] < 0.0f && !omega[p]) lmap[p] = prev;
        }
        for (int p = 0; p < n; ++p)
            if (lmap[p] < 0.0f) lmap[p] = 1.0f;
        double frame = 0;
        for (int p = 0; p < n; ++p) {
            if (mask[t][p] <= 0.5f) continue;
            const double dp = static_cast<double>(pred[t][p]) - lmap[p];
            const double dgt = static_cast<double>(gt[t][p]) - lmap[p];
            const double phi_p = 1.0 - (dp >= 0.15 ? dp : 0.0);
            const double phi_g = 1.0 - (dgt >= 0.15 ? dgt : 0.0);
            frame += std::abs(phi_p - phi_g);
        }
        acc += frame / 1000.0;
    }
    return acc / static_cast<double>(pred.size());
}

double dtssd(const Frames& pred, const Frames& gt, const Masks& mask) {
    check_aligned(pred, gt, mask);
    if (pred.size() < 2) throw std::invalid_argument("dtssd: need at least 2 frames");
    double acc = 0;
    for (std::size_t t = 0; t + 1 < pred.size(); ++t) {
        const long count = mask_count(mask[t]);
        if (count == 0) throw std::invalid_argument("dtssd: empty mask");
        double pair = 0;
        for (std::size_t i = 0; i < pred[t].size(); ++i)
            if (mask[t][i] > 0.5f) {
                const double dp = static_cast<double>(pred[t + 1][i]) - pred[t][i];
                const double dg = static_cast<double>(gt[t + 1][i]) - gt[t][i];
                pair += (dp - dg) * (dp - dg);
            }
        acc += std::sqrt(pair / static_cast<double>(count)) * 100.0;
    }
    return acc / static_cast<double>(pred.size() - 1);
}

double messddt(const Frames& pred, const Frames& gt, const comp::MotionField& motion,
               const Masks& mask) {
    check_aligned(pred, gt, mask);
    if (pred.size() < 2) throw std::invalid_argument("messddt: need at least 2 frames");
    if (motion.pairs.size() + 1 != pred.size())
        throw std::invalid_argument("messddt: motion field not aligned with frame pairs");
    const int h = pred[0].dim(0), w = pred[0].dim(1);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    double acc = 0;
    long terms = 0;
    for (std::size_t t = 0; t + 1 < pred.size(); ++t) {
        const Tensor& mv = motion.pairs[t];
        if (mv.dim(1) != h || mv.dim(2) != w)
            throw std::invalid_argument("messddt: motion size mismatch");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * w + x;
                if (mask[t][p] <= 0.5f) continue;
                const double ax = x + static_cast<double>(mv[p]);
                const double ay = y + static_cast<double>(mv[plane + p]);
                if (ax < 0.0 || ax > static_cast<double>(w - 1) || ay < 0.0 ||
                    ay > static_cast<double>(h - 1))
                    continue;  // advected position left the frame
                const double d0 = static_cast<double>(pred[t][p]) - gt[t][p];
                const double p1 = bilinear_clamp_d(pred[t + 1], ay, ax);
                const double g1 = bilinear_clamp_d(gt[t + 1], ay, ax);
                const double d1 = p1 - g1;
                acc += std::abs(d0 * d0 - d1 * d1);
                ++terms;
            }
    }
    if (terms == 0) return 0.0;
    return acc / static_cast<double>(terms) * 1000.0;
}

Masks masks_from_trimaps(const std::vector<comp::Trimap>& trimaps) {
    Masks out;
    for (const auto& t : trimaps) out.push_back(comp::unknown_mask(t));
    return out;
}

Masks full_masks(int frames, int h, int w) {
    Masks out;
    for (int t = 0; t < frames; ++t) out.push_back(Tensor::full({h, w}, 1.0f));
    return out;
}

MetricReport evaluate_clip(const Frames& pred, const Frames& gt, const Masks& mask,
                           const comp::MotionField* motion) {
    MetricReport r;
    r.frames = static_cast<int>(pred.size());
    r.pairs = r.frames > 1 ? r.frames - 1 : 0;
    for (const auto& m : mask) r.masked_px += mask_count(m);
    r.sad = sad(pred, gt, mask);
    r.mse = mse(pred, gt, mask);
    r.grad = grad_err(pred, gt, mask);
    r.conn = conn_err(pred, gt, mask);
    if (r.frames >= 2) r.dtssd = dtssd(pred, gt, mask);
    if (motion != nullptr && r.frames >= 2) {
        r.messddt = messddt(pred, gt, *motion, mask);
        r.has_messddt = true;
    }
    return r;
}

MetricReport aggregate(const std::vector<MetricReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
    MetricReport agg;
    const double n = static_cast<double>(reports.size());
    agg.has_messddt = true;
    for (const auto& r : reports) {
        agg.sad += r.sad / n;
        agg.mse += r.mse / n;
        agg.grad += r.grad / n;
        agg.conn += r.conn / n;
        agg.dtssd += r.dtssd / n;
        agg.messddt += r.messddt / n;
        agg.frames += r.frames;
        agg.pairs += r.pairs;
        agg.masked_px += r.masked_px;
        agg.has_messddt = agg.has_messddt && r.has_messddt;
    }
    return agg;
}

nlohmann::json report_to_json(const MetricReport& r) {
    nlohmann::json j;
    j["sad"] = r.sad;
    j["mse"] = r.mse;
    j["grad"] = r.grad;
    j["conn"] = r.conn;
    j["dtssd"] = r.dtssd;
    if (r.has_messddt) j["messddt"] = r.messddt;
    j["frames"] = r.frames;
    j["pairs"] = r.pairs;
    j["masked_px"] = r.masked_px;
    return j;
}

}  // namespace dvm::metrics
