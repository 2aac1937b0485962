// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0
//
// Independent scalar-loop re-implementations of the evaluation metrics, used
// as oracles. They share only the documented conventions with the library
// (normalizations, kernel formulas); all computation is plain double loops.

#pragma once

#include <cmath>
#include <stack>
#include <vector>

#include "dvm/compositor/compositor.hpp"
#include "dvm/core/tensor.hpp"

namespace oracle {

using dvm::Tensor;
using FrameSeq = std::vector<Tensor>;

inline double o_sad(const FrameSeq& pred, const FrameSeq& gt, const FrameSeq& mask) {
    double total = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        double s = 0;
        for (std::size_t i = 0; i < pred[t].size(); ++i)
            if (mask[t][i] > 0.5f) s += std::abs((double)pred[t][i] - (double)gt[t][i]);
        total += s / 1000.0;
    }
    return total / (double)pred.size();
}

inline double o_mse(const FrameSeq& pred, const FrameSeq& gt, const FrameSeq& mask) {
    double total = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        double s = 0;
        long n = 0;
        for (std::size_t i = 0; i < pred[t].size(); ++i)
            if (mask[t][i] > 0.5f) {
                const double d = (double)pred[t][i] - (double)gt[t][i];
                s += d * d;
                ++n;
            }
        total += s / (double)n;
    }
    return total / (double)pred.size();
}

inline double o_grad(const FrameSeq& pred, const FrameSeq& gt, const FrameSeq& mask,
                     double sigma = 1.4) {
    const int r = (int)std::ceil(3.0 * sigma);
    std::vector<double> g(2 * r + 1), dg(2 * r + 1);
    double norm = 0;
    for (int i = -r; i <= r; ++i) norm += std::exp(-0.5 * i * i / (sigma * sigma));
    for (int i = -r; i <= r; ++i) {
        g[i + r] = std::exp(-0.5 * i * i / (sigma * sigma)) / norm;
        dg[i + r] = -(i / (sigma * sigma)) * std::exp(-0.5 * i * i / (sigma * sigma)) / norm;
    }
    auto deriv = [&](const Tensor& img, bool xdir, int y, int x) {
        const int h = img.dim(0), w = img.dim(1);
        // separable: derivative along one axis, smoothing along the other
        double acc = 0;
        for (int a = -r; a <= r; ++a)
            for (int b = -r; b <= r; ++b) {
                int yy = y + a, xx = x + b;
                yy = yy < 0 ? 0 : (yy >= h ? h - 1 : yy);
                xx = xx < 0 ? 0 : (xx >= w ? w - 1 : xx);
                const double kx = xdir ? dg[b + r] : g[b + r];
                const double ky = xdir ? g[a + r] : dg[a + r];
                acc += kx * ky * (double)img.at(yy, xx);
            }
        return acc;
    };
    double total = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        const int h = pred[t].dim(0), w = pred[t].dim(1);
        double s = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (mask[t][(std::size_t)y * w + x] <= 0.5f) continue;
                const double dx = deriv(pred[t], true, y, x) - deriv(gt[t], true, y, x);
                const double dy = deriv(pred[t], false, y, x) - deriv(gt[t], false, y, x);
                s += dx * dx + dy * dy;
            }
        total += s / 1000.0;
    }
    return total / (double)pred.size();
}

// Explicit flood-fill largest component (stack-based DFS, 4-connectivity),
// picking the component discovered first among the largest.
inline std::vector<std::uint8_t> o_largest_cc(const std::vector<std::uint8_t>& bin, int h, int w) {
    std::vector<int> label((std::size_t)h * w, -1);
    int next = 0;
    std::vector<long> sizes;
    for (int start = 0; start < h * w; ++start) {
        if (!bin[(std::size_t)start] || label[(std::size_t)start] >= 0) continue;
        std::stack<int> st;
        st.push(start);
        label[(std::size_t)start] = next;
        long size = 0;
        while (!st.empty()) {
            const int p = st.top();
            st.pop();
            ++size;
            const int y = p / w, x = p % w;
            const int nb[4] = {p - w, p + w, p - 1, p + 1};
            const bool ok[4] = {y > 0, y + 1 < h, x > 0, x + 1 < w};
            for (int k = 0; k < 4; ++k)
                if (ok[k] && bin[(std::size_t)nb[k]] && label[(std::size_t)nb[k]] < 0) {
                    label[(std::size_t)nb[k]] = next;
                    st.push(nb[k]);
                }
        }
        sizes.push_back(size);
        ++next;
    }
    int best = -1;
    long best_size = 0;
    for (int c = 0; c < next; ++c)
        if (sizes[(std::size_t)c] > best_size) {
            best_size = sizes[(std::size_t)c];
            best = c;
        }
    std::vector<std::uint8_t> out((std::size_t)h * w, 0);
    if (best >= 0)
        for (int p = 0; p < h * w; ++p)
            if (label[(std::size_t)p] == best) out[(std::size_t)p] = 1;
    return out;
}

inline double o_conn(const FrameSeq& pred, const FrameSeq& gt, const FrameSeq& mask) {
    double total = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        const int h = pred[t].dim(0), w = pred[t].dim(1);
        const int n = h * w;
        std::vector<double> lmap((std::size_t)n, -1.0);
        for (int i = 1; i <= 9; ++i) {
            const double theta = 0.1 * i;
            std::vector<std::uint8_t> bin((std::size_t)n);
            for (int p = 0; p < n; ++p)
                bin[(std::size_t)p] =
                    ((double)pred[t][(std::size_t)p] >= theta && (double)gt[t][(std::size_t)p] >= theta)
                        ? 1
                        : 0;
            const std::vector<std::uint8_t> omega = o_largest_cc(bin, h, w);
            for (int p = 0; p < n; ++p)
                if (lmap[(std::size_t)p] < 0 && !omega[(std::size_t)p])
                    lmap[(std::size_t)p] = 0.1 * (i - 1);
        }
        double s = 0;
        for (int p = 0; p < n; ++p) {
            if (lmap[(std::size_t)p] < 0) lmap[(std::size_t)p] = 1.0;
            if (mask[t][(std::size_t)p] <= 0.5f) continue;
            const double dp = (double)pred[t][(std::size_t)p] - lmap[(std::size_t)p];
            const double dgt = (double)gt[t][(std::size_t)p] - lmap[(std::size_t)p];
            const double phip = 1.0 - (dp >= 0.15 ? dp : 0.0);
            const double phig = 1.0 - (dgt >= 0.15 ? dgt : 0.0);
            s += std::abs(phip - phig);
        }
        total += s / 1000.0;
    }
    return total / (double)pred.size();
}

inline double o_dtssd(const FrameSeq& pred, const FrameSeq& gt, const FrameSeq& mask) {
    double total = 0;
    for (std::size_t t = 0; t + 1 < pred.size(); ++t) {
        double s = 0;
        long n = 0;
        for (std::size_t i = 0; i < pred[t].size(); ++i)
            if (mask[t][i] > 0.5f) {
                const double dp = (double)pred[t + 1][i] - (double)pred[t][i];
                const double dg = (double)gt[t + 1][i] - (double)gt[t][i];
                s += (dp - dg) * (dp - dg);
                ++n;
            }
        total += std::sqrt(s / (double)n) * 100.0;
    }
    return total / (double)(pred.size() - 1);
}

inline double o_bilinear(const Tensor& img, double y, double x) {
    const int h = img.dim(0), w = img.dim(1);
    const int y0 = (int)std::floor(y), x0 = (int)std::floor(x);
    const double fy = y - y0, fx = x - x0;
    auto v = [&](int yy, int xx) {
        yy = yy < 0 ? 0 : (yy >= h ? h - 1 : yy);
        xx = xx < 0 ? 0 : (xx >= w ? w - 1 : xx);
        return (double)img.at(yy, xx);
    };
    return (1 - fy) * (1 - fx) * v(y0, x0) + (1 - fy) * fx * v(y0, x0 + 1) +
           fy * (1 - fx) * v(y0 + 1, x0) + fy * fx * v(y0 + 1, x0 + 1);
}

inline double o_messddt(const FrameSeq& pred, const FrameSeq& gt,
                        const dvm::comp::MotionField& motion, const FrameSeq& mask) {
    double acc = 0;
    long terms = 0;
    for (std::size_t t = 0; t + 1 < pred.size(); ++t) {
        const int h = pred[t].dim(0), w = pred[t].dim(1);
        const std::size_t plane = (std::size_t)h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t p = (std::size_t)y * w + x;
                if (mask[t][p] <= 0.5f) continue;
                const double ax = x + (double)motion.pairs[t][p];
                const double ay = y + (double)motion.pairs[t][plane + p];
                if (ax < 0 || ax > w - 1 || ay < 0 || ay > h - 1) continue;
                const double d0 = (double)pred[t][p] - (double)gt[t][p];
                const double d1 = o_bilinear(pred[t + 1], ay, ax) - o_bilinear(gt[t + 1], ay, ax);
                acc += std::abs(d0 * d0 - d1 * d1);
                ++terms;
            }
    }
    return terms == 0 ? 0.0 : acc / (double)terms * 1000.0;
}

}  // namespace oracle
