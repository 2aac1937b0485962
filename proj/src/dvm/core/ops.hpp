// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dvm/core/gemm.hpp"
#include "dvm/core/graph.hpp"
#include "dvm/core/tensor.hpp"

// Primitive differentiable ops. Everything is eager: the forward value is
// computed on construction and a backward closure is recorded only when grad
// mode is on and some input requires it. Backward closures recompute cheap
// geometry from parent values instead of caching large buffers.
namespace dvm::ops {

template <class T>
NodeP<T> make_op(TensorT<T> val, std::vector<NodeP<T>> parents,
                 std::function<void(NodeT<T>&)> back) {
    auto n = std::make_shared<NodeT<T>>();
    n->val = std::move(val);
    bool need = false;
    if (grad_mode())
        for (const auto& p : parents)
            if (p->requires_grad) need = true;
    if (need) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->back = std::move(back);
    }
    return n;
}

template <class T>
void check_same_shape(const NodeP<T>& a, const NodeP<T>& b, const char* op) {
    if (!a->val.same_shape(b->val))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a->val.shape_str() +
                                    " vs " + b->val.shape_str());
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <class T>
NodeP<T> add(const NodeP<T>& a, const NodeP<T>& b) {
    check_same_shape(a, b, "add");
    TensorT<T> v(a->val.dims());
    kern::add(a->val.data(), b->val.data(), v.data(), v.size());
    return make_op<T>(std::move(v), {a, b}, [a, b](NodeT<T>& o) {
        if (a->requires_grad) a->add_grad(o.grad);
        if (b->requires_grad) b->add_grad(o.grad);
    });
}

template <class T>
NodeP<T> sub(const NodeP<T>& a, const NodeP<T>& b) {
    check_same_shape(a, b, "sub");
    TensorT<T> v(a->val.dims());
    kern::sub(a->val.data(), b->val.data(), v.data(), v.size());
    return make_op<T>(std::move(v), {a, b}, [a, b](NodeT<T>& o) {
        if (a->requires_grad) a->add_grad(o.grad);
        if (b->requires_grad) kern::axpy(T(-1), o.grad.data(), b->grad_buf().data(), o.grad.size());
    });
}

template <class T>
NodeP<T> mul(const NodeP<T>& a, const NodeP<T>& b) {
    check_same_shape(a, b, "mul");
    TensorT<T> v(a->val.dims());
    kern::mul(a->val.data(), b->val.data(), v.data(), v.size());
    return make_op<T>(std::move(v), {a, b}, [a, b](NodeT<T>& o) {
        const std::size_t n = o.grad.size();
        if (a->requires_grad) {
            TensorT<T>& ga = a->grad_buf();
            for (std::size_t i = 0; i < n; ++i) ga[i] += o.grad[i] * b->val[i];
        }
        if (b->requires_grad) {
            TensorT<T>& gb = b->grad_buf();
            for (std::size_t i = 0; i < n; ++i) gb[i] += o.grad[i] * a->val[i];
        }
    });
}

template <class T>
NodeP<T> mul_scalar(const NodeP<T>& a, T s) {
    TensorT<T> v(a->val.dims());
    kern::scale(s, a->val.data(), v.data(), v.size());
    return make_op<T>(std::move(v), {a}, [a, s](NodeT<T>& o) {
        kern::axpy(s, o.grad.data(), a->grad_buf().data(), o.grad.size());
    });
}

template <class T>
NodeP<T> add_scalar(const NodeP<T>& a, T s) {
    TensorT<T> v(a->val.dims());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->val[i] + s;
    return make_op<T>(std::move(v), {a}, [a](NodeT<T>& o) { a->add_grad(o.grad); });
}

// out = s - x
template <class T>
NodeP<T> rsub_scalar(T s, const NodeP<T>& a) {
    TensorT<T> v(a->val.dims());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = s - a->val[i];
    return make_op<T>(std::move(v), {a}, [a](NodeT<T>& o) {
        kern::axpy(T(-1), o.grad.data(), a->grad_buf().data(), o.grad.size());
    });
}

// out = x - c (c is a plain tensor, no gradient)
template <class T>
NodeP<T> sub_const(const NodeP<T>& a, const TensorT<T>& c) {
    if (!a->val.same_shape(c)) throw std::invalid_argument("sub_const: shape mismatch");
    TensorT<T> v(a->val.dims());
    kern::sub(a->val.data(), c.data(), v.data(), v.size());
    return make_op<T>(std::move(v), {a}, [a](NodeT<T>& o) { a->add_grad(o.grad); });
}

// out = x * c elementwise (constant mask / weight map)
template <class T>
NodeP<T> mul_const(const NodeP<T>& a, const TensorT<T>& c) {
    if (!a->val.same_shape(c)) throw std::invalid_argument("mul_const: shape mismatch");
    TensorT<T> v(a->val.dims());
    kern::mul(a->val.data(), c.data(), v.data(), v.size());
    TensorT<T> ck = c;
    return make_op<T>(std::move(v), {a}, [a, ck](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i] * ck[i];
    });
}

template <class T>
NodeP<T> square(const NodeP<T>& a) {
    TensorT<T> v(a->val.dims());
    kern::mul(a->val.data(), a->val.data(), v.data(), v.size());
    return make_op<T>(std::move(v), {a}, [a](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += T(2) * a->val[i] * o.grad[i];
    });
}

template <class T>
NodeP<T> abs_val(const NodeP<T>& a) {
    TensorT<T> v(a->val.dims());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(a->val[i]);
    return make_op<T>(std::move(v), {a}, [a](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            const T x = a->val[i];
            if (x > T(0))
                ga[i] += o.grad[i];
            else if (x < T(0))
                ga[i] -= o.grad[i];
        }
    });
}

template <class T>
NodeP<T> log_eps(const NodeP<T>& a, T eps) {
    TensorT<T> v(a->val.dims());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(a->val[i] + eps);
    return make_op<T>(std::move(v), {a, }, [a, eps](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i] / (a->val[i] + eps);
    });
}

template <class T>
NodeP<T> sigmoid(const NodeP<T>& a) {
    TensorT<T> v(a->val.dims());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = T(1) / (T(1) + std::exp(-a->val[i]));
    TensorT<T> saved = v;
    return make_op<T>(std::move(v), {a}, [a, saved](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            const T s = saved[i];
            ga[i] += o.grad[i] * s * (T(1) - s);
        }
    });
}

template <class T>
NodeP<T> relu(const NodeP<T>& a) {
    TensorT<T> v(a->val.dims());
    kern::relu(a->val.data(), v.data(), v.size());
    return make_op<T>(std::move(v), {a}, [a](NodeT<T>& o) {
        kern::relu_bwd(a->val.data(), o.grad.data(), a->grad_buf().data(), o.grad.size());
    });
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts
// ---------------------------------------------------------------------------

template <class T>
NodeP<T> reduce_sum(const NodeP<T>& a) {
    TensorT<T> v({1});
    v[0] = kern::sum(a->val.data(), a->val.size());
    return make_op<T>(std::move(v), {a}, [a](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        const T g = o.grad[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

template <class T>
NodeP<T> reduce_mean(const NodeP<T>& a) {
    const T inv = T(1) / static_cast<T>(a->val.size());
    TensorT<T> v({1});
    v[0] = kern::sum(a->val.data(), a->val.size()) * inv;
    return make_op<T>(std::move(v), {a}, [a, inv](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        const T g = o.grad[0] * inv;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

// C x H x W -> 1 x H x W, summing channels.
template <class T>
NodeP<T> sum_channels(const NodeP<T>& a) {
    if (a->val.rank() != 3) throw std::invalid_argument("sum_channels: rank-3 input expected");
    const int C = a->val.dim(0), H = a->val.dim(1), W = a->val.dim(2);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    TensorT<T> v({1, H, W});
    for (int c = 0; c < C; ++c) kern::add(v.data(), a->val.data() + c * plane, v.data(), plane);
    return make_op<T>(std::move(v), {a}, [a, C, plane](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (int c = 0; c < C; ++c)
            kern::add(ga.data() + c * plane, o.grad.data(), ga.data() + c * plane, plane);
    });
}

// C x H x W -> C (spatial mean per channel).
template <class T>
NodeP<T> global_avg_pool(const NodeP<T>& a) {
    if (a->val.rank() != 3) throw std::invalid_argument("global_avg_pool: rank-3 input expected");
    const int C = a->val.dim(0), H = a->val.dim(1), W = a->val.dim(2);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const T inv = T(1) / static_cast<T>(plane);
    TensorT<T> v({C});
    for (int c = 0; c < C; ++c) v[c] = kern::sum(a->val.data() + c * plane, plane) * inv;
    return make_op<T>(std::move(v), {a}, [a, C, plane, inv](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (int c = 0; c < C; ++c) {
            const T g = o.grad[c] * inv;
            T* gp = ga.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) gp[i] += g;
        }
    });
}

// x: C x H x W scaled per channel by s: C.
template <class T>
NodeP<T> channel_scale(const NodeP<T>& x, const NodeP<T>& s) {
    if (x->val.rank() != 3 || s->val.rank() != 1 || s->val.dim(0) != x->val.dim(0))
        throw std::invalid_argument("channel_scale: bad shapes");
    const int C = x->val.dim(0);
    const std::size_t plane = x->val.size() / C;
    TensorT<T> v(x->val.dims());
    for (int c = 0; c < C; ++c)
        kern::scale(s->val[c], x->val.data() + c * plane, v.data() + c * plane, plane);
    return make_op<T>(std::move(v), {x, s}, [x, s, C, plane](NodeT<T>& o) {
        if (x->requires_grad) {
            TensorT<T>& gx = x->grad_buf();
            for (int c = 0; c < C; ++c)
                kern::axpy(s->val[c], o.grad.data() + c * plane, gx.data() + c * plane, plane);
        }
        if (s->requires_grad) {
            TensorT<T>& gs = s->grad_buf();
            for (int c = 0; c < C; ++c)
                gs[c] += kern::dot(o.grad.data() + c * plane, x->val.data() + c * plane, plane);
        }
    });
}

// x: C x H x W multiplied by m: 1 x H x W broadcast over channels.
template <class T>
NodeP<T> mul_bcast1(const NodeP<T>& x, const NodeP<T>& m) {
    if (x->val.rank() != 3 || m->val.rank() != 3 || m->val.dim(0) != 1 ||
        m->val.dim(1) != x->val.dim(1) || m->val.dim(2) != x->val.dim(2))
        throw std::invalid_argument("mul_bcast1: bad shapes");
    const int C = x->val.dim(0);
    const std::size_t plane = x->val.size() / C;
    TensorT<T> v(x->val.dims());
    for (int c = 0; c < C; ++c)
        kern::mul(x->val.data() + c * plane, m->val.data(), v.data() + c * plane, plane);
    return make_op<T>(std::move(v), {x, m}, [x, m, C, plane](NodeT<T>& o) {
        if (x->requires_grad) {
            TensorT<T>& gx = x->grad_buf();
            for (int c = 0; c < C; ++c) {
                const T* g = o.grad.data() + c * plane;
                const T* mm = m->val.data();
                T* dst = gx.data() + c * plane;
                for (std::size_t i = 0; i < plane; ++i) dst[i] += g[i] * mm[i];
            }
        }
        if (m->requires_grad) {
            TensorT<T>& gm = m->grad_buf();
            for (int c = 0; c < C; ++c) {
                const T* g = o.grad.data() + c * plane;
                const T* xx = x->val.data() + c * plane;
                for (std::size_t i = 0; i < plane; ++i) gm[i] += g[i] * xx[i];
            }
        }
    });
}

// out = x / (s[0] + eps) where s is a single-element node.
template <class T>
NodeP<T> div_by_scalar_node(const NodeP<T>& x, const NodeP<T>& s, T eps) {
    if (s->val.size() != 1) throw std::invalid_argument("div_by_scalar_node: scalar node expected");
    const T denom = s->val[0] + eps;
    TensorT<T> v(x->val.dims());
    kern::scale(T(1) / denom, x->val.data(), v.data(), v.size());
    return make_op<T>(std::move(v), {x, s}, [x, s, denom](NodeT<T>& o) {
        if (x->requires_grad)
            kern::axpy(T(1) / denom, o.grad.data(), x->grad_buf().data(), o.grad.size());
        if (s->requires_grad) {
            T acc = kern::dot(o.grad.data(), x->val.data(), o.grad.size());
            s->grad_buf()[0] -= acc / (denom * denom);
        }
    });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class T>
NodeP<T> reshape(const NodeP<T>& a, std::initializer_list<int> dims) {
    TensorT<T> v = a->val.reshaped(dims);
    std::vector<int> adims = a->val.dims();
    return make_op<T>(std::move(v), {a}, [a, adims](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        kern::add(ga.data(), o.grad.data(), ga.data(), ga.size());
    });
}

template <class T>
NodeP<T> concat_c(const std::vector<NodeP<T>>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_c: empty input");
    const int H = xs[0]->val.dim(1), W = xs[0]->val.dim(2);
    int C = 0;
    for (const auto& x : xs) {
        if (x->val.rank() != 3 || x->val.dim(1) != H || x->val.dim(2) != W)
            throw std::invalid_argument("concat_c: spatial mismatch");
        C += x->val.dim(0);
    }
    TensorT<T> v({C, H, W});
    std::size_t off = 0;
    for (const auto& x : xs) {
        std::copy(x->val.data(), x->val.data() + x->val.size(), v.data() + off);
        off += x->val.size();
    }
    std::vector<NodeP<T>> parents = xs;
    return make_op<T>(std::move(v), std::move(parents), [xs](NodeT<T>& o) {
        std::size_t off = 0;
        for (const auto& x : xs) {
            if (x->requires_grad) {
                TensorT<T>& gx = x->grad_buf();
                kern::add(gx.data(), o.grad.data() + off, gx.data(), gx.size());
            }
            off += x->val.size();
        }
    });
}

// C x H x W -> (H*W) x C token matrix.
template <class T>
NodeP<T> chw_to_mat(const NodeP<T>& a) {
    if (a->val.rank() != 3) throw std::invalid_argument("chw_to_mat: rank-3 input expected");
    const int C = a->val.dim(0), H = a->val.dim(1), W = a->val.dim(2);
    const int P = H * W;
    TensorT<T> v({P, C});
    for (int c = 0; c < C; ++c)
        for (int p = 0; p < P; ++p) v.at(p, c) = a->val[static_cast<std::size_t>(c) * P + p];
    return make_op<T>(std::move(v), {a}, [a, C, P](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (int c = 0; c < C; ++c)
            for (int p = 0; p < P; ++p) ga[static_cast<std::size_t>(c) * P + p] += o.grad.at(p, c);
    });
}

// (H*W) x C token matrix -> C x H x W.
template <class T>
NodeP<T> mat_to_chw(const NodeP<T>& a, int H, int W) {
    if (a->val.rank() != 2 || a->val.dim(0) != H * W)
        throw std::invalid_argument("mat_to_chw: bad shapes");
    const int P = H * W, C = a->val.dim(1);
    TensorT<T> v({C, H, W});
    for (int p = 0; p < P; ++p)
        for (int c = 0; c < C; ++c) v[static_cast<std::size_t>(c) * P + p] = a->val.at(p, c);
    return make_op<T>(std::move(v), {a}, [a, C, P](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (int p = 0; p < P; ++p)
            for (int c = 0; c < C; ++c) ga.at(p, c) += o.grad[static_cast<std::size_t>(c) * P + p];
    });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

template <class T>
NodeP<T> matmul(const NodeP<T>& a, const NodeP<T>& b, bool ta = false, bool tb = false) {
    if (a->val.rank() != 2 || b->val.rank() != 2) throw std::invalid_argument("matmul: rank-2 only");
    if (ta && tb) throw std::invalid_argument("matmul: ta && tb unsupported");
    const int M = ta ? a->val.dim(1) : a->val.dim(0);
    const int K = ta ? a->val.dim(0) : a->val.dim(1);
    const int Kb = tb ? b->val.dim(1) : b->val.dim(0);
    const int N = tb ? b->val.dim(0) : b->val.dim(1);
    if (K != Kb) throw std::invalid_argument("matmul: inner dim mismatch");
    TensorT<T> v({M, N});
    gemm<T>(ta, tb, M, N, K, T(1), a->val.data(), a->val.dim(1), b->val.data(), b->val.dim(1), T(0),
            v.data(), N);
    return make_op<T>(std::move(v), {a, b}, [a, b, ta, tb, M, N, K](NodeT<T>& o) {
        if (a->requires_grad) {
            TensorT<T>& ga = a->grad_buf();
            if (!ta && !tb)  // dA = dC * B^T
                gemm<T>(false, true, M, K, N, T(1), o.grad.data(), N, b->val.data(),
                        b->val.dim(1), T(1), ga.data(), ga.dim(1));
            else if (!ta && tb)  // dA = dC * B
                gemm<T>(false, false, M, K, N, T(1), o.grad.data(), N, b->val.data(),
                        b->val.dim(1), T(1), ga.data(), ga.dim(1));
            else  // ta: A is K x M; dA = B * dC^T
                gemm<T>(false, true, K, M, N, T(1), b->val.data(), b->val.dim(1), o.grad.data(),
                        N, T(1), ga.data(), ga.dim(1));
        }
        if (b->requires_grad) {
            TensorT<T>& gb = b->grad_buf();
            if (!ta && !tb)  // dB = A^T * dC
                gemm<T>(true, false, K, N, M, T(1), a->val.data(), a->val.dim(1), o.grad.data(),
                        N, T(1), gb.data(), gb.dim(1));
            else if (!ta && tb)  // dB = dC^T * A
                gemm<T>(true, false, N, K, M, T(1), o.grad.data(), N, a->val.data(),
                        a->val.dim(1), T(1), gb.data(), gb.dim(1));
            else  // dB = A * dC
                gemm<T>(false, false, K, N, M, T(1), a->val.data(), a->val.dim(1), o.grad.data(),
                        N, T(1), gb.data(), gb.dim(1));
        }
    });
}

// y = W x + b with W: out x in, x: in, b: out (b may be null).
template <class T>
NodeP<T> linear(const NodeP<T>& x, const NodeP<T>& w, const NodeP<T>& b) {
    if (x->val.rank() != 1 || w->val.rank() != 2 || w->val.dim(1) != x->val.dim(0))
        throw std::invalid_argument("linear: bad shapes");
    const int out = w->val.dim(0), in = w->val.dim(1);
    TensorT<T> v({out});
    for (int o = 0; o < out; ++o)
        v[o] = kern::dot(w->val.data() + static_cast<std::size_t>(o) * in, x->val.data(),
                         static_cast<std::size_t>(in));
    if (b) {
        if (b->val.size() != static_cast<std::size_t>(out))
            throw std::invalid_argument("linear: bias size mismatch");
        kern::add(v.data(), b->val.data(), v.data(), v.size());
    }
    std::vector<NodeP<T>> parents = b ? std::vector<NodeP<T>>{x, w, b} : std::vector<NodeP<T>>{x, w};
    return make_op<T>(std::move(v), std::move(parents), [x, w, b, out, in](NodeT<T>& o) {
        if (x->requires_grad) {
            TensorT<T>& gx = x->grad_buf();
            for (int i = 0; i < out; ++i)
                kern::axpy(o.grad[i], w->val.data() + static_cast<std::size_t>(i) * in, gx.data(),
                           static_cast<std::size_t>(in));
        }
        if (w->requires_grad) {
            TensorT<T>& gw = w->grad_buf();
            for (int i = 0; i < out; ++i)
                kern::axpy(o.grad[i], x->val.data(), gw.data() + static_cast<std::size_t>(i) * in,
                           static_cast<std::size_t>(in));
        }
        if (b && b->requires_grad) b->add_grad(o.grad);
    });
}

// Row-wise softmax of a 2-D matrix.
template <class T>
NodeP<T> softmax_rows(const NodeP<T>& a) {
    if (a->val.rank() != 2) throw std::invalid_argument("softmax_rows: rank-2 only");
    const int R = a->val.dim(0), C = a->val.dim(1);
    TensorT<T> v({R, C});
    for (int r = 0; r < R; ++r) {
        const T* row = a->val.data() + static_cast<std::size_t>(r) * C;
        T* out = v.data() + static_cast<std::size_t>(r) * C;
        T mx = row[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        T z = T(0);
        for (int c = 0; c < C; ++c) {
            out[c] = std::exp(row[c] - mx);
            z += out[c];
        }
        const T inv = T(1) / z;
        for (int c = 0; c < C; ++c) out[c] *= inv;
    }
    TensorT<T> saved = v;
    return make_op<T>(std::move(v), {a}, [a, saved, R, C](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (int r = 0; r < R; ++r) {
            const T* s = saved.data() + static_cast<std::size_t>(r) * C;
            const T* g = o.grad.data() + static_cast<std::size_t>(r) * C;
            T dotsg = kern::dot(s, g, static_cast<std::size_t>(C));
            T* dst = ga.data() + static_cast<std::size_t>(r) * C;
            for (int c = 0; c < C; ++c) dst[c] += s[c] * (g[c] - dotsg);
        }
    });
}

// ---------------------------------------------------------------------------
// Spatial ops
// ---------------------------------------------------------------------------

template <class T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int pad_y, int pad_x,
            int Ho, int Wo, T* col) {
    const int P = Ho * Wo;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                T* dst = col + (static_cast<std::size_t>(c) * kh * kw + ky * kw + kx) * P;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride + ky - pad_y;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride + kx - pad_x;
                        dst[oy * Wo + ox] =
                            (iy >= 0 && iy < H && ix >= 0 && ix < W)
                                ? x[(static_cast<std::size_t>(c) * H + iy) * W + ix]
                                : T(0);
                    }
                }
            }
}

template <class T>
void col2im_accum(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad_y,
                  int pad_x, int Ho, int Wo, T* x) {
    const int P = Ho * Wo;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                const T* src = col + (static_cast<std::size_t>(c) * kh * kw + ky * kw + kx) * P;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride + ky - pad_y;
                    if (iy < 0 || iy >= H) continue;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride + kx - pad_x;
                        if (ix < 0 || ix >= W) continue;
                        x[(static_cast<std::size_t>(c) * H + iy) * W + ix] += src[oy * Wo + ox];
                    }
                }
            }
}

// x: C x H x W, w: O x C x kh x kw, optional b: O.
template <class T>
NodeP<T> conv2d(const NodeP<T>& x, const NodeP<T>& w, const NodeP<T>& b, int stride, int pad_y,
                int pad_x) {
    if (x->val.rank() != 3 || w->val.rank() != 4) throw std::invalid_argument("conv2d: bad ranks");
    const int C = x->val.dim(0), H = x->val.dim(1), W = x->val.dim(2);
    const int O = w->val.dim(0), kh = w->val.dim(2), kw = w->val.dim(3);
    if (w->val.dim(1) != C) throw std::invalid_argument("conv2d: weight shape mismatch");
    const int Ho = (H + 2 * pad_y - kh) / stride + 1;
    const int Wo = (W + 2 * pad_x - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv2d: empty output");
    const int P = Ho * Wo, CKK = C * kh * kw;

    std::vector<T> col(static_cast<std::size_t>(CKK) * P);
    im2col(x->val.data(), C, H, W, kh, kw, stride, pad_y, pad_x, Ho, Wo, col.data());
    TensorT<T> v({O, Ho, Wo});
    gemm<T>(false, false, O, P, CKK, T(1), w->val.data(), CKK, col.data(), P, T(0), v.data(), P);
    if (b) {
        for (int o = 0; o < O; ++o) {
            T* dst = v.data() + static_cast<std::size_t>(o) * P;
            const T bv = b->val[o];
            for (int p = 0; p < P; ++p) dst[p] += bv;
        }
    }
    std::vector<NodeP<T>> parents = b ? std::vector<NodeP<T>>{x, w, b} : std::vector<NodeP<T>>{x, w};
    return make_op<T>(std::move(v), std::move(parents),
                      [x, w, b, C, H, W, O, kh, kw, stride, pad_y, pad_x, Ho, Wo, P,
                       CKK](NodeT<T>& o) {
        // im2col is recomputed here; graphs would otherwise pin large buffers.
        std::vector<T> col(static_cast<std::size_t>(CKK) * P);
        im2col(x->val.data(), C, H, W, kh, kw, stride, pad_y, pad_x, Ho, Wo, col.data());
        if (w->requires_grad) {
            TensorT<T>& gw = w->grad_buf();
            gemm<T>(false, true, O, CKK, P, T(1), o.grad.data(), P, col.data(), P, T(1), gw.data(),
                    CKK);
        }
        if (b && b->requires_grad) {
            TensorT<T>& gb = b->grad_buf();
            for (int i = 0; i < O; ++i)
                gb[i] += kern::sum(o.grad.data() + static_cast<std::size_t>(i) * P,
                                   static_cast<std::size_t>(P));
        }
        if (x->requires_grad) {
            std::vector<T> dcol(static_cast<std::size_t>(CKK) * P);
            gemm<T>(true, false, CKK, P, O, T(1), w->val.data(), CKK, o.grad.data(), P, T(0),
                    dcol.data(), P);
            col2im_accum(dcol.data(), C, H, W, kh, kw, stride, pad_y, pad_x, Ho, Wo,
                         x->grad_buf().data());
        }
    });
}

// Square-kernel convenience overload.
template <class T>
NodeP<T> conv2d(const NodeP<T>& x, const NodeP<T>& w, const NodeP<T>& b, int stride, int pad) {
    return conv2d(x, w, b, stride, pad, pad);
}

template <class T>
NodeP<T> pad_replicate(const NodeP<T>& a, int p) {
    if (a->val.rank() != 3) throw std::invalid_argument("pad_replicate: rank-3 input expected");
    const int C = a->val.dim(0), H = a->val.dim(1), W = a->val.dim(2);
    const int Ho = H + 2 * p, Wo = W + 2 * p;
    TensorT<T> v({C, Ho, Wo});
    auto clampi = [](int x, int hi) { return x < 0 ? 0 : (x > hi ? hi : x); };
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < Ho; ++y) {
            const int sy = clampi(y - p, H - 1);
            for (int x2 = 0; x2 < Wo; ++x2)
                v.at(c, y, x2) = a->val.at(c, sy, clampi(x2 - p, W - 1));
        }
    return make_op<T>(std::move(v), {a}, [a, C, H, W, p, Ho, Wo](NodeT<T>& o) {
        auto clampi = [](int x, int hi) { return x < 0 ? 0 : (x > hi ? hi : x); };
        TensorT<T>& ga = a->grad_buf();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < Ho; ++y) {
                const int sy = clampi(y - p, H - 1);
                for (int x2 = 0; x2 < Wo; ++x2)
                    ga.at(c, sy, clampi(x2 - p, W - 1)) += o.grad.at(c, y, x2);
            }
    });
}

// (C*r*r) x H x W -> C x (r*H) x (r*W); out[c][y*r+i][x*r+j] = in[c*r*r+i*r+j][y][x].
template <class T>
NodeP<T> depth_to_space(const NodeP<T>& a, int r) {
    if (a->val.rank() != 3 || a->val.dim(0) % (r * r) != 0)
        throw std::invalid_argument("depth_to_space: channels not divisible by r^2");
    const int C = a->val.dim(0) / (r * r), H = a->val.dim(1), W = a->val.dim(2);
    TensorT<T> v({C, H * r, W * r});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        v.at(c, y * r + i, x * r + j) = a->val.at(c * r * r + i * r + j, y, x);
    return make_op<T>(std::move(v), {a}, [a, C, H, W, r](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j)
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x < W; ++x)
                            ga.at(c * r * r + i * r + j, y, x) += o.grad.at(c, y * r + i, x * r + j);
    });
}

template <class T>
NodeP<T> upsample_nearest2(const NodeP<T>& a) {
    if (a->val.rank() != 3) throw std::invalid_argument("upsample_nearest2: rank-3 input expected");
    const int C = a->val.dim(0), H = a->val.dim(1), W = a->val.dim(2);
    TensorT<T> v({C, H * 2, W * 2});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H * 2; ++y)
            for (int x = 0; x < W * 2; ++x) v.at(c, y, x) = a->val.at(c, y / 2, x / 2);
    return make_op<T>(std::move(v), {a}, [a, C, H, W](NodeT<T>& o) {
        TensorT<T>& ga = a->grad_buf();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H * 2; ++y)
                for (int x = 0; x < W * 2; ++x) ga.at(c, y / 2, x / 2) += o.grad.at(c, y, x);
    });
}

// ---------------------------------------------------------------------------
// Deformable convolution (stride 1, same-size output)
// ---------------------------------------------------------------------------
//
// offsets: (2*k*k) x H x W with channel 2t = dy and 2t+1 = dx for tap t in
// row-major (ky,kx) order. Sampling is bilinear with zero outside the frame.

template <class T>
struct BilinearTap {
    int y0, x0;
    T fy, fx;
};

template <class T>
inline T bilinear_sample_zero(const T* plane, int H, int W, const BilinearTap<T>& t) {
    const int y0 = t.y0, x0 = t.x0, y1 = y0 + 1, x1 = x0 + 1;
    auto v = [&](int y, int x) -> T {
        return (y >= 0 && y < H && x >= 0 && x < W) ? plane[static_cast<std::size_t>(y) * W + x]
                                                    : T(0);
    };
    const T w00 = (T(1) - t.fy) * (T(1) - t.fx), w01 = (T(1) - t.fy) * t.fx;
    const T w10 = t.fy * (T(1) - t.fx), w11 = t.fy * t.fx;
    return w00 * v(y0, x0) + w01 * v(y0, x1) + w10 * v(y1, x0) + w11 * v(y1, x1);
}

template <class T>
NodeP<T> deform_conv2d(const NodeP<T>& x, const NodeP<T>& offsets, const NodeP<T>& w,
                       const NodeP<T>& b) {
    if (x->val.rank() != 3 || w->val.rank() != 4 || offsets->val.rank() != 3)
        throw std::invalid_argument("deform_conv2d: bad ranks");
    const int C = x->val.dim(0), H = x->val.dim(1), W = x->val.dim(2);
    const int O = w->val.dim(0), k = w->val.dim(2);
    const int pad = k / 2;
    if (w->val.dim(1) != C || w->val.dim(3) != k)
        throw std::invalid_argument("deform_conv2d: weight shape mismatch");
    if (offsets->val.dim(0) != 2 * k * k || offsets->val.dim(1) != H || offsets->val.dim(2) != W)
        throw std::invalid_argument("deform_conv2d: offset shape mismatch");
    for (std::size_t i = 0; i < offsets->val.size(); ++i)
        if (!std::isfinite(static_cast<double>(offsets->val[i])))
            throw std::invalid_argument("deform_conv2d: non-finite offsets");

    const int P = H * W, KK = k * k, CKK = C * KK;
    const std::size_t plane = static_cast<std::size_t>(P);

    auto fill_col = [C, H, W, k, pad, P, KK](const T* xv, const T* off, T* col) {
        for (int t = 0; t < KK; ++t) {
            const int ky = t / k, kx = t % k;
            const T* offy = off + static_cast<std::size_t>(2 * t) * P;
            const T* offx = off + static_cast<std::size_t>(2 * t + 1) * P;
            for (int y = 0; y < H; ++y)
                for (int x2 = 0; x2 < W; ++x2) {
                    const int p = y * W + x2;
                    const T sy = static_cast<T>(y + ky - pad) + offy[p];
                    const T sx = static_cast<T>(x2 + kx - pad) + offx[p];
                    BilinearTap<T> tap;
                    tap.y0 = static_cast<int>(std::floor(sy));
                    tap.x0 = static_cast<int>(std::floor(sx));
                    tap.fy = sy - static_cast<T>(tap.y0);
                    tap.fx = sx - static_cast<T>(tap.x0);
                    for (int c = 0; c < C; ++c)
                        col[(static_cast<std::size_t>(c) * KK + t) * P + p] = bilinear_sample_zero(
                            xv + static_cast<std::size_t>(c) * P, H, W, tap);
                }
        }
    };

    std::vector<T> col(static_cast<std::size_t>(CKK) * P);
    fill_col(x->val.data(), offsets->val.data(), col.data());
    TensorT<T> v({O, H, W});
    gemm<T>(false, false, O, P, CKK, T(1), w->val.data(), CKK, col.data(), P, T(0), v.data(), P);
    if (b) {
        for (int o = 0; o < O; ++o) {
            T* dst = v.data() + static_cast<std::size_t>(o) * plane;
            for (int p = 0; p < P; ++p) dst[p] += b->val[o];
        }
    }

    std::vector<NodeP<T>> parents =
        b ? std::vector<NodeP<T>>{x, offsets, w, b} : std::vector<NodeP<T>>{x, offsets, w};
    return make_op<T>(
        std::move(v), std::move(parents),
        [x, offsets, w, b, C, H, W, O, k, pad, P, KK, CKK, fill_col](NodeT<T>& o) {
            std::vector<T> col(static_cast<std::size_t>(CKK) * P);
            fill_col(x->val.data(), offsets->val.data(), col.data());
            if (w->requires_grad) {
                gemm<T>(false, true, O, CKK, P, T(1), o.grad.data(), P, col.data(), P, T(1),
                        w->grad_buf().data(), CKK);
            }
            if (b && b->requires_grad) {
                TensorT<T>& gb = b->grad_buf();
                for (int i = 0; i < O; ++i)
                    gb[i] += kern::sum(o.grad.data() + static_cast<std::size_t>(i) * P,
                                       static_cast<std::size_t>(P));
            }
            if (!x->requires_grad && !offsets->requires_grad) return;
            std::vector<T> dcol(static_cast<std::size_t>(CKK) * P);
            gemm<T>(true, false, CKK, P, O, T(1), w->val.data(), CKK, o.grad.data(), P, T(0),
                    dcol.data(), P);
            T* gx = x->requires_grad ? x->grad_buf().data() : nullptr;
            T* goff = offsets->requires_grad ? offsets->grad_buf().data() : nullptr;
            const T* xv = x->val.data();
            const T* off = offsets->val.data();
            for (int t = 0; t < KK; ++t) {
                const int ky = t / k, kx = t % k;
                const T* offy = off + static_cast<std::size_t>(2 * t) * P;
                const T* offx = off + static_cast<std::size_t>(2 * t + 1) * P;
                for (int y = 0; y < H; ++y)
                    for (int x2 = 0; x2 < W; ++x2) {
                        const int p = y * W + x2;
                        const T sy = static_cast<T>(y + ky - pad) + offy[p];
                        const T sx = static_cast<T>(x2 + kx - pad) + offx[p];
                        const int y0 = static_cast<int>(std::floor(sy));
                        const int x0 = static_cast<int>(std::floor(sx));
                        const T fy = sy - static_cast<T>(y0);
                        const T fx = sx - static_cast<T>(x0);
                        const bool in00 = y0 >= 0 && y0 < H && x0 >= 0 && x0 < W;
                        const bool in01 = y0 >= 0 && y0 < H && x0 + 1 >= 0 && x0 + 1 < W;
                        const bool in10 = y0 + 1 >= 0 && y0 + 1 < H && x0 >= 0 && x0 < W;
                        const bool in11 = y0 + 1 >= 0 && y0 + 1 < H && x0 + 1 >= 0 && x0 + 1 < W;
                        T dsy = T(0), dsx = T(0);
                        for (int c = 0; c < C; ++c) {
                            const T g = dcol[(static_cast<std::size_t>(c) * KK + t) * P + p];
                            if (g == T(0)) continue;
                            const T* xp = xv + static_cast<std::size_t>(c) * P;
                            const T v00 = in00 ? xp[static_cast<std::size_t>(y0) * W + x0] : T(0);
                            const T v01 = in01 ? xp[static_cast<std::size_t>(y0) * W + x0 + 1] : T(0);
                            const T v10 = in10 ? xp[static_cast<std::size_t>(y0 + 1) * W + x0] : T(0);
                            const T v11 =
                                in11 ? xp[static_cast<std::size_t>(y0 + 1) * W + x0 + 1] : T(0);
                            if (gx != nullptr) {
                                T* gp = gx + static_cast<std::size_t>(c) * P;
                                if (in00) gp[static_cast<std::size_t>(y0) * W + x0] +=
                                    g * (T(1) - fy) * (T(1) - fx);
                                if (in01) gp[static_cast<std::size_t>(y0) * W + x0 + 1] +=
                                    g * (T(1) - fy) * fx;
                                if (in10) gp[static_cast<std::size_t>(y0 + 1) * W + x0] +=
                                    g * fy * (T(1) - fx);
                                if (in11) gp[static_cast<std::size_t>(y0 + 1) * W + x0 + 1] +=
                                    g * fy * fx;
                            }
                            if (goff != nullptr) {
                                dsy += g * (-(T(1) - fx) * v00 - fx * v01 + (T(1) - fx) * v10 +
                                            fx * v11);
                                dsx += g * (-(T(1) - fy) * v00 + (T(1) - fy) * v01 - fy * v10 +
                                            fy * v11);
                            }
                        }
                        if (goff != nullptr) {
                            goff[static_cast<std::size_t>(2 * t) * P + p] += dsy;
                            goff[static_cast<std::size_t>(2 * t + 1) * P + p] += dsx;
                        }
                    }
            }
        });
}

// ---------------------------------------------------------------------------
// Classification loss
// ---------------------------------------------------------------------------

// logits: K x H x W; labels: H x W with integral values in [0, K). Returns the
// mean softmax cross-entropy over all pixels.
template <class T>
NodeP<T> softmax_ce(const NodeP<T>& logits, const TensorT<T>& labels) {
    if (logits->val.rank() != 3) throw std::invalid_argument("softmax_ce: rank-3 logits expected");
    const int K = logits->val.dim(0), H = logits->val.dim(1), W = logits->val.dim(2);
    if (labels.rank() != 2 || labels.dim(0) != H || labels.dim(1) != W)
        throw std::invalid_argument("softmax_ce: label shape mismatch");
    const int P = H * W;
    const T invP = T(1) / static_cast<T>(P);
    TensorT<T> v({1});
    T acc = T(0);
    for (int p = 0; p < P; ++p) {
        T mx = logits->val[p];
        for (int c = 1; c < K; ++c) mx = std::max(mx, logits->val[static_cast<std::size_t>(c) * P + p]);
        T z = T(0);
        for (int c = 0; c < K; ++c) z += std::exp(logits->val[static_cast<std::size_t>(c) * P + p] - mx);
        const int y = static_cast<int>(labels[p]);
        acc += -(logits->val[static_cast<std::size_t>(y) * P + p] - mx - std::log(z));
    }
    v[0] = acc * invP;
    TensorT<T> lab = labels;
    return make_op<T>(std::move(v), {logits}, [logits, lab, K, P, invP](NodeT<T>& o) {
        TensorT<T>& gl = logits->grad_buf();
        const T g = o.grad[0] * invP;
        for (int p = 0; p < P; ++p) {
            T mx = logits->val[p];
            for (int c = 1; c < K; ++c)
                mx = std::max(mx, logits->val[static_cast<std::size_t>(c) * P + p]);
            T z = T(0);
            for (int c = 0; c < K; ++c)
                z += std::exp(logits->val[static_cast<std::size_t>(c) * P + p] - mx);
            const int y = static_cast<int>(lab[p]);
            for (int c = 0; c < K; ++c) {
                const T soft = std::exp(logits->val[static_cast<std::size_t>(c) * P + p] - mx) / z;
                gl[static_cast<std::size_t>(c) * P + p] += g * (soft - (c == y ? T(1) : T(0)));
            }
        }
    });
}

}  // namespace dvm::ops
