// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace dvm {

// Dense row-major tensor, rank 1..4. Value semantics; all layout is implicit
// in the dims (no strides, no views).
template <class T>
class TensorT {
  public:
    TensorT() = default;

    explicit TensorT(std::initializer_list<int> dims) { reset(std::vector<int>(dims)); }
    explicit TensorT(const std::vector<int>& dims) { reset(dims); }

    static TensorT zeros(std::initializer_list<int> dims) { return TensorT(dims); }
    static TensorT full(std::initializer_list<int> dims, T v) {
        TensorT t(dims);
        t.fill(v);
        return t;
    }

    void reset(const std::vector<int>& dims) {
        if (dims.empty() || dims.size() > 4) throw std::invalid_argument("tensor rank must be 1..4");
        rank_ = static_cast<int>(dims.size());
        std::size_t n = 1;
        for (int i = 0; i < 4; ++i) d_[i] = 1;
        for (int i = 0; i < rank_; ++i) {
            if (dims[i] <= 0) throw std::invalid_argument("tensor dims must be positive");
            d_[i] = dims[i];
            n *= static_cast<std::size_t>(dims[i]);
        }
        v_.assign(n, T(0));
    }

    bool empty() const { return v_.empty(); }
    int rank() const { return rank_; }
    int dim(int i) const { return d_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return v_.size(); }
    std::vector<int> dims() const { return std::vector<int>(d_.begin(), d_.begin() + rank_); }

    T* data() { return v_.data(); }
    const T* data() const { return v_.data(); }

    T& operator[](std::size_t i) { return v_[i]; }
    const T& operator[](std::size_t i) const { return v_[i]; }

    T& at(int i) { return v_[static_cast<std::size_t>(i)]; }
    T& at(int i, int j) { return v_[static_cast<std::size_t>(i) * d_[1] + j]; }
    T& at(int i, int j, int k) { return v_[(static_cast<std::size_t>(i) * d_[1] + j) * d_[2] + k]; }
    T& at(int i, int j, int k, int l) {
        return v_[((static_cast<std::size_t>(i) * d_[1] + j) * d_[2] + k) * d_[3] + l];
    }
    const T& at(int i) const { return v_[static_cast<std::size_t>(i)]; }
    const T& at(int i, int j) const { return v_[static_cast<std::size_t>(i) * d_[1] + j]; }
    const T& at(int i, int j, int k) const {
        return v_[(static_cast<std::size_t>(i) * d_[1] + j) * d_[2] + k];
    }
    const T& at(int i, int j, int k, int l) const {
        return v_[((static_cast<std::size_t>(i) * d_[1] + j) * d_[2] + k) * d_[3] + l];
    }

    void fill(T v) { std::fill(v_.begin(), v_.end(), v); }

    bool same_shape(const TensorT& o) const { return rank_ == o.rank_ && d_ == o.d_; }

    // Reinterprets the buffer with new dims of identical element count.
    TensorT reshaped(std::initializer_list<int> dims) const {
        TensorT out;
        out.reset(std::vector<int>(dims));
        if (out.size() != size()) throw std::invalid_argument("reshape size mismatch");
        out.v_ = v_;
        return out;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (int i = 0; i < rank_; ++i) {
            if (i) s += ",";
            s += std::to_string(d_[i]);
        }
        return s + ")";
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out(dims());
        for (std::size_t i = 0; i < size(); ++i) out[i] = static_cast<U>(v_[i]);
        return out;
    }

  private:
    template <class U>
    friend class TensorT;

    int rank_ = 0;
    std::array<int, 4> d_{1, 1, 1, 1};
    std::vector<T> v_;
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

}  // namespace dvm
