// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dvm/core/graph.hpp"
#include "dvm/core/rng.hpp"
#include "dvm/core/tensor.hpp"

namespace dvm::nn {

using Node = NodeP<float>;

// Ordered name -> parameter registry. Order is deterministic and defines the
// optimizer/checkpoint layout.
struct ParamMap {
    std::vector<std::pair<std::string, Node>> items;

    void add(const std::string& name, const Node& p) {
        for (const auto& [n, _] : items)
            if (n == name) throw std::logic_error("duplicate parameter name: " + name);
        items.emplace_back(name, p);
    }

    Node find(const std::string& name) const {
        for (const auto& [n, p] : items)
            if (n == name) return p;
        throw std::out_of_range("no parameter named " + name);
    }

    std::size_t count() const { return items.size(); }
};

enum class Init { He, Xavier, Zero, HeZeroLastInput };

inline Node make_param(std::initializer_list<int> dims, Init init, Rng& rng, int fan_in,
                       int fan_out) {
    Tensor t(dims);
    switch (init) {
        case Init::He: {
            const float std = std::sqrt(2.0f / static_cast<float>(fan_in));
            for (std::size_t i = 0; i < t.size(); ++i)
                t[i] = static_cast<float>(rng.normal()) * std;
            break;
        }
        case Init::Xavier: {
            const float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
            for (std::size_t i = 0; i < t.size(); ++i)
                t[i] = static_cast<float>(rng.uniform(-bound, bound));
            break;
        }
        case Init::Zero:
            break;
        case Init::HeZeroLastInput: {
            // Variance-scaled init with the last input channel zeroed (the
            // trimap channel of the matting encoder stem).
            if (t.rank() != 4) throw std::logic_error("HeZeroLastInput expects conv weights");
            const int in_c = t.dim(1);
            const float std = std::sqrt(2.0f / static_cast<float>(fan_in));
            for (int o = 0; o < t.dim(0); ++o)
                for (int c = 0; c < in_c; ++c)
                    for (int y = 0; y < t.dim(2); ++y)
                        for (int x = 0; x < t.dim(3); ++x)
                            t.at(o, c, y, x) =
                                c == in_c - 1 ? 0.0f : static_cast<float>(rng.normal()) * std;
            break;
        }
    }
    return make_leaf(std::move(t), true);
}

}  // namespace dvm::nn
