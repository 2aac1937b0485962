// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "dvm/core/tensor.hpp"
#include "dvm/kernels/kernels.hpp"

namespace dvm {

// Reverse-mode autodiff over tensor-valued nodes. Ops compute eagerly and
// record a backward closure when grad mode is on and an input needs it.
template <class T>
struct NodeT {
    TensorT<T> val;
    TensorT<T> grad;  // allocated on first contribution
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeT>> parents;
    std::function<void(NodeT&)> back;

    bool has_grad() const { return !grad.empty(); }

    TensorT<T>& grad_buf() {
        if (grad.empty()) grad.reset(val.dims());
        return grad;
    }

    void add_grad(const TensorT<T>& g) {
        TensorT<T>& gb = grad_buf();
        kern::add(gb.data(), g.data(), gb.data(), gb.size());
    }

    void zero_grad() { grad = TensorT<T>(); }
};

template <class T>
using NodeP = std::shared_ptr<NodeT<T>>;

namespace detail {
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

inline bool grad_mode() { return detail::grad_mode_flag(); }

// RAII guard disabling backward recording (evaluation mode).
struct NoGrad {
    NoGrad() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGrad() { detail::grad_mode_flag() = prev_; }
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

  private:
    bool prev_;
};

template <class T>
NodeP<T> make_leaf(TensorT<T> v, bool requires_grad) {
    auto n = std::make_shared<NodeT<T>>();
    n->val = std::move(v);
    n->requires_grad = requires_grad && grad_mode();
    return n;
}

template <class T>
NodeP<T> make_const(TensorT<T> v) {
    return make_leaf(std::move(v), false);
}

// Runs backward from `root`. If `seed` is null the root must be scalar-like
// (a single element) and is seeded with 1.
template <class T>
void backward(const NodeP<T>& root, const TensorT<T>* seed = nullptr) {
    if (!root->requires_grad) return;
    if (seed == nullptr && root->val.size() != 1)
        throw std::logic_error("backward() without seed requires a scalar root");

    // Iterative post-order topological sort over the requires_grad subgraph.
    std::vector<NodeT<T>*> order;
    std::unordered_set<NodeT<T>*> visited;
    std::vector<std::pair<NodeT<T>*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            NodeT<T>* p = node->parents[idx++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    if (seed != nullptr) {
        root->add_grad(*seed);
    } else {
        root->grad_buf()[0] += T(1);
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT<T>* n = *it;
        if (n->back && n->has_grad()) n->back(*n);
    }
}

// Clears gradients of every node reachable from root (for parameter reuse).
template <class T>
void zero_grad_tree(const NodeP<T>& root) {
    std::unordered_set<NodeT<T>*> visited;
    std::vector<NodeT<T>*> stack{root.get()};
    while (!stack.empty()) {
        NodeT<T>* n = stack.back();
        stack.pop_back();
        if (!visited.insert(n).second) continue;
        n->zero_grad();
        for (auto& p : n->parents) stack.push_back(p.get());
    }
}

}  // namespace dvm
