// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "scorefusion/nn/tensor.hpp"

namespace scorefusion::nn {

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::function<void(Node&)> backward;

    Tensor<T>& grad_buffer() {
        if (grad.empty()) grad = Tensor<T>(value.n, value.c, value.d, value.h, value.w);
        return grad;
    }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

/// Parameter storage seen by an op: values plus an optional gradient sink of
/// the same layout. A null `grads` means the parameters are frozen.
template <class T>
struct ParamView {
    const T* values = nullptr;
    T* grads = nullptr;

    const T* value(std::size_t off) const { return values + off; }
    T* grad(std::size_t off) const { return grads ? grads + off : nullptr; }
    bool trainable() const { return grads != nullptr; }
};

/// Reverse-mode tape. Nodes are recorded in creation order, which is a valid
/// topological order, so backward is a single reverse sweep. A non-recording
/// graph evaluates values only and keeps nothing alive.
template <class T>
class Graph {
public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    Var<T> constant(Tensor<T> value) const {
        auto node = std::make_shared<Node<T>>();
        node->value = std::move(value);
        return node;
    }

    Var<T> make(Tensor<T> value, bool wants_grad, std::function<void(Node<T>&)> backward) {
        auto node = std::make_shared<Node<T>>();
        node->value = std::move(value);
        if (recording_ && wants_grad) {
            node->requires_grad = true;
            node->backward = std::move(backward);
            tape_.push_back(node);
        }
        return node;
    }

    /// Seeds d(root)/d(root) = 1 for a scalar root and sweeps the tape.
    void backward(const Var<T>& root) {
        if (root->value.size() != 1) throw std::logic_error("backward root must be a scalar");
        if (!root->requires_grad) return;
        root->grad_buffer().data[0] = T(1);
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
            Node<T>& node = **it;
            if (node.grad.empty() || !node.backward) continue;
            node.backward(node);
        }
    }

    std::size_t tape_size() const { return tape_.size(); }

private:
    bool recording_;
    std::vector<Var<T>> tape_;
};

}  // namespace scorefusion::nn
