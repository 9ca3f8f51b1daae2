// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "core/jointrope.hpp"
#include "core/tensor.hpp"

namespace hmflow {

// Reverse-mode tape over Tensor values. Build a fresh tape per forward pass;
// node ids index into creation order, so reverse iteration is a topological
// sweep. With gradients disabled the same graph code runs value-only.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    int leaf(Tensor value, bool requires_grad = false);

    const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    // Defined after backward() for nodes that received a gradient.
    const Tensor& grad(int id) const;
    bool has_grad(int id) const;

    // Seeds d(loss)/d(loss) = 1; loss must be scalar (single element).
    void backward(int loss);

    // ---- elementwise ----
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double s);
    int add_scalar(int a, double s);
    int exp(int a);
    int gelu(int a);
    int silu(int a);

    // ---- shape ----
    int reshape(int a, Tensor::Shape shape);
    int concat_rows(int a, int b);
    int slice_rows(int a, std::int64_t begin, std::int64_t count);

    // ---- reductions ----
    int mean_all(int a);
    int mean_rows(int a);  // [n, D] -> [D]
    int mse(int a, int b);

    // ---- linear algebra ----
    int matmul(int a, int b);            // [m,k] x [k,n]
    int linear(int x, int w, int b);     // [T,in] x [out,in]^T + [out]
    int layer_norm(int x, double eps = 1e-6);  // normalizes the last dim
    // x * (1 + scale) + shift, rowwise; scale/shift are rank-1 [D].
    int modulate(int x, int scale, int shift);
    // x + gate * y, rowwise; gate is rank-1 [D].
    int gated_residual(int x, int y, int gate);

    // ---- attention ----
    // q,k,v: [T, H, hd] -> output [T, H*hd]
    int attention(int q, int k, int v);
    // rotary encoding with a fixed, precomputed table; [T, H, hd]
    int rope(int x, std::shared_ptr<const RopeTable> table);

    // ---- embeddings ----
    int embedding(int table, std::vector<std::int64_t> ids);  // [V,D] -> [n,D]

    // ---- temporal / graph ops (x: [L, J, C]) ----
    int temporal_conv(int x, int w, int b, int stride, int pad);    // w: [Cout,Cin,K]
    int temporal_deconv(int x, int w, int b, int stride, int pad);  // w: [Cin,Cout,K]
    int joint_mix(int x, Tensor adjacency);                         // fixed [J,J]
    int group_pool(int x, std::vector<int> assign, int n_groups);
    int group_unpool(int x, std::vector<int> assign);
    int resample_rows(int x, std::int64_t dst_frames);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::function<void(Tape&, int self)> backward;
    };

    int push(Tensor value, bool needs_grad, std::function<void(Tape&, int self)> backward);
    bool needs(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
    void accum(int id, const Tensor& g);
    Tensor& grad_ref(int id) { return nodes_[static_cast<size_t>(id)].grad; }

    std::vector<Node> nodes_;
    bool grad_enabled_;
};

}  // namespace hmflow
