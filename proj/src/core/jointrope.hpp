// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "core/skeleton.hpp"
#include "core/tensor.hpp"

namespace hmflow {

// Rotary positions for skeleton tokens. Each attention head is split into
// four independent 1D RoPE segments: temporal index, T-pose x, T-pose y and
// kinematic depth, with dimension proportions [1/2, 1/8, 1/8, 1/4].

struct RopeConfig {
    int head_dim = 16;     // must be divisible by 16
    double base = 10000.0; // frequency base shared by all segments
};

// [d_t, d_x, d_y, d_depth]; head_dim must be divisible by 16 so every
// segment holds an even number of coordinates.
std::array<int, 4> segment_dims(int head_dim);

struct TokenPosition {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double depth = 0.0;
};

// Positions for (frame, joint) tokens in frame-major order. The temporal
// index is divided by r_k so stage-k tokens land on full-scale time.
std::vector<TokenPosition> token_positions(const SkeletonLayout& layout, std::int64_t n_frames,
                                           double r_k);

// Word tokens carry their index on the temporal segment only.
std::vector<TokenPosition> text_positions(std::int64_t n_words);

// Precomputed per-token rotation table (heads share it).
struct RopeTable {
    int head_dim = 0;
    std::int64_t tokens = 0;
    std::vector<double> cos_;  // [tokens, head_dim/2]
    std::vector<double> sin_;
};

RopeTable make_rope_table(const std::vector<TokenPosition>& positions, const RopeConfig& cfg);

// Rotate consecutive pairs of x by the table angles; inverse applies the
// transpose rotation. x and out are [tokens, heads, head_dim]; in-place
// operation is allowed (x == out).
void rope_rotate(const RopeTable& table, bool inverse, const double* x, double* out,
                 std::int64_t tokens, int heads);

// [tokens, heads, head_dim] -> same shape with per-segment rotary encoding.
Tensor apply_rope(const Tensor& x, const std::vector<TokenPosition>& positions,
                  const RopeConfig& cfg);

}  // namespace hmflow
