// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/jointrope.hpp"

#include <cmath>

namespace hmflow {

std::array<int, 4> segment_dims(int head_dim) {
    require(head_dim > 0 && head_dim % 16 == 0, ErrorCode::invalid_config,
            "head_dim must be a positive multiple of 16");
    return {head_dim / 2, head_dim / 8, head_dim / 8, head_dim / 4};
}

std::vector<TokenPosition> token_positions(const SkeletonLayout& layout, std::int64_t n_frames,
                                           double r_k) {
    require(n_frames >= 1, ErrorCode::invalid_argument, "n_frames must be >= 1");
    require(r_k > 0.0 && r_k <= 1.0, ErrorCode::invalid_argument, "r_k must lie in (0, 1]");
    const int J = layout.joint_count();
    std::vector<TokenPosition> pos;
    pos.reserve(static_cast<size_t>(n_frames) * static_cast<size_t>(J));
    for (std::int64_t f = 0; f < n_frames; ++f) {
        for (int j = 0; j < J; ++j) {
            const Joint& joint = layout.joints[static_cast<size_t>(j)];
            TokenPosition p;
            p.t = static_cast<double>(f) / r_k;
            p.x = joint.tpose_x;
            p.y = joint.tpose_y;
            p.depth = static_cast<double>(joint.depth);
            pos.push_back(p);
        }
    }
    return pos;
}

std::vector<TokenPosition> text_positions(std::int64_t n_words) {
    std::vector<TokenPosition> pos(static_cast<size_t>(n_words));
    for (std::int64_t i = 0; i < n_words; ++i) pos[static_cast<size_t>(i)].t = static_cast<double>(i);
    return pos;
}

RopeTable make_rope_table(const std::vector<TokenPosition>& positions, const RopeConfig& cfg) {
    auto dims = segment_dims(cfg.head_dim);
    const int n_pairs = cfg.head_dim / 2;
    RopeTable table;
    table.head_dim = cfg.head_dim;
    table.tokens = static_cast<std::int64_t>(positions.size());
    table.cos_.resize(positions.size() * static_cast<size_t>(n_pairs));
    table.sin_.resize(positions.size() * static_cast<size_t>(n_pairs));

    for (size_t tok = 0; tok < positions.size(); ++tok) {
        const TokenPosition& p = positions[tok];
        const double coords[4] = {p.t, p.x, p.y, p.depth};
        int pair = 0;
        for (int seg = 0; seg < 4; ++seg) {
            const int seg_pairs = dims[static_cast<size_t>(seg)] / 2;
            for (int i = 0; i < seg_pairs; ++i, ++pair) {
                double theta = std::pow(cfg.base, -2.0 * static_cast<double>(i) /
                                                      static_cast<double>(dims[static_cast<size_t>(seg)]));
                double angle = coords[seg] * theta;
                table.cos_[tok * static_cast<size_t>(n_pairs) + static_cast<size_t>(pair)] =
                    std::cos(angle);
                table.sin_[tok * static_cast<size_t>(n_pairs) + static_cast<size_t>(pair)] =
                    std::sin(angle);
            }
        }
    }
    return table;
}

void rope_rotate(const RopeTable& table, bool inverse, const double* x, double* out,
                 std::int64_t tokens, int heads) {
    const int hd = table.head_dim;
    const int n_pairs = hd / 2;
    const double sign = inverse ? -1.0 : 1.0;
    for (std::int64_t tok = 0; tok < tokens; ++tok) {
        const double* c = table.cos_.data() + tok * n_pairs;
        const double* s = table.sin_.data() + tok * n_pairs;
        for (int h = 0; h < heads; ++h) {
            const double* xi = x + (tok * heads + h) * hd;
            double* xo = out + (tok * heads + h) * hd;
            for (int p = 0; p < n_pairs; ++p) {
                double a = xi[2 * p];
                double b = xi[2 * p + 1];
                double sn = sign * s[p];
                xo[2 * p] = a * c[p] - b * sn;
                xo[2 * p + 1] = a * sn + b * c[p];
            }
        }
    }
}

Tensor apply_rope(const Tensor& x, const std::vector<TokenPosition>& positions,
                  const RopeConfig& cfg) {
    require(x.rank() == 3, ErrorCode::invalid_argument, "rope input must be [tokens, heads, dim]");
    require(x.dim(2) == cfg.head_dim, ErrorCode::invalid_argument,
            "head_dim does not match the rope config");
    require(x.dim(0) == static_cast<std::int64_t>(positions.size()), ErrorCode::invalid_argument,
            "position count does not match tokens");
    RopeTable table = make_rope_table(positions, cfg);
    Tensor out(x.shape());
    rope_rotate(table, false, x.data(), out.data(), x.dim(0), static_cast<int>(x.dim(1)));
    return out;
}

}  // namespace hmflow
