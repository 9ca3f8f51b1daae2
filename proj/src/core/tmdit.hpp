// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/hiflow.hpp"
#include "core/jointrope.hpp"
#include "core/params.hpp"
#include "core/skeleton.hpp"
#include "core/tape.hpp"

namespace hmflow {

struct TMDiTConfig {
    int n_blocks = 9;
    int n_separate = 3;  // leading blocks with per-stream parameters
    int n_shared = 6;    // trailing blocks sharing one parameter set
    int model_dim = 384;
    int n_heads = 6;
    int ffn_dim = 1536;
    int vocab_size = 0;
    int max_words = 16;
    int latent_joints = 6;
    int latent_channels = 8;
    double rope_base = 10000.0;

    int head_dim() const { return model_dim / n_heads; }
    void validate() const;

    // Small configuration used by tests and the desk-scale pipeline.
    static TMDiTConfig desk(int vocab_size);
    // Full-scale dimensions; constructible but far beyond desk budgets.
    static TMDiTConfig full(int vocab_size);
};

// Inference-time conditioning: word embeddings, pooled vector, flow time and
// the stage scale.
struct ConditioningBundle {
    Tensor c;      // [n_words, model_dim]
    Tensor c_vec;  // [model_dim]
    double t = 0.0;
    double r_k = 1.0;
};

struct ConditioningEmbedding {
    Tensor y;  // [model_dim]
};

// Dual-stream diffusion-transformer velocity model over motion latents and
// word tokens. Streams are modulated by a fused conditioning embedding;
// motion tokens carry joint-aware rotary positions, text tokens word-index
// rotary positions. The trailing n_shared blocks reuse one parameter set for
// both streams.
class TMDiT {
public:
    static constexpr std::int64_t kNullToken = 0;

    TMDiT(TMDiTConfig cfg, SkeletonLayout layout, ScaleSchedule sched, Rng& init_rng);

    const TMDiTConfig& config() const { return cfg_; }
    const ScaleSchedule& schedule() const { return sched_; }
    const SkeletonLayout& layout() const { return layout_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Gaussian re-init of every tensor (gradient checks need live gates).
    void randomize(Rng& rng, double stddev = 0.05);

    // Store index of a per-block, per-stream parameter; streams resolve to
    // the same index inside the shared range.
    int block_param(int block, const std::string& stream, const std::string& name) const;

    // Tape forward from token ids; gradients reach the embedding table.
    // x_node holds the latent point [l_k, j, d]; returns a node of the same
    // shape. ids must be non-empty; t in [0,1]; k a valid stage.
    int forward_ids(Tape& tape, const std::vector<int>& pids, int x_node,
                    const std::vector<std::int64_t>& ids, double t, int k) const;

    // Value-level velocity prediction from a prepared bundle (no gradients).
    Tensor predict_velocity(const Tensor& x_t, const ConditioningBundle& cond, int k) const;

    // y = MLP(sinusoidal(t) + proj(c_vec) + stage_embed[k]); r_k must match a
    // schedule scale.
    ConditioningEmbedding fuse_conditioning(double t, const Tensor& c_vec, double r_k) const;

    // Embedding-table lookup for a token sequence: word matrix plus pooled
    // mean vector.
    ConditioningBundle embed_tokens(const std::vector<std::int64_t>& ids, double t,
                                    double r_k) const;

    // One dual-stream block on an existing tape; exposed for unit tests.
    // Null rope tables disable the rotary step for that stream.
    std::pair<int, int> block_forward(Tape& tape, const std::vector<int>& pids, int block,
                                      int x_motion, int x_text, int y_node,
                                      std::shared_ptr<const RopeTable> motion_rope,
                                      std::shared_ptr<const RopeTable> text_rope) const;

    int stage_index_for_scale(double r_k) const;  // 1-based; throws on mismatch

private:
    struct StreamIdx {
        int mod_w, mod_b;
        int wq, bq, wk, bk, wv, bv, wo, bo;
        int w1, b1, w2, b2;
    };
    struct BlockIdx {
        StreamIdx motion;
        StreamIdx text;
    };

    int fuse_on_tape(Tape& tape, const std::vector<int>& pids, int c_vec_node, double t,
                     int k) const;
    int forward_tokens(Tape& tape, const std::vector<int>& pids, int x_node, int c_node,
                       int c_vec_node, double t, int k) const;
    Tensor sinusoidal_time(double t) const;

    TMDiTConfig cfg_;
    SkeletonLayout layout_;
    SkeletonLayout latent_layout_;
    ScaleSchedule sched_;
    ParamStore params_;
    std::vector<BlockIdx> blocks_;
    int token_in_w_, token_in_b_, text_embed_, cvec_w_, cvec_b_;
    int y_w1_, y_b1_, y_w2_, y_b2_, stage_embed_;
    int final_mod_w_, final_mod_b_, final_out_w_, final_out_b_;
};

// Sampler adapter: binds a token sequence (and the null token) to the model.
class TMDiTVelocityField final : public VelocityField {
public:
    TMDiTVelocityField(const TMDiT& model, std::vector<std::int64_t> ids);
    Tensor eval(const Tensor& x, double t, int stage, bool conditional) const override;

private:
    const TMDiT& model_;
    std::vector<std::int64_t> ids_;
    std::vector<std::int64_t> null_ids_;
};

}  // namespace hmflow
