// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/tmdit.hpp"

#include <cmath>

#include "core/rng.hpp"

namespace hmflow {

void TMDiTConfig::validate() const {
    require(n_blocks >= 1 && n_separate >= 0 && n_shared >= 0, ErrorCode::invalid_config,
            "block counts must be non-negative");
    require(n_separate + n_shared == n_blocks, ErrorCode::invalid_config,
            "n_separate + n_shared must equal n_blocks");
    require(model_dim >= 1 && n_heads >= 1 && model_dim % n_heads == 0,
            ErrorCode::invalid_config, "model_dim must divide into heads");
    require(head_dim() % 16 == 0, ErrorCode::invalid_config,
            "head_dim must be divisible by 16 for the rope segments");
    require(ffn_dim >= 1, ErrorCode::invalid_config, "ffn_dim must be positive");
    require(vocab_size >= 2, ErrorCode::invalid_config,
            "vocabulary needs the null token plus at least one word");
    require(max_words >= 1, ErrorCode::invalid_config, "max_words must be positive");
    require(latent_joints >= 1 && latent_channels >= 1, ErrorCode::invalid_config,
            "latent shape must be positive");
}

TMDiTConfig TMDiTConfig::desk(int vocab_size) {
    TMDiTConfig cfg;
    cfg.n_blocks = 4;
    cfg.n_separate = 2;
    cfg.n_shared = 2;
    cfg.model_dim = 64;
    cfg.n_heads = 4;
    cfg.ffn_dim = 256;
    cfg.vocab_size = vocab_size;
    return cfg;
}

TMDiTConfig TMDiTConfig::full(int vocab_size) {
    TMDiTConfig cfg;
    cfg.vocab_size = vocab_size;
    return cfg;  // defaults carry the full-scale dimensions
}

TMDiT::TMDiT(TMDiTConfig cfg, SkeletonLayout layout, ScaleSchedule sched, Rng& init_rng)
    : cfg_(cfg), layout_(std::move(layout)), sched_(std::move(sched)) {
    cfg_.validate();
    require(sched_.stage_count >= 1, ErrorCode::invalid_schedule, "model needs a schedule");
    latent_layout_ = layout_.pooled_layout();
    require(latent_layout_.joint_count() == cfg_.latent_joints, ErrorCode::invalid_config,
            "latent_joints must match the skeleton pool groups");
    const std::int64_t D = cfg_.model_dim;
    const std::int64_t F = cfg_.ffn_dim;
    const std::int64_t d = cfg_.latent_channels;
    const std::int64_t V = cfg_.vocab_size;
    const double w_std = 0.02;

    auto winit = [&](Tensor::Shape shape) { return Tensor::randn(shape, init_rng, w_std); };
    auto zinit = [&](Tensor::Shape shape) { return Tensor::zeros(shape); };

    token_in_w_ = params_.add("token_in.w", winit({D, d}));
    token_in_b_ = params_.add("token_in.b", zinit({D}));
    text_embed_ = params_.add("text_embed", winit({V, D}));
    cvec_w_ = params_.add("cvec_proj.w", winit({D, D}));
    cvec_b_ = params_.add("cvec_proj.b", zinit({D}));
    y_w1_ = params_.add("y_mlp.w1", winit({D, D}));
    y_b1_ = params_.add("y_mlp.b1", zinit({D}));
    y_w2_ = params_.add("y_mlp.w2", winit({D, D}));
    y_b2_ = params_.add("y_mlp.b2", zinit({D}));
    stage_embed_ = params_.add("stage_embed",
                               winit({static_cast<std::int64_t>(sched_.stage_count), D}));

    auto add_stream = [&](const std::string& prefix) {
        StreamIdx s;
        // Zero-init modulation: blocks begin as identities and the gates
        // open as training progresses.
        s.mod_w = params_.add(prefix + ".mod.w", zinit({6 * D, D}));
        s.mod_b = params_.add(prefix + ".mod.b", zinit({6 * D}));
        s.wq = params_.add(prefix + ".attn.wq", winit({D, D}));
        s.bq = params_.add(prefix + ".attn.bq", zinit({D}));
        s.wk = params_.add(prefix + ".attn.wk", winit({D, D}));
        s.bk = params_.add(prefix + ".attn.bk", zinit({D}));
        s.wv = params_.add(prefix + ".attn.wv", winit({D, D}));
        s.bv = params_.add(prefix + ".attn.bv", zinit({D}));
        s.wo = params_.add(prefix + ".attn.wo", winit({D, D}));
        s.bo = params_.add(prefix + ".attn.bo", zinit({D}));
        s.w1 = params_.add(prefix + ".mlp.w1", winit({F, D}));
        s.b1 = params_.add(prefix + ".mlp.b1", zinit({F}));
        s.w2 = params_.add(prefix + ".mlp.w2", winit({D, F}));
        s.b2 = params_.add(prefix + ".mlp.b2", zinit({D}));
        return s;
    };

    for (int b = 0; b < cfg_.n_blocks; ++b) {
        BlockIdx blk{};
        std::string base = "block" + std::to_string(b);
        if (b < cfg_.n_separate) {
            blk.motion = add_stream(base + ".motion");
            blk.text = add_stream(base + ".text");
        } else {
            blk.motion = add_stream(base + ".shared");
            blk.text = blk.motion;  // same storage for both streams
        }
        blocks_.push_back(blk);
    }

    final_mod_w_ = params_.add("final.mod.w", zinit({2 * D, D}));
    final_mod_b_ = params_.add("final.mod.b", zinit({2 * D}));
    final_out_w_ = params_.add("final.out.w", zinit({d, D}));
    final_out_b_ = params_.add("final.out.b", zinit({d}));
}

void TMDiT::randomize(Rng& rng, double stddev) {
    for (int i = 0; i < params_.count(); ++i) {
        Tensor& t = params_.value(i);
        for (std::int64_t j = 0; j < t.size(); ++j) t.data()[j] = stddev * rng.normal();
    }
}

int TMDiT::block_param(int block, const std::string& stream, const std::string& name) const {
    require(block >= 0 && block < cfg_.n_blocks, ErrorCode::invalid_argument,
            "block index out of range");
    const BlockIdx& blk = blocks_[static_cast<size_t>(block)];
    const StreamIdx& s = stream == "text" ? blk.text : blk.motion;
    if (name == "mod.w") return s.mod_w;
    if (name == "mod.b") return s.mod_b;
    if (name == "attn.wq") return s.wq;
    if (name == "attn.wk") return s.wk;
    if (name == "attn.wv") return s.wv;
    if (name == "attn.wo") return s.wo;
    if (name == "mlp.w1") return s.w1;
    if (name == "mlp.w2") return s.w2;
    raise(ErrorCode::invalid_argument, "unknown block parameter: " + name);
}

int TMDiT::stage_index_for_scale(double r_k) const {
    for (int k = 1; k <= sched_.stage_count; ++k)
        if (std::abs(sched_.scale(k) - r_k) <= 1e-12) return k;
    raise(ErrorCode::invalid_argument, "r_k does not match any schedule scale");
}

Tensor TMDiT::sinusoidal_time(double t) const {
    const int D = cfg_.model_dim;
    const int half = D / 2;
    Tensor out({static_cast<std::int64_t>(D)});
    for (int i = 0; i < half; ++i) {
        double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
        out.at(i) = std::sin(1000.0 * t * freq);
        out.at(half + i) = std::cos(1000.0 * t * freq);
    }
    if (D % 2 == 1) out.at(D - 1) = 0.0;
    return out;
}

int TMDiT::fuse_on_tape(Tape& tape, const std::vector<int>& pids, int c_vec_node, double t,
                        int k) const {
    require(t >= 0.0 && t <= 1.0, ErrorCode::invalid_argument, "t must lie in [0, 1]");
    require(k >= 1 && k <= sched_.stage_count, ErrorCode::invalid_argument,
            "stage index out of range");
    const std::int64_t D = cfg_.model_dim;
    int sin_t = tape.leaf(sinusoidal_time(t).reshaped({1, D}));
    int cv = tape.reshape(c_vec_node, {1, D});
    int proj = tape.linear(cv, pids[static_cast<size_t>(cvec_w_)],
                           pids[static_cast<size_t>(cvec_b_)]);
    int stage = tape.embedding(pids[static_cast<size_t>(stage_embed_)],
                               {static_cast<std::int64_t>(k - 1)});
    int s = tape.add(tape.add(sin_t, proj), stage);
    int h = tape.silu(tape.linear(s, pids[static_cast<size_t>(y_w1_)],
                                  pids[static_cast<size_t>(y_b1_)]));
    return tape.linear(h, pids[static_cast<size_t>(y_w2_)], pids[static_cast<size_t>(y_b2_)]);
}

std::pair<int, int> TMDiT::block_forward(Tape& tape, const std::vector<int>& pids, int block,
                                         int x_motion, int x_text, int y_node,
                                         std::shared_ptr<const RopeTable> motion_rope,
                                         std::shared_ptr<const RopeTable> text_rope) const {
    const BlockIdx& blk = blocks_[static_cast<size_t>(block)];
    const std::int64_t D = cfg_.model_dim;
    const std::int64_t H = cfg_.n_heads;
    const std::int64_t hd = cfg_.head_dim();
    const std::int64_t Tm = tape.val(x_motion).dim(0);
    const std::int64_t Tc = tape.val(x_text).dim(0);

    int y_act = tape.silu(y_node);

    struct Mods {
        int shift_a, scale_a, gate_a, shift_m, scale_m, gate_m;
    };
    auto make_mods = [&](const StreamIdx& s) {
        int m = tape.linear(y_act, pids[static_cast<size_t>(s.mod_w)],
                            pids[static_cast<size_t>(s.mod_b)]);  // [1, 6D]
        int rows = tape.reshape(m, {6, D});
        auto row = [&](int i) { return tape.reshape(tape.slice_rows(rows, i, 1), {D}); };
        return Mods{row(0), row(1), row(2), row(3), row(4), row(5)};
    };
    Mods mm = make_mods(blk.motion);
    Mods mc = make_mods(blk.text);

    auto qkv = [&](int x, const StreamIdx& s, const std::shared_ptr<const RopeTable>& tab,
                   std::int64_t T_rows) {
        int q = tape.reshape(tape.linear(x, pids[static_cast<size_t>(s.wq)],
                                         pids[static_cast<size_t>(s.bq)]),
                             {T_rows, H, hd});
        int k = tape.reshape(tape.linear(x, pids[static_cast<size_t>(s.wk)],
                                         pids[static_cast<size_t>(s.bk)]),
                             {T_rows, H, hd});
        int v = tape.reshape(tape.linear(x, pids[static_cast<size_t>(s.wv)],
                                         pids[static_cast<size_t>(s.bv)]),
                             {T_rows, H, hd});
        if (tab) {
            q = tape.rope(q, tab);
            k = tape.rope(k, tab);
        }
        return std::array<int, 3>{q, k, v};
    };

    // Attention over the concatenated streams.
    int hm = tape.modulate(tape.layer_norm(x_motion), mm.scale_a, mm.shift_a);
    int hc = tape.modulate(tape.layer_norm(x_text), mc.scale_a, mc.shift_a);
    auto [qm, km, vm] = qkv(hm, blk.motion, motion_rope, Tm);
    auto [qc, kc, vc] = qkv(hc, blk.text, text_rope, Tc);
    int q = tape.concat_rows(qm, qc);
    int k = tape.concat_rows(km, kc);
    int v = tape.concat_rows(vm, vc);
    int attn = tape.attention(q, k, v);  // [Tm+Tc, D]
    int am = tape.slice_rows(attn, 0, Tm);
    int ac = tape.slice_rows(attn, Tm, Tc);
    int xm = tape.gated_residual(x_motion,
                                 tape.linear(am, pids[static_cast<size_t>(blk.motion.wo)],
                                             pids[static_cast<size_t>(blk.motion.bo)]),
                                 mm.gate_a);
    int xc = tape.gated_residual(x_text,
                                 tape.linear(ac, pids[static_cast<size_t>(blk.text.wo)],
                                             pids[static_cast<size_t>(blk.text.bo)]),
                                 mc.gate_a);

    // Per-stream MLPs.
    auto mlp = [&](int x, const StreamIdx& s, const Mods& mods) {
        int h = tape.modulate(tape.layer_norm(x), mods.scale_m, mods.shift_m);
        int mid = tape.gelu(tape.linear(h, pids[static_cast<size_t>(s.w1)],
                                        pids[static_cast<size_t>(s.b1)]));
        int out = tape.linear(mid, pids[static_cast<size_t>(s.w2)],
                              pids[static_cast<size_t>(s.b2)]);
        return tape.gated_residual(x, out, mods.gate_m);
    };
    xm = mlp(xm, blk.motion, mm);
    xc = mlp(xc, blk.text, mc);
    return {xm, xc};
}

int TMDiT::forward_tokens(Tape& tape, const std::vector<int>& pids, int x_node, int c_node,
                          int c_vec_node, double t, int k) const {
    const Tensor& x = tape.val(x_node);
    require(x.rank() == 3 && x.dim(1) == cfg_.latent_joints && x.dim(2) == cfg_.latent_channels,
            ErrorCode::invalid_argument, "latent point must be [l_k, j, d]");
    require(x.all_finite(), ErrorCode::invalid_argument, "latent point must be finite");
    const std::int64_t l_k = x.dim(0);
    const std::int64_t j = cfg_.latent_joints;
    const std::int64_t D = cfg_.model_dim;
    const std::int64_t Tm = l_k * j;
    const std::int64_t Tc = tape.val(c_node).dim(0);

    int y = fuse_on_tape(tape, pids, c_vec_node, t, k);

    // Tokens are frame-major over (frame, latent joint).
    int xm = tape.linear(tape.reshape(x_node, {Tm, cfg_.latent_channels}),
                         pids[static_cast<size_t>(token_in_w_)],
                         pids[static_cast<size_t>(token_in_b_)]);
    int xc = c_node;

    RopeConfig rope_cfg{static_cast<int>(cfg_.head_dim()), cfg_.rope_base};
    // The latent grid carries one rope position per (frame, latent joint):
    // latent joints sit at the pooled group centroids of the skeleton.
    auto motion_pos = token_positions(latent_layout_, l_k, sched_.scale(k));
    auto motion_tab = std::make_shared<RopeTable>(make_rope_table(motion_pos, rope_cfg));
    auto text_tab = std::make_shared<RopeTable>(
        make_rope_table(text_positions(Tc), rope_cfg));

    for (int b = 0; b < cfg_.n_blocks; ++b)
        std::tie(xm, xc) = block_forward(tape, pids, b, xm, xc, y, motion_tab, text_tab);

    int y_act = tape.silu(y);
    int fm = tape.linear(y_act, pids[static_cast<size_t>(final_mod_w_)],
                         pids[static_cast<size_t>(final_mod_b_)]);
    int fm_rows = tape.reshape(fm, {2, D});
    int shift_f = tape.reshape(tape.slice_rows(fm_rows, 0, 1), {D});
    int scale_f = tape.reshape(tape.slice_rows(fm_rows, 1, 1), {D});
    int h = tape.modulate(tape.layer_norm(xm), scale_f, shift_f);
    int out = tape.linear(h, pids[static_cast<size_t>(final_out_w_)],
                          pids[static_cast<size_t>(final_out_b_)]);
    return tape.reshape(out, {l_k, j, cfg_.latent_channels});
}

int TMDiT::forward_ids(Tape& tape, const std::vector<int>& pids, int x_node,
                       const std::vector<std::int64_t>& ids, double t, int k) const {
    require(!ids.empty() && static_cast<int>(ids.size()) <= cfg_.max_words,
            ErrorCode::invalid_argument, "token count out of range");
    int c = tape.embedding(pids[static_cast<size_t>(text_embed_)], ids);
    int c_vec = tape.mean_rows(c);
    return forward_tokens(tape, pids, x_node, c, c_vec, t, k);
}

Tensor TMDiT::predict_velocity(const Tensor& x_t, const ConditioningBundle& cond, int k) const {
    require(cond.c.defined() && cond.c.rank() == 2 && cond.c.dim(1) == cfg_.model_dim,
            ErrorCode::invalid_argument, "bundle word matrix must be [n, model_dim]");
    require(cond.c_vec.defined() && cond.c_vec.rank() == 1 &&
                cond.c_vec.dim(0) == cfg_.model_dim,
            ErrorCode::invalid_argument, "bundle c_vec must be [model_dim]");
    Tape tape(false);
    auto pids = params_.mount(tape, false);
    int x_node = tape.leaf(x_t);
    int c_node = tape.leaf(cond.c);
    int cv_node = tape.leaf(cond.c_vec);
    int out = forward_tokens(tape, pids, x_node, c_node, cv_node, cond.t, k);
    return tape.val(out);
}

ConditioningEmbedding TMDiT::fuse_conditioning(double t, const Tensor& c_vec, double r_k) const {
    require(r_k > 0.0 && r_k <= 1.0, ErrorCode::invalid_argument, "r_k must lie in (0, 1]");
    int k = stage_index_for_scale(r_k);
    Tape tape(false);
    auto pids = params_.mount(tape, false);
    int cv = tape.leaf(c_vec);
    int y = fuse_on_tape(tape, pids, cv, t, k);
    ConditioningEmbedding out;
    out.y = tape.val(y).reshaped({static_cast<std::int64_t>(cfg_.model_dim)});
    return out;
}

ConditioningBundle TMDiT::embed_tokens(const std::vector<std::int64_t>& ids, double t,
                                       double r_k) const {
    require(!ids.empty(), ErrorCode::invalid_argument, "token sequence must be non-empty");
    Tape tape(false);
    int table = tape.leaf(params_.value(text_embed_));
    int c = tape.embedding(table, ids);
    int cv = tape.mean_rows(c);
    ConditioningBundle bundle;
    bundle.c = tape.val(c);
    bundle.c_vec = tape.val(cv);
    bundle.t = t;
    bundle.r_k = r_k;
    return bundle;
}

TMDiTVelocityField::TMDiTVelocityField(const TMDiT& model, std::vector<std::int64_t> ids)
    : model_(model), ids_(std::move(ids)), null_ids_{TMDiT::kNullToken} {
    require(!ids_.empty(), ErrorCode::invalid_argument, "token sequence must be non-empty");
}

Tensor TMDiTVelocityField::eval(const Tensor& x, double t, int stage, bool conditional) const {
    Tape tape(false);
    auto pids = model_.params().mount(tape, false);
    int x_node = tape.leaf(x);
    int out = model_.forward_ids(tape, pids, x_node, conditional ? ids_ : null_ids_, t, stage);
    return tape.val(out);
}

}  // namespace hmflow
