// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/motionvae.hpp"

#include <cmath>

#include "core/resample.hpp"
#include "core/rng.hpp"

namespace hmflow {

GraphSpec GraphSpec::from_layout(const SkeletonLayout& layout) {
    const int J = layout.joint_count();
    GraphSpec spec;
    spec.assignment = layout.pool_assignment();
    spec.n_groups = static_cast<int>(layout.pool_groups().size());

    Tensor a({J, J});
    for (int j = 0; j < J; ++j) {
        a.at(j, j) = 1.0;  // self loop
        int p = layout.joints[static_cast<size_t>(j)].parent;
        if (p >= 0) {
            a.at(j, p) = 1.0;
            a.at(p, j) = 1.0;
        }
    }
    std::vector<double> deg(static_cast<size_t>(J), 0.0);
    for (int i = 0; i < J; ++i)
        for (int j = 0; j < J; ++j) deg[static_cast<size_t>(i)] += a.at(i, j);
    spec.adjacency = Tensor({J, J});
    for (int i = 0; i < J; ++i)
        for (int j = 0; j < J; ++j)
            spec.adjacency.at(i, j) =
                a.at(i, j) / std::sqrt(deg[static_cast<size_t>(i)] * deg[static_cast<size_t>(j)]);
    return spec;
}

void VAEConfig::validate() const {
    require(joints >= 1 && channels >= 1 && hidden >= 1, ErrorCode::invalid_config,
            "VAE dimensions must be positive");
    require(latent_joints >= 1 && latent_channels >= 1, ErrorCode::invalid_config,
            "latent dimensions must be positive");
}

MotionVAE::MotionVAE(VAEConfig cfg, SkeletonLayout layout, Rng& init_rng)
    : cfg_(cfg), layout_(std::move(layout)), graph_(GraphSpec::from_layout(layout_)) {
    cfg_.validate();
    require(layout_.joint_count() == cfg_.joints, ErrorCode::invalid_config,
            "layout joint count does not match the config");
    require(graph_.n_groups == cfg_.latent_joints, ErrorCode::invalid_config,
            "pool groups must match latent_joints");

    const std::int64_t C = cfg_.channels;
    const std::int64_t H = cfg_.hidden;
    const std::int64_t d = cfg_.latent_channels;
    const double w_std = 0.05;
    auto winit = [&](Tensor::Shape shape) { return Tensor::randn(shape, init_rng, w_std); };
    auto zinit = [&](Tensor::Shape shape) { return Tensor::zeros(shape); };

    params_.add("enc.in.w", winit({H, C}));
    params_.add("enc.in.b", zinit({H}));
    for (int b = 1; b <= 2; ++b) {
        std::string p = "enc.g" + std::to_string(b);
        params_.add(p + ".w", winit({H, H}));
        params_.add(p + ".b", zinit({H}));
        params_.add(p + ".ln_g", zinit({H}));
        params_.add(p + ".ln_b", zinit({H}));
        p = "enc.t" + std::to_string(b);
        params_.add(p + ".w", winit({H, H, 4}));  // [Cout, Cin, K]
        params_.add(p + ".b", zinit({H}));
        params_.add(p + ".ln_g", zinit({H}));
        params_.add(p + ".ln_b", zinit({H}));
    }
    params_.add("enc.mean.w", winit({d, H}));
    params_.add("enc.mean.b", zinit({d}));
    params_.add("enc.logvar.w", winit({d, H}));
    params_.add("enc.logvar.b", zinit({d}));

    params_.add("dec.in.w", winit({H, d}));
    params_.add("dec.in.b", zinit({H}));
    for (int b = 1; b <= 2; ++b) {
        std::string p = "dec.t" + std::to_string(b);
        params_.add(p + ".w", winit({H, H, 4}));  // [Cin, Cout, K]
        params_.add(p + ".b", zinit({H}));
        params_.add(p + ".ln_g", zinit({H}));
        params_.add(p + ".ln_b", zinit({H}));
    }
    params_.add("dec.refine.w", winit({H, H}));
    params_.add("dec.refine.b", zinit({H}));
    params_.add("dec.refine.ln_g", zinit({H}));
    params_.add("dec.refine.ln_b", zinit({H}));
    params_.add("dec.out.w", winit({C, H}));
    params_.add("dec.out.b", zinit({C}));

    feature_mean_ = Tensor::zeros({static_cast<std::int64_t>(cfg_.joints), C});
    feature_std_ = Tensor::full({static_cast<std::int64_t>(cfg_.joints), C}, 1.0);
}

void MotionVAE::set_feature_stats(Tensor mean, Tensor std) {
    require(mean.rank() == 2 && mean.dim(0) == cfg_.joints && mean.dim(1) == cfg_.channels,
            ErrorCode::invalid_argument, "feature mean must be [J, C]");
    require(std.same_shape(mean), ErrorCode::invalid_argument, "feature std must be [J, C]");
    for (std::int64_t i = 0; i < std.size(); ++i)
        require(std.data()[i] > 0.0, ErrorCode::invalid_argument,
                "feature std entries must be positive");
    feature_mean_ = std::move(mean);
    feature_std_ = std::move(std);
}

int MotionVAE::normalize_motion_node(Tape& tape, int x, bool inverse) const {
    const Tensor& xv = tape.val(x);
    const std::int64_t L = xv.dim(0);
    const std::int64_t JC = static_cast<std::int64_t>(cfg_.joints) * cfg_.channels;
    // modulate computes v * (1 + s) + b rowwise.
    Tensor s({JC}), b({JC});
    for (std::int64_t i = 0; i < JC; ++i) {
        double mu = feature_mean_.data()[i];
        double sigma = feature_std_.data()[i];
        if (inverse) {
            s.at(i) = sigma - 1.0;
            b.at(i) = mu;
        } else {
            s.at(i) = 1.0 / sigma - 1.0;
            b.at(i) = -mu / sigma;
        }
    }
    int flat = tape.reshape(x, {L, JC});
    int out = tape.modulate(flat, tape.leaf(s), tape.leaf(b));
    return tape.reshape(out, {L, static_cast<std::int64_t>(cfg_.joints),
                              static_cast<std::int64_t>(cfg_.channels)});
}

Tensor MotionVAE::normalize_motion(const Tensor& x, bool inverse) const {
    Tape tape(false);
    int node = normalize_motion_node(tape, tape.leaf(x), inverse);
    return tape.val(node);
}

void MotionVAE::randomize(Rng& rng, double stddev) {
    for (int i = 0; i < params_.count(); ++i) {
        Tensor& t = params_.value(i);
        for (std::int64_t j = 0; j < t.size(); ++j) t.data()[j] = stddev * rng.normal();
    }
}

int MotionVAE::param(const std::string& name) const {
    int idx = params_.index_of(name);
    require(idx >= 0, ErrorCode::internal_error, "unknown VAE parameter: " + name);
    return idx;
}

namespace {

// Per-position linear over [L, J, C] tensors.
int pos_linear(Tape& t, int x, int w, int b) {
    const Tensor& xv = t.val(x);
    const std::int64_t L = xv.dim(0), J = xv.dim(1);
    const std::int64_t out_dim = t.val(w).dim(0);
    int flat = t.reshape(x, {L * J, xv.dim(2)});
    int y = t.linear(flat, w, b);
    return t.reshape(y, {L, J, out_dim});
}

// LayerNorm over channels with an affine (1+g, b) parametrization.
int ln_affine(Tape& t, int x, int g, int b) {
    const Tensor& xv = t.val(x);
    const std::int64_t L = xv.dim(0), J = xv.dim(1), C = xv.dim(2);
    int flat = t.reshape(x, {L * J, C});
    int normed = t.layer_norm(flat);
    int out = t.modulate(normed, g, b);
    return t.reshape(out, {L, J, C});
}

}  // namespace

int MotionVAE::encoder_block(Tape& tape, const std::vector<int>& pids, int x, int gw, int gb,
                             int gg, int gbeta, int cw, int cb, int cg, int cbeta) const {
    auto P = [&](int i) { return pids[static_cast<size_t>(i)]; };
    // Graph conv: neighborhood mix then channel mix.
    int h = tape.joint_mix(x, graph_.adjacency);
    h = pos_linear(tape, h, P(gw), P(gb));
    h = ln_affine(tape, h, P(gg), P(gbeta));
    h = tape.silu(h);
    // Strided temporal conv halves the frame count.
    h = tape.temporal_conv(h, P(cw), P(cb), 2, 1);
    h = ln_affine(tape, h, P(cg), P(cbeta));
    return tape.silu(h);
}

std::pair<int, int> MotionVAE::encode_on_tape(Tape& tape, const std::vector<int>& pids,
                                              int m_node) const {
    const Tensor& m = tape.val(m_node);
    require(m.rank() == 3 && m.dim(1) == cfg_.joints && m.dim(2) == cfg_.channels,
            ErrorCode::invalid_argument, "motion must be [L, J, C]");
    require(m.dim(0) >= 4, ErrorCode::invalid_argument, "encode requires at least 4 frames");
    require(m.all_finite(), ErrorCode::invalid_argument, "motion payload must be finite");
    auto P = [&](int i) { return pids[static_cast<size_t>(i)]; };

    int normed = normalize_motion_node(tape, m_node, false);
    int h = pos_linear(tape, normed, P(param("enc.in.w")), P(param("enc.in.b")));
    h = encoder_block(tape, pids, h, param("enc.g1.w"), param("enc.g1.b"), param("enc.g1.ln_g"),
                      param("enc.g1.ln_b"), param("enc.t1.w"), param("enc.t1.b"),
                      param("enc.t1.ln_g"), param("enc.t1.ln_b"));
    h = encoder_block(tape, pids, h, param("enc.g2.w"), param("enc.g2.b"), param("enc.g2.ln_g"),
                      param("enc.g2.ln_b"), param("enc.t2.w"), param("enc.t2.b"),
                      param("enc.t2.ln_g"), param("enc.t2.ln_b"));
    h = tape.group_pool(h, graph_.assignment, graph_.n_groups);
    int mean = pos_linear(tape, h, P(param("enc.mean.w")), P(param("enc.mean.b")));
    int logvar = pos_linear(tape, h, P(param("enc.logvar.w")), P(param("enc.logvar.b")));
    return {mean, logvar};
}

int MotionVAE::decode_on_tape(Tape& tape, const std::vector<int>& pids, int z_node) const {
    const Tensor& z = tape.val(z_node);
    require(z.rank() == 3 && z.dim(1) == cfg_.latent_joints && z.dim(2) == cfg_.latent_channels,
            ErrorCode::invalid_argument, "latent must be [l, j, d]");
    require(z.all_finite(), ErrorCode::invalid_argument, "latent must be finite");
    auto P = [&](int i) { return pids[static_cast<size_t>(i)]; };

    int h = pos_linear(tape, z_node, P(param("dec.in.w")), P(param("dec.in.b")));
    for (int b = 1; b <= 2; ++b) {
        std::string p = "dec.t" + std::to_string(b);
        h = tape.temporal_deconv(h, P(param(p + ".w")), P(param(p + ".b")), 2, 1);
        h = ln_affine(tape, h, P(param(p + ".ln_g")), P(param(p + ".ln_b")));
        h = tape.silu(h);
    }
    h = tape.group_unpool(h, graph_.assignment);
    int r = tape.joint_mix(h, graph_.adjacency);
    r = pos_linear(tape, r, P(param("dec.refine.w")), P(param("dec.refine.b")));
    r = ln_affine(tape, r, P(param("dec.refine.ln_g")), P(param("dec.refine.ln_b")));
    r = tape.silu(r);
    int out = pos_linear(tape, r, P(param("dec.out.w")), P(param("dec.out.b")));
    return normalize_motion_node(tape, out, true);
}

std::pair<LatentSequence, LatentSequence> MotionVAE::encode(const MotionSequence& m) const {
    Tape tape(false);
    auto pids = params_.mount(tape, false);
    int m_node = tape.leaf(m.payload);
    auto [mean, logvar] = encode_on_tape(tape, pids, m_node);
    return {LatentSequence{tape.val(mean)}, LatentSequence{tape.val(logvar)}};
}

MotionSequence MotionVAE::decode(const LatentSequence& z, std::int64_t out_frames) const {
    Tape tape(false);
    auto pids = params_.mount(tape, false);
    int z_node = tape.leaf(z.payload);
    int out = decode_on_tape(tape, pids, z_node);
    Tensor payload = tape.val(out);
    if (out_frames > 0 && out_frames != payload.frames())
        payload = resample_to(payload, out_frames);
    return MotionSequence{payload};
}

MotionVAE::Losses MotionVAE::vae_losses(const MotionSequence& m, const MotionSequence& recon,
                                        const LatentSequence& mean, const LatentSequence& logvar) {
    require(m.payload.same_shape(recon.payload), ErrorCode::invalid_argument,
            "reconstruction shape mismatch");
    require(mean.payload.same_shape(logvar.payload), ErrorCode::invalid_argument,
            "posterior shape mismatch");
    Losses out;
    out.recon_mse = mean_sq_diff(m.payload, recon.payload);
    double acc = 0.0;
    const double* pm = mean.payload.data();
    const double* pl = logvar.payload.data();
    for (std::int64_t i = 0; i < mean.payload.size(); ++i)
        acc += 0.5 * (std::exp(pl[i]) + pm[i] * pm[i] - 1.0 - pl[i]);
    out.kl = acc / static_cast<double>(mean.payload.size());
    return out;
}

double MotionVAE::aug_loss(const LatentSequence& z, const MotionSequence& m, double r) const {
    require(r >= 0.3 && r <= 1.0, ErrorCode::invalid_argument, "aug ratio must lie in [0.3, 1]");
    Tensor z_r = resample(z.payload, r);
    MotionSequence recon = decode(LatentSequence{z_r});
    Tensor target = resample_to(m.payload, recon.frames());
    return mean_sq_diff(recon.payload, target);
}

}  // namespace hmflow
