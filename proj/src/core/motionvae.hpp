// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>

#include "core/params.hpp"
#include "core/skeleton.hpp"
#include "core/tape.hpp"

namespace hmflow {

// Pose-feature sequence: [frames, joints, channels].
struct MotionSequence {
    Tensor payload;

    std::int64_t frames() const { return payload.dim(0); }
    std::int64_t joints() const { return payload.dim(1); }
    std::int64_t channels() const { return payload.dim(2); }
};

// VAE latent sequence: [frames, latent joints, latent channels].
struct LatentSequence {
    Tensor payload;

    std::int64_t frames() const { return payload.dim(0); }
    std::int64_t joints() const { return payload.dim(1); }
    std::int64_t channels() const { return payload.dim(2); }
};

// Skeleton graph machinery for the VAE: normalized adjacency over the input
// joints and the joint -> latent-joint pooling assignment.
struct GraphSpec {
    Tensor adjacency;            // [J, J], D^-1/2 (A + I) D^-1/2
    std::vector<int> assignment; // joint -> group, total and surjective
    int n_groups = 0;

    static GraphSpec from_layout(const SkeletonLayout& layout);
};

struct VAEConfig {
    int joints = 15;
    int channels = 6;
    int hidden = 32;
    int latent_joints = 6;
    int latent_channels = 8;

    void validate() const;
};

// Topology-aware motion VAE: two graph-conv + strided temporal-conv encoder
// blocks (4x temporal downsampling), mean pooling onto the latent joints,
// and a mirrored decoder with transposed temporal convs and graph
// unpooling plus refinement.
class MotionVAE {
public:
    MotionVAE(VAEConfig cfg, SkeletonLayout layout, Rng& init_rng);

    const VAEConfig& config() const { return cfg_; }
    const SkeletonLayout& layout() const { return layout_; }
    const GraphSpec& graph() const { return graph_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    void randomize(Rng& rng, double stddev = 0.05);

    // Per-(joint, channel) feature statistics applied inside encode/decode:
    // inputs are standardized, decoder outputs mapped back to raw units.
    // Defaults are identity (mean 0, std 1).
    void set_feature_stats(Tensor mean, Tensor std);
    const Tensor& feature_mean() const { return feature_mean_; }
    const Tensor& feature_std() const { return feature_std_; }

    // Standardize (or undo with inverse=true) a motion node on a tape.
    int normalize_motion_node(Tape& tape, int x, bool inverse) const;
    Tensor normalize_motion(const Tensor& x, bool inverse) const;

    // Tape paths used for training; value paths below wrap them gradient-free.
    std::pair<int, int> encode_on_tape(Tape& tape, const std::vector<int>& pids,
                                       int m_node) const;
    int decode_on_tape(Tape& tape, const std::vector<int>& pids, int z_node) const;

    // Posterior parameters; l = floor(L / 4), requires L >= 4.
    std::pair<LatentSequence, LatentSequence> encode(const MotionSequence& m) const;
    // Deterministic decode; emits 4*l' frames, or `out_frames` when the
    // caller knows the exact original length (round trips).
    MotionSequence decode(const LatentSequence& z, std::int64_t out_frames = 0) const;

    struct Losses {
        double recon_mse = 0.0;
        double kl = 0.0;
    };
    static Losses vae_losses(const MotionSequence& m, const MotionSequence& recon,
                             const LatentSequence& mean, const LatentSequence& logvar);

    // Temporal-robustness objective: decode a downsampled latent and
    // compare against the motion resampled to the decoder's output length.
    // r = 1 reduces to the reconstruction path exactly.
    double aug_loss(const LatentSequence& z, const MotionSequence& m, double r) const;

private:
    int encoder_block(Tape& tape, const std::vector<int>& pids, int x, int gw, int gb, int gg,
                      int gbeta, int cw, int cb, int cg, int cbeta) const;
    int param(const std::string& name) const;

    VAEConfig cfg_;
    SkeletonLayout layout_;
    GraphSpec graph_;
    ParamStore params_;
    Tensor feature_mean_;  // [J, C]
    Tensor feature_std_;
};

}  // namespace hmflow
