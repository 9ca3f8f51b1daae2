// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/evalkit.hpp"
#include "core/motionvae.hpp"
#include "core/synthdata.hpp"
#include "core/tmdit.hpp"

namespace hmflow {

struct TrainConfig {
    std::int64_t steps = 1000;
    int batch = 32;
    double lr = 2e-4;
    std::vector<double> lr_drops{0.5, 0.75};
    double lr_factor = 0.2;
    double weight_decay = 1e-2;
    std::uint64_t seed = 1;
    double kl_weight = 1e-2;
    double aug_weight = 0.5;
    double aug_fraction = 0.5;  // share of each batch carrying the aug term
    double cfg_dropout = 0.1;   // null-token substitution probability
    int threads = 0;            // 0 = hardware concurrency
    std::int64_t log_every = 100;

    void validate() const;
};

// Piecewise-constant schedule multiplier: 1 before the first drop fraction,
// then multiplied by `factor` at each drop.
double lr_multiplier(std::int64_t step, std::int64_t total_steps,
                     const std::vector<double>& drops = {0.5, 0.75}, double factor = 0.2);

struct VAETrainResult {
    std::shared_ptr<MotionVAE> model;
    std::vector<double> loss_trace;  // per-step batch loss
    double final_recon = 0.0;
    double final_kl = 0.0;
};

// Stage one: VAE under reconstruction + KL + augmentation on a random half
// of each batch. Feature statistics come from the train split. Writes the
// checkpoint (and a metrics log when a path is given).
VAETrainResult train_vae(const Corpus& corpus, const VAEConfig& model_cfg,
                         const TrainConfig& cfg, const std::string& ckpt_path = "",
                         const std::string& metrics_path = "");

struct TMDiTTrainResult {
    std::shared_ptr<TMDiT> model;
    std::vector<double> loss_trace;
    Tensor latent_mean;  // [j, d]
    Tensor latent_std;
};

// Stage two: the velocity model under the stage-wise flow loss with
// condition dropout; the VAE is frozen (its parameters are never mounted
// for gradients). Latents are standardized by corpus statistics.
TMDiTTrainResult train_tmdit(const Corpus& corpus, const MotionVAE& frozen_vae,
                             const TMDiTConfig& model_cfg, const ScaleSchedule& sched,
                             const TrainConfig& cfg, const std::string& ckpt_path = "",
                             const std::string& metrics_path = "");

// ---------------------------------------------------------------------------
// checkpoint helpers (self-contained: config + skeleton + stats in metadata)
// ---------------------------------------------------------------------------

void save_vae_checkpoint(const std::string& path, const MotionVAE& vae);
std::shared_ptr<MotionVAE> load_vae_checkpoint(const std::string& path);

void save_tmdit_checkpoint(const std::string& path, const TMDiT& model,
                           const Tensor& latent_mean, const Tensor& latent_std);

struct LoadedTMDiT {
    std::shared_ptr<TMDiT> model;
    Tensor latent_mean;
    Tensor latent_std;
    Vocabulary vocab;  // from the checkpoint: self-contained tokenization
};
LoadedTMDiT load_tmdit_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// sampling pipeline
// ---------------------------------------------------------------------------

// Algorithm-level generation: noise -> hierarchical flow -> latent
// de-standardization -> VAE decode. Deterministic given the noise draw.
struct GenerationPipeline {
    std::shared_ptr<TMDiT> model;
    std::shared_ptr<MotionVAE> vae;
    Tensor latent_mean;
    Tensor latent_std;
    Vocabulary vocab = Vocabulary::standard();

    MotionSequence generate(const std::vector<std::int64_t>& tokens, std::int64_t frames,
                            const std::vector<int>& steps_per_stage, double guidance_weight,
                            Rng& noise_rng) const;

    static GenerationPipeline open(const std::string& vae_ckpt, const std::string& tmdit_ckpt);
};

}  // namespace hmflow
