// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "core/resample.hpp"

namespace hmflow {

void TrainConfig::validate() const {
    require(steps >= 0, ErrorCode::invalid_config, "steps must be non-negative");
    require(batch >= 1, ErrorCode::invalid_config, "batch must be positive");
    require(lr > 0.0, ErrorCode::invalid_config, "learning rate must be positive");
    require(cfg_dropout >= 0.0 && cfg_dropout <= 1.0, ErrorCode::invalid_config,
            "dropout probability must lie in [0, 1]");
    require(aug_fraction >= 0.0 && aug_fraction <= 1.0, ErrorCode::invalid_config,
            "aug fraction must lie in [0, 1]");
}

double lr_multiplier(std::int64_t step, std::int64_t total_steps,
                     const std::vector<double>& drops, double factor) {
    require(total_steps >= 1, ErrorCode::invalid_argument, "total_steps must be positive");
    require(step >= 0 && step <= total_steps, ErrorCode::invalid_argument,
            "step outside [0, total_steps]");
    double fraction = static_cast<double>(step) / static_cast<double>(total_steps);
    double mult = 1.0;
    for (double drop : drops)
        if (fraction >= drop) mult *= factor;
    return mult;
}

namespace {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Deterministic epoch shuffling: the order depends only on (seed, epoch).
std::vector<int> shuffled(const std::vector<int>& indices, std::uint64_t seed,
                          std::int64_t epoch) {
    std::vector<int> out = indices;
    Rng rng(seed, 0xBA7C4ull + static_cast<std::uint64_t>(epoch));
    for (size_t i = out.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        std::swap(out[i - 1], out[j]);
    }
    return out;
}

class MetricsLog {
public:
    explicit MetricsLog(const std::string& path) {
        if (!path.empty()) {
            out_.open(path);
            require(out_.good(), ErrorCode::io_error, "cannot write metrics log: " + path);
        }
    }
    void header(const std::string& line) {
        if (out_.is_open()) out_ << line << '\n';
    }
    void row(const std::string& line) {
        if (out_.is_open()) out_ << line << std::endl;  // flush: logs are progress monitors
    }

private:
    std::ofstream out_;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Divergence guard: the loss stays finite for a while after weights blow up
// (downstream ops reject non-finite inputs first), so bound the weights.
void check_parameters_sane(const ParamStore& params, const char* stage, std::int64_t step) {
    for (int i = 0; i < params.count(); ++i) {
        const Tensor& t = params.value(i);
        for (std::int64_t j = 0; j < t.size(); ++j) {
            double v = t.data()[j];
            if (!std::isfinite(v) || std::abs(v) > 1e8)
                raise(ErrorCode::training_diverged,
                      std::string(stage) + " training diverged at step " + std::to_string(step) +
                          ": parameter " + params.name(i) + " left the stable range");
        }
    }
}

// ---------------------------------------------------------------------------
// skeleton <-> json (checkpoints are self-contained)
// ---------------------------------------------------------------------------

nlohmann::ordered_json layout_to_json(const SkeletonLayout& layout) {
    nlohmann::ordered_json j;
    j["joints"] = nlohmann::ordered_json::array();
    for (const auto& joint : layout.joints) {
        nlohmann::ordered_json e;
        e["name"] = joint.name;
        e["parent"] = joint.parent;
        e["x"] = joint.tpose_x;
        e["y"] = joint.tpose_y;
        e["group"] = joint.pool_group;
        j["joints"].push_back(e);
    }
    j["symmetry"] = nlohmann::ordered_json::array();
    for (auto [l, r] : layout.symmetry_pairs) j["symmetry"].push_back({l, r});
    return j;
}

SkeletonLayout layout_from_json(const nlohmann::ordered_json& j) {
    SkeletonLayout layout;
    for (const auto& e : j.at("joints")) {
        Joint joint;
        joint.name = e.at("name").get<std::string>();
        joint.parent = e.at("parent").get<int>();
        joint.tpose_x = e.at("x").get<double>();
        joint.tpose_y = e.at("y").get<double>();
        joint.pool_group = e.at("group").get<std::string>();
        layout.joints.push_back(joint);
    }
    for (const auto& e : j.at("symmetry"))
        layout.symmetry_pairs.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    // Depths re-derive through the loader path used for files.
    int root = layout.root();
    require(root >= 0, ErrorCode::incompatible_checkpoint, "layout in checkpoint has no root");
    std::vector<int> depth(layout.joints.size(), -1);
    depth[static_cast<size_t>(root)] = 0;
    for (size_t pass = 0; pass < layout.joints.size(); ++pass)
        for (size_t i = 0; i < layout.joints.size(); ++i) {
            int p = layout.joints[i].parent;
            if (p >= 0 && depth[static_cast<size_t>(p)] >= 0)
                depth[i] = depth[static_cast<size_t>(p)] + 1;
        }
    for (size_t i = 0; i < layout.joints.size(); ++i) layout.joints[i].depth = depth[i];
    layout.validate();
    return layout;
}

std::vector<double> tensor_to_vec(const Tensor& t) {
    return std::vector<double>(t.data(), t.data() + t.size());
}

Tensor vec_to_tensor(const std::vector<double>& v, Tensor::Shape shape) {
    return Tensor(std::move(shape), v);
}

// Per-(latent joint, channel) statistics pooled over frames and records.
void latent_statistics(const std::vector<Tensor>& latents, Tensor& mean, Tensor& std_out) {
    const std::int64_t j = latents.front().dim(1);
    const std::int64_t d = latents.front().dim(2);
    mean = Tensor::zeros({j, d});
    std_out = Tensor::zeros({j, d});
    std::int64_t n = 0;
    for (const auto& z : latents) {
        for (std::int64_t f = 0; f < z.dim(0); ++f)
            for (std::int64_t a = 0; a < j; ++a)
                for (std::int64_t c = 0; c < d; ++c) mean.at(a, c) += z.at(f, a, c);
        n += z.dim(0);
    }
    for (std::int64_t i = 0; i < mean.size(); ++i) mean.data()[i] /= static_cast<double>(n);
    for (const auto& z : latents)
        for (std::int64_t f = 0; f < z.dim(0); ++f)
            for (std::int64_t a = 0; a < j; ++a)
                for (std::int64_t c = 0; c < d; ++c) {
                    double dv = z.at(f, a, c) - mean.at(a, c);
                    std_out.at(a, c) += dv * dv;
                }
    for (std::int64_t i = 0; i < std_out.size(); ++i)
        std_out.data()[i] = std::max(1e-6, std::sqrt(std_out.data()[i] / static_cast<double>(n)));
}

Tensor standardize_latent(const Tensor& z, const Tensor& mean, const Tensor& std_t,
                          bool inverse) {
    Tensor out(z.shape());
    const std::int64_t j = z.dim(1), d = z.dim(2);
    for (std::int64_t f = 0; f < z.dim(0); ++f)
        for (std::int64_t a = 0; a < j; ++a)
            for (std::int64_t c = 0; c < d; ++c)
                out.at(f, a, c) = inverse ? z.at(f, a, c) * std_t.at(a, c) + mean.at(a, c)
                                          : (z.at(f, a, c) - mean.at(a, c)) / std_t.at(a, c);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// VAE stage
// ---------------------------------------------------------------------------

VAETrainResult train_vae(const Corpus& corpus, const VAEConfig& model_cfg, const TrainConfig& cfg,
                         const std::string& ckpt_path, const std::string& metrics_path) {
    cfg.validate();
    require(!corpus.records.empty(), ErrorCode::invalid_argument, "empty corpus");
    std::vector<int> train_idx = corpus.split_indices(0);
    require(!train_idx.empty(), ErrorCode::invalid_argument, "corpus has no train split");

    Rng init_rng(cfg.seed, 0x1A17ull);
    auto vae = std::make_shared<MotionVAE>(model_cfg, SkeletonLayout::reference15(), init_rng);

    // Feature statistics from the train split.
    {
        const std::int64_t J = model_cfg.joints, C = model_cfg.channels;
        Tensor mean = Tensor::zeros({J, C});
        Tensor stdev = Tensor::zeros({J, C});
        std::int64_t n = 0;
        for (int idx : train_idx) {
            const Tensor& m = corpus.records[static_cast<size_t>(idx)].motion.payload;
            for (std::int64_t f = 0; f < m.dim(0); ++f)
                for (std::int64_t a = 0; a < J; ++a)
                    for (std::int64_t c = 0; c < C; ++c) mean.at(a, c) += m.at(f, a, c);
            n += m.dim(0);
        }
        for (std::int64_t i = 0; i < mean.size(); ++i) mean.data()[i] /= static_cast<double>(n);
        for (int idx : train_idx) {
            const Tensor& m = corpus.records[static_cast<size_t>(idx)].motion.payload;
            for (std::int64_t f = 0; f < m.dim(0); ++f)
                for (std::int64_t a = 0; a < J; ++a)
                    for (std::int64_t c = 0; c < C; ++c) {
                        double d = m.at(f, a, c) - mean.at(a, c);
                        stdev.at(a, c) += d * d;
                    }
        }
        for (std::int64_t i = 0; i < stdev.size(); ++i)
            stdev.data()[i] =
                std::max(1e-3, std::sqrt(stdev.data()[i] / static_cast<double>(n)));
        vae->set_feature_stats(mean, stdev);
    }

    AdamW::Options opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    AdamW optimizer(vae->params(), opt);

    MetricsLog log(metrics_path);
    log.header("# step loss recon kl aug lr");

    const int n_threads = resolve_threads(cfg.threads);
    VAETrainResult result;
    result.model = vae;

    const std::int64_t steps_per_epoch =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(train_idx.size()) / cfg.batch);
    std::vector<int> order;

    struct SampleOut {
        std::vector<Tensor> grads;
        double loss = 0.0, recon = 0.0, kl = 0.0, aug = 0.0;
        std::exception_ptr error;
    };

    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        std::int64_t epoch = step / steps_per_epoch;
        if (step % steps_per_epoch == 0) order = shuffled(train_idx, cfg.seed, epoch);

        std::vector<SampleOut> outs(static_cast<size_t>(cfg.batch));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(n_threads)
#endif
        for (int slot = 0; slot < cfg.batch; ++slot) {
          try {
            std::int64_t pos = (step % steps_per_epoch) * cfg.batch + slot;
            int rec_idx = order[static_cast<size_t>(pos % order.size())];
            const CorpusRecord& rec = corpus.records[static_cast<size_t>(rec_idx)];
            Rng srng(cfg.seed, 0x5A3ull + static_cast<std::uint64_t>(step) * 1000003ull +
                                   static_cast<std::uint64_t>(slot));

            Tape tape(true);
            auto pids = vae->params().mount(tape, true);
            int m_node = tape.leaf(rec.motion.payload);
            auto [mean, logvar] = vae->encode_on_tape(tape, pids, m_node);
            Tensor eps = Tensor::randn(tape.val(mean).shape(), srng);
            int z = tape.add(mean, tape.mul(tape.leaf(eps), tape.exp(tape.scale(logvar, 0.5))));

            const std::int64_t l = tape.val(z).dim(0);
            int dec = vae->decode_on_tape(tape, pids, z);
            Tensor target = vae->normalize_motion(
                resample_to(rec.motion.payload, 4 * l), false);
            int recon_loss = tape.mse(vae->normalize_motion_node(tape, dec, false),
                                      tape.leaf(target));

            int kl_node = tape.mean_all(tape.scale(
                tape.sub(tape.sub(tape.add(tape.exp(logvar), tape.mul(mean, mean)),
                                  tape.leaf(Tensor::full(tape.val(mean).shape(), 1.0))),
                         logvar),
                0.5));

            bool use_aug = srng.bernoulli(cfg.aug_fraction);
            double aug_ratio = srng.uniform(0.3, 1.0);
            int loss = tape.add(recon_loss, tape.scale(kl_node, cfg.kl_weight));
            int aug_node = -1;
            if (use_aug) {
                std::int64_t l_r = resampled_length(l, aug_ratio);
                int z_r = tape.resample_rows(z, l_r);
                int dec_r = vae->decode_on_tape(tape, pids, z_r);
                Tensor target_r = vae->normalize_motion(
                    resample_to(rec.motion.payload, 4 * l_r), false);
                aug_node = tape.mse(vae->normalize_motion_node(tape, dec_r, false),
                                    tape.leaf(target_r));
                loss = tape.add(loss, tape.scale(aug_node, cfg.aug_weight));
            }

            tape.backward(loss);
            SampleOut& out = outs[static_cast<size_t>(slot)];
            out.grads = vae->params().zeros_like();
            vae->params().collect_grads(tape, pids, out.grads);
            out.loss = tape.val(loss).at(0);
            out.recon = tape.val(recon_loss).at(0);
            out.kl = tape.val(kl_node).at(0);
            out.aug = aug_node >= 0 ? tape.val(aug_node).at(0) : 0.0;
          } catch (...) {
            outs[static_cast<size_t>(slot)].error = std::current_exception();
          }
        }
        for (const auto& out : outs)
            if (out.error) std::rethrow_exception(out.error);

        // Fixed-order reduction keeps training independent of thread count.
        auto grads = vae->params().zeros_like();
        double loss_sum = 0.0, recon_sum = 0.0, kl_sum = 0.0, aug_sum = 0.0;
        for (const auto& out : outs) {
            for (size_t i = 0; i < grads.size(); ++i) add_inplace(grads[i], out.grads[i]);
            loss_sum += out.loss;
            recon_sum += out.recon;
            kl_sum += out.kl;
            aug_sum += out.aug;
        }
        const double inv_b = 1.0 / static_cast<double>(cfg.batch);
        for (auto& g : grads)
            for (std::int64_t i = 0; i < g.size(); ++i) g.data()[i] *= inv_b;

        double batch_loss = loss_sum * inv_b;
        require(std::isfinite(batch_loss), ErrorCode::training_diverged,
                "VAE training diverged at step " + std::to_string(step));
        optimizer.step(vae->params(), grads,
                       lr_multiplier(step, cfg.steps, cfg.lr_drops, cfg.lr_factor));
        check_parameters_sane(vae->params(), "VAE", step);

        result.loss_trace.push_back(batch_loss);
        result.final_recon = recon_sum * inv_b;
        result.final_kl = kl_sum * inv_b;
        if (step % cfg.log_every == 0 || step + 1 == cfg.steps)
            log.row(std::to_string(step) + " " + fmt(batch_loss) + " " + fmt(recon_sum * inv_b) +
                    " " + fmt(kl_sum * inv_b) + " " + fmt(aug_sum * inv_b) + " " +
                    fmt(cfg.lr * lr_multiplier(step, cfg.steps, cfg.lr_drops, cfg.lr_factor)));
    }

    if (!ckpt_path.empty()) save_vae_checkpoint(ckpt_path, *vae);
    return result;
}

// ---------------------------------------------------------------------------
// TMDiT stage
// ---------------------------------------------------------------------------

TMDiTTrainResult train_tmdit(const Corpus& corpus, const MotionVAE& frozen_vae,
                             const TMDiTConfig& model_cfg, const ScaleSchedule& sched,
                             const TrainConfig& cfg, const std::string& ckpt_path,
                             const std::string& metrics_path) {
    cfg.validate();
    require(model_cfg.latent_joints == frozen_vae.config().latent_joints &&
                model_cfg.latent_channels == frozen_vae.config().latent_channels,
            ErrorCode::invalid_argument, "model latent shape does not match the VAE");
    std::vector<int> train_idx = corpus.split_indices(0);
    require(!train_idx.empty(), ErrorCode::invalid_argument, "corpus has no train split");

    const int n_threads = resolve_threads(cfg.threads);

    // Posterior means of the frozen VAE, computed once.
    std::vector<Tensor> latents(train_idx.size());
    std::vector<std::exception_ptr> enc_errors(train_idx.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(n_threads)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(train_idx.size()); ++i) {
        try {
            const CorpusRecord& rec =
                corpus.records[static_cast<size_t>(train_idx[static_cast<size_t>(i)])];
            latents[static_cast<size_t>(i)] = frozen_vae.encode(rec.motion).first.payload;
        } catch (...) {
            enc_errors[static_cast<size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : enc_errors)
        if (e) std::rethrow_exception(e);

    TMDiTTrainResult result;
    latent_statistics(latents, result.latent_mean, result.latent_std);
    for (auto& z : latents) z = standardize_latent(z, result.latent_mean, result.latent_std, false);

    Rng init_rng(cfg.seed, 0x7D17ull);
    auto model = std::make_shared<TMDiT>(model_cfg, SkeletonLayout::reference15(), sched, init_rng);
    result.model = model;

    // Frozen-VAE guarantee: the VAE's parameters are never mounted with
    // gradients in this stage; only its precomputed latents are consumed.

    AdamW::Options opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    AdamW optimizer(model->params(), opt);

    MetricsLog log(metrics_path);
    log.header("# step loss lr");

    const std::int64_t steps_per_epoch =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(train_idx.size()) / cfg.batch);
    std::vector<int> order;  // positions into train_idx/latents

    std::vector<int> local(train_idx.size());
    for (size_t i = 0; i < local.size(); ++i) local[i] = static_cast<int>(i);

    struct SampleOut {
        std::vector<Tensor> grads;
        double loss = 0.0;
        std::exception_ptr error;
    };

    const int K = sched.stage_count;
    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        std::int64_t epoch = step / steps_per_epoch;
        if (step % steps_per_epoch == 0) order = shuffled(local, cfg.seed, epoch);

        std::vector<SampleOut> outs(static_cast<size_t>(cfg.batch));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(n_threads)
#endif
        for (int slot = 0; slot < cfg.batch; ++slot) {
          try {
            std::int64_t pos = (step % steps_per_epoch) * cfg.batch + slot;
            int li = order[static_cast<size_t>(pos % order.size())];
            const CorpusRecord& rec =
                corpus.records[static_cast<size_t>(train_idx[static_cast<size_t>(li)])];
            Rng srng(cfg.seed, 0xF10ull + static_cast<std::uint64_t>(step) * 1000003ull +
                                   static_cast<std::uint64_t>(slot));

            FlowEndpoints ep;
            ep.x1 = latents[static_cast<size_t>(li)];
            ep.x0 = Tensor::randn(ep.x1.shape(), srng);
            int k = 1 + static_cast<int>(srng.next_below(static_cast<std::uint64_t>(K)));
            double t = srng.uniform(sched.t_begin(k), sched.t_end(k));
            FlowSample fs = training_sample(ep, sched, k, t);

            std::vector<std::int64_t> ids = rec.tokens;
            if (srng.bernoulli(cfg.cfg_dropout)) ids = {TMDiT::kNullToken};

            Tape tape(true);
            auto pids = model->params().mount(tape, true);
            int x_node = tape.leaf(fs.point);
            int v = model->forward_ids(tape, pids, x_node, ids, t, k);
            int loss = tape.mse(v, tape.leaf(fs.target));
            tape.backward(loss);

            SampleOut& out = outs[static_cast<size_t>(slot)];
            out.grads = model->params().zeros_like();
            model->params().collect_grads(tape, pids, out.grads);
            out.loss = tape.val(loss).at(0);
          } catch (...) {
            outs[static_cast<size_t>(slot)].error = std::current_exception();
          }
        }
        for (const auto& out : outs)
            if (out.error) std::rethrow_exception(out.error);

        auto grads = model->params().zeros_like();
        double loss_sum = 0.0;
        for (const auto& out : outs) {
            for (size_t i = 0; i < grads.size(); ++i) add_inplace(grads[i], out.grads[i]);
            loss_sum += out.loss;
        }
        const double inv_b = 1.0 / static_cast<double>(cfg.batch);
        for (auto& g : grads)
            for (std::int64_t i = 0; i < g.size(); ++i) g.data()[i] *= inv_b;

        double batch_loss = loss_sum * inv_b;
        require(std::isfinite(batch_loss), ErrorCode::training_diverged,
                "TMDiT training diverged at step " + std::to_string(step));
        optimizer.step(model->params(), grads,
                       lr_multiplier(step, cfg.steps, cfg.lr_drops, cfg.lr_factor));
        check_parameters_sane(model->params(), "TMDiT", step);

        result.loss_trace.push_back(batch_loss);
        if (step % cfg.log_every == 0 || step + 1 == cfg.steps)
            log.row(std::to_string(step) + " " + fmt(batch_loss) + " " +
                    fmt(cfg.lr * lr_multiplier(step, cfg.steps, cfg.lr_drops, cfg.lr_factor)));
    }

    if (!ckpt_path.empty())
        save_tmdit_checkpoint(ckpt_path, *model, result.latent_mean, result.latent_std);
    return result;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

void save_vae_checkpoint(const std::string& path, const MotionVAE& vae) {
    nlohmann::ordered_json meta;
    meta["kind"] = "vae";
    const VAEConfig& c = vae.config();
    meta["config"] = {{"joints", c.joints},
                      {"channels", c.channels},
                      {"hidden", c.hidden},
                      {"latent_joints", c.latent_joints},
                      {"latent_channels", c.latent_channels}};
    meta["layout"] = layout_to_json(vae.layout());
    meta["feature_mean"] = tensor_to_vec(vae.feature_mean());
    meta["feature_std"] = tensor_to_vec(vae.feature_std());
    save_checkpoint(path, meta, vae.params());
}

std::shared_ptr<MotionVAE> load_vae_checkpoint(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    require(ckpt.meta.value("kind", "") == "vae", ErrorCode::incompatible_checkpoint,
            "checkpoint is not a VAE: " + path);
    const auto& jc = ckpt.meta.at("config");
    VAEConfig cfg;
    cfg.joints = jc.at("joints").get<int>();
    cfg.channels = jc.at("channels").get<int>();
    cfg.hidden = jc.at("hidden").get<int>();
    cfg.latent_joints = jc.at("latent_joints").get<int>();
    cfg.latent_channels = jc.at("latent_channels").get<int>();
    SkeletonLayout layout = layout_from_json(ckpt.meta.at("layout"));
    Rng dummy(0);
    auto vae = std::make_shared<MotionVAE>(cfg, layout, dummy);
    restore_params(vae->params(), ckpt);
    Tensor::Shape stat_shape{static_cast<std::int64_t>(cfg.joints),
                             static_cast<std::int64_t>(cfg.channels)};
    vae->set_feature_stats(
        vec_to_tensor(ckpt.meta.at("feature_mean").get<std::vector<double>>(), stat_shape),
        vec_to_tensor(ckpt.meta.at("feature_std").get<std::vector<double>>(), stat_shape));
    return vae;
}

void save_tmdit_checkpoint(const std::string& path, const TMDiT& model,
                           const Tensor& latent_mean, const Tensor& latent_std) {
    nlohmann::ordered_json meta;
    meta["kind"] = "tmdit";
    const TMDiTConfig& c = model.config();
    meta["config"] = {{"n_blocks", c.n_blocks},
                      {"n_separate", c.n_separate},
                      {"n_shared", c.n_shared},
                      {"model_dim", c.model_dim},
                      {"n_heads", c.n_heads},
                      {"ffn_dim", c.ffn_dim},
                      {"vocab_size", c.vocab_size},
                      {"max_words", c.max_words},
                      {"latent_joints", c.latent_joints},
                      {"latent_channels", c.latent_channels},
                      {"rope_base", c.rope_base}};
    meta["schedule"] = {{"scales", model.schedule().scales}, {"times", model.schedule().times}};
    meta["vocabulary"] = Vocabulary::standard().words;
    meta["layout"] = layout_to_json(model.layout());
    meta["latent_mean"] = tensor_to_vec(latent_mean);
    meta["latent_std"] = tensor_to_vec(latent_std);
    save_checkpoint(path, meta, model.params());
}

LoadedTMDiT load_tmdit_checkpoint(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    require(ckpt.meta.value("kind", "") == "tmdit", ErrorCode::incompatible_checkpoint,
            "checkpoint is not a TMDiT model: " + path);
    const auto& jc = ckpt.meta.at("config");
    TMDiTConfig cfg;
    cfg.n_blocks = jc.at("n_blocks").get<int>();
    cfg.n_separate = jc.at("n_separate").get<int>();
    cfg.n_shared = jc.at("n_shared").get<int>();
    cfg.model_dim = jc.at("model_dim").get<int>();
    cfg.n_heads = jc.at("n_heads").get<int>();
    cfg.ffn_dim = jc.at("ffn_dim").get<int>();
    cfg.vocab_size = jc.at("vocab_size").get<int>();
    cfg.max_words = jc.at("max_words").get<int>();
    cfg.latent_joints = jc.at("latent_joints").get<int>();
    cfg.latent_channels = jc.at("latent_channels").get<int>();
    cfg.rope_base = jc.at("rope_base").get<double>();
    auto sched = make_schedule(ckpt.meta.at("schedule").at("scales").get<std::vector<double>>(),
                               ckpt.meta.at("schedule").at("times").get<std::vector<double>>());
    SkeletonLayout layout = layout_from_json(ckpt.meta.at("layout"));
    Rng dummy(0);
    LoadedTMDiT out;
    out.model = std::make_shared<TMDiT>(cfg, layout, sched, dummy);
    restore_params(out.model->params(), ckpt);
    Tensor::Shape stat_shape{static_cast<std::int64_t>(cfg.latent_joints),
                             static_cast<std::int64_t>(cfg.latent_channels)};
    out.latent_mean =
        vec_to_tensor(ckpt.meta.at("latent_mean").get<std::vector<double>>(), stat_shape);
    out.latent_std =
        vec_to_tensor(ckpt.meta.at("latent_std").get<std::vector<double>>(), stat_shape);
    out.vocab =
        Vocabulary::from_words(ckpt.meta.at("vocabulary").get<std::vector<std::string>>());
    require(static_cast<int>(out.vocab.size()) == cfg.vocab_size,
            ErrorCode::incompatible_checkpoint, "vocabulary size disagrees with the config");
    return out;
}

// ---------------------------------------------------------------------------
// generation
// ---------------------------------------------------------------------------

MotionSequence GenerationPipeline::generate(const std::vector<std::int64_t>& tokens,
                                            std::int64_t frames,
                                            const std::vector<int>& steps_per_stage,
                                            double guidance_weight, Rng& noise_rng) const {
    require(model && vae, ErrorCode::invalid_argument, "pipeline is not loaded");
    require(frames >= 4, ErrorCode::invalid_argument, "need at least 4 frames");
    const std::int64_t l = frames / 4;
    const std::int64_t j = model->config().latent_joints;
    const std::int64_t d = model->config().latent_channels;
    Tensor noise = Tensor::randn({l, j, d}, noise_rng);
    TMDiTVelocityField field(*model, tokens);
    GuidanceConfig guidance{guidance_weight};
    Tensor x1 = hierarchical_sample(field, model->schedule(), noise, steps_per_stage, guidance);
    Tensor z = standardize_latent(x1, latent_mean, latent_std, true);
    return vae->decode(LatentSequence{z}, frames);
}

GenerationPipeline GenerationPipeline::open(const std::string& vae_ckpt,
                                            const std::string& tmdit_ckpt) {
    GenerationPipeline p;
    p.vae = load_vae_checkpoint(vae_ckpt);
    LoadedTMDiT lt = load_tmdit_checkpoint(tmdit_ckpt);
    p.model = lt.model;
    p.latent_mean = lt.latent_mean;
    p.latent_std = lt.latent_std;
    p.vocab = lt.vocab;
    require(p.vae->config().latent_joints == p.model->config().latent_joints &&
                p.vae->config().latent_channels == p.model->config().latent_channels,
            ErrorCode::incompatible_checkpoint, "VAE and model latent shapes disagree");
    return p;
}

}  // namespace hmflow
