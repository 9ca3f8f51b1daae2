// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "core/trainer.hpp"

using namespace hmflow;

namespace {

Corpus small_corpus(int n_per_program = 12, std::uint64_t seed = 5) {
    CorpusSpec spec;
    spec.programs = {ProgramId::walk_forward, ProgramId::raise_arm, ProgramId::jump};
    spec.n_per_program = n_per_program;
    spec.min_frames = 32;
    spec.max_frames = 32;
    spec.seed = seed;
    return build_corpus(spec);
}

VAEConfig tiny_vae_cfg() {
    VAEConfig cfg;
    cfg.hidden = 8;
    cfg.latent_channels = 4;
    return cfg;
}

TMDiTConfig tiny_tmdit_cfg() {
    TMDiTConfig cfg;
    cfg.n_blocks = 2;
    cfg.n_separate = 1;
    cfg.n_shared = 1;
    cfg.model_dim = 32;
    cfg.n_heads = 2;
    cfg.ffn_dim = 64;
    cfg.vocab_size = static_cast<int>(Vocabulary::standard().size());
    cfg.latent_channels = 4;
    return cfg;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("lr_multiplier follows the drop schedule") {
    CHECK(lr_multiplier(40, 100) == doctest::Approx(1.0));
    CHECK(lr_multiplier(50, 100) == doctest::Approx(0.2));
    CHECK(lr_multiplier(60, 100) == doctest::Approx(0.2));
    CHECK(lr_multiplier(75, 100) == doctest::Approx(0.04));
    CHECK(lr_multiplier(90, 100) == doctest::Approx(0.04));
    CHECK(lr_multiplier(0, 100) == doctest::Approx(1.0));
    CHECK(lr_multiplier(100, 100) == doctest::Approx(0.04));
    CHECK_THROWS_AS((void)lr_multiplier(101, 100), Error);
    CHECK_THROWS_AS((void)lr_multiplier(-1, 100), Error);
}

TEST_CASE("zero-step VAE training writes the initialization") {
    Corpus corpus = small_corpus();
    TrainConfig cfg;
    cfg.steps = 0;
    cfg.batch = 4;
    cfg.seed = 3;

    auto r = train_vae(corpus, tiny_vae_cfg(), cfg, "/tmp/hmflow_vae0.ckpt");
    CHECK(r.loss_trace.empty());

    Rng init_rng(cfg.seed, 0x1A17ull);
    MotionVAE fresh(tiny_vae_cfg(), SkeletonLayout::reference15(), init_rng);
    auto loaded = load_vae_checkpoint("/tmp/hmflow_vae0.ckpt");
    for (int i = 0; i < fresh.params().count(); ++i)
        CHECK(max_abs_diff(loaded->params().value(i), fresh.params().value(i)) == 0.0);
    std::remove("/tmp/hmflow_vae0.ckpt");
}

TEST_CASE("VAE training reduces reconstruction error and is seed-deterministic") {
    Corpus corpus = small_corpus();
    TrainConfig cfg;
    cfg.steps = 200;
    cfg.batch = 8;
    cfg.seed = 11;
    cfg.threads = 2;
    cfg.lr = 3e-3;  // tiny model, short run

    auto r1 = train_vae(corpus, tiny_vae_cfg(), cfg);
    REQUIRE(static_cast<std::int64_t>(r1.loss_trace.size()) == cfg.steps);
    // Per-step losses are noisy (random aug half, varying records): compare
    // windowed means.
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 20; ++i) {
        head += r1.loss_trace[static_cast<size_t>(i)];
        tail += r1.loss_trace[r1.loss_trace.size() - 1 - static_cast<size_t>(i)];
    }
    CHECK(tail < head);

    auto r2 = train_vae(corpus, tiny_vae_cfg(), cfg);
    REQUIRE(r2.loss_trace.size() == r1.loss_trace.size());
    for (size_t i = 0; i < r1.loss_trace.size(); ++i)
        CHECK(r1.loss_trace[i] == r2.loss_trace[i]);  // identical traces, bitwise
}

TEST_CASE("checkpoint save-load-save round trips bytes") {
    Corpus corpus = small_corpus(6);
    TrainConfig cfg;
    cfg.steps = 10;
    cfg.batch = 4;
    cfg.seed = 7;
    auto r = train_vae(corpus, tiny_vae_cfg(), cfg, "/tmp/hmflow_vae_rt1.ckpt");
    auto loaded = load_vae_checkpoint("/tmp/hmflow_vae_rt1.ckpt");
    save_vae_checkpoint("/tmp/hmflow_vae_rt2.ckpt", *loaded);
    CHECK(read_bytes("/tmp/hmflow_vae_rt1.ckpt") == read_bytes("/tmp/hmflow_vae_rt2.ckpt"));
    std::remove("/tmp/hmflow_vae_rt1.ckpt");
    std::remove("/tmp/hmflow_vae_rt2.ckpt");
}

TEST_CASE("TMDiT training on a frozen VAE") {
    Corpus corpus = small_corpus();
    TrainConfig vae_cfg;
    vae_cfg.steps = 60;
    vae_cfg.batch = 8;
    vae_cfg.seed = 13;
    auto vr = train_vae(corpus, tiny_vae_cfg(), vae_cfg);

    auto sched = make_schedule({0.5, 1.0});
    TrainConfig cfg;
    cfg.steps = 60;
    cfg.batch = 6;
    cfg.seed = 17;
    cfg.threads = 2;

    std::vector<Tensor> before;
    for (int i = 0; i < vr.model->params().count(); ++i)
        before.push_back(vr.model->params().value(i).clone());

    auto tr = train_tmdit(corpus, *vr.model, tiny_tmdit_cfg(), sched, cfg);
    REQUIRE(static_cast<std::int64_t>(tr.loss_trace.size()) == cfg.steps);

    SUBCASE("VAE parameters are bitwise unchanged") {
        for (int i = 0; i < vr.model->params().count(); ++i)
            CHECK(max_abs_diff(vr.model->params().value(i), before[static_cast<size_t>(i)]) ==
                  0.0);
    }
    SUBCASE("loss decreases and starts near the mean squared target norm") {
        // With a zero-initialized velocity head, the first loss equals the
        // mean squared norm of the targets.
        CHECK(tr.loss_trace.front() > 0.1);
        double early = (tr.loss_trace[0] + tr.loss_trace[1] + tr.loss_trace[2]) / 3.0;
        double late = (tr.loss_trace[cfg.steps - 3] + tr.loss_trace[cfg.steps - 2] +
                       tr.loss_trace[cfg.steps - 1]) /
                      3.0;
        CHECK(late < early);
    }
    SUBCASE("deterministic trace") {
        auto tr2 = train_tmdit(corpus, *vr.model, tiny_tmdit_cfg(), sched, cfg);
        for (size_t i = 0; i < tr.loss_trace.size(); ++i)
            CHECK(tr.loss_trace[i] == tr2.loss_trace[i]);
    }
    SUBCASE("tmdit checkpoint round trip") {
        save_tmdit_checkpoint("/tmp/hmflow_t1.ckpt", *tr.model, tr.latent_mean, tr.latent_std);
        auto loaded = load_tmdit_checkpoint("/tmp/hmflow_t1.ckpt");
        save_tmdit_checkpoint("/tmp/hmflow_t2.ckpt", *loaded.model, loaded.latent_mean,
                              loaded.latent_std);
        CHECK(read_bytes("/tmp/hmflow_t1.ckpt") == read_bytes("/tmp/hmflow_t2.ckpt"));
        std::remove("/tmp/hmflow_t1.ckpt");
        std::remove("/tmp/hmflow_t2.ckpt");
    }
    SUBCASE("generation pipeline runs end to end deterministically") {
        GenerationPipeline pipe;
        pipe.model = tr.model;
        pipe.vae = vr.model;
        pipe.latent_mean = tr.latent_mean;
        pipe.latent_std = tr.latent_std;
        auto tokens = Vocabulary::standard().tokenize("a person jumps straight up");
        Rng g1(99), g2(99);
        MotionSequence a = pipe.generate(tokens, 32, {2, 2}, 2.0, g1);
        MotionSequence b = pipe.generate(tokens, 32, {2, 2}, 2.0, g2);
        CHECK(a.frames() == 32);
        CHECK(a.joints() == 15);
        CHECK(max_abs_diff(a.payload, b.payload) == 0.0);
    }
}

TEST_CASE("full dropout trains unconditionally") {
    Corpus corpus = small_corpus(6);
    TrainConfig vae_cfg;
    vae_cfg.steps = 20;
    vae_cfg.batch = 4;
    vae_cfg.seed = 19;
    auto vr = train_vae(corpus, tiny_vae_cfg(), vae_cfg);

    auto sched = make_schedule({1.0});
    TrainConfig cfg;
    cfg.steps = 5;
    cfg.batch = 4;
    cfg.seed = 23;
    cfg.cfg_dropout = 1.0;  // boundary: every sample uses the null token
    auto tr = train_tmdit(corpus, *vr.model, tiny_tmdit_cfg(), sched, cfg);
    CHECK(tr.loss_trace.size() == 5);
    for (double v : tr.loss_trace) CHECK(std::isfinite(v));
}

TEST_CASE("stage draws cover every stage uniformly") {
    // The trainer draws k uniformly; mirror its derivation and count.
    auto sched = make_schedule({1.0 / 3.0, 2.0 / 3.0, 1.0});
    const int K = sched.stage_count;
    const std::int64_t N = 30000;
    std::vector<std::int64_t> counts(static_cast<size_t>(K), 0);
    for (std::int64_t i = 0; i < N; ++i) {
        Rng srng(41, 0xF10ull + static_cast<std::uint64_t>(i) * 1000003ull);
        int k = 1 + static_cast<int>(srng.next_below(static_cast<std::uint64_t>(K)));
        ++counts[static_cast<size_t>(k - 1)];
    }
    const double expect = static_cast<double>(N) / K;
    const double sigma = std::sqrt(static_cast<double>(N) * (1.0 / K) * (1.0 - 1.0 / K));
    for (int k = 0; k < K; ++k)
        CHECK(std::abs(static_cast<double>(counts[static_cast<size_t>(k)]) - expect) <=
              3.0 * sigma);
}

TEST_CASE("training rejects bad configs and reports divergence") {
    Corpus corpus = small_corpus(6);
    TrainConfig cfg;
    cfg.steps = 5;
    cfg.batch = 0;
    CHECK_THROWS_AS((void)train_vae(corpus, tiny_vae_cfg(), cfg), Error);

    cfg.batch = 4;
    cfg.lr = 1e9;  // blows up within a few steps
    cfg.steps = 10;
    bool diverged = false;
    try {
        (void)train_vae(corpus, tiny_vae_cfg(), cfg);
    } catch (const Error& e) {
        diverged = e.code() == ErrorCode::training_diverged;
    }
    CHECK(diverged);
}
