// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0
//
// Exercises the shared-library surface exactly as an external client would:
// only hmflow/hmflow.h, no internal headers.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hmflow/hmflow.h"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

const std::string kWork = "/tmp/hmflow_capi_test";

struct WorkDir {
    WorkDir() {
        std::filesystem::remove_all(kWork);
        std::filesystem::create_directories(kWork);
    }
};

}  // namespace

TEST_CASE("status names and error reporting") {
    CHECK(std::string(hmf_status_name(HMF_OK)) == "ok");
    CHECK(std::string(hmf_status_name(HMF_INVALID_SCHEDULE)) == "invalid-schedule");
    CHECK(std::string(hmf_status_name(HMF_UNKNOWN_COMMAND)) == "unknown-command");

    hmf_status s = hmf_run("fly-to-the-moon", nullptr,
                           nullptr, 0, "/tmp/hmflow_capi_unused");
    CHECK(s == HMF_INVALID_CONFIG);  // missing mandatory seed is caught first
    const char* ov[] = {"seed=1"};
    s = hmf_run("fly-to-the-moon", nullptr, ov, 1, "/tmp/hmflow_capi_unused");
    CHECK(s == HMF_UNKNOWN_COMMAND);
    CHECK(std::strlen(hmf_last_error()) > 0);
}

TEST_CASE("schedule handles") {
    const double scales[] = {1.0 / 3.0, 2.0 / 3.0, 1.0};
    hmf_schedule* sched = nullptr;
    REQUIRE(hmf_schedule_create(scales, 3, nullptr, 0, &sched) == HMF_OK);
    int32_t k = 0;
    CHECK(hmf_schedule_stage_count(sched, &k) == HMF_OK);
    CHECK(k == 3);
    double scale = 0, t0 = 0, t1 = 0;
    CHECK(hmf_schedule_stage(sched, 2, &scale, &t0, &t1) == HMF_OK);
    CHECK(scale == doctest::Approx(2.0 / 3.0));
    CHECK(t0 == doctest::Approx(1.0 / 3.0));
    CHECK(t1 == doctest::Approx(2.0 / 3.0));
    int64_t len = 0;
    CHECK(hmf_schedule_stage_length(sched, 1, 18, &len) == HMF_OK);
    CHECK(len == 6);
    CHECK(hmf_schedule_stage(sched, 4, &scale, &t0, &t1) == HMF_INVALID_ARGUMENT);
    hmf_schedule_destroy(sched);

    const double bad[] = {0.9, 0.3};
    hmf_schedule* none = nullptr;
    CHECK(hmf_schedule_create(bad, 2, nullptr, 0, &none) == HMF_INVALID_SCHEDULE);
    CHECK(none == nullptr);
}

TEST_CASE("resampling buffers") {
    int64_t len = 0;
    CHECK(hmf_resampled_length(4, 0.5, &len) == HMF_OK);
    CHECK(len == 2);
    CHECK(hmf_resampled_length(0, 0.5, &len) == HMF_INVALID_ARGUMENT);

    const double data[] = {0, 2, 4, 6};  // 4 frames x 1 channel
    double out[2] = {0, 0};
    REQUIRE(hmf_resample(data, 4, 1, 0.5, out) == HMF_OK);
    CHECK(out[0] == doctest::Approx(0.0));
    CHECK(out[1] == doctest::Approx(6.0));
}

TEST_CASE("pipeline: corpus, training, sampling through the C API") {
    WorkDir wd;

    // gen-data
    {
        const char* ov[] = {"seed=21",
                            "data.programs=[walk_forward, raise_arm, jump]",
                            "data.n_per_program=20",
                            "data.min_frames=32",
                            "data.max_frames=32",
                            "data.out=corpus.bin"};
        REQUIRE(hmf_run("gen-data", nullptr, ov, 6, (kWork + "/data").c_str()) == HMF_OK);
        CHECK(std::filesystem::exists(kWork + "/data/corpus.bin"));
        CHECK(std::filesystem::exists(kWork + "/data/config_used.cfg"));
    }

    // train-vae (tiny, a few steps: the API contract, not model quality)
    {
        std::string corpus_key = "data.corpus=" + kWork + "/data/corpus.bin";
        const char* ov[] = {"seed=22", corpus_key.c_str(), "vae.hidden=8",
                            "vae.latent_channels=4", "train.steps=30",
                            "train.batch=8", "train.lr=0.001"};
        REQUIRE(hmf_run("train-vae", nullptr, ov, 7, (kWork + "/vae").c_str()) == HMF_OK);
        CHECK(std::filesystem::exists(kWork + "/vae/vae.ckpt"));
        CHECK(std::filesystem::exists(kWork + "/vae/metrics_vae.txt"));
    }

    // train-tmdit
    {
        std::string corpus_key = "data.corpus=" + kWork + "/data/corpus.bin";
        std::string vae_key = "vae.checkpoint=" + kWork + "/vae/vae.ckpt";
        const char* ov[] = {"seed=23",
                            corpus_key.c_str(),
                            vae_key.c_str(),
                            "schedule.scales=[0.5, 1.0]",
                            "model.dim=32",
                            "model.n_blocks=2",
                            "model.n_separate=1",
                            "model.n_shared=1",
                            "model.heads=2",
                            "model.ffn_dim=64",
                            "train.steps=20",
                            "train.batch=6"};
        REQUIRE(hmf_run("train-tmdit", nullptr, ov, 12, (kWork + "/tmdit").c_str()) == HMF_OK);
        CHECK(std::filesystem::exists(kWork + "/tmdit/tmdit.ckpt"));
    }

    // sample twice with the same seed: byte-identical outputs
    {
        std::string vae_key = "vae.checkpoint=" + kWork + "/vae/vae.ckpt";
        std::string tmdit_key = "tmdit.checkpoint=" + kWork + "/tmdit/tmdit.ckpt";
        const char* ov[] = {"seed=24",
                            vae_key.c_str(),
                            tmdit_key.c_str(),
                            "sample.prompt=a person jumps straight up",
                            "sample.frames=32",
                            "sample.count=2",
                            "steps_per_stage=[3, 3]",
                            "guidance_weight=2.0"};
        REQUIRE(hmf_run("sample", nullptr, ov, 8, (kWork + "/s1").c_str()) == HMF_OK);
        REQUIRE(hmf_run("sample", nullptr, ov, 8, (kWork + "/s2").c_str()) == HMF_OK);
        CHECK(slurp(kWork + "/s1/samples.bin") == slurp(kWork + "/s2/samples.bin"));
        CHECK(slurp(kWork + "/s1/trajectory.txt") == slurp(kWork + "/s2/trajectory.txt"));
    }

    // generator handle
    {
        hmf_generator* gen = nullptr;
        REQUIRE(hmf_generator_open((kWork + "/vae/vae.ckpt").c_str(),
                                   (kWork + "/tmdit/tmdit.ckpt").c_str(), &gen) == HMF_OK);
        double* motion = nullptr;
        int64_t frames = 0, joints = 0, channels = 0;
        const int32_t steps[] = {3, 3};
        REQUIRE(hmf_generator_sample(gen, "a person raises their left arm", 77, 32, 2.0, steps,
                                     2, &motion, &frames, &joints, &channels) == HMF_OK);
        CHECK(frames == 32);
        CHECK(joints == 15);
        CHECK(channels == 6);
        for (int64_t i = 0; i < frames * joints * channels; ++i)
            CHECK(std::isfinite(motion[i]));

        // Same seed, same prompt: identical output.
        double* motion2 = nullptr;
        REQUIRE(hmf_generator_sample(gen, "a person raises their left arm", 77, 32, 2.0, steps,
                                     2, &motion2, nullptr, nullptr, nullptr) == HMF_OK);
        CHECK(std::memcmp(motion, motion2, sizeof(double) * frames * joints * channels) == 0);

        // Out-of-vocabulary prompt.
        double* motion3 = nullptr;
        CHECK(hmf_generator_sample(gen, "a person does parkour", 1, 32, 2.0, steps, 2, &motion3,
                                   nullptr, nullptr, nullptr) == HMF_TOKENIZATION_ERROR);
        CHECK(motion3 == nullptr);

        hmf_buffer_free(motion);
        hmf_buffer_free(motion2);
        hmf_generator_destroy(gen);
    }

    // diagnose + retention + eval gt-halves + inspect-schedule, end to end
    {
        const char* ov[] = {"seed=25", "schedule.scales=[0.3333333333333333, 0.6666666666666666, 1.0]",
                            "diagnose.steps=3", "diagnose.frames=8"};
        REQUIRE(hmf_run("diagnose", nullptr, ov, 4, (kWork + "/diag").c_str()) == HMF_OK);
        std::string report = slurp(kWork + "/diag/diagnostic.txt");
        CHECK(report.find("noise_consistency PASS") != std::string::npos);
    }
    {
        std::string corpus_key = "data.corpus=" + kWork + "/data/corpus.bin";
        const char* ov[] = {"seed=26", corpus_key.c_str()};
        REQUIRE(hmf_run("retention", nullptr, ov, 2, (kWork + "/ret").c_str()) == HMF_OK);
        CHECK(slurp(kWork + "/ret/retention.txt").find("# ratio accuracy") == 0);

        const char* eval_ov[] = {"seed=27", corpus_key.c_str(), "eval.mode=gt-halves"};
        REQUIRE(hmf_run("eval", nullptr, eval_ov, 3, (kWork + "/eval").c_str()) == HMF_OK);
        std::string report = slurp(kWork + "/eval/eval.txt");
        CHECK(report.find("semantic_accuracy 1") != std::string::npos);
    }
    {
        const char* ov[] = {"seed=28", "schedule.scales=[0.5, 1.0]", "inspect.frames=18"};
        REQUIRE(hmf_run("inspect-schedule", nullptr, ov, 3, nullptr) == HMF_OK);
    }

    std::filesystem::remove_all(kWork);
}
