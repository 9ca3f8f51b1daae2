// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "hmflow/hmflow.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "core/hiflow.hpp"
#include "core/resample.hpp"
#include "core/runner.hpp"
#include "core/trainer.hpp"

namespace {

thread_local std::string g_last_error;

hmf_status to_status(hmflow::ErrorCode code) {
    return static_cast<hmf_status>(static_cast<int>(code));
}

template <typename Fn>
hmf_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return HMF_OK;
    } catch (const hmflow::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return HMF_INTERNAL_ERROR;
    } catch (...) {
        g_last_error = "unknown failure";
        return HMF_INTERNAL_ERROR;
    }
}

hmf_status fail(hmf_status status, const char* message) {
    g_last_error = message;
    return status;
}

}  // namespace

struct hmf_schedule {
    hmflow::ScaleSchedule sched;
};

struct hmf_generator {
    hmflow::GenerationPipeline pipeline;
};

extern "C" {

const char* hmf_status_name(hmf_status status) {
    switch (status) {
        case HMF_OK: return "ok";
        case HMF_INVALID_ARGUMENT: return "invalid-argument";
        case HMF_INVALID_SCHEDULE: return "invalid-schedule";
        case HMF_INVALID_CONFIG: return "invalid-config";
        case HMF_DEGENERATE_TRANSITION: return "degenerate-transition";
        case HMF_INTEGRATION_FAILURE: return "integration-failure";
        case HMF_IO_ERROR: return "io-error";
        case HMF_FORMAT_ERROR: return "format-error";
        case HMF_TOKENIZATION_ERROR: return "tokenization-error";
        case HMF_DISTANCE_UNDEFINED: return "distance-undefined";
        case HMF_TRAINING_DIVERGED: return "training-diverged";
        case HMF_INCOMPATIBLE_CHECKPOINT: return "incompatible-checkpoint";
        case HMF_UNKNOWN_COMMAND: return "unknown-command";
        case HMF_INTERNAL_ERROR: return "internal-error";
    }
    return "unknown-status";
}

const char* hmf_last_error(void) { return g_last_error.c_str(); }

hmf_status hmf_run(const char* command, const char* config_path, const char* const* overrides,
                   size_t n_overrides, const char* out_dir) {
    if (command == nullptr) return fail(HMF_INVALID_ARGUMENT, "command is null");
    return guarded([&] {
        std::vector<std::string> ov;
        for (size_t i = 0; i < n_overrides; ++i)
            if (overrides != nullptr && overrides[i] != nullptr) ov.emplace_back(overrides[i]);
        hmflow::run_command(command, config_path ? config_path : "", ov,
                            out_dir ? out_dir : "hmflow_out");
    });
}

hmf_status hmf_schedule_create(const double* scales, size_t n_scales, const double* times,
                               size_t n_times, hmf_schedule** out) {
    if (out == nullptr || scales == nullptr || n_scales == 0)
        return fail(HMF_INVALID_ARGUMENT, "scales and out are required");
    return guarded([&] {
        std::optional<std::vector<double>> t;
        if (times != nullptr) t = std::vector<double>(times, times + n_times);
        auto sched = hmflow::make_schedule(std::vector<double>(scales, scales + n_scales), t);
        *out = new hmf_schedule{std::move(sched)};
    });
}

void hmf_schedule_destroy(hmf_schedule* sched) { delete sched; }

hmf_status hmf_schedule_stage_count(const hmf_schedule* sched, int32_t* out) {
    if (sched == nullptr || out == nullptr)
        return fail(HMF_INVALID_ARGUMENT, "null schedule or out");
    *out = sched->sched.stage_count;
    return HMF_OK;
}

hmf_status hmf_schedule_stage(const hmf_schedule* sched, int32_t k, double* scale,
                              double* t_begin, double* t_end) {
    if (sched == nullptr) return fail(HMF_INVALID_ARGUMENT, "null schedule");
    if (k < 1 || k > sched->sched.stage_count)
        return fail(HMF_INVALID_ARGUMENT, "stage index out of range");
    if (scale != nullptr) *scale = sched->sched.scale(k);
    if (t_begin != nullptr) *t_begin = sched->sched.t_begin(k);
    if (t_end != nullptr) *t_end = sched->sched.t_end(k);
    return HMF_OK;
}

hmf_status hmf_schedule_stage_length(const hmf_schedule* sched, int32_t k, int64_t full_frames,
                                     int64_t* out) {
    if (sched == nullptr || out == nullptr)
        return fail(HMF_INVALID_ARGUMENT, "null schedule or out");
    return guarded([&] { *out = sched->sched.stage_length(k, full_frames); });
}

hmf_status hmf_resampled_length(int64_t frames, double ratio, int64_t* out) {
    if (out == nullptr) return fail(HMF_INVALID_ARGUMENT, "null out");
    return guarded([&] { *out = hmflow::resampled_length(frames, ratio); });
}

hmf_status hmf_resample(const double* data, int64_t frames, int64_t channels, double ratio,
                        double* out) {
    if (data == nullptr || out == nullptr)
        return fail(HMF_INVALID_ARGUMENT, "null data or out");
    if (frames < 1 || channels < 1)
        return fail(HMF_INVALID_ARGUMENT, "frames and channels must be positive");
    return guarded([&] {
        hmflow::Tensor x({frames, channels},
                         std::vector<double>(data, data + frames * channels));
        hmflow::Tensor y = hmflow::resample(x, ratio);
        std::memcpy(out, y.data(), static_cast<size_t>(y.size()) * sizeof(double));
    });
}

hmf_status hmf_generator_open(const char* vae_checkpoint, const char* tmdit_checkpoint,
                              hmf_generator** out) {
    if (vae_checkpoint == nullptr || tmdit_checkpoint == nullptr || out == nullptr)
        return fail(HMF_INVALID_ARGUMENT, "checkpoint paths and out are required");
    return guarded([&] {
        auto pipeline = hmflow::GenerationPipeline::open(vae_checkpoint, tmdit_checkpoint);
        *out = new hmf_generator{std::move(pipeline)};
    });
}

void hmf_generator_destroy(hmf_generator* gen) { delete gen; }

hmf_status hmf_generator_sample(hmf_generator* gen, const char* prompt_text, uint64_t seed,
                                int64_t frames, double guidance_weight,
                                const int32_t* steps_per_stage, size_t n_steps,
                                double** motion_out, int64_t* frames_out, int64_t* joints_out,
                                int64_t* channels_out) {
    if (gen == nullptr || prompt_text == nullptr || motion_out == nullptr)
        return fail(HMF_INVALID_ARGUMENT, "generator, prompt and motion_out are required");
    return guarded([&] {
        const auto& pipe = gen->pipeline;
        const int K = pipe.model->schedule().stage_count;
        std::vector<int> steps;
        if (steps_per_stage == nullptr) {
            steps.assign(static_cast<size_t>(K), 8);
        } else {
            hmflow::require(static_cast<int>(n_steps) == K, hmflow::ErrorCode::invalid_argument,
                            "steps_per_stage must list one count per stage");
            steps.assign(steps_per_stage, steps_per_stage + n_steps);
        }
        auto tokens = pipe.vocab.tokenize(prompt_text);
        hmflow::Rng noise_rng(seed, 0x5A11ull);
        hmflow::MotionSequence m =
            pipe.generate(tokens, frames, steps, guidance_weight, noise_rng);
        auto* buf = static_cast<double*>(
            std::malloc(static_cast<size_t>(m.payload.size()) * sizeof(double)));
        hmflow::require(buf != nullptr, hmflow::ErrorCode::internal_error, "allocation failed");
        std::memcpy(buf, m.payload.data(),
                    static_cast<size_t>(m.payload.size()) * sizeof(double));
        *motion_out = buf;
        if (frames_out != nullptr) *frames_out = m.frames();
        if (joints_out != nullptr) *joints_out = m.joints();
        if (channels_out != nullptr) *channels_out = m.channels();
    });
}

void hmf_buffer_free(double* buffer) { std::free(buffer); }

}  // extern "C"
