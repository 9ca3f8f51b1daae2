/* Copyright (c) 2026 hmflow authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of the hmflow shared library: hierarchical flow-matching
 * motion generation. All functions return hmf_status; HMF_OK is success.
 * On failure hmf_last_error() returns a thread-local message describing the
 * most recent error in the calling thread.
 */

#ifndef HMFLOW_H
#define HMFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HMF_API __declspec(dllexport)
#else
#define HMF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hmf_status {
    HMF_OK = 0,
    HMF_INVALID_ARGUMENT = 1,
    HMF_INVALID_SCHEDULE = 2,
    HMF_INVALID_CONFIG = 3,
    HMF_DEGENERATE_TRANSITION = 4,
    HMF_INTEGRATION_FAILURE = 5,
    HMF_IO_ERROR = 6,
    HMF_FORMAT_ERROR = 7,
    HMF_TOKENIZATION_ERROR = 8,
    HMF_DISTANCE_UNDEFINED = 9,
    HMF_TRAINING_DIVERGED = 10,
    HMF_INCOMPATIBLE_CHECKPOINT = 11,
    HMF_UNKNOWN_COMMAND = 12,
    HMF_INTERNAL_ERROR = 13
} hmf_status;

HMF_API const char* hmf_status_name(hmf_status status);

/* Message for the most recent failure in this thread; empty string if none. */
HMF_API const char* hmf_last_error(void);

/* ------------------------------------------------------------------------
 * Pipeline commands
 * --------------------------------------------------------------------- */

/* Runs one pipeline command (gen-data | train-vae | train-tmdit | sample |
 * eval | diagnose | retention | inspect-schedule) against a config file.
 * `overrides` holds n_overrides strings of the form "key=value" applied on
 * top of the file; config_path may be NULL when overrides carry everything.
 * Artifacts are written under out_dir. */
HMF_API hmf_status hmf_run(const char* command, const char* config_path,
                           const char* const* overrides, size_t n_overrides,
                           const char* out_dir);

/* ------------------------------------------------------------------------
 * Scale schedules
 * --------------------------------------------------------------------- */

typedef struct hmf_schedule hmf_schedule;

/* times may be NULL for the uniform partition; otherwise n_times must be
 * n_scales + 1 with times[0] = 0 and times[n_scales] = 1. */
HMF_API hmf_status hmf_schedule_create(const double* scales, size_t n_scales,
                                       const double* times, size_t n_times,
                                       hmf_schedule** out);
HMF_API void hmf_schedule_destroy(hmf_schedule* sched);
HMF_API hmf_status hmf_schedule_stage_count(const hmf_schedule* sched, int32_t* out);
/* k is 1-based. */
HMF_API hmf_status hmf_schedule_stage(const hmf_schedule* sched, int32_t k, double* scale,
                                      double* t_begin, double* t_end);
HMF_API hmf_status hmf_schedule_stage_length(const hmf_schedule* sched, int32_t k,
                                             int64_t full_frames, int64_t* out);

/* ------------------------------------------------------------------------
 * Temporal resampling
 * --------------------------------------------------------------------- */

HMF_API hmf_status hmf_resampled_length(int64_t frames, double ratio, int64_t* out);

/* Align-corners linear resampling over the frame axis of a dense
 * frames x channels row-major buffer. out must hold
 * hmf_resampled_length(frames, ratio) * channels doubles. */
HMF_API hmf_status hmf_resample(const double* data, int64_t frames, int64_t channels,
                                double ratio, double* out);

/* ------------------------------------------------------------------------
 * Generation
 * --------------------------------------------------------------------- */

typedef struct hmf_generator hmf_generator;

/* Loads a VAE checkpoint and a velocity-model checkpoint. */
HMF_API hmf_status hmf_generator_open(const char* vae_checkpoint,
                                      const char* tmdit_checkpoint, hmf_generator** out);
HMF_API void hmf_generator_destroy(hmf_generator* gen);

/* Full text-to-motion sampling: tokenize prompt, run the hierarchical flow,
 * decode. steps_per_stage may be NULL for 8 steps per stage; otherwise
 * n_steps must equal the schedule's stage count. On success *motion_out is
 * a malloc'd frames*joints*channels buffer owned by the caller; release it
 * with hmf_buffer_free. Deterministic given (prompt, seed). */
HMF_API hmf_status hmf_generator_sample(hmf_generator* gen, const char* prompt_text,
                                        uint64_t seed, int64_t frames, double guidance_weight,
                                        const int32_t* steps_per_stage, size_t n_steps,
                                        double** motion_out, int64_t* frames_out,
                                        int64_t* joints_out, int64_t* channels_out);

HMF_API void hmf_buffer_free(double* buffer);

#ifdef __cplusplus
}
#endif

#endif /* HMFLOW_H */
