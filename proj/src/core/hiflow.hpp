// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "core/tensor.hpp"

namespace hmflow {

// Stage-wise flow matching across temporal scales. Stage k (1-based) acts on
// sequences resampled to fraction scales[k-1] of the full latent length and
// owns the global-time interval [times[k-1], times[k]].
struct ScaleSchedule {
    int stage_count = 0;
    std::vector<double> scales;  // strictly increasing, last <= 1
    std::vector<double> times;   // size K+1, times[0]=0, times[K]=1

    double scale(int k) const { return scales[static_cast<size_t>(k - 1)]; }
    double t_begin(int k) const { return times[static_cast<size_t>(k - 1)]; }
    double t_end(int k) const { return times[static_cast<size_t>(k)]; }
    // Temporal length of stage k for a full-scale sequence of `full_frames`.
    std::int64_t stage_length(int k, std::int64_t full_frames) const;
};

// Validates scales/times; times defaults to the uniform partition k/K.
ScaleSchedule make_schedule(const std::vector<double>& scales,
                            const std::optional<std::vector<double>>& times = std::nullopt);

// Full-scale endpoints of one flow trajectory: x0 is the initial noise draw,
// x1 the clean data point. Shapes must match; first dim is the frame axis.
struct FlowEndpoints {
    Tensor x0;
    Tensor x1;
};

struct FlowSample {
    int stage = 0;
    double t = 0.0;
    double tau = 0.0;
    Tensor point;   // x_t at scale r_k
    Tensor target;  // stage displacement: end - start
};

struct GuidanceConfig {
    double weight = 1.0;  // 1 = conditional only, 0 = unconditional only
};

// Velocity model plugged into the sampler. `conditional=false` asks for the
// null-condition prediction used by classifier-free guidance; fields that do
// not distinguish may ignore the flag.
class VelocityField {
public:
    virtual ~VelocityField() = default;
    virtual Tensor eval(const Tensor& x, double t, int stage, bool conditional) const = 0;
};

// Start/end states of stage k for the given endpoints.
std::pair<Tensor, Tensor> stage_endpoints(const FlowEndpoints& ep, const ScaleSchedule& sched,
                                          int k);

// Interpolated training point and regression target at global time t within
// stage k. t must lie in [t_{k-1}, t_k].
FlowSample training_sample(const FlowEndpoints& ep, const ScaleSchedule& sched, int k, double t);

// Mean squared error over all elements.
double hfm_loss(const Tensor& pred, const Tensor& target);

// Denoise -> upsample -> renoise map carrying the end state of stage k to
// the start state of stage k+1. x0_full is the single initial noise draw at
// full scale; no fresh randomness enters the transition.
Tensor cross_scale_transition(const Tensor& x_hat, const Tensor& x0_full,
                              const ScaleSchedule& sched, int k);

// v_uncond + w * (v_cond - v_uncond)
Tensor cfg_velocity(const Tensor& v_cond, const Tensor& v_uncond, double w);

// Forward-Euler integration of stage k in stage-local normalized time.
// The field regresses the stage displacement, so one unit of tau spans the
// stage. Returns the stage-end estimate.
Tensor integrate_stage(const VelocityField& field, const Tensor& start, const ScaleSchedule& sched,
                       int k, int n_steps, const GuidanceConfig& guidance);

// Full sampler: resample noise to stage 1, flow and transition through all
// stages, then resample the final state back to full length. Deterministic
// given the noise tensor and the field.
Tensor hierarchical_sample(const VelocityField& field, const ScaleSchedule& sched,
                           const Tensor& noise, const std::vector<int>& steps_per_stage,
                           const GuidanceConfig& guidance);

// Oracle field with constant per-stage velocity end_k - start_k; exact under
// Euler for any step count. Used by tests and diagnostics.
class OracleVelocityField final : public VelocityField {
public:
    OracleVelocityField(FlowEndpoints ep, ScaleSchedule sched);
    Tensor eval(const Tensor& x, double t, int stage, bool conditional) const override;

private:
    FlowEndpoints ep_;
    ScaleSchedule sched_;
};

}  // namespace hmflow
