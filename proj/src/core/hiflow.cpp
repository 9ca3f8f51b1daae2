// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/hiflow.hpp"

#include <cmath>

#include "core/resample.hpp"

namespace hmflow {

std::int64_t ScaleSchedule::stage_length(int k, std::int64_t full_frames) const {
    require(k >= 1 && k <= stage_count, ErrorCode::invalid_argument, "stage index out of range");
    return resampled_length(full_frames, scale(k));
}

ScaleSchedule make_schedule(const std::vector<double>& scales,
                            const std::optional<std::vector<double>>& times) {
    require(!scales.empty(), ErrorCode::invalid_schedule, "schedule needs at least one scale");
    for (size_t i = 0; i < scales.size(); ++i) {
        require(std::isfinite(scales[i]) && scales[i] > 0.0, ErrorCode::invalid_schedule,
                "scales must be positive");
        if (i > 0)
            require(scales[i] > scales[i - 1], ErrorCode::invalid_schedule,
                    "scales must be strictly increasing");
    }
    require(scales.back() <= 1.0, ErrorCode::invalid_schedule, "scales must not exceed 1");

    const int K = static_cast<int>(scales.size());
    ScaleSchedule sched;
    sched.stage_count = K;
    sched.scales = scales;
    if (times.has_value()) {
        const auto& t = *times;
        require(static_cast<int>(t.size()) == K + 1, ErrorCode::invalid_schedule,
                "times must have K+1 entries");
        require(t.front() == 0.0 && t.back() == 1.0, ErrorCode::invalid_schedule,
                "times must start at 0 and end at 1");
        for (size_t i = 1; i < t.size(); ++i)
            require(t[i] > t[i - 1] && std::isfinite(t[i]), ErrorCode::invalid_schedule,
                    "times must be strictly increasing");
        sched.times = t;
    } else {
        sched.times.resize(static_cast<size_t>(K) + 1);
        for (int i = 0; i <= K; ++i)
            sched.times[static_cast<size_t>(i)] = static_cast<double>(i) / static_cast<double>(K);
        sched.times[0] = 0.0;
        sched.times[static_cast<size_t>(K)] = 1.0;
    }
    return sched;
}

static void check_endpoints(const FlowEndpoints& ep) {
    require(ep.x0.defined() && ep.x1.defined(), ErrorCode::invalid_argument,
            "flow endpoints undefined");
    require(ep.x0.same_shape(ep.x1), ErrorCode::invalid_argument,
            "flow endpoints must share a shape");
}

std::pair<Tensor, Tensor> stage_endpoints(const FlowEndpoints& ep, const ScaleSchedule& sched,
                                          int k) {
    check_endpoints(ep);
    require(k >= 1 && k <= sched.stage_count, ErrorCode::invalid_argument,
            "stage index out of range");
    const std::int64_t full = ep.x0.frames();
    const std::int64_t len_k = sched.stage_length(k, full);
    const double t0 = sched.t_begin(k);
    const double t1 = sched.t_end(k);

    Tensor noise_k = resample_to(ep.x0, len_k);
    Tensor start;
    if (k == 1) {
        // t_0 = 0: the data term carries zero weight and r_0 is undefined.
        start = noise_k;
    } else {
        Tensor data_prev = resample_to(resample_to(ep.x1, sched.stage_length(k - 1, full)), len_k);
        start = lincomb(1.0 - t0, noise_k, t0, data_prev);
    }
    Tensor end = lincomb(1.0 - t1, noise_k, t1, resample_to(ep.x1, len_k));
    return {std::move(start), std::move(end)};
}

FlowSample training_sample(const FlowEndpoints& ep, const ScaleSchedule& sched, int k, double t) {
    require(k >= 1 && k <= sched.stage_count, ErrorCode::invalid_argument,
            "stage index out of range");
    const double t0 = sched.t_begin(k);
    const double t1 = sched.t_end(k);
    require(t >= t0 && t <= t1, ErrorCode::invalid_argument, "t outside the stage interval");

    auto [start, end] = stage_endpoints(ep, sched, k);
    FlowSample s;
    s.stage = k;
    s.t = t;
    s.tau = (t - t0) / (t1 - t0);
    s.point = lincomb(1.0 - s.tau, start, s.tau, end);
    s.target = sub(end, start);
    return s;
}

double hfm_loss(const Tensor& pred, const Tensor& target) {
    require(pred.same_shape(target), ErrorCode::invalid_argument, "loss shape mismatch");
    return mean_sq_diff(pred, target);
}

Tensor cross_scale_transition(const Tensor& x_hat, const Tensor& x0_full,
                              const ScaleSchedule& sched, int k) {
    require(k >= 1 && k < sched.stage_count, ErrorCode::invalid_argument,
            "transition requires a following stage");
    const std::int64_t full = x0_full.frames();
    const std::int64_t len_k = sched.stage_length(k, full);
    const std::int64_t len_next = sched.stage_length(k + 1, full);
    require(x_hat.frames() == len_k, ErrorCode::invalid_argument,
            "x_hat length does not match stage scale");
    const double tk = sched.t_end(k);
    require(tk > 0.0, ErrorCode::degenerate_transition, "transition undefined at t_k = 0");

    // Denoise: extrapolate clean data at the current scale.
    Tensor clean_k = scale(sub(x_hat, scale(resample_to(x0_full, len_k), 1.0 - tk)), 1.0 / tk);
    // Upsample onto the next stage grid.
    Tensor clean_next = resample_to(clean_k, len_next);
    // Renoise with the same initial draw, resampled; no fresh randomness.
    return lincomb(1.0 - tk, resample_to(x0_full, len_next), tk, clean_next);
}

Tensor cfg_velocity(const Tensor& v_cond, const Tensor& v_uncond, double w) {
    require(v_cond.same_shape(v_uncond), ErrorCode::invalid_argument, "cfg shape mismatch");
    return lincomb(w, v_cond, 1.0 - w, v_uncond);
}

static Tensor guided_velocity(const VelocityField& field, const Tensor& x, double t, int k,
                              const GuidanceConfig& guidance) {
    if (guidance.weight == 1.0) return field.eval(x, t, k, true);
    Tensor v_cond = field.eval(x, t, k, true);
    Tensor v_uncond = field.eval(x, t, k, false);
    return cfg_velocity(v_cond, v_uncond, guidance.weight);
}

Tensor integrate_stage(const VelocityField& field, const Tensor& start, const ScaleSchedule& sched,
                       int k, int n_steps, const GuidanceConfig& guidance) {
    require(k >= 1 && k <= sched.stage_count, ErrorCode::invalid_argument,
            "stage index out of range");
    require(n_steps >= 1, ErrorCode::invalid_argument, "n_steps must be >= 1");
    const double t0 = sched.t_begin(k);
    const double t1 = sched.t_end(k);
    const double dtau = 1.0 / static_cast<double>(n_steps);

    Tensor x = start;
    for (int i = 0; i < n_steps; ++i) {
        double tau = static_cast<double>(i) * dtau;
        double t = t0 + tau * (t1 - t0);
        Tensor v = guided_velocity(field, x, t, k, guidance);
        require(v.same_shape(x), ErrorCode::integration_failure,
                "velocity shape does not match the state");
        require(v.all_finite(), ErrorCode::integration_failure, "velocity is not finite");
        x = lincomb(1.0, x, dtau, v);
    }
    return x;
}

Tensor hierarchical_sample(const VelocityField& field, const ScaleSchedule& sched,
                           const Tensor& noise, const std::vector<int>& steps_per_stage,
                           const GuidanceConfig& guidance) {
    require(noise.defined() && noise.frames() >= 1, ErrorCode::invalid_argument,
            "noise tensor required");
    require(static_cast<int>(steps_per_stage.size()) == sched.stage_count,
            ErrorCode::invalid_argument, "steps_per_stage must list one count per stage");

    const std::int64_t full = noise.frames();
    Tensor x = resample_to(noise, sched.stage_length(1, full));
    for (int k = 1; k <= sched.stage_count; ++k) {
        x = integrate_stage(field, x, sched, k, steps_per_stage[static_cast<size_t>(k - 1)],
                            guidance);
        if (k < sched.stage_count) x = cross_scale_transition(x, noise, sched, k);
    }
    return resample_to(x, full);  // r_K may be below 1
}

OracleVelocityField::OracleVelocityField(FlowEndpoints ep, ScaleSchedule sched)
    : ep_(std::move(ep)), sched_(std::move(sched)) {}

Tensor OracleVelocityField::eval(const Tensor& /*x*/, double /*t*/, int stage,
                                 bool /*conditional*/) const {
    auto [start, end] = stage_endpoints(ep_, sched_, stage);
    return sub(end, start);
}

}  // namespace hmflow
