// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "core/hiflow.hpp"
#include "core/synthdata.hpp"

namespace hmflow {

// Fixed-length feature vector per motion: temporal mean and std of every
// pose channel. Replaces pretrained feature encoders at desk scale.
Tensor motion_features(const MotionSequence& motion);

struct PoseFeatureSet {
    std::vector<Tensor> items;

    static PoseFeatureSet from_motions(const std::vector<MotionSequence>& motions);
};

// Squared Frechet distance between Gaussian fits of two feature sets, with
// a symmetric PSD matrix square root and +1e-6 I covariance regularization.
double frechet_pose_distance(const PoseFeatureSet& a, const PoseFeatureSet& b);

// Mean Euclidean feature distance over seeded random distinct pairs.
double diversity(const std::vector<MotionSequence>& motions, int n_pairs, std::uint64_t seed);

// ---------------------------------------------------------------------------
// rule-based semantics
// ---------------------------------------------------------------------------

struct LabeledMotion {
    MotionSequence motion;
    ProgramId program = ProgramId::walk_forward;
    ProgramParams params;
};

// frame_dilation rescales integrated quantities (net yaw) when a motion is
// known to be temporally downsampled: pass 1/ratio for resampled inputs.
bool semantic_rule(const MotionSequence& motion, ProgramId program, const ProgramParams& params,
                   double frame_dilation = 1.0);

double semantic_accuracy(const std::vector<LabeledMotion>& samples, double frame_dilation = 1.0);

// ---------------------------------------------------------------------------
// noise-consistency diagnostic
// ---------------------------------------------------------------------------

// Baseline transition that renoises with a fresh draw instead of the initial
// noise. Exists only as a diagnostic foil, never as a sampling mode.
Tensor naive_hierarchical_sample(const VelocityField& field, const ScaleSchedule& sched,
                                 const Tensor& noise, const std::vector<int>& steps_per_stage,
                                 const GuidanceConfig& guidance, Rng& fresh_draws);

struct NoiseConsistencyReport {
    double deterministic_rerun_deviation = 0.0;   // identical trajectories: exactly 0
    double naive_rerun_deviation = 0.0;   // fresh transition draws: > 0
    double cross_rule_gap = 0.0;          // mean output gap between the rules
    std::uint64_t deterministic_draws_after_init = 0;  // counted on the seed rng
    std::uint64_t naive_draws_after_init = 0;
    // Terminal errors vs a known clean sample; set when oracle_x1 != nullptr.
    double deterministic_terminal_error = -1.0;
    double naive_terminal_error = -1.0;
};

NoiseConsistencyReport noise_consistency_diagnostic(const VelocityField& field,
                                                    const ScaleSchedule& sched,
                                                    const std::vector<std::uint64_t>& seeds,
                                                    int steps_per_stage,
                                                    const Tensor::Shape& noise_shape,
                                                    const Tensor* oracle_x1 = nullptr);

// ---------------------------------------------------------------------------
// retention study
// ---------------------------------------------------------------------------

struct RetentionRow {
    double ratio = 1.0;
    double accuracy = 0.0;
};

// Rule accuracy after linear temporal downsampling at each ratio; rules run
// with frame_dilation = 1/ratio.
std::vector<RetentionRow> retention_study(const std::vector<LabeledMotion>& samples,
                                          const std::vector<double>& ratios = {1.0, 0.8, 0.6,
                                                                               0.4, 0.2});

// Pooled per-channel variance of a motion set, averaged over channels (the
// reference scale for reconstruction error).
double mean_channel_variance(const std::vector<MotionSequence>& motions);

}  // namespace hmflow
