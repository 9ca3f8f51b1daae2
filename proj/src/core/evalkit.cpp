// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/evalkit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "core/resample.hpp"

namespace hmflow {

Tensor motion_features(const MotionSequence& motion) {
    const std::int64_t J = motion.joints(), C = motion.channels(), L = motion.frames();
    require(L >= 1, ErrorCode::invalid_argument, "empty motion");
    Tensor out({2 * J * C});
    for (std::int64_t j = 0; j < J; ++j)
        for (std::int64_t c = 0; c < C; ++c) {
            double mean = 0.0;
            for (std::int64_t i = 0; i < L; ++i) mean += motion.payload.at(i, j, c);
            mean /= static_cast<double>(L);
            double var = 0.0;
            for (std::int64_t i = 0; i < L; ++i) {
                double d = motion.payload.at(i, j, c) - mean;
                var += d * d;
            }
            var /= static_cast<double>(L);
            out.at(2 * (j * C + c)) = mean;
            out.at(2 * (j * C + c) + 1) = std::sqrt(var);
        }
    return out;
}

PoseFeatureSet PoseFeatureSet::from_motions(const std::vector<MotionSequence>& motions) {
    PoseFeatureSet set;
    set.items.reserve(motions.size());
    for (const auto& m : motions) set.items.push_back(motion_features(m));
    return set;
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

void gaussian_fit(const PoseFeatureSet& s, Vec& mu, Mat& cov) {
    const auto n = static_cast<Eigen::Index>(s.items.size());
    const auto d = static_cast<Eigen::Index>(s.items.front().size());
    Mat x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < d; ++c)
            x(i, c) = s.items[static_cast<size_t>(i)].at(c);
    mu = x.colwise().mean();
    Mat centered = x.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / static_cast<double>(n - 1);
    cov.diagonal().array() += 1e-6;  // regularization
}

Mat psd_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
    Vec ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = ev(i) > 0.0 ? std::sqrt(ev(i)) : 0.0;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_pose_distance(const PoseFeatureSet& a, const PoseFeatureSet& b) {
    require(a.items.size() >= 2 && b.items.size() >= 2, ErrorCode::distance_undefined,
            "feature sets need at least two items");
    require(a.items.front().size() == b.items.front().size(), ErrorCode::invalid_argument,
            "feature dimension mismatch");
    for (const auto& t : a.items)
        require(t.all_finite(), ErrorCode::distance_undefined, "non-finite features");
    for (const auto& t : b.items)
        require(t.all_finite(), ErrorCode::distance_undefined, "non-finite features");

    Vec mu_a, mu_b;
    Mat cov_a, cov_b;
    gaussian_fit(a, mu_a, cov_a);
    gaussian_fit(b, mu_b, cov_b);

    Mat sa = psd_sqrt(cov_a);
    Mat inner = sa * cov_b * sa;
    Mat cross = psd_sqrt(inner);

    double mean_term = (mu_a - mu_b).squaredNorm();
    double trace_term = cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
    double dist = mean_term + trace_term;
    return dist > 0.0 ? dist : 0.0;
}

double diversity(const std::vector<MotionSequence>& motions, int n_pairs, std::uint64_t seed) {
    require(motions.size() >= 2, ErrorCode::invalid_argument,
            "diversity needs at least two motions");
    require(n_pairs >= 1, ErrorCode::invalid_argument, "n_pairs must be positive");
    auto set = PoseFeatureSet::from_motions(motions);
    Rng rng(seed, 0xD1Full);
    double acc = 0.0;
    for (int p = 0; p < n_pairs; ++p) {
        std::uint64_t i = rng.next_below(set.items.size());
        std::uint64_t j = rng.next_below(set.items.size());
        while (j == i) j = rng.next_below(set.items.size());
        double d2 = 0.0;
        const Tensor& fi = set.items[static_cast<size_t>(i)];
        const Tensor& fj = set.items[static_cast<size_t>(j)];
        for (std::int64_t c = 0; c < fi.size(); ++c) {
            double d = fi.at(c) - fj.at(c);
            d2 += d * d;
        }
        acc += std::sqrt(d2);
    }
    return acc / static_cast<double>(n_pairs);
}

// ---------------------------------------------------------------------------
// rules
// ---------------------------------------------------------------------------

namespace {

struct RuleView {
    const MotionSequence& m;
    int root, wrist_l, wrist_r, shoulder_l, shoulder_r;

    explicit RuleView(const MotionSequence& motion) : m(motion) {
        static const SkeletonLayout layout = SkeletonLayout::reference15();
        require(motion.joints() == layout.joint_count() && motion.channels() == 6,
                ErrorCode::invalid_argument, "rules expect the 15-joint, 6-channel layout");
        root = layout.root();
        wrist_l = layout.index_of("wrist_l");
        wrist_r = layout.index_of("wrist_r");
        shoulder_l = layout.index_of("shoulder_l");
        shoulder_r = layout.index_of("shoulder_r");
    }

    double net_yaw(double dil) const {
        double acc = 0.0;
        for (std::int64_t i = 0; i < m.frames(); ++i)
            acc += m.payload.at(i, root, root_channel::yaw_rate);
        return acc * dil;
    }
    double mean_v_fwd() const {
        double acc = 0.0;
        for (std::int64_t i = 0; i < m.frames(); ++i)
            acc += m.payload.at(i, root, root_channel::v_fwd);
        return acc / static_cast<double>(m.frames());
    }
    double max_wrist_rise(int side) const {
        int w = side == 0 ? wrist_l : wrist_r;
        int s = side == 0 ? shoulder_l : shoulder_r;
        double best = -1e300;
        for (std::int64_t i = 0; i < m.frames(); ++i)
            best = std::max(best, m.payload.at(i, w, joint_channel::y) -
                                      m.payload.at(i, s, joint_channel::y));
        return best;
    }
};

constexpr double kWalkSpeedMin = 0.020;     // units per frame
constexpr double kWalkYawMax = 0.15 * M_PI;
constexpr double kTurnYawMin = 0.35 * M_PI;
constexpr double kTurnSpeedMax = 0.012;
constexpr double kRaiseMin = 0.15;
constexpr double kWaveRaiseMin = 0.10;
constexpr double kWaveAmpMin = 0.05;
constexpr int kWaveCrossMin = 3;
constexpr double kJumpMin = 0.07;
constexpr double kCircleYawMin = M_PI;
constexpr double kCircleSpeedMin = 0.015;
constexpr double kCircleBacktrackFrac = 0.15;

bool wave_oscillates(const RuleView& v, int side) {
    int w = side == 0 ? v.wrist_l : v.wrist_r;
    const std::int64_t L = v.m.frames();
    const std::int64_t begin = static_cast<std::int64_t>(0.4 * static_cast<double>(L));
    if (L - begin < 4) return false;
    double mean = 0.0;
    for (std::int64_t i = begin; i < L; ++i) mean += v.m.payload.at(i, w, joint_channel::x);
    mean /= static_cast<double>(L - begin);
    double max_dev = 0.0;
    int crossings = 0;
    double prev = v.m.payload.at(begin, w, joint_channel::x) - mean;
    for (std::int64_t i = begin + 1; i < L; ++i) {
        double cur = v.m.payload.at(i, w, joint_channel::x) - mean;
        max_dev = std::max(max_dev, std::abs(cur));
        if (prev * cur < 0.0 && (std::abs(prev) > 0.02 || std::abs(cur) > 0.02)) ++crossings;
        if (cur != 0.0) prev = cur;
    }
    return crossings >= kWaveCrossMin && max_dev >= kWaveAmpMin;
}

bool circle_monotone(const RuleView& v, int direction) {
    double cum = 0.0, run_max = 0.0, backtrack = 0.0;
    for (std::int64_t i = 0; i < v.m.frames(); ++i) {
        cum += direction * v.m.payload.at(i, v.root, root_channel::yaw_rate);
        run_max = std::max(run_max, cum);
        backtrack = std::max(backtrack, run_max - cum);
    }
    return run_max > 0.0 && backtrack <= kCircleBacktrackFrac * run_max;
}

}  // namespace

bool semantic_rule(const MotionSequence& motion, ProgramId program, const ProgramParams& params,
                   double frame_dilation) {
    require(frame_dilation > 0.0, ErrorCode::invalid_argument, "frame_dilation must be positive");
    RuleView v(motion);
    switch (program) {
        case ProgramId::walk_forward:
            return v.mean_v_fwd() >= kWalkSpeedMin &&
                   std::abs(v.net_yaw(frame_dilation)) <= kWalkYawMax;
        case ProgramId::turn:
            return params.direction * v.net_yaw(frame_dilation) >= kTurnYawMin &&
                   v.mean_v_fwd() <= kTurnSpeedMax;
        case ProgramId::raise_arm:
            return v.max_wrist_rise(params.side) >= kRaiseMin;
        case ProgramId::wave:
            return v.max_wrist_rise(params.side) >= kWaveRaiseMin &&
                   wave_oscillates(v, params.side);
        case ProgramId::jump: {
            double rest = motion.payload.at(0, v.root, root_channel::height);
            double peak = rest;
            for (std::int64_t i = 0; i < motion.frames(); ++i)
                peak = std::max(peak, motion.payload.at(i, v.root, root_channel::height));
            return peak - rest >= kJumpMin;
        }
        case ProgramId::walk_circle:
            return params.direction * v.net_yaw(frame_dilation) >= kCircleYawMin &&
                   v.mean_v_fwd() >= kCircleSpeedMin && circle_monotone(v, params.direction);
    }
    raise(ErrorCode::invalid_argument, "no rule registered for this label");
}

double semantic_accuracy(const std::vector<LabeledMotion>& samples, double frame_dilation) {
    require(!samples.empty(), ErrorCode::invalid_argument, "no samples to evaluate");
    std::int64_t pass = 0;
    for (const auto& s : samples)
        pass += semantic_rule(s.motion, s.program, s.params, frame_dilation) ? 1 : 0;
    return static_cast<double>(pass) / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// noise-consistency diagnostic
// ---------------------------------------------------------------------------

Tensor naive_hierarchical_sample(const VelocityField& field, const ScaleSchedule& sched,
                                 const Tensor& noise, const std::vector<int>& steps_per_stage,
                                 const GuidanceConfig& guidance, Rng& fresh_draws) {
    require(static_cast<int>(steps_per_stage.size()) == sched.stage_count,
            ErrorCode::invalid_argument, "steps_per_stage must list one count per stage");
    const std::int64_t full = noise.frames();
    Tensor x = resample_to(noise, sched.stage_length(1, full));
    for (int k = 1; k <= sched.stage_count; ++k) {
        x = integrate_stage(field, x, sched, k, steps_per_stage[static_cast<size_t>(k - 1)],
                            guidance);
        if (k < sched.stage_count) {
            const std::int64_t len_k = sched.stage_length(k, full);
            const std::int64_t len_next = sched.stage_length(k + 1, full);
            const double tk = sched.t_end(k);
            require(tk > 0.0, ErrorCode::degenerate_transition, "transition undefined at t_k = 0");
            Tensor clean_k =
                scale(sub(x, scale(resample_to(noise, len_k), 1.0 - tk)), 1.0 / tk);
            Tensor clean_next = resample_to(clean_k, len_next);
            // Renoise with a fresh draw: breaks noise consistency by design.
            Tensor::Shape shape = noise.shape();
            shape[0] = len_next;
            Tensor eps = Tensor::randn(shape, fresh_draws);
            x = lincomb(1.0 - tk, eps, tk, clean_next);
        }
    }
    return resample_to(x, full);
}

NoiseConsistencyReport noise_consistency_diagnostic(const VelocityField& field,
                                                    const ScaleSchedule& sched,
                                                    const std::vector<std::uint64_t>& seeds,
                                                    int steps_per_stage,
                                                    const Tensor::Shape& noise_shape,
                                                    const Tensor* oracle_x1) {
    require(sched.stage_count >= 2, ErrorCode::invalid_argument,
            "the diagnostic needs at least two stages");
    require(!seeds.empty(), ErrorCode::invalid_argument, "no seeds given");
    std::vector<int> steps(static_cast<size_t>(sched.stage_count), steps_per_stage);
    GuidanceConfig guidance;  // conditional-only

    NoiseConsistencyReport rep;
    double det_dev = 0.0, naive_dev = 0.0, cross_gap = 0.0;
    double det_err = 0.0, naive_err = 0.0;
    for (std::uint64_t seed : seeds) {
        Rng rng(seed);
        Tensor noise = Tensor::randn(noise_shape, rng);
        const std::uint64_t draws_after_noise = rng.draw_count();

        // Rule (a): the deterministic transition, twice. The seed rng is
        // never consulted again, which the draw counter certifies.
        Tensor a1 = hierarchical_sample(field, sched, noise, steps, guidance);
        Tensor a2 = hierarchical_sample(field, sched, noise, steps, guidance);
        rep.deterministic_draws_after_init += rng.draw_count() - draws_after_noise;
        det_dev += max_abs_diff(a1, a2);

        // Rule (b): fresh renoise draws; reruns share only the initial noise.
        Rng fresh1 = rng.split(1);
        Rng fresh2 = rng.split(2);
        std::uint64_t before = fresh1.draw_count();
        Tensor b1 = naive_hierarchical_sample(field, sched, noise, steps, guidance, fresh1);
        rep.naive_draws_after_init += fresh1.draw_count() - before;
        Tensor b2 = naive_hierarchical_sample(field, sched, noise, steps, guidance, fresh2);
        naive_dev += max_abs_diff(b1, b2);

        cross_gap += max_abs_diff(a1, b1);
        if (oracle_x1 != nullptr) {
            det_err += max_abs_diff(a1, *oracle_x1);
            naive_err += max_abs_diff(b1, *oracle_x1);
        }
    }
    const double n = static_cast<double>(seeds.size());
    rep.deterministic_rerun_deviation = det_dev / n;
    rep.naive_rerun_deviation = naive_dev / n;
    rep.cross_rule_gap = cross_gap / n;
    if (oracle_x1 != nullptr) {
        rep.deterministic_terminal_error = det_err / n;
        rep.naive_terminal_error = naive_err / n;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// retention study
// ---------------------------------------------------------------------------

std::vector<RetentionRow> retention_study(const std::vector<LabeledMotion>& samples,
                                          const std::vector<double>& ratios) {
    require(!samples.empty(), ErrorCode::invalid_argument, "no samples for the study");
    std::vector<RetentionRow> table;
    table.reserve(ratios.size());
    for (double ratio : ratios) {
        require(ratio > 0.0 && ratio <= 1.0, ErrorCode::invalid_argument,
                "ratios must lie in (0, 1]");
        std::vector<LabeledMotion> downsampled;
        downsampled.reserve(samples.size());
        for (const auto& s : samples) {
            LabeledMotion d;
            d.motion = MotionSequence{resample(s.motion.payload, ratio)};
            d.program = s.program;
            d.params = s.params;
            downsampled.push_back(std::move(d));
        }
        RetentionRow row;
        row.ratio = ratio;
        row.accuracy = semantic_accuracy(downsampled, 1.0 / ratio);
        table.push_back(row);
    }
    return table;
}

double mean_channel_variance(const std::vector<MotionSequence>& motions) {
    require(!motions.empty(), ErrorCode::invalid_argument, "no motions");
    const std::int64_t J = motions.front().joints(), C = motions.front().channels();
    double total = 0.0;
    for (std::int64_t j = 0; j < J; ++j)
        for (std::int64_t c = 0; c < C; ++c) {
            double mean = 0.0;
            std::int64_t n = 0;
            for (const auto& m : motions)
                for (std::int64_t i = 0; i < m.frames(); ++i, ++n) mean += m.payload.at(i, j, c);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (const auto& m : motions)
                for (std::int64_t i = 0; i < m.frames(); ++i) {
                    double d = m.payload.at(i, j, c) - mean;
                    var += d * d;
                }
            total += var / static_cast<double>(n);
        }
    return total / static_cast<double>(J * C);
}

}  // namespace hmflow
