// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace hmflow {

// Temporal linear resampling over the first tensor dimension. Align-corners
// convention: output index i' samples source position i'*(L-1)/(L'-1); a
// single-frame output samples the interval midpoint (L-1)/2. Down-then-up is
// exact on per-channel affine ramps under this convention.

// max(1, round(r*l)), round half away from zero.
std::int64_t resampled_length(std::int64_t frames, double ratio);

// One output frame as a convex combination of at most two source frames.
struct ResampleTap {
    std::int64_t lo;
    std::int64_t hi;
    double w_lo;
    double w_hi;
};

// Interpolation taps mapping src_frames onto dst_frames (align corners).
std::vector<ResampleTap> resample_taps(std::int64_t src_frames, std::int64_t dst_frames);

// Resample to an explicit frame count. Returns the input unchanged when the
// count already matches.
Tensor resample_to(const Tensor& x, std::int64_t dst_frames);

// Resample by ratio: dst length = resampled_length(frames, ratio).
Tensor resample(const Tensor& x, double ratio);

}  // namespace hmflow
