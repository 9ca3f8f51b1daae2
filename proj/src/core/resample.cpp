// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/resample.hpp"

#include <cmath>

namespace hmflow {

std::int64_t resampled_length(std::int64_t frames, double ratio) {
    require(frames >= 1, ErrorCode::invalid_argument, "resampled_length: frames must be >= 1");
    require(std::isfinite(ratio) && ratio > 0.0, ErrorCode::invalid_argument,
            "resampled_length: ratio must be positive");
    double scaled = ratio * static_cast<double>(frames);
    auto rounded = static_cast<std::int64_t>(std::llround(scaled));  // half away from zero
    return rounded < 1 ? 1 : rounded;
}

std::vector<ResampleTap> resample_taps(std::int64_t src_frames, std::int64_t dst_frames) {
    require(src_frames >= 1 && dst_frames >= 1, ErrorCode::invalid_argument,
            "resample_taps: frame counts must be >= 1");
    std::vector<ResampleTap> taps(static_cast<size_t>(dst_frames));
    for (std::int64_t i = 0; i < dst_frames; ++i) {
        double pos;
        if (dst_frames == 1) {
            pos = static_cast<double>(src_frames - 1) / 2.0;
        } else {
            pos = static_cast<double>(i) * static_cast<double>(src_frames - 1) /
                  static_cast<double>(dst_frames - 1);
        }
        auto lo = static_cast<std::int64_t>(std::floor(pos));
        if (lo > src_frames - 2) lo = src_frames - 2;
        if (lo < 0) lo = 0;
        std::int64_t hi = src_frames == 1 ? 0 : lo + 1;
        double frac = src_frames == 1 ? 0.0 : pos - static_cast<double>(lo);
        taps[static_cast<size_t>(i)] = {lo, hi, 1.0 - frac, frac};
    }
    return taps;
}

Tensor resample_to(const Tensor& x, std::int64_t dst_frames) {
    require(x.defined() && x.rank() >= 1 && x.frames() >= 1, ErrorCode::invalid_argument,
            "resample: input must have at least one frame");
    require(x.all_finite(), ErrorCode::invalid_argument, "resample: non-finite payload");
    if (dst_frames == x.frames()) return x;

    auto taps = resample_taps(x.frames(), dst_frames);
    Tensor::Shape out_shape = x.shape();
    out_shape[0] = dst_frames;
    Tensor out(out_shape);
    const std::int64_t cs = x.channel_stride();
    const double* src = x.data();
    double* dst = out.data();
    for (std::int64_t i = 0; i < dst_frames; ++i) {
        const ResampleTap& t = taps[static_cast<size_t>(i)];
        const double* a = src + t.lo * cs;
        const double* b = src + t.hi * cs;
        double* o = dst + i * cs;
        for (std::int64_t c = 0; c < cs; ++c) o[c] = t.w_lo * a[c] + t.w_hi * b[c];
    }
    return out;
}

Tensor resample(const Tensor& x, double ratio) {
    require(std::isfinite(ratio) && ratio > 0.0, ErrorCode::invalid_argument,
            "resample: ratio must be positive");
    require(x.defined() && x.rank() >= 1 && x.frames() >= 1, ErrorCode::invalid_argument,
            "resample: input must have at least one frame");
    if (ratio == 1.0) {
        require(x.all_finite(), ErrorCode::invalid_argument, "resample: non-finite payload");
        return x;
    }
    return resample_to(x, resampled_length(x.frames(), ratio));
}

}  // namespace hmflow
