// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "core/resample.hpp"
#include "core/rng.hpp"

using namespace hmflow;

TEST_CASE("resampled_length basic values") {
    CHECK(resampled_length(4, 0.5) == 2);
    CHECK(resampled_length(4, 1.0) == 4);
    CHECK(resampled_length(100, 1.0 / 3.0) == 33);  // max(1, round(100/3))
    CHECK(resampled_length(1, 0.01) == 1);          // floor at one frame
    CHECK(resampled_length(3, 0.5) == 2);           // 1.5 rounds away from zero
    CHECK(resampled_length(2, 2.0) == 4);
    CHECK_THROWS_AS((void)resampled_length(0, 0.5), Error);
    CHECK_THROWS_AS((void)resampled_length(4, 0.0), Error);
    CHECK_THROWS_AS((void)resampled_length(4, -1.0), Error);
}

TEST_CASE("resample known ramps") {
    Tensor x = Tensor::of({0, 2, 4, 6});

    SUBCASE("identity at r=1") {
        Tensor y = resample(x, 1.0);
        CHECK(max_abs_diff(x, y) == 0.0);
    }
    SUBCASE("downsample 0.5 picks endpoints of the align-corners grid") {
        Tensor y = resample(x, 0.5);
        REQUIRE(y.frames() == 2);
        CHECK(y.at(0) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(y.at(1) == doctest::Approx(6.0).epsilon(1e-15));
    }
    SUBCASE("upsample by 2 fills the affine ramp") {
        Tensor z = Tensor::of({0, 6});
        Tensor y = resample(z, 2.0);
        REQUIRE(y.frames() == 4);
        for (int i = 0; i < 4; ++i) CHECK(y.at(i) == doctest::Approx(2.0 * i).epsilon(1e-15));
    }
}

TEST_CASE("resample rejects non-finite payload") {
    Tensor x = Tensor::of({0, 1, std::nan(""), 3});
    CHECK_THROWS_AS((void)resample(x, 0.5), Error);
}

TEST_CASE("single-frame output samples the interval midpoint") {
    Tensor x = Tensor::of({0, 10});
    Tensor y = resample(x, 0.5);  // length max(1, round(1)) = 1
    REQUIRE(y.frames() == 1);
    CHECK(y.at(0) == doctest::Approx(5.0));
}

TEST_CASE("affine sequences are a fixed point of down-then-up") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::int64_t len = 4 + static_cast<std::int64_t>(rng.next_below(60));
        double a = rng.uniform(-2, 2), b = rng.uniform(-5, 5);
        Tensor x({len, 2});
        for (std::int64_t i = 0; i < len; ++i) {
            x.at(i, 0) = a * static_cast<double>(i) + b;
            x.at(i, 1) = -0.5 * a * static_cast<double>(i) + 2.0 * b;
        }
        double r = rng.uniform(0.3, 0.95);
        if (resampled_length(len, r) < 2) continue;
        Tensor down = resample(x, r);
        Tensor up = resample_to(down, len);
        // Align-corners interpolation is exact on affine ramps.
        CHECK(max_abs_diff(up, x) < 1e-11);
    }
}

TEST_CASE("resample is linear and stays within channel bounds") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        std::int64_t len = 2 + static_cast<std::int64_t>(rng.next_below(40));
        Tensor x = Tensor::randn({len, 3}, rng);
        Tensor y = Tensor::randn({len, 3}, rng);
        double alpha = rng.uniform(-2, 2), beta = rng.uniform(-2, 2);
        double r = rng.uniform(0.25, 2.5);

        Tensor lhs = resample(lincomb(alpha, x, beta, y), r);
        Tensor rhs = lincomb(alpha, resample(x, r), beta, resample(y, r));
        CHECK(max_abs_diff(lhs, rhs) < 1e-12);

        // Convex combination: outputs bounded by per-channel extrema.
        Tensor rx = resample(x, r);
        for (int c = 0; c < 3; ++c) {
            double lo = 1e300, hi = -1e300;
            for (std::int64_t i = 0; i < len; ++i) {
                lo = std::min(lo, x.at(i, c));
                hi = std::max(hi, x.at(i, c));
            }
            for (std::int64_t i = 0; i < rx.frames(); ++i) {
                CHECK(rx.at(i, c) >= lo - 1e-12);
                CHECK(rx.at(i, c) <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("trailing dims are interpolated elementwise") {
    Tensor x({3, 2, 2});
    for (std::int64_t i = 0; i < x.size(); ++i) x.at(i) = static_cast<double>(i);
    Tensor y = resample_to(x, 5);
    REQUIRE(y.frames() == 5);
    // Each flat channel is affine in the frame index here, so values at the
    // resampled grid are exact linear interpolants.
    for (std::int64_t c = 0; c < 4; ++c) {
        double lo = x.at(c), step = 4.0;  // per-frame increment in flat layout
        for (std::int64_t i = 0; i < 5; ++i) {
            double pos = static_cast<double>(i) * 2.0 / 4.0;
            CHECK(y.at(i * 4 + c) == doctest::Approx(lo + step * pos).epsilon(1e-14));
        }
    }
}
