// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace hmflow {

// Counter-based generator (splitmix64 over a stream id + counter).
// std::mt19937 engines are portable but the standard distributions are not;
// every random value in this project flows through this class so corpus
// files, training traces and samples are reproducible byte-for-byte.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();
    // Uniform on [0, 1).
    double uniform();
    // Uniform on [lo, hi).
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller; consumes exactly two uniforms per call.
    double normal();
    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);
    bool bernoulli(double p);

    // Child generator with an independent stream, derived deterministically.
    Rng split(std::uint64_t stream) const;

    // Number of raw 64-bit draws made so far (diagnostics count these).
    std::uint64_t draw_count() const { return draws_; }

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

private:
    std::uint64_t state_;
    std::uint64_t draws_ = 0;
};

}  // namespace hmflow
