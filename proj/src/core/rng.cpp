// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/rng.hpp"

#include <cmath>

namespace hmflow {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed ^ (0x6A09E667F3BCC909ull * (stream + 1));
    std::uint64_t s = x;
    return splitmix64(s);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : state_(mix(seed, stream)) {}

std::uint64_t Rng::next_u64() {
    ++draws_;
    return splitmix64(state_);
}

double Rng::uniform() {
    // 53 high bits -> double in [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    // Box-Muller, first branch only: deterministic two-draw cost per sample.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) return 0;
    // Rejection-free modulo is fine here: n is always tiny vs 2^64.
    return next_u64() % n;
}

bool Rng::bernoulli(double p) { return uniform() < p; }

Rng Rng::split(std::uint64_t stream) const {
    Rng child(0);
    child.state_ = mix(state_, stream ^ 0xD1B54A32D192ED03ull);
    return child;
}

}  // namespace hmflow
