// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "core/jointrope.hpp"
#include "core/rng.hpp"

using namespace hmflow;

namespace {

double head_norm(const Tensor& x, std::int64_t tok, int head) {
    double acc = 0.0;
    for (std::int64_t c = 0; c < x.dim(2); ++c) acc += x.at(tok, head, c) * x.at(tok, head, c);
    return std::sqrt(acc);
}

double dot_head(const Tensor& a, const Tensor& b, std::int64_t ta, std::int64_t tb, int head) {
    double acc = 0.0;
    for (std::int64_t c = 0; c < a.dim(2); ++c) acc += a.at(ta, head, c) * b.at(tb, head, c);
    return acc;
}

}  // namespace

TEST_CASE("segment_dims") {
    auto d64 = segment_dims(64);
    CHECK(d64[0] == 32);
    CHECK(d64[1] == 8);
    CHECK(d64[2] == 8);
    CHECK(d64[3] == 16);
    auto d16 = segment_dims(16);
    CHECK(d16[0] == 8);
    CHECK(d16[1] == 2);
    CHECK(d16[2] == 2);
    CHECK(d16[3] == 4);
    CHECK_THROWS_AS((void)segment_dims(20), Error);
    CHECK_THROWS_AS((void)segment_dims(0), Error);
}

TEST_CASE("token_positions") {
    SkeletonLayout layout = SkeletonLayout::reference15();
    const int J = layout.joint_count();

    SUBCASE("full scale, pelvis at origin") {
        auto pos = token_positions(layout, 8, 1.0);
        REQUIRE(static_cast<int>(pos.size()) == 8 * J);
        const auto& p = pos[static_cast<size_t>(5 * J + layout.index_of("pelvis"))];
        CHECK(p.t == doctest::Approx(5.0));
        CHECK(p.x == 0.0);
        CHECK(p.y == 0.0);
        CHECK(p.depth == 0.0);
    }
    SUBCASE("coarse tokens land on full-scale time") {
        auto pos = token_positions(layout, 4, 0.5);
        const auto& p = pos[static_cast<size_t>(3 * J)];
        CHECK(p.t == doctest::Approx(6.0));  // 3 / (1/2)
    }
    SUBCASE("spatial fields copied from the layout") {
        auto pos = token_positions(layout, 1, 1.0);
        int wl = layout.index_of("wrist_l");
        const auto& p = pos[static_cast<size_t>(wl)];
        CHECK(p.t == 0.0);
        CHECK(p.x == doctest::Approx(-0.70));
        CHECK(p.y == doctest::Approx(0.55));
        CHECK(p.depth == doctest::Approx(4.0));
    }
    CHECK_THROWS_AS((void)token_positions(layout, 4, 0.0), Error);
    CHECK_THROWS_AS((void)token_positions(layout, 4, 1.5), Error);
}

TEST_CASE("rope preserves per-head norms and zero positions are identity") {
    Rng rng(41);
    RopeConfig cfg{32, 10000.0};
    std::vector<TokenPosition> zeros(6);
    Tensor x = Tensor::randn({6, 3, 32}, rng);

    Tensor same = apply_rope(x, zeros, cfg);
    CHECK(max_abs_diff(same, x) == 0.0);

    std::vector<TokenPosition> pos(6);
    for (size_t i = 0; i < pos.size(); ++i) {
        pos[i].t = rng.uniform(-20, 20);
        pos[i].x = rng.uniform(-2, 2);
        pos[i].y = rng.uniform(-2, 2);
        pos[i].depth = static_cast<double>(rng.next_below(5));
    }
    Tensor y = apply_rope(x, pos, cfg);
    for (std::int64_t tok = 0; tok < 6; ++tok)
        for (int h = 0; h < 3; ++h)
            CHECK(std::abs(head_norm(y, tok, h) - head_norm(x, tok, h)) <= 1e-6);
}

TEST_CASE("relative-position property per coordinate") {
    Rng rng(43);
    RopeConfig cfg{16, 10000.0};
    int fails = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Tensor q = Tensor::randn({1, 1, 16}, rng);
        Tensor k = Tensor::randn({1, 1, 16}, rng);
        TokenPosition pq, pk;
        pq.t = rng.uniform(-10, 10);
        pq.x = rng.uniform(-2, 2);
        pq.y = rng.uniform(-2, 2);
        pq.depth = rng.uniform(0, 6);
        pk.t = rng.uniform(-10, 10);
        pk.x = rng.uniform(-2, 2);
        pk.y = rng.uniform(-2, 2);
        pk.depth = rng.uniform(0, 6);

        double base = dot_head(apply_rope(q, {pq}, cfg), apply_rope(k, {pk}, cfg), 0, 0, 0);

        int coord = trial % 4;
        double s = rng.uniform(-5, 5);
        TokenPosition sq = pq, sk = pk;
        switch (coord) {
            case 0: sq.t += s; sk.t += s; break;
            case 1: sq.x += s; sk.x += s; break;
            case 2: sq.y += s; sk.y += s; break;
            case 3: sq.depth += s; sk.depth += s; break;
        }
        double shifted = dot_head(apply_rope(q, {sq}, cfg), apply_rope(k, {sk}, cfg), 0, 0, 0);
        if (std::abs(base - shifted) > 1e-6) ++fails;
    }
    CHECK(fails == 0);
}

TEST_CASE("composability: rotations at p then q equal rotation at p+q") {
    Rng rng(47);
    RopeConfig cfg{16, 10000.0};
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = Tensor::randn({1, 2, 16}, rng);
        TokenPosition p, q, pq;
        p.t = rng.uniform(-5, 5);
        p.x = rng.uniform(-1, 1);
        p.y = rng.uniform(-1, 1);
        p.depth = rng.uniform(0, 4);
        q.t = rng.uniform(-5, 5);
        q.x = rng.uniform(-1, 1);
        q.y = rng.uniform(-1, 1);
        q.depth = rng.uniform(0, 4);
        pq.t = p.t + q.t;
        pq.x = p.x + q.x;
        pq.y = p.y + q.y;
        pq.depth = p.depth + q.depth;
        Tensor two_step = apply_rope(apply_rope(x, {p}, cfg), {q}, cfg);
        Tensor one_step = apply_rope(x, {pq}, cfg);
        CHECK(max_abs_diff(two_step, one_step) <= 1e-6);
    }
}

TEST_CASE("mirrored pairs: depth-segment relative rotation is the identity") {
    Rng rng(53);
    SkeletonLayout layout = SkeletonLayout::reference15();
    RopeConfig cfg{16, 10000.0};
    auto dims = segment_dims(cfg.head_dim);
    const int depth_begin = dims[0] + dims[1] + dims[2];

    // Shared feature content across pairs isolates the positional effect.
    Tensor q = Tensor::randn({1, 1, 16}, rng);
    Tensor k = Tensor::randn({1, 1, 16}, rng);
    auto depth_dot = [&](int jq, int jk) {
        auto pos = token_positions(layout, 1, 1.0);
        Tensor rq = apply_rope(q, {pos[static_cast<size_t>(jq)]}, cfg);
        Tensor rk = apply_rope(k, {pos[static_cast<size_t>(jk)]}, cfg);
        double acc = 0.0;
        for (int c = depth_begin; c < cfg.head_dim; ++c) acc += rq.at(0, 0, c) * rk.at(0, 0, c);
        return acc;
    };
    double plain = 0.0;
    for (int c = depth_begin; c < cfg.head_dim; ++c) plain += q.at(0, 0, c) * k.at(0, 0, c);

    for (auto [l, r] : layout.symmetry_pairs) {
        // Equal depths cancel: the relative rotation on the depth segment is I.
        CHECK(std::abs(depth_dot(l, r) - plain) <= 1e-9);
    }
    // Consequence: hands and feet agree on the depth contribution.
    double hands = depth_dot(layout.index_of("wrist_l"), layout.index_of("wrist_r"));
    double feet = depth_dot(layout.index_of("ankle_l"), layout.index_of("ankle_r"));
    CHECK(std::abs(hands - feet) <= 1e-9);
}
