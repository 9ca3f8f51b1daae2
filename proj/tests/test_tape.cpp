// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>

#include "core/jointrope.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"
#include "testutil.hpp"

using namespace hmflow;
using hmflow::testutil::gradcheck;

namespace {
constexpr double kTol = 1e-6;
}

TEST_CASE("elementwise op gradients") {
    Rng rng(101);
    auto check = [&](const char* name,
                     const std::function<int(Tape&, const std::vector<int>&)>& builder,
                     std::vector<Tensor> inputs) {
        CAPTURE(name);
        auto r = gradcheck(std::move(inputs), builder, rng);
        CHECK(r.max_rel_err < kTol);
    };

    Tensor a = Tensor::randn({4, 5}, rng);
    Tensor b = Tensor::randn({4, 5}, rng);

    check("add", [](Tape& t, const std::vector<int>& in) {
        return t.mean_all(t.mul(t.add(in[0], in[1]), in[0]));
    }, {a, b});
    check("sub", [](Tape& t, const std::vector<int>& in) {
        return t.mean_all(t.mul(t.sub(in[0], in[1]), in[1]));
    }, {a, b});
    check("mul", [](Tape& t, const std::vector<int>& in) {
        return t.mean_all(t.mul(in[0], in[1]));
    }, {a, b});
    check("scale+add_scalar", [](Tape& t, const std::vector<int>& in) {
        return t.mean_all(t.mul(t.add_scalar(t.scale(in[0], -1.7), 0.3), in[0]));
    }, {a});
    check("exp", [](Tape& t, const std::vector<int>& in) {
        return t.mean_all(t.exp(t.scale(in[0], 0.5)));
    }, {a});
    check("gelu", [](Tape& t, const std::vector<int>& in) {
        return t.mean_all(t.mul(t.gelu(in[0]), in[1]));
    }, {a, b});
    check("silu", [](Tape& t, const std::vector<int>& in) {
        return t.mean_all(t.mul(t.silu(in[0]), in[1]));
    }, {a, b});
}

TEST_CASE("shape op gradients") {
    Rng rng(102);
    Tensor a = Tensor::randn({6, 4}, rng);
    Tensor b = Tensor::randn({3, 4}, rng);

    auto r1 = gradcheck({a}, [](Tape& t, const std::vector<int>& in) {
        int r = t.reshape(in[0], {4, 6});
        return t.mean_all(t.mul(r, r));
    }, rng);
    CHECK(r1.max_rel_err < kTol);

    auto r2 = gradcheck({a, b}, [](Tape& t, const std::vector<int>& in) {
        int c = t.concat_rows(in[0], in[1]);
        int s = t.slice_rows(c, 2, 5);
        return t.mean_all(t.mul(s, s));
    }, rng);
    CHECK(r2.max_rel_err < kTol);
}

TEST_CASE("reduction gradients") {
    Rng rng(103);
    Tensor a = Tensor::randn({5, 3}, rng);
    Tensor b = Tensor::randn({5, 3}, rng);

    auto r1 = gradcheck({a, b}, [](Tape& t, const std::vector<int>& in) {
        return t.mse(in[0], in[1]);
    }, rng);
    CHECK(r1.max_rel_err < kTol);

    auto r2 = gradcheck({a}, [](Tape& t, const std::vector<int>& in) {
        int m = t.mean_rows(in[0]);
        return t.mean_all(t.mul(m, m));
    }, rng);
    CHECK(r2.max_rel_err < kTol);
}

TEST_CASE("matmul linear layer_norm gradients") {
    Rng rng(104);
    Tensor x = Tensor::randn({5, 4}, rng);
    Tensor w = Tensor::randn({3, 4}, rng, 0.5);
    Tensor b = Tensor::randn({3}, rng, 0.1);
    Tensor m2 = Tensor::randn({4, 3}, rng);

    auto r1 = gradcheck({x, m2}, [](Tape& t, const std::vector<int>& in) {
        int y = t.matmul(in[0], in[1]);
        return t.mean_all(t.mul(y, y));
    }, rng);
    CHECK(r1.max_rel_err < kTol);

    auto r2 = gradcheck({x, w, b}, [](Tape& t, const std::vector<int>& in) {
        int y = t.linear(in[0], in[1], in[2]);
        return t.mean_all(t.mul(y, y));
    }, rng);
    CHECK(r2.max_rel_err < kTol);

    auto r3 = gradcheck({x}, [](Tape& t, const std::vector<int>& in) {
        int y = t.layer_norm(in[0]);
        int z = t.gelu(y);
        return t.mean_all(t.mul(z, z));
    }, rng, 4, 1e-5);
    CHECK(r3.max_rel_err < kTol);
}

TEST_CASE("modulate and gated_residual gradients") {
    Rng rng(105);
    Tensor x = Tensor::randn({6, 4}, rng);
    Tensor y = Tensor::randn({6, 4}, rng);
    Tensor s = Tensor::randn({4}, rng, 0.3);
    Tensor sh = Tensor::randn({4}, rng, 0.3);
    Tensor g = Tensor::randn({4}, rng, 0.3);

    auto r1 = gradcheck({x, s, sh}, [](Tape& t, const std::vector<int>& in) {
        int m = t.modulate(in[0], in[1], in[2]);
        return t.mean_all(t.mul(m, m));
    }, rng);
    CHECK(r1.max_rel_err < kTol);

    auto r2 = gradcheck({x, y, g}, [](Tape& t, const std::vector<int>& in) {
        int m = t.gated_residual(in[0], in[1], in[2]);
        return t.mean_all(t.mul(m, m));
    }, rng);
    CHECK(r2.max_rel_err < kTol);
}

TEST_CASE("attention gradients") {
    Rng rng(106);
    Tensor q = Tensor::randn({5, 2, 4}, rng);
    Tensor k = Tensor::randn({5, 2, 4}, rng);
    Tensor v = Tensor::randn({5, 2, 4}, rng);
    auto r = gradcheck({q, k, v}, [](Tape& t, const std::vector<int>& in) {
        int o = t.attention(in[0], in[1], in[2]);
        return t.mean_all(t.mul(o, o));
    }, rng, 4);
    CHECK(r.max_rel_err < kTol);
}

TEST_CASE("rope gradients and value") {
    Rng rng(107);
    SkeletonLayout layout = SkeletonLayout::reference15();
    RopeConfig cfg{16, 10000.0};
    auto positions = token_positions(layout, 2, 1.0);  // 30 tokens
    auto table = std::make_shared<RopeTable>(make_rope_table(positions, cfg));
    Tensor x = Tensor::randn({30, 2, 16}, rng);

    // Tape value matches the plain operator.
    Tape t0(false);
    int xi = t0.leaf(x);
    int ri = t0.rope(xi, table);
    Tensor direct = apply_rope(x, positions, cfg);
    CHECK(max_abs_diff(t0.val(ri), direct) == 0.0);

    auto r = gradcheck({x}, [&](Tape& t, const std::vector<int>& in) {
        int o = t.rope(in[0], table);
        return t.mean_all(t.mul(o, o));
    }, rng);
    CHECK(r.max_rel_err < kTol);
}

TEST_CASE("embedding gradients") {
    Rng rng(108);
    Tensor table = Tensor::randn({7, 4}, rng);
    std::vector<std::int64_t> ids{0, 3, 3, 6, 1};
    auto r = gradcheck({table}, [&](Tape& t, const std::vector<int>& in) {
        int e = t.embedding(in[0], ids);
        return t.mean_all(t.mul(e, e));
    }, rng);
    CHECK(r.max_rel_err < kTol);
}

TEST_CASE("temporal conv and deconv") {
    Rng rng(109);
    Tensor x = Tensor::randn({8, 3, 2}, rng);
    Tensor w = Tensor::randn({4, 2, 4}, rng, 0.5);   // [Cout, Cin, K]
    Tensor b = Tensor::randn({4}, rng, 0.1);
    Tensor wd = Tensor::randn({2, 4, 4}, rng, 0.5);  // [Cin, Cout, K]
    Tensor bd = Tensor::randn({4}, rng, 0.1);

    SUBCASE("shapes: stride-2 K=4 pad=1 halves and doubles exactly") {
        Tape t(false);
        int xi = t.leaf(x);
        int c = t.temporal_conv(xi, t.leaf(w), t.leaf(b), 2, 1);
        CHECK(t.val(c).dim(0) == 4);  // floor(8/2)
        int d = t.temporal_deconv(xi, t.leaf(wd), t.leaf(bd), 2, 1);
        CHECK(t.val(d).dim(0) == 16);  // 2*8
        // odd length
        Tensor x7 = Tensor::randn({7, 3, 2}, rng);
        int x7i = t.leaf(x7);
        int c7 = t.temporal_conv(x7i, t.leaf(w), t.leaf(b), 2, 1);
        CHECK(t.val(c7).dim(0) == 3);  // floor(7/2)
    }

    SUBCASE("gradients") {
        auto r1 = gradcheck({x, w, b}, [](Tape& t, const std::vector<int>& in) {
            int y = t.temporal_conv(in[0], in[1], in[2], 2, 1);
            return t.mean_all(t.mul(y, y));
        }, rng);
        CHECK(r1.max_rel_err < kTol);

        auto r2 = gradcheck({x, wd, bd}, [](Tape& t, const std::vector<int>& in) {
            int y = t.temporal_deconv(in[0], in[1], in[2], 2, 1);
            return t.mean_all(t.mul(y, y));
        }, rng);
        CHECK(r2.max_rel_err < kTol);
    }
}

TEST_CASE("graph ops") {
    Rng rng(110);
    Tensor x = Tensor::randn({4, 5, 3}, rng);
    Tensor A = Tensor::randn({5, 5}, rng, 0.4);
    std::vector<int> assign{0, 1, 1, 2, 0};

    auto r1 = gradcheck({x}, [&](Tape& t, const std::vector<int>& in) {
        int y = t.joint_mix(in[0], A);
        return t.mean_all(t.mul(y, y));
    }, rng);
    CHECK(r1.max_rel_err < kTol);

    auto r2 = gradcheck({x}, [&](Tape& t, const std::vector<int>& in) {
        int y = t.group_pool(in[0], assign, 3);
        return t.mean_all(t.mul(y, y));
    }, rng);
    CHECK(r2.max_rel_err < kTol);

    Tensor xg = Tensor::randn({4, 3, 3}, rng);
    auto r3 = gradcheck({xg}, [&](Tape& t, const std::vector<int>& in) {
        int y = t.group_unpool(in[0], assign);
        return t.mean_all(t.mul(y, y));
    }, rng);
    CHECK(r3.max_rel_err < kTol);

    SUBCASE("pool then unpool round trips constants per group") {
        Tape t(false);
        Tensor c({2, 5, 1});
        for (std::int64_t l = 0; l < 2; ++l)
            for (std::int64_t j = 0; j < 5; ++j)
                c.at(l, j, 0) = static_cast<double>(assign[static_cast<size_t>(j)]);
        int ci = t.leaf(c);
        int pooled = t.group_pool(ci, assign, 3);
        int back = t.group_unpool(pooled, assign);
        CHECK(max_abs_diff(t.val(back), c) == 0.0);
    }
}

TEST_CASE("resample_rows gradients") {
    Rng rng(111);
    Tensor x = Tensor::randn({9, 2, 2}, rng);
    for (std::int64_t dst : {4, 9, 14}) {
        auto r = gradcheck({x}, [&](Tape& t, const std::vector<int>& in) {
            int y = t.resample_rows(in[0], dst);
            return t.mean_all(t.mul(y, y));
        }, rng);
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("no-grad tape computes values only") {
    Rng rng(112);
    Tape t(false);
    int a = t.leaf(Tensor::randn({3, 3}, rng), true);
    int loss = t.mean_all(t.mul(a, a));
    CHECK(t.val(loss).size() == 1);
    CHECK_THROWS_AS(t.backward(loss), Error);
}

TEST_CASE("backward requires scalar loss") {
    Rng rng(113);
    Tape t(true);
    int a = t.leaf(Tensor::randn({3, 3}, rng), true);
    int y = t.mul(a, a);
    CHECK_THROWS_AS(t.backward(y), Error);
}
