// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>

#include "core/rng.hpp"
#include "core/tmdit.hpp"
#include "testutil.hpp"

using namespace hmflow;

namespace {

TMDiTConfig tiny_config() {
    TMDiTConfig cfg;
    cfg.n_blocks = 2;
    cfg.n_separate = 1;
    cfg.n_shared = 1;
    cfg.model_dim = 32;
    cfg.n_heads = 2;
    cfg.ffn_dim = 64;
    cfg.vocab_size = 8;
    cfg.latent_channels = 4;
    return cfg;
}

TMDiT make_tiny(const ScaleSchedule& sched, std::uint64_t seed = 1, bool randomized = true) {
    Rng rng(seed);
    TMDiT model(tiny_config(), SkeletonLayout::reference15(), sched, rng);
    if (randomized) {
        Rng r2(seed + 1);
        model.randomize(r2);
    }
    return model;
}

}  // namespace

TEST_CASE("config validation") {
    TMDiTConfig bad = tiny_config();
    bad.n_separate = 2;  // 2 + 1 != 2
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = tiny_config();
    bad.n_heads = 3;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = tiny_config();
    bad.model_dim = 24;  // head_dim 12 not divisible by 16
    bad.n_heads = 2;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_NOTHROW(TMDiTConfig::desk(10).validate());
    CHECK_NOTHROW(TMDiTConfig::full(10).validate());
}

TEST_CASE("output shape matches input at every stage scale") {
    auto sched = make_schedule({1.0 / 3.0, 2.0 / 3.0, 1.0});
    TMDiT model = make_tiny(sched);
    Rng rng(7);
    const std::int64_t l_full = 18;
    std::vector<std::int64_t> ids{1, 4, 2};
    for (int k = 1; k <= 3; ++k) {
        std::int64_t l_k = sched.stage_length(k, l_full);
        Tensor x = Tensor::randn({l_k, 6, 4}, rng);
        auto bundle = model.embed_tokens(ids, 0.4, sched.scale(k));
        Tensor v = model.predict_velocity(x, bundle, k);
        CHECK(v.same_shape(x));
        CHECK(v.all_finite());
    }
}

TEST_CASE("two forward calls agree bitwise") {
    auto sched = make_schedule({0.5, 1.0});
    TMDiT model = make_tiny(sched);
    Rng rng(9);
    Tensor x = Tensor::randn({4, 6, 4}, rng);
    auto bundle = model.embed_tokens({2, 3}, 0.7, 1.0);
    Tensor a = model.predict_velocity(x, bundle, 2);
    Tensor b = model.predict_velocity(x, bundle, 2);
    CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("zero-initialized modulation makes blocks identities") {
    auto sched = make_schedule({1.0});
    // Default init: modulation weights are zero, so every gate is closed.
    TMDiT model = make_tiny(sched, 3, false);
    Rng rng(11);

    Tape tape(false);
    auto pids = model.params().mount(tape, false);
    int xm = tape.leaf(Tensor::randn({10, 32}, rng));
    int xc = tape.leaf(Tensor::randn({3, 32}, rng));
    int y = tape.leaf(Tensor::randn({1, 32}, rng));
    auto [om, oc] = model.block_forward(tape, pids, 0, xm, xc, y, nullptr, nullptr);
    CHECK(max_abs_diff(tape.val(om), tape.val(xm)) == 0.0);
    CHECK(max_abs_diff(tape.val(oc), tape.val(xc)) == 0.0);
}

TEST_CASE("shared blocks expose one parameter storage for both streams") {
    auto sched = make_schedule({1.0});
    TMDiT model = make_tiny(sched);

    // Separate block: distinct tensors per stream.
    CHECK(model.block_param(0, "motion", "attn.wq") != model.block_param(0, "text", "attn.wq"));
    // Shared block: one index, hence one storage.
    int im = model.block_param(1, "motion", "attn.wq");
    int it = model.block_param(1, "text", "attn.wq");
    CHECK(im == it);
    Tensor& via_motion = model.params().value(im);
    Tensor& via_text = model.params().value(it);
    CHECK(via_motion.data() == via_text.data());
    double before = via_text.at(0);
    via_motion.at(0) = before + 42.0;
    CHECK(via_text.at(0) == before + 42.0);  // mutation observed through the other stream
}

TEST_CASE("attention is permutation-equivariant over text tokens without text rope") {
    auto sched = make_schedule({1.0});
    TMDiT model = make_tiny(sched, 17);
    Rng rng(13);

    Tensor xm = Tensor::randn({8, 32}, rng);
    Tensor xc = Tensor::randn({4, 32}, rng);
    Tensor y = Tensor::randn({1, 32}, rng);
    Tensor xc_perm({4, 32});
    const int perm[4] = {2, 0, 3, 1};
    for (int i = 0; i < 4; ++i)
        for (int c = 0; c < 32; ++c) xc_perm.at(i, c) = xc.at(perm[i], c);

    Tape t1(false);
    auto p1 = model.params().mount(t1, false);
    auto [om1, oc1] =
        model.block_forward(t1, p1, 0, t1.leaf(xm), t1.leaf(xc), t1.leaf(y), nullptr, nullptr);
    Tape t2(false);
    auto p2 = model.params().mount(t2, false);
    auto [om2, oc2] =
        model.block_forward(t2, p2, 0, t2.leaf(xm), t2.leaf(xc_perm), t2.leaf(y), nullptr, nullptr);

    CHECK(max_abs_diff(t1.val(om1), t2.val(om2)) < 1e-12);
}

TEST_CASE("fuse_conditioning") {
    auto sched = make_schedule({0.5, 1.0});
    TMDiT model = make_tiny(sched);
    Rng rng(19);
    Tensor c_vec = Tensor::randn({32}, rng);

    SUBCASE("deterministic") {
        auto a = model.fuse_conditioning(0.3, c_vec, 0.5);
        auto b = model.fuse_conditioning(0.3, c_vec, 0.5);
        CHECK(max_abs_diff(a.y, b.y) == 0.0);
    }
    SUBCASE("t=0 and t=1 produce distinct embeddings") {
        auto a = model.fuse_conditioning(0.0, c_vec, 1.0);
        auto b = model.fuse_conditioning(1.0, c_vec, 1.0);
        CHECK(max_abs_diff(a.y, b.y) > 1e-8);
    }
    SUBCASE("null condition is well-defined") {
        auto bundle = model.embed_tokens({TMDiT::kNullToken}, 0.5, 1.0);
        auto y = model.fuse_conditioning(0.5, bundle.c_vec, 1.0);
        CHECK(y.y.all_finite());
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS((void)model.fuse_conditioning(-0.1, c_vec, 1.0), Error);
        CHECK_THROWS_AS((void)model.fuse_conditioning(0.5, c_vec, 0.7), Error);  // not a scale
        CHECK_THROWS_AS((void)model.fuse_conditioning(0.5, c_vec, 1.5), Error);
    }
}

TEST_CASE("scale conditioning is live") {
    // Both stages resolve to the same token count so outputs are comparable.
    auto sched = make_schedule({0.52, 1.0});
    TMDiT model = make_tiny(sched, 29);
    Rng rng(23);
    const std::int64_t l_full = 25;
    CHECK(sched.stage_length(1, l_full) == 13);
    Tensor x = Tensor::randn({13, 6, 4}, rng);
    auto b1 = model.embed_tokens({3, 5}, 0.4, sched.scale(1));
    Tensor v1 = model.predict_velocity(x, b1, 1);
    auto b2 = model.embed_tokens({3, 5}, 0.4, sched.scale(2));
    Tensor v2 = model.predict_velocity(x, b2, 2);
    CHECK(max_abs_diff(v1, v2) > 1e-10);
}

TEST_CASE("gradients match central finite differences on the tiny config") {
    auto sched = make_schedule({0.5, 1.0});
    TMDiT model = make_tiny(sched, 31);
    Rng rng(37);

    const std::int64_t l_k = 2;  // stage 1 of l=4
    Tensor x_t = Tensor::randn({l_k, 6, 4}, rng);
    Tensor target = Tensor::randn({l_k, 6, 4}, rng);
    std::vector<std::int64_t> ids{1, 6};

    const int n_params = model.params().count();
    std::vector<Tensor> inputs;
    inputs.reserve(static_cast<size_t>(n_params) + 1);
    for (int i = 0; i < n_params; ++i) inputs.push_back(model.params().value(i));
    inputs.push_back(x_t);

    auto builder = [&](Tape& t, const std::vector<int>& in) {
        std::vector<int> pids(in.begin(), in.end() - 1);
        int x_node = in.back();
        int target_node = t.leaf(target);
        int v = model.forward_ids(t, pids, x_node, ids, 0.3, 1);
        return t.mse(v, target_node);
    };

    auto r = hmflow::testutil::gradcheck(inputs, builder, rng, 1, 1e-4, 1e-8);
    CAPTURE(r.worst_analytic);
    CAPTURE(r.worst_numeric);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("velocity field adapter runs the full sampler deterministically") {
    auto sched = make_schedule({1.0 / 3.0, 2.0 / 3.0, 1.0});
    TMDiT model = make_tiny(sched, 41);
    Rng rng(43);
    Tensor noise = Tensor::randn({6, 6, 4}, rng);
    TMDiTVelocityField field(model, {2, 4, 1});
    GuidanceConfig guidance{2.0};
    Tensor a = hierarchical_sample(field, sched, noise, {2, 2, 2}, guidance);
    Tensor b = hierarchical_sample(field, sched, noise, {2, 2, 2}, guidance);
    CHECK(max_abs_diff(a, b) == 0.0);
    CHECK(a.frames() == 6);
}
