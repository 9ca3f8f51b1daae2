// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "core/motionvae.hpp"
#include "core/resample.hpp"
#include "core/rng.hpp"
#include "testutil.hpp"

using namespace hmflow;

namespace {

MotionVAE make_vae(std::uint64_t seed = 1, int hidden = 8, int d = 4) {
    VAEConfig cfg;
    cfg.hidden = hidden;
    cfg.latent_channels = d;
    Rng rng(seed);
    return MotionVAE(cfg, SkeletonLayout::reference15(), rng);
}

MotionSequence random_motion(Rng& rng, std::int64_t frames) {
    return MotionSequence{Tensor::randn({frames, 15, 6}, rng)};
}

}  // namespace

TEST_CASE("graph spec invariants") {
    auto spec = GraphSpec::from_layout(SkeletonLayout::reference15());
    CHECK(spec.n_groups == 6);
    REQUIRE(spec.assignment.size() == 15);
    // Partition: every joint maps to exactly one group (one-hot rows) and
    // every group is hit.
    std::vector<int> hits(6, 0);
    for (int a : spec.assignment) {
        CHECK(a >= 0);
        CHECK(a < 6);
        ++hits[static_cast<size_t>(a)];
    }
    for (int h : hits) CHECK(h >= 1);
    // Symmetric normalized adjacency.
    for (int i = 0; i < 15; ++i) {
        CHECK(spec.adjacency.at(i, i) > 0.0);
        for (int j = 0; j < 15; ++j)
            CHECK(spec.adjacency.at(i, j) == doctest::Approx(spec.adjacency.at(j, i)));
    }
}

TEST_CASE("encode shapes follow floor(L/4) and six latent joints") {
    MotionVAE vae = make_vae();
    Rng rng(5);

    auto [mean64, lv64] = vae.encode(random_motion(rng, 64));
    CHECK(mean64.frames() == 16);
    CHECK(mean64.joints() == 6);
    CHECK(mean64.channels() == 4);
    CHECK(lv64.payload.same_shape(mean64.payload));

    auto [mean67, lv67] = vae.encode(random_motion(rng, 67));
    CHECK(mean67.frames() == 16);  // floor(67/4)

    auto [mean5, lv5] = vae.encode(random_motion(rng, 5));
    CHECK(mean5.frames() == 1);

    CHECK_THROWS_AS((void)vae.encode(random_motion(rng, 3)), Error);
}

TEST_CASE("encode is deterministic") {
    MotionVAE vae = make_vae();
    Rng rng(7);
    MotionSequence m = random_motion(rng, 32);
    auto [a_mean, a_lv] = vae.encode(m);
    auto [b_mean, b_lv] = vae.encode(m);
    CHECK(max_abs_diff(a_mean.payload, b_mean.payload) == 0.0);
    CHECK(max_abs_diff(a_lv.payload, b_lv.payload) == 0.0);
}

TEST_CASE("decode lengths") {
    MotionVAE vae = make_vae();
    Rng rng(9);

    LatentSequence z16{Tensor::randn({16, 6, 4}, rng)};
    CHECK(vae.decode(z16).frames() == 64);

    LatentSequence z5{Tensor::randn({5, 6, 4}, rng)};
    MotionSequence out5 = vae.decode(z5);
    CHECK(out5.frames() == 20);
    CHECK(out5.joints() == 15);
    CHECK(out5.channels() == 6);

    Tensor bad = Tensor::randn({4, 6, 4}, rng);
    bad.at(0) = std::nan("");
    CHECK_THROWS_AS((void)vae.decode(LatentSequence{bad}), Error);
}

TEST_CASE("round-trip shape") {
    MotionVAE vae = make_vae();
    Rng rng(11);
    for (std::int64_t L : {8, 32, 64}) {
        MotionSequence m = random_motion(rng, L);
        auto [mean, lv] = vae.encode(m);
        MotionSequence recon = vae.decode(mean);
        CHECK(recon.payload.same_shape(m.payload));
    }
    // Lengths off the 4-frame grid round-trip through the explicit length.
    MotionSequence m67 = random_motion(rng, 67);
    auto [mean67, lv67] = vae.encode(m67);
    CHECK(vae.decode(mean67, 67).payload.same_shape(m67.payload));
}

TEST_CASE("vae_losses closed-form values") {
    Rng rng(13);
    MotionSequence m = random_motion(rng, 8);
    LatentSequence mean{Tensor::zeros({2, 6, 4})};
    LatentSequence lv{Tensor::zeros({2, 6, 4})};

    auto same = MotionVAE::vae_losses(m, m, mean, lv);
    CHECK(same.recon_mse == 0.0);
    CHECK(same.kl == doctest::Approx(0.0));

    LatentSequence mean1{Tensor::full({2, 6, 4}, 1.0)};
    auto shifted = MotionVAE::vae_losses(m, m, mean1, lv);
    CHECK(shifted.kl == doctest::Approx(0.5));

    SUBCASE("kl is non-negative") {
        for (int trial = 0; trial < 50; ++trial) {
            LatentSequence mu{Tensor::randn({2, 6, 4}, rng, 2.0)};
            LatentSequence l{Tensor::randn({2, 6, 4}, rng, 2.0)};
            auto loss = MotionVAE::vae_losses(m, m, mu, l);
            CHECK(loss.kl >= 0.0);
        }
    }
}

TEST_CASE("aug_loss") {
    MotionVAE vae = make_vae();
    Rng rng(17);
    MotionSequence m = random_motion(rng, 32);
    auto [mean, lv] = vae.encode(m);

    SUBCASE("r = 1 equals the reconstruction path") {
        MotionSequence recon = vae.decode(mean);
        Tensor target = resample_to(m.payload, recon.frames());
        double direct = mean_sq_diff(recon.payload, target);
        double aug = vae.aug_loss(mean, m, 1.0);
        CHECK(std::abs(direct - aug) <= 1e-12);
    }
    SUBCASE("finite and non-negative across the ratio range") {
        for (double r : {0.3, 0.5, 0.77, 1.0}) {
            double v = vae.aug_loss(mean, m, r);
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
    }
    SUBCASE("ratio range enforced") {
        CHECK_THROWS_AS((void)vae.aug_loss(mean, m, 0.2), Error);
        CHECK_THROWS_AS((void)vae.aug_loss(mean, m, 1.2), Error);
    }
}

TEST_CASE("composite loss gradients match finite differences") {
    MotionVAE vae = make_vae(19, 6, 3);
    {
        Rng r2(23);
        vae.randomize(r2);
    }
    Rng rng(29);
    MotionSequence m{Tensor::randn({8, 15, 6}, rng)};
    Tensor eps = Tensor::randn({2, 6, 3}, rng);
    const double aug_ratio = 0.5;

    const int n_params = vae.params().count();
    std::vector<Tensor> inputs;
    for (int i = 0; i < n_params; ++i) inputs.push_back(vae.params().value(i));

    auto build_loss = [&](Tape& t, const std::vector<int>& pids) {
        int m_node = t.leaf(m.payload);
        auto [mean, logvar] = vae.encode_on_tape(t, pids, m_node);
        int z = t.add(mean, t.mul(t.leaf(eps), t.exp(t.scale(logvar, 0.5))));
        int recon = vae.decode_on_tape(t, pids, z);
        int target = t.leaf(m.payload);
        int recon_loss = t.mse(recon, target);
        // kl = mean(0.5 * (exp(lv) + mu^2 - 1 - lv))
        int kl = t.mean_all(t.scale(
            t.sub(t.sub(t.add(t.exp(logvar), t.mul(mean, mean)), t.leaf(Tensor::full(
                t.val(mean).shape(), 1.0))), logvar), 0.5));
        // aug term at a fixed ratio
        std::int64_t l_r = resampled_length(t.val(z).dim(0), aug_ratio);
        int z_r = t.resample_rows(z, l_r);
        int recon_r = vae.decode_on_tape(t, pids, z_r);
        int target_r = t.leaf(resample_to(m.payload, 4 * l_r));
        int aug = t.mse(recon_r, target_r);
        int loss = t.add(recon_loss, t.add(t.scale(kl, 1e-2), t.scale(aug, 0.5)));
        return loss;
    };

    auto r = hmflow::testutil::gradcheck(inputs, build_loss, rng, 1, 1e-4, 1e-8);
    CAPTURE(r.worst_analytic);
    CAPTURE(r.worst_numeric);
    CHECK(r.max_rel_err < 1e-4);
}
