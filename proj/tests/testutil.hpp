// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace hmflow::testutil {

// Central finite-difference check against tape gradients, independent of the
// backward implementation. `builder` constructs a scalar loss from leaves
// whose ids align with `inputs`. For each input, `n_dirs` random directions
// are probed: rel_err = |g.v - fd| / max(|g.v|, |fd|, floor).
struct GradCheck {
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

inline GradCheck gradcheck(std::vector<Tensor> inputs,
                           const std::function<int(Tape&, const std::vector<int>&)>& builder,
                           Rng& rng, int n_dirs = 3, double eps = 1e-5, double floor = 1e-8) {
    GradCheck result;

    auto eval = [&](const std::vector<Tensor>& vals) {
        Tape tape(false);
        std::vector<int> ids;
        ids.reserve(vals.size());
        for (const auto& v : vals) ids.push_back(tape.leaf(v, false));
        int loss = builder(tape, ids);
        return tape.val(loss).at(0);
    };

    // Analytic gradients.
    Tape tape(true);
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const auto& v : inputs) ids.push_back(tape.leaf(v, true));
    int loss = builder(tape, ids);
    tape.backward(loss);

    for (size_t p = 0; p < inputs.size(); ++p) {
        Tensor g = tape.has_grad(ids[p]) ? tape.grad(ids[p]).clone()
                                         : Tensor::zeros(inputs[p].shape());
        for (int d = 0; d < n_dirs; ++d) {
            Tensor dir = Tensor::randn(inputs[p].shape(), rng);
            double norm = 0.0;
            for (std::int64_t i = 0; i < dir.size(); ++i) norm += dir.at(i) * dir.at(i);
            norm = std::sqrt(norm);
            for (std::int64_t i = 0; i < dir.size(); ++i) dir.at(i) /= norm;

            double analytic = 0.0;
            for (std::int64_t i = 0; i < dir.size(); ++i) analytic += g.at(i) * dir.at(i);

            std::vector<Tensor> plus = inputs;
            std::vector<Tensor> minus = inputs;
            plus[p] = add(inputs[p], scale(dir, eps));
            minus[p] = add(inputs[p], scale(dir, -eps));
            double numeric = (eval(plus) - eval(minus)) / (2.0 * eps);

            double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), floor});
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_analytic = analytic;
                result.worst_numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace hmflow::testutil
