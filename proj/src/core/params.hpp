// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace hmflow {

// Named, ordered parameter set owned by a model. Order is creation order and
// is part of the checkpoint contract.
class ParamStore {
public:
    int add(const std::string& name, Tensor init);
    int index_of(const std::string& name) const;  // -1 when absent
    int count() const { return static_cast<int>(values_.size()); }

    Tensor& value(int i) { return values_[static_cast<size_t>(i)]; }
    const Tensor& value(int i) const { return values_[static_cast<size_t>(i)]; }
    const std::string& name(int i) const { return names_[static_cast<size_t>(i)]; }

    std::int64_t total_size() const;

    // Leaf every parameter onto a tape; returns tape ids aligned with indices.
    std::vector<int> mount(Tape& tape, bool requires_grad) const;

    // Zero tensors shaped like the parameters.
    std::vector<Tensor> zeros_like() const;

    // Adds each parameter's tape gradient (if any) into accum.
    void collect_grads(const Tape& tape, const std::vector<int>& ids,
                       std::vector<Tensor>& accum) const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::unordered_map<std::string, int> by_name_;
};

// AdamW with decoupled weight decay.
class AdamW {
public:
    struct Options {
        double lr = 2e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 1e-2;
    };

    AdamW(const ParamStore& params, Options opt);
    // lr_scale multiplies the base rate (learning-rate schedule hook).
    void step(ParamStore& params, const std::vector<Tensor>& grads, double lr_scale);
    std::int64_t steps_taken() const { return t_; }

private:
    Options opt_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::int64_t t_ = 0;
};

// Versioned binary checkpoint container shared by all models: a JSON
// metadata block followed by named f64 tensors. Byte layout is documented in
// docs/FORMATS.md and stable across releases.
struct Checkpoint {
    nlohmann::ordered_json meta;
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    const Tensor& tensor(const std::string& name) const;
    bool has(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const nlohmann::ordered_json& meta,
                     const ParamStore& params);
Checkpoint load_checkpoint(const std::string& path);

// Restores values into an already-constructed store (shapes must match).
void restore_params(ParamStore& params, const Checkpoint& ckpt);

}  // namespace hmflow
