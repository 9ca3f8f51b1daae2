// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/params.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace hmflow {

int ParamStore::add(const std::string& name, Tensor init) {
    require(by_name_.find(name) == by_name_.end(), ErrorCode::internal_error,
            "duplicate parameter name: " + name);
    names_.push_back(name);
    values_.push_back(std::move(init));
    int idx = static_cast<int>(values_.size()) - 1;
    by_name_[name] = idx;
    return idx;
}

int ParamStore::index_of(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
}

std::int64_t ParamStore::total_size() const {
    std::int64_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

std::vector<int> ParamStore::mount(Tape& tape, bool requires_grad) const {
    std::vector<int> ids;
    ids.reserve(values_.size());
    for (const auto& v : values_) ids.push_back(tape.leaf(v, requires_grad));
    return ids;
}

std::vector<Tensor> ParamStore::zeros_like() const {
    std::vector<Tensor> out;
    out.reserve(values_.size());
    for (const auto& v : values_) out.push_back(Tensor::zeros(v.shape()));
    return out;
}

void ParamStore::collect_grads(const Tape& tape, const std::vector<int>& ids,
                               std::vector<Tensor>& accum) const {
    require(ids.size() == values_.size() && accum.size() == values_.size(),
            ErrorCode::internal_error, "gradient container mismatch");
    for (size_t i = 0; i < ids.size(); ++i)
        if (tape.has_grad(ids[i])) add_inplace(accum[i], tape.grad(ids[i]));
}

AdamW::AdamW(const ParamStore& params, Options opt) : opt_(opt) {
    m_ = params.zeros_like();
    v_ = params.zeros_like();
}

void AdamW::step(ParamStore& params, const std::vector<Tensor>& grads, double lr_scale) {
    require(static_cast<int>(grads.size()) == params.count(), ErrorCode::internal_error,
            "gradient count mismatch");
    ++t_;
    const double lr = opt_.lr * lr_scale;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (int i = 0; i < params.count(); ++i) {
        Tensor& p = params.value(i);
        const Tensor& g = grads[static_cast<size_t>(i)];
        Tensor& m = m_[static_cast<size_t>(i)];
        Tensor& v = v_[static_cast<size_t>(i)];
        double* pp = p.data();
        const double* pg = g.data();
        double* pm = m.data();
        double* pv = v.data();
        for (std::int64_t j = 0; j < p.size(); ++j) {
            pm[j] = opt_.beta1 * pm[j] + (1.0 - opt_.beta1) * pg[j];
            pv[j] = opt_.beta2 * pv[j] + (1.0 - opt_.beta2) * pg[j] * pg[j];
            double mhat = pm[j] / bc1;
            double vhat = pv[j] / bc2;
            pp[j] -= lr * (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * pp[j]);
        }
    }
}

// ---------------------------------------------------------------------------
// checkpoint container
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'H', 'M', 'F', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return tensors[i];
    raise(ErrorCode::incompatible_checkpoint, "checkpoint tensor missing: " + name);
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& n : names)
        if (n == name) return true;
    return false;
}

void save_checkpoint(const std::string& path, const nlohmann::ordered_json& meta,
                     const ParamStore& params) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::io_error, "cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    std::string meta_str = meta.dump();
    write_pod<std::uint64_t>(out, meta_str.size());
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
        const std::string& name = params.name(i);
        const Tensor& t = params.value(i);
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.dim(d)));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * static_cast<std::int64_t>(sizeof(double))));
    }
    require(out.good(), ErrorCode::io_error, "checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io_error, "cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, kMagic, 4) == 0, ErrorCode::format_error,
            "not a checkpoint file: " + path);
    auto version = read_pod<std::uint32_t>(in);
    require(version == kVersion, ErrorCode::incompatible_checkpoint,
            "unsupported checkpoint version");
    auto meta_len = read_pod<std::uint64_t>(in);
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    Checkpoint ckpt;
    try {
        ckpt.meta = nlohmann::ordered_json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::format_error, std::string("bad checkpoint metadata: ") + e.what());
    }
    auto n = read_pod<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        auto rank = read_pod<std::uint32_t>(in);
        Tensor::Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::int64_t>(read_pod<std::uint64_t>(in));
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * static_cast<std::int64_t>(sizeof(double))));
        require(in.good(), ErrorCode::format_error, "truncated checkpoint: " + path);
        ckpt.names.push_back(std::move(name));
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

void restore_params(ParamStore& params, const Checkpoint& ckpt) {
    require(static_cast<int>(ckpt.names.size()) == params.count(),
            ErrorCode::incompatible_checkpoint, "checkpoint parameter count mismatch");
    for (int i = 0; i < params.count(); ++i) {
        require(ckpt.names[static_cast<size_t>(i)] == params.name(i),
                ErrorCode::incompatible_checkpoint,
                "checkpoint parameter order mismatch at " + params.name(i));
        const Tensor& src = ckpt.tensors[static_cast<size_t>(i)];
        require(src.same_shape(params.value(i)), ErrorCode::incompatible_checkpoint,
                "checkpoint tensor shape mismatch at " + params.name(i));
        params.value(i) = src.clone();
    }
}

}  // namespace hmflow
