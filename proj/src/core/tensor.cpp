// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace hmflow {

namespace {
std::int64_t shape_size(const Tensor::Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        require(d >= 0, ErrorCode::invalid_argument, "negative tensor dimension");
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)), size_(shape_size(shape_)),
      buf_(std::make_shared<DoubleBuffer>(static_cast<size_t>(size_), 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), size_(shape_size(shape_)),
      buf_(std::make_shared<DoubleBuffer>(values.begin(), values.end())) {
    require(static_cast<std::int64_t>(buf_->size()) == size_, ErrorCode::invalid_argument,
            "tensor value count does not match shape");
}

Tensor Tensor::of(std::initializer_list<double> values) {
    return Tensor({static_cast<std::int64_t>(values.size())}, std::vector<double>(values));
}

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    double* p = t.data();
    for (std::int64_t i = 0; i < t.size(); ++i) p[i] = stddev * rng.normal();
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.size_ = size_;
    t.buf_ = buf_ ? std::make_shared<DoubleBuffer>(*buf_) : nullptr;
    return t;
}

Tensor Tensor::reshaped(Shape shape) const {
    std::int64_t n = shape_size(shape);
    require(n == size_, ErrorCode::invalid_argument, "reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.size_ = n;
    t.buf_ = buf_;
    return t;
}

bool Tensor::all_finite() const {
    const double* p = data();
    for (std::int64_t i = 0; i < size_; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

void Tensor::fill(double value) { std::fill(buf_->begin(), buf_->end(), value); }

static void check_same(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), ErrorCode::invalid_argument, "tensor shape mismatch");
}

Tensor add(const Tensor& a, const Tensor& b) { return lincomb(1.0, a, 1.0, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return lincomb(1.0, a, -1.0, b); }

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same(a, b);
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < a.size(); ++i) po[i] = s * pa[i];
    return out;
}

Tensor lincomb(double sa, const Tensor& a, double sb, const Tensor& b) {
    check_same(a, b);
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < a.size(); ++i) po[i] = sa * pa[i] + sb * pb[i];
    return out;
}

void add_inplace(Tensor& a, const Tensor& b, double s) {
    check_same(a, b);
    double* pa = a.data();
    const double* pb = b.data();
    for (std::int64_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    const double* p = a.data();
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(p[i]));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same(a, b);
    double m = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(pa[i] - pb[i]));
    return m;
}

double mean_sq_diff(const Tensor& a, const Tensor& b) {
    check_same(a, b);
    require(a.size() > 0, ErrorCode::invalid_argument, "empty tensor");
    double acc = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::int64_t i = 0; i < a.size(); ++i) {
        double d = pa[i] - pb[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double sum(const Tensor& a) {
    double acc = 0.0;
    const double* p = a.data();
    for (std::int64_t i = 0; i < a.size(); ++i) acc += p[i];
    return acc;
}

}  // namespace hmflow
