// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <vector>

#include "core/error.hpp"

namespace hmflow {

class Rng;

// 64-byte-aligned allocator. Uniform alignment keeps vectorized kernels on
// one code path regardless of where the allocator places a buffer, which
// makes repeated forward passes bitwise reproducible.
template <typename T, std::size_t Align>
struct AlignedAllocator {
    using value_type = T;
    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(Align));
    }
    template <typename U>
    bool operator==(const AlignedAllocator<U, Align>&) const noexcept {
        return true;
    }
};

using DoubleBuffer = std::vector<double, AlignedAllocator<double, 64>>;

// Dense row-major tensor of doubles with shared storage. Copies are cheap
// (they alias); operations always allocate fresh outputs, so aliasing is
// only observable through explicit data() mutation.
class Tensor {
public:
    using Shape = std::vector<std::int64_t>;

    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> values);

    // Rank-1 tensor from literal values.
    static Tensor of(std::initializer_list<double> values);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);

    bool defined() const { return buf_ != nullptr; }
    int rank() const { return static_cast<int>(shape_.size()); }
    const Shape& shape() const { return shape_; }
    std::int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    std::int64_t size() const { return size_; }
    // First dimension; every temporal operator treats it as the frame axis.
    std::int64_t frames() const { return shape_.empty() ? 0 : shape_[0]; }
    // Product of all trailing dimensions.
    std::int64_t channel_stride() const { return shape_.empty() ? 0 : size_ / shape_[0]; }

    double* data() { return buf_->data(); }
    const double* data() const { return buf_->data(); }

    double& at(std::int64_t i) { return (*buf_)[static_cast<size_t>(i)]; }
    double at(std::int64_t i) const { return (*buf_)[static_cast<size_t>(i)]; }
    double& at(std::int64_t i, std::int64_t j) { return (*buf_)[static_cast<size_t>(i * shape_[1] + j)]; }
    double at(std::int64_t i, std::int64_t j) const { return (*buf_)[static_cast<size_t>(i * shape_[1] + j)]; }
    double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
        return (*buf_)[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return (*buf_)[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

    Tensor clone() const;
    // Same storage, new shape (element count must match).
    Tensor reshaped(Shape shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    void fill(double value);

private:
    Shape shape_;
    std::int64_t size_ = 0;
    std::shared_ptr<DoubleBuffer> buf_;
};

// Elementwise helpers (fresh outputs, shape-checked).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// a*sa + b*sb
Tensor lincomb(double sa, const Tensor& a, double sb, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b, double s = 1.0);

double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean_sq_diff(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);

}  // namespace hmflow
