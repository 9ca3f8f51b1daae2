// Copyright (c) 2026 hmflow authors
// SPDX-License-Identifier: Apache-2.0

#include "core/tape.hpp"

// Per-sample forwards stay single-threaded; batch parallelism lives in the
// trainer where reduction order is pinned.
#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "core/resample.hpp"

namespace hmflow {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

CMap cmap(const Tensor& t, std::int64_t rows, std::int64_t cols) {
    return CMap(t.data(), rows, cols);
}
MMap mmap(Tensor& t, std::int64_t rows, std::int64_t cols) {
    return MMap(t.data(), rows, cols);
}

// Rows = first dim, cols = product of the rest.
std::int64_t row_count(const Tensor& t) { return t.frames(); }
std::int64_t col_count(const Tensor& t) { return t.channel_stride(); }

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

int Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&, int)> backward) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = grad_enabled_ && needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

const Tensor& Tape::grad(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    require(n.grad.defined(), ErrorCode::internal_error, "gradient not computed for node");
    return n.grad;
}

bool Tape::has_grad(int id) const { return nodes_[static_cast<size_t>(id)].grad.defined(); }

void Tape::accum(int id, const Tensor& g) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad) return;
    if (!n.grad.defined()) n.grad = Tensor::zeros(n.value.shape());
    add_inplace(n.grad, g);
}

void Tape::backward(int loss) {
    require(grad_enabled_, ErrorCode::internal_error, "backward on a no-grad tape");
    Node& ln = nodes_[static_cast<size_t>(loss)];
    require(ln.value.size() == 1, ErrorCode::invalid_argument, "backward needs a scalar loss");
    if (!ln.needs_grad) return;  // loss touches no trainable leaf
    ln.grad = Tensor::full(ln.value.shape(), 1.0);
    for (int id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.needs_grad && n.grad.defined() && n.backward) n.backward(*this, id);
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

int Tape::add(int a, int b) {
    Tensor out = hmflow::add(val(a), val(b));
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        t.accum(a, g);
        t.accum(b, g);
    });
}

int Tape::sub(int a, int b) {
    Tensor out = hmflow::sub(val(a), val(b));
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        t.accum(a, g);
        t.accum(b, hmflow::scale(g, -1.0));
    });
}

int Tape::mul(int a, int b) {
    Tensor out = hmflow::mul(val(a), val(b));
    return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.needs(a)) t.accum(a, hmflow::mul(g, t.val(b)));
        if (t.needs(b)) t.accum(b, hmflow::mul(g, t.val(a)));
    });
}

int Tape::scale(int a, double s) {
    Tensor out = hmflow::scale(val(a), s);
    return push(std::move(out), needs(a),
                [a, s](Tape& t, int self) { t.accum(a, hmflow::scale(t.grad(self), s)); });
}

int Tape::add_scalar(int a, double s) {
    const Tensor& x = val(a);
    Tensor out(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < x.size(); ++i) po[i] = px[i] + s;
    return push(std::move(out), needs(a),
                [a](Tape& t, int self) { t.accum(a, t.grad(self)); });
}

int Tape::exp(int a) {
    const Tensor& x = val(a);
    Tensor out(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < x.size(); ++i) po[i] = std::exp(px[i]);
    Tensor saved = out;
    return push(std::move(out), needs(a), [a, saved](Tape& t, int self) {
        t.accum(a, hmflow::mul(t.grad(self), saved));
    });
}

int Tape::gelu(int a) {
    const Tensor& x = val(a);
    Tensor out(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < x.size(); ++i)
        po[i] = 0.5 * px[i] * (1.0 + std::erf(px[i] * kInvSqrt2));
    return push(std::move(out), needs(a), [a](Tape& t, int self) {
        const Tensor& x_in = t.val(a);
        const Tensor& g = t.grad(self);
        Tensor gx(x_in.shape());
        const double* pxx = x_in.data();
        const double* pg = g.data();
        double* pgx = gx.data();
        for (std::int64_t i = 0; i < x_in.size(); ++i) {
            double cdf = 0.5 * (1.0 + std::erf(pxx[i] * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * pxx[i] * pxx[i]);
            pgx[i] = pg[i] * (cdf + pxx[i] * pdf);
        }
        t.accum(a, gx);
    });
}

int Tape::silu(int a) {
    const Tensor& x = val(a);
    Tensor out(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < x.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-px[i]));
        po[i] = px[i] * s;
    }
    return push(std::move(out), needs(a), [a](Tape& t, int self) {
        const Tensor& x_in = t.val(a);
        const Tensor& g = t.grad(self);
        Tensor gx(x_in.shape());
        const double* pxx = x_in.data();
        const double* pg = g.data();
        double* pgx = gx.data();
        for (std::int64_t i = 0; i < x_in.size(); ++i) {
            double s = 1.0 / (1.0 + std::exp(-pxx[i]));
            pgx[i] = pg[i] * s * (1.0 + pxx[i] * (1.0 - s));
        }
        t.accum(a, gx);
    });
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

int Tape::reshape(int a, Tensor::Shape shape) {
    Tensor out = val(a).reshaped(std::move(shape));
    return push(std::move(out), needs(a), [a](Tape& t, int self) {
        t.accum(a, t.grad(self).reshaped(t.val(a).shape()));
    });
}

int Tape::concat_rows(int a, int b) {
    const Tensor& xa = val(a);
    const Tensor& xb = val(b);
    require(col_count(xa) == col_count(xb), ErrorCode::invalid_argument,
            "concat_rows: trailing dims differ");
    Tensor::Shape shape = xa.shape();
    shape[0] = xa.frames() + xb.frames();
    Tensor out(shape);
    const std::int64_t cs = col_count(xa);
    std::copy(xa.data(), xa.data() + xa.size(), out.data());
    std::copy(xb.data(), xb.data() + xb.size(), out.data() + xa.size());
    const std::int64_t rows_a = xa.frames();
    return push(std::move(out), needs(a) || needs(b), [a, b, rows_a, cs](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.needs(a)) {
            Tensor ga(t.val(a).shape());
            std::copy(g.data(), g.data() + rows_a * cs, ga.data());
            t.accum(a, ga);
        }
        if (t.needs(b)) {
            Tensor gb(t.val(b).shape());
            std::copy(g.data() + rows_a * cs, g.data() + g.size(), gb.data());
            t.accum(b, gb);
        }
    });
}

int Tape::slice_rows(int a, std::int64_t begin, std::int64_t count) {
    const Tensor& x = val(a);
    require(begin >= 0 && count >= 1 && begin + count <= x.frames(), ErrorCode::invalid_argument,
            "slice_rows out of range");
    Tensor::Shape shape = x.shape();
    shape[0] = count;
    Tensor out(shape);
    const std::int64_t cs = col_count(x);
    std::copy(x.data() + begin * cs, x.data() + (begin + count) * cs, out.data());
    return push(std::move(out), needs(a), [a, begin, cs](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor gx = Tensor::zeros(t.val(a).shape());
        std::copy(g.data(), g.data() + g.size(), gx.data() + begin * cs);
        t.accum(a, gx);
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

int Tape::mean_all(int a) {
    const Tensor& x = val(a);
    require(x.size() > 0, ErrorCode::invalid_argument, "mean of empty tensor");
    Tensor out({1});
    out.at(0) = hmflow::sum(x) / static_cast<double>(x.size());
    return push(std::move(out), needs(a), [a](Tape& t, int self) {
        const Tensor& x_in = t.val(a);
        double g = t.grad(self).at(0) / static_cast<double>(x_in.size());
        t.accum(a, Tensor::full(x_in.shape(), g));
    });
}

int Tape::mean_rows(int a) {
    const Tensor& x = val(a);
    require(x.rank() == 2, ErrorCode::invalid_argument, "mean_rows expects [n, D]");
    const std::int64_t n = x.dim(0), d = x.dim(1);
    Tensor out({d});
    mmap(out, 1, d) = cmap(x, n, d).colwise().mean();
    return push(std::move(out), needs(a), [a, n, d](Tape& t, int self) {
        Tensor gx({n, d});
        mmap(gx, n, d) = cmap(t.grad(self), 1, d).replicate(n, 1) / static_cast<double>(n);
        t.accum(a, gx);
    });
}

int Tape::mse(int a, int b) {
    int d = sub(a, b);
    return mean_all(mul(d, d));
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

int Tape::matmul(int a, int b) {
    const Tensor& xa = val(a);
    const Tensor& xb = val(b);
    require(xa.rank() == 2 && xb.rank() == 2 && xa.dim(1) == xb.dim(0),
            ErrorCode::invalid_argument, "matmul shape mismatch");
    const std::int64_t m = xa.dim(0), k = xa.dim(1), n = xb.dim(1);
    Tensor out({m, n});
    mmap(out, m, n).noalias() = cmap(xa, m, k) * cmap(xb, k, n);
    return push(std::move(out), needs(a) || needs(b), [a, b, m, k, n](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.needs(a)) {
            Tensor ga({m, k});
            mmap(ga, m, k).noalias() = cmap(g, m, n) * cmap(t.val(b), k, n).transpose();
            t.accum(a, ga);
        }
        if (t.needs(b)) {
            Tensor gb({k, n});
            mmap(gb, k, n).noalias() = cmap(t.val(a), m, k).transpose() * cmap(g, m, n);
            t.accum(b, gb);
        }
    });
}

int Tape::linear(int x, int w, int b) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    require(xv.rank() == 2 && wv.rank() == 2 && bv.rank() == 1, ErrorCode::invalid_argument,
            "linear expects x[T,in], w[out,in], b[out]");
    const std::int64_t T = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(0);
    require(wv.dim(1) == in && bv.dim(0) == out_dim, ErrorCode::invalid_argument,
            "linear shape mismatch");
    Tensor out({T, out_dim});
    mmap(out, T, out_dim).noalias() = cmap(xv, T, in) * cmap(wv, out_dim, in).transpose();
    mmap(out, T, out_dim).rowwise() += cmap(bv, 1, out_dim).row(0);
    return push(std::move(out), needs(x) || needs(w) || needs(b),
                [x, w, b, T, in, out_dim](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    if (t.needs(x)) {
                        Tensor gx({T, in});
                        mmap(gx, T, in).noalias() = cmap(g, T, out_dim) * cmap(t.val(w), out_dim, in);
                        t.accum(x, gx);
                    }
                    if (t.needs(w)) {
                        Tensor gw({out_dim, in});
                        mmap(gw, out_dim, in).noalias() =
                            cmap(g, T, out_dim).transpose() * cmap(t.val(x), T, in);
                        t.accum(w, gw);
                    }
                    if (t.needs(b)) {
                        Tensor gb({out_dim});
                        mmap(gb, 1, out_dim) = cmap(g, T, out_dim).colwise().sum();
                        t.accum(b, gb);
                    }
                });
}

int Tape::layer_norm(int x, double eps) {
    const Tensor& xv = val(x);
    require(xv.rank() >= 1, ErrorCode::invalid_argument, "layer_norm input rank");
    const std::int64_t d = xv.dim(xv.rank() - 1);
    const std::int64_t rows = xv.size() / d;
    Tensor out(xv.shape());
    Tensor inv_std({rows});
    const double* px = xv.data();
    double* po = out.data();
    double* pis = inv_std.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = px + r * d;
        double mu = 0.0;
        for (std::int64_t i = 0; i < d; ++i) mu += row[i];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t i = 0; i < d; ++i) {
            double c = row[i] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        double is = 1.0 / std::sqrt(var + eps);
        pis[r] = is;
        double* orow = po + r * d;
        for (std::int64_t i = 0; i < d; ++i) orow[i] = (row[i] - mu) * is;
    }
    Tensor norm = out;  // shared; saved for backward
    return push(std::move(out), needs(x), [x, norm, inv_std, rows, d](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor gx(t.val(x).shape());
        const double* pg = g.data();
        const double* pn = norm.data();
        const double* pis = inv_std.data();
        double* pgx = gx.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* grow = pg + r * d;
            const double* nrow = pn + r * d;
            double* gxrow = pgx + r * d;
            double sum_g = 0.0, sum_gn = 0.0;
            for (std::int64_t i = 0; i < d; ++i) {
                sum_g += grow[i];
                sum_gn += grow[i] * nrow[i];
            }
            double inv_d = 1.0 / static_cast<double>(d);
            for (std::int64_t i = 0; i < d; ++i)
                gxrow[i] = pis[r] * (grow[i] - inv_d * sum_g - nrow[i] * inv_d * sum_gn);
        }
        t.accum(x, gx);
    });
}

int Tape::modulate(int x, int scale_v, int shift_v) {
    const Tensor& xv = val(x);
    const Tensor& sv = val(scale_v);
    const Tensor& bv = val(shift_v);
    const std::int64_t d = xv.dim(xv.rank() - 1);
    require(sv.rank() == 1 && bv.rank() == 1 && sv.dim(0) == d && bv.dim(0) == d,
            ErrorCode::invalid_argument, "modulate expects rank-1 scale/shift of width D");
    const std::int64_t rows = xv.size() / d;
    Tensor out(xv.shape());
    const double* px = xv.data();
    const double* ps = sv.data();
    const double* pb = bv.data();
    double* po = out.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t i = 0; i < d; ++i)
            po[r * d + i] = px[r * d + i] * (1.0 + ps[i]) + pb[i];
    return push(std::move(out), needs(x) || needs(scale_v) || needs(shift_v),
                [x, scale_v, shift_v, rows, d](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    const double* pg = g.data();
                    if (t.needs(x)) {
                        Tensor gx(t.val(x).shape());
                        const double* ps = t.val(scale_v).data();
                        double* pgx = gx.data();
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t i = 0; i < d; ++i)
                                pgx[r * d + i] = pg[r * d + i] * (1.0 + ps[i]);
                        t.accum(x, gx);
                    }
                    if (t.needs(scale_v)) {
                        Tensor gs({d});
                        const double* px = t.val(x).data();
                        double* pgs = gs.data();
                        for (std::int64_t i = 0; i < d; ++i) pgs[i] = 0.0;
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t i = 0; i < d; ++i)
                                pgs[i] += pg[r * d + i] * px[r * d + i];
                        t.accum(scale_v, gs);
                    }
                    if (t.needs(shift_v)) {
                        Tensor gb({d});
                        double* pgb = gb.data();
                        for (std::int64_t i = 0; i < d; ++i) pgb[i] = 0.0;
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t i = 0; i < d; ++i) pgb[i] += pg[r * d + i];
                        t.accum(shift_v, gb);
                    }
                });
}

int Tape::gated_residual(int x, int y, int gate) {
    const Tensor& xv = val(x);
    const Tensor& yv = val(y);
    const Tensor& gv = val(gate);
    require(xv.same_shape(yv), ErrorCode::invalid_argument, "gated_residual shape mismatch");
    const std::int64_t d = xv.dim(xv.rank() - 1);
    require(gv.rank() == 1 && gv.dim(0) == d, ErrorCode::invalid_argument,
            "gate must be rank-1 of width D");
    const std::int64_t rows = xv.size() / d;
    Tensor out(xv.shape());
    const double* px = xv.data();
    const double* py = yv.data();
    const double* pgt = gv.data();
    double* po = out.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t i = 0; i < d; ++i)
            po[r * d + i] = px[r * d + i] + pgt[i] * py[r * d + i];
    return push(std::move(out), needs(x) || needs(y) || needs(gate),
                [x, y, gate, rows, d](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    const double* pg = g.data();
                    if (t.needs(x)) t.accum(x, g);
                    if (t.needs(y)) {
                        Tensor gy(t.val(y).shape());
                        const double* pgt = t.val(gate).data();
                        double* pgy = gy.data();
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t i = 0; i < d; ++i)
                                pgy[r * d + i] = pg[r * d + i] * pgt[i];
                        t.accum(y, gy);
                    }
                    if (t.needs(gate)) {
                        Tensor gg({d});
                        const double* py = t.val(y).data();
                        double* pgg = gg.data();
                        for (std::int64_t i = 0; i < d; ++i) pgg[i] = 0.0;
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t i = 0; i < d; ++i)
                                pgg[i] += pg[r * d + i] * py[r * d + i];
                        t.accum(gate, gg);
                    }
                });
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

int Tape::attention(int q, int k, int v) {
    const Tensor& qv = val(q);
    const Tensor& kv = val(k);
    const Tensor& vv = val(v);
    require(qv.rank() == 3 && qv.same_shape(kv) && qv.same_shape(vv), ErrorCode::invalid_argument,
            "attention expects matching [T, H, hd] inputs");
    const std::int64_t T = qv.dim(0);
    const int H = static_cast<int>(qv.dim(1));
    const std::int64_t hd = qv.dim(2);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    // Per-head softmax weights are kept for the backward pass.
    Tensor probs({static_cast<std::int64_t>(H), T, T});
    Tensor out({T, static_cast<std::int64_t>(H) * hd});

    // Strided head views: row t of head h lives at offset (t*H + h) * hd.
    auto head_mat = [H, hd](const Tensor& t3, int h) {
        return Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>(
            t3.data() + static_cast<std::int64_t>(h) * hd, t3.dim(0), hd,
            Eigen::OuterStride<>(static_cast<Eigen::Index>(H) * hd));
    };

    for (int h = 0; h < H; ++h) {
        auto Q = head_mat(qv, h);
        auto K = head_mat(kv, h);
        auto V = head_mat(vv, h);
        MMap P(probs.data() + static_cast<std::int64_t>(h) * T * T, T, T);
        P.noalias() = Q * K.transpose() * inv_sqrt;
        for (std::int64_t r = 0; r < T; ++r) {
            double mx = P.row(r).maxCoeff();
            P.row(r) = (P.row(r).array() - mx).exp();
            P.row(r) /= P.row(r).sum();
        }
        Eigen::Map<RowMat, 0, Eigen::OuterStride<>> O(
            out.data() + static_cast<std::int64_t>(h) * hd, T, hd,
            Eigen::OuterStride<>(static_cast<Eigen::Index>(H) * hd));
        O.noalias() = P * V;
    }

    return push(std::move(out), needs(q) || needs(k) || needs(v),
                [q, k, v, probs, T, H, hd, inv_sqrt](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    Tensor gq = Tensor::zeros(t.val(q).shape());
                    Tensor gk = Tensor::zeros(t.val(k).shape());
                    Tensor gv = Tensor::zeros(t.val(v).shape());
                    auto head_mat = [H, hd](const Tensor& t3, int h) {
                        return Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>(
                            t3.data() + static_cast<std::int64_t>(h) * hd, t3.dim(0), hd,
                            Eigen::OuterStride<>(static_cast<Eigen::Index>(H) * hd));
                    };
                    auto head_mut = [H, hd](Tensor& t3, int h) {
                        return Eigen::Map<RowMat, 0, Eigen::OuterStride<>>(
                            t3.data() + static_cast<std::int64_t>(h) * hd, t3.dim(0), hd,
                            Eigen::OuterStride<>(static_cast<Eigen::Index>(H) * hd));
                    };
                    for (int h = 0; h < H; ++h) {
                        CMap P(probs.data() + static_cast<std::int64_t>(h) * T * T, T, T);
                        Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> GO(
                            g.data() + static_cast<std::int64_t>(h) * hd, T, hd,
                            Eigen::OuterStride<>(static_cast<Eigen::Index>(H) * hd));
                        auto Q = head_mat(t.val(q), h);
                        auto K = head_mat(t.val(k), h);
                        auto V = head_mat(t.val(v), h);
                        RowMat dP = GO * V.transpose();          // [T,T]
                        RowMat dS(T, T);
                        for (std::int64_t r = 0; r < T; ++r) {
                            double dot = dP.row(r).cwiseProduct(P.row(r)).sum();
                            dS.row(r) = P.row(r).cwiseProduct((dP.row(r).array() - dot).matrix());
                        }
                        head_mut(gv, h).noalias() += P.transpose() * GO;
                        head_mut(gq, h).noalias() += dS * K * inv_sqrt;
                        head_mut(gk, h).noalias() += dS.transpose() * Q * inv_sqrt;
                    }
                    t.accum(q, gq);
                    t.accum(k, gk);
                    t.accum(v, gv);
                });
}

int Tape::rope(int x, std::shared_ptr<const RopeTable> table) {
    const Tensor& xv = val(x);
    require(xv.rank() == 3, ErrorCode::invalid_argument, "rope expects [T, H, hd]");
    require(xv.dim(0) == table->tokens && xv.dim(2) == table->head_dim,
            ErrorCode::invalid_argument, "rope table does not match input");
    const std::int64_t T = xv.dim(0);
    const int H = static_cast<int>(xv.dim(1));
    Tensor out(xv.shape());
    rope_rotate(*table, false, xv.data(), out.data(), T, H);
    return push(std::move(out), needs(x), [x, table, T, H](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor gx(g.shape());
        rope_rotate(*table, true, g.data(), gx.data(), T, H);
        t.accum(x, gx);
    });
}

// ---------------------------------------------------------------------------
// embeddings
// ---------------------------------------------------------------------------

int Tape::embedding(int table, std::vector<std::int64_t> ids) {
    const Tensor& tv = val(table);
    require(tv.rank() == 2, ErrorCode::invalid_argument, "embedding table must be [V, D]");
    const std::int64_t V = tv.dim(0), D = tv.dim(1);
    Tensor out({static_cast<std::int64_t>(ids.size()), D});
    for (size_t i = 0; i < ids.size(); ++i) {
        require(ids[i] >= 0 && ids[i] < V, ErrorCode::invalid_argument, "embedding id out of range");
        std::copy(tv.data() + ids[i] * D, tv.data() + (ids[i] + 1) * D,
                  out.data() + static_cast<std::int64_t>(i) * D);
    }
    return push(std::move(out), needs(table), [table, ids, D](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor gt = Tensor::zeros(t.val(table).shape());
        for (size_t i = 0; i < ids.size(); ++i) {
            double* dst = gt.data() + ids[i] * D;
            const double* src = g.data() + static_cast<std::int64_t>(i) * D;
            for (std::int64_t c = 0; c < D; ++c) dst[c] += src[c];
        }
        t.accum(table, gt);
    });
}

// ---------------------------------------------------------------------------
// temporal / graph ops
// ---------------------------------------------------------------------------

int Tape::temporal_conv(int x, int w, int b, int stride, int pad) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    require(xv.rank() == 3 && wv.rank() == 3 && bv.rank() == 1, ErrorCode::invalid_argument,
            "temporal_conv expects x[L,J,Cin], w[Cout,Cin,K], b[Cout]");
    const std::int64_t L = xv.dim(0), J = xv.dim(1), Cin = xv.dim(2);
    const std::int64_t Cout = wv.dim(0), K = wv.dim(2);
    require(wv.dim(1) == Cin && bv.dim(0) == Cout, ErrorCode::invalid_argument,
            "temporal_conv channel mismatch");
    const std::int64_t Lout = (L + 2 * pad - K) / stride + 1;
    require(Lout >= 1, ErrorCode::invalid_argument, "temporal_conv output would be empty");

    Tensor out({Lout, J, Cout});
    {
        MMap O(out.data(), Lout * J, Cout);
        O.rowwise() = cmap(bv, 1, Cout).row(0);
        for (std::int64_t kk = 0; kk < K; ++kk) {
            // w slice [Cout, Cin] at tap kk
            RowMat WkDense(Cout, Cin);
            for (std::int64_t co = 0; co < Cout; ++co)
                for (std::int64_t ci = 0; ci < Cin; ++ci)
                    WkDense(co, ci) = wv.data()[(co * Cin + ci) * K + kk];
            for (std::int64_t o = 0; o < Lout; ++o) {
                std::int64_t i = o * stride - pad + kk;
                if (i < 0 || i >= L) continue;
                O.middleRows(o * J, J).noalias() +=
                    cmap(xv, L * J, Cin).middleRows(i * J, J) * WkDense.transpose();
            }
        }
    }
    return push(std::move(out), needs(x) || needs(w) || needs(b),
                [x, w, b, L, J, Cin, Cout, K, Lout, stride, pad](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    CMap G(g.data(), Lout * J, Cout);
                    const Tensor& xv = t.val(x);
                    const Tensor& wv = t.val(w);
                    if (t.needs(b)) {
                        Tensor gb({Cout});
                        mmap(gb, 1, Cout) = G.colwise().sum();
                        t.accum(b, gb);
                    }
                    if (t.needs(x)) {
                        Tensor gx = Tensor::zeros(xv.shape());
                        MMap GX(gx.data(), L * J, Cin);
                        for (std::int64_t kk = 0; kk < K; ++kk) {
                            RowMat WkDense(Cout, Cin);
                            for (std::int64_t co = 0; co < Cout; ++co)
                                for (std::int64_t ci = 0; ci < Cin; ++ci)
                                    WkDense(co, ci) = wv.data()[(co * Cin + ci) * K + kk];
                            for (std::int64_t o = 0; o < Lout; ++o) {
                                std::int64_t i = o * stride - pad + kk;
                                if (i < 0 || i >= L) continue;
                                GX.middleRows(i * J, J).noalias() +=
                                    G.middleRows(o * J, J) * WkDense;
                            }
                        }
                        t.accum(x, gx);
                    }
                    if (t.needs(w)) {
                        Tensor gw = Tensor::zeros(wv.shape());
                        for (std::int64_t kk = 0; kk < K; ++kk) {
                            RowMat GWk = RowMat::Zero(Cout, Cin);
                            for (std::int64_t o = 0; o < Lout; ++o) {
                                std::int64_t i = o * stride - pad + kk;
                                if (i < 0 || i >= L) continue;
                                GWk.noalias() += G.middleRows(o * J, J).transpose() *
                                                 cmap(xv, L * J, Cin).middleRows(i * J, J);
                            }
                            for (std::int64_t co = 0; co < Cout; ++co)
                                for (std::int64_t ci = 0; ci < Cin; ++ci)
                                    gw.data()[(co * Cin + ci) * K + kk] = GWk(co, ci);
                        }
                        t.accum(w, gw);
                    }
                });
}

int Tape::temporal_deconv(int x, int w, int b, int stride, int pad) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    require(xv.rank() == 3 && wv.rank() == 3 && bv.rank() == 1, ErrorCode::invalid_argument,
            "temporal_deconv expects x[L,J,Cin], w[Cin,Cout,K], b[Cout]");
    const std::int64_t L = xv.dim(0), J = xv.dim(1), Cin = xv.dim(2);
    const std::int64_t Cout = wv.dim(1), K = wv.dim(2);
    require(wv.dim(0) == Cin && bv.dim(0) == Cout, ErrorCode::invalid_argument,
            "temporal_deconv channel mismatch");
    const std::int64_t Lout = (L - 1) * stride - 2 * pad + K;
    require(Lout >= 1, ErrorCode::invalid_argument, "temporal_deconv output would be empty");

    Tensor out({Lout, J, Cout});
    {
        MMap O(out.data(), Lout * J, Cout);
        O.rowwise() = cmap(bv, 1, Cout).row(0);
        for (std::int64_t kk = 0; kk < K; ++kk) {
            RowMat WkDense(Cin, Cout);
            for (std::int64_t ci = 0; ci < Cin; ++ci)
                for (std::int64_t co = 0; co < Cout; ++co)
                    WkDense(ci, co) = wv.data()[(ci * Cout + co) * K + kk];
            for (std::int64_t l = 0; l < L; ++l) {
                std::int64_t o = l * stride - pad + kk;
                if (o < 0 || o >= Lout) continue;
                O.middleRows(o * J, J).noalias() +=
                    cmap(xv, L * J, Cin).middleRows(l * J, J) * WkDense;
            }
        }
    }
    return push(std::move(out), needs(x) || needs(w) || needs(b),
                [x, w, b, L, J, Cin, Cout, K, Lout, stride, pad](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    CMap G(g.data(), Lout * J, Cout);
                    const Tensor& xv = t.val(x);
                    const Tensor& wv = t.val(w);
                    if (t.needs(b)) {
                        Tensor gb({Cout});
                        mmap(gb, 1, Cout) = G.colwise().sum();
                        t.accum(b, gb);
                    }
                    if (t.needs(x)) {
                        Tensor gx = Tensor::zeros(xv.shape());
                        MMap GX(gx.data(), L * J, Cin);
                        for (std::int64_t kk = 0; kk < K; ++kk) {
                            RowMat WkDense(Cin, Cout);
                            for (std::int64_t ci = 0; ci < Cin; ++ci)
                                for (std::int64_t co = 0; co < Cout; ++co)
                                    WkDense(ci, co) = wv.data()[(ci * Cout + co) * K + kk];
                            for (std::int64_t l = 0; l < L; ++l) {
                                std::int64_t o = l * stride - pad + kk;
                                if (o < 0 || o >= Lout) continue;
                                GX.middleRows(l * J, J).noalias() +=
                                    G.middleRows(o * J, J) * WkDense.transpose();
                            }
                        }
                        t.accum(x, gx);
                    }
                    if (t.needs(w)) {
                        Tensor gw = Tensor::zeros(wv.shape());
                        for (std::int64_t kk = 0; kk < K; ++kk) {
                            RowMat GWk = RowMat::Zero(Cin, Cout);
                            for (std::int64_t l = 0; l < L; ++l) {
                                std::int64_t o = l * stride - pad + kk;
                                if (o < 0 || o >= Lout) continue;
                                GWk.noalias() += cmap(xv, L * J, Cin).middleRows(l * J, J).transpose() *
                                                 G.middleRows(o * J, J);
                            }
                            for (std::int64_t ci = 0; ci < Cin; ++ci)
                                for (std::int64_t co = 0; co < Cout; ++co)
                                    gw.data()[(ci * Cout + co) * K + kk] = GWk(ci, co);
                        }
                        t.accum(w, gw);
                    }
                });
}

int Tape::joint_mix(int x, Tensor adjacency) {
    const Tensor& xv = val(x);
    require(xv.rank() == 3, ErrorCode::invalid_argument, "joint_mix expects [L, J, C]");
    const std::int64_t L = xv.dim(0), J = xv.dim(1), C = xv.dim(2);
    require(adjacency.rank() == 2 && adjacency.dim(0) == J && adjacency.dim(1) == J,
            ErrorCode::invalid_argument, "adjacency must be [J, J]");
    Tensor out(xv.shape());
    CMap A(adjacency.data(), J, J);
    for (std::int64_t l = 0; l < L; ++l) {
        CMap X(xv.data() + l * J * C, J, C);
        MMap O(out.data() + l * J * C, J, C);
        O.noalias() = A * X;
    }
    return push(std::move(out), needs(x), [x, adjacency, L, J, C](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor gx(t.val(x).shape());
        CMap A(adjacency.data(), J, J);
        for (std::int64_t l = 0; l < L; ++l) {
            CMap G(g.data() + l * J * C, J, C);
            MMap GX(gx.data() + l * J * C, J, C);
            GX.noalias() = A.transpose() * G;
        }
        t.accum(x, gx);
    });
}

int Tape::group_pool(int x, std::vector<int> assign, int n_groups) {
    const Tensor& xv = val(x);
    require(xv.rank() == 3, ErrorCode::invalid_argument, "group_pool expects [L, J, C]");
    const std::int64_t L = xv.dim(0), J = xv.dim(1), C = xv.dim(2);
    require(static_cast<std::int64_t>(assign.size()) == J, ErrorCode::invalid_argument,
            "assignment size mismatch");
    std::vector<double> inv_count(static_cast<size_t>(n_groups), 0.0);
    for (int a : assign) {
        require(a >= 0 && a < n_groups, ErrorCode::invalid_argument, "group index out of range");
        inv_count[static_cast<size_t>(a)] += 1.0;
    }
    for (auto& c : inv_count) {
        require(c > 0.0, ErrorCode::invalid_argument, "every group needs at least one joint");
        c = 1.0 / c;
    }
    Tensor out({L, static_cast<std::int64_t>(n_groups), C});
    out.fill(0.0);
    for (std::int64_t l = 0; l < L; ++l)
        for (std::int64_t j = 0; j < J; ++j) {
            const double* src = xv.data() + (l * J + j) * C;
            double* dst = out.data() + (l * n_groups + assign[static_cast<size_t>(j)]) * C;
            double wgt = inv_count[static_cast<size_t>(assign[static_cast<size_t>(j)])];
            for (std::int64_t c = 0; c < C; ++c) dst[c] += wgt * src[c];
        }
    return push(std::move(out), needs(x), [x, assign, inv_count, L, J, C, n_groups](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor gx(t.val(x).shape());
        for (std::int64_t l = 0; l < L; ++l)
            for (std::int64_t j = 0; j < J; ++j) {
                int a = assign[static_cast<size_t>(j)];
                const double* src = g.data() + (l * n_groups + a) * C;
                double* dst = gx.data() + (l * J + j) * C;
                double wgt = inv_count[static_cast<size_t>(a)];
                for (std::int64_t c = 0; c < C; ++c) dst[c] = wgt * src[c];
            }
        t.accum(x, gx);
    });
}

int Tape::group_unpool(int x, std::vector<int> assign) {
    const Tensor& xv = val(x);
    require(xv.rank() == 3, ErrorCode::invalid_argument, "group_unpool expects [L, G, C]");
    const std::int64_t L = xv.dim(0), G = xv.dim(1), C = xv.dim(2);
    const std::int64_t J = static_cast<std::int64_t>(assign.size());
    Tensor out({L, J, C});
    for (std::int64_t l = 0; l < L; ++l)
        for (std::int64_t j = 0; j < J; ++j) {
            int a = assign[static_cast<size_t>(j)];
            require(a >= 0 && a < G, ErrorCode::invalid_argument, "group index out of range");
            const double* src = xv.data() + (l * G + a) * C;
            double* dst = out.data() + (l * J + j) * C;
            std::copy(src, src + C, dst);
        }
    return push(std::move(out), needs(x), [x, assign, L, G, C, J](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor gx = Tensor::zeros(t.val(x).shape());
        for (std::int64_t l = 0; l < L; ++l)
            for (std::int64_t j = 0; j < J; ++j) {
                int a = assign[static_cast<size_t>(j)];
                const double* src = g.data() + (l * J + j) * C;
                double* dst = gx.data() + (l * G + a) * C;
                for (std::int64_t c = 0; c < C; ++c) dst[c] += src[c];
            }
        t.accum(x, gx);
    });
}

int Tape::resample_rows(int x, std::int64_t dst_frames) {
    const Tensor& xv = val(x);
    const std::int64_t src_frames = xv.frames();
    Tensor out = resample_to(xv, dst_frames);
    if (dst_frames == src_frames) {
        // Identity: still record a pass-through node for uniform structure.
        return push(std::move(out), needs(x),
                    [x](Tape& t, int self) { t.accum(x, t.grad(self)); });
    }
    auto taps = resample_taps(src_frames, dst_frames);
    const std::int64_t cs = xv.channel_stride();
    return push(std::move(out), needs(x), [x, taps, cs](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor gx = Tensor::zeros(t.val(x).shape());
        for (size_t i = 0; i < taps.size(); ++i) {
            const double* src = g.data() + static_cast<std::int64_t>(i) * cs;
            double* lo = gx.data() + taps[i].lo * cs;
            double* hi = gx.data() + taps[i].hi * cs;
            for (std::int64_t c = 0; c < cs; ++c) {
                lo[c] += taps[i].w_lo * src[c];
                hi[c] += taps[i].w_hi * src[c];
            }
        }
        t.accum(x, gx);
    });
}

}  // namespace hmflow
