#pragma once

// Differentiable operators. Every function evaluates its forward value
// immediately, records a node on the tape and returns the node handle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "epg/autodiff/tape.hpp"
#include "epg/rng.hpp"

namespace epg::ad {

enum class Padding { same, valid };

struct ConvGeometry {
    Index out_length;
    Index pad_left;
};

// "same" pads asymmetrically, putting the extra element on the right.
inline ConvGeometry conv_geometry(Index length, Index kernel, Index stride, Padding padding)
{
    if (stride < 1) throw DimensionError("conv1d stride must be >= 1");
    if (padding == Padding::same) {
        const Index out = (length + stride - 1) / stride;
        const Index total = std::max<Index>((out - 1) * stride + kernel - length, 0);
        return {out, total / 2};
    }
    if (kernel > length)
        throw DimensionError("conv1d kernel " + std::to_string(kernel) + " exceeds input length " +
                             std::to_string(length));
    return {(length - kernel) / stride + 1, 0};
}

namespace detail {

// Output positions t in [lo, hi) read the in-range input t * stride + offset.
inline std::pair<Index, Index> valid_range(Index offset, Index stride, Index length, Index out_len)
{
    const Index lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
    const Index hi = length - offset <= 0 ? 0 : std::min(out_len, (length - offset + stride - 1) / stride);
    return {std::min(lo, hi), hi};
}

template <class Scalar>
void im2col(const Scalar* x, Index c_in, Index length, Index kernel, Index stride, Index pad_left,
            Index out_len, RowMatrix<Scalar>& col)
{
    col.resize(c_in * kernel, out_len);
    for (Index c = 0; c < c_in; ++c) {
        const Scalar* xc = x + c * length;
        for (Index j = 0; j < kernel; ++j) {
            Scalar* row = col.data() + (c * kernel + j) * out_len;
            const Index offset = j - pad_left;
            const auto [lo, hi] = valid_range(offset, stride, length, out_len);
            std::fill(row, row + lo, Scalar(0));
            if (stride == 1)
                std::copy(xc + lo + offset, xc + hi + offset, row + lo);
            else
                for (Index t = lo; t < hi; ++t) row[t] = xc[t * stride + offset];
            std::fill(row + hi, row + out_len, Scalar(0));
        }
    }
}

template <class Scalar>
void col2im_add(const RowMatrix<Scalar>& col, Index c_in, Index length, Index kernel, Index stride,
                Index pad_left, Index out_len, Scalar* dx)
{
    for (Index c = 0; c < c_in; ++c) {
        Scalar* dxc = dx + c * length;
        for (Index j = 0; j < kernel; ++j) {
            const Scalar* row = col.data() + (c * kernel + j) * out_len;
            const Index offset = j - pad_left;
            const auto [lo, hi] = valid_range(offset, stride, length, out_len);
            if (stride == 1) {
                Scalar* d = dxc + offset;
                for (Index t = lo; t < hi; ++t) d[t] += row[t];
            } else {
                for (Index t = lo; t < hi; ++t) dxc[t * stride + offset] += row[t];
            }
        }
    }
}

inline void require_rank(const Shape& s, std::size_t rank, const char* op)
{
    if (s.size() != rank)
        throw DimensionError(std::string(op) + " expects a rank-" + std::to_string(rank) + " input, got " +
                             shape_str(s));
}

}  // namespace detail

// Cross-correlation of x [b, c_in, L] with w [c_out, c_in, k].
template <class Scalar>
Var conv1d(Tape<Scalar>& tape, Var x, Var w, std::optional<Var> bias, Index stride, Padding padding)
{
    const auto& xs = tape.value(x).shape();
    const auto& ws = tape.value(w).shape();
    detail::require_rank(xs, 3, "conv1d");
    if (ws.size() != 3 || ws[1] != xs[1])
        throw DimensionError("conv1d shape mismatch: input " + shape_str(xs) + " vs weight " + shape_str(ws));
    if (bias && (tape.value(*bias).size() != ws[0]))
        throw DimensionError("conv1d bias shape " + shape_str(tape.value(*bias).shape()) + " vs weight " +
                             shape_str(ws));

    const Index batch = xs[0], c_in = xs[1], length = xs[2];
    const Index c_out = ws[0], kernel = ws[2];
    const auto geo = conv_geometry(length, kernel, stride, padding);
    const Index out_len = geo.out_length;

    Tensor<Scalar> y({batch, c_out, out_len});
    const auto& xv = tape.value(x);
    const auto wm = tape.value(w).matrix(c_out, c_in * kernel);
    RowMatrix<Scalar> col;
    for (Index b = 0; b < batch; ++b) {
        detail::im2col(xv.ptr() + b * c_in * length, c_in, length, kernel, stride, geo.pad_left, out_len, col);
        auto yb = y.item(b);
        yb.noalias() = wm * col;
        if (bias) yb.colwise() += tape.value(*bias).data();
    }

    std::vector<Var> inputs{x, w};
    if (bias) inputs.push_back(*bias);
    return tape.record(OpKind::conv1d, std::move(y), inputs,
                       [=](Tape<Scalar>& t, int self) {
                           const auto& dy = t.node(Var{self}).grad;
                           const auto& xv = t.value(x);
                           const auto wm = t.value(w).matrix(c_out, c_in * kernel);
                           const bool need_x = t.requires_grad(x);
                           const bool need_w = t.requires_grad(w);
                           RowMatrix<Scalar> col, dcol;
                           for (Index b = 0; b < batch; ++b) {
                               const auto dyb = dy.item(b);
                               if (need_w) {
                                   detail::im2col(xv.ptr() + b * c_in * length, c_in, length, kernel, stride,
                                                  geo.pad_left, out_len, col);
                                   t.grad(w).matrix(c_out, c_in * kernel).noalias() += dyb * col.transpose();
                               }
                               if (bias && t.requires_grad(*bias))
                                   t.grad(*bias).data() += dyb.rowwise().sum();
                               if (need_x) {
                                   dcol.noalias() = wm.transpose() * dyb;
                                   detail::col2im_add(dcol, c_in, length, kernel, stride, geo.pad_left, out_len,
                                                      t.grad(x).ptr() + b * c_in * length);
                               }
                           }
                       });
}

// y = x W^T + b for x [b, in], W [out, in].
template <class Scalar>
Var dense(Tape<Scalar>& tape, Var x, Var w, std::optional<Var> bias)
{
    const auto& xs = tape.value(x).shape();
    const auto& ws = tape.value(w).shape();
    detail::require_rank(xs, 2, "dense");
    if (ws.size() != 2 || ws[1] != xs[1])
        throw DimensionError("dense shape mismatch: input " + shape_str(xs) + " vs weight " + shape_str(ws));
    const Index batch = xs[0], in = xs[1], out = ws[0];
    if (bias && tape.value(*bias).size() != out)
        throw DimensionError("dense bias shape " + shape_str(tape.value(*bias).shape()) + " vs weight " +
                             shape_str(ws));

    Tensor<Scalar> y({batch, out});
    y.matrix(batch, out).noalias() = tape.value(x).matrix(batch, in) * tape.value(w).matrix(out, in).transpose();
    if (bias) y.matrix(batch, out).rowwise() += tape.value(*bias).data().transpose();

    std::vector<Var> inputs{x, w};
    if (bias) inputs.push_back(*bias);
    return tape.record(OpKind::dense, std::move(y), inputs, [=](Tape<Scalar>& t, int self) {
        const auto dy = t.node(Var{self}).grad.matrix(batch, out);
        if (t.requires_grad(x))
            t.grad(x).matrix(batch, in).noalias() += dy * t.value(w).matrix(out, in);
        if (t.requires_grad(w))
            t.grad(w).matrix(out, in).noalias() += dy.transpose() * t.value(x).matrix(batch, in);
        if (bias && t.requires_grad(*bias)) t.grad(*bias).data() += dy.colwise().sum().transpose();
    });
}

template <class Scalar>
struct BatchNormStats {
    Vector<Scalar> running_mean;
    Vector<Scalar> running_var;

    explicit BatchNormStats(Index channels = 0)
        : running_mean(Vector<Scalar>::Zero(channels)), running_var(Vector<Scalar>::Ones(channels))
    {
    }
};

struct BatchNormOptions {
    double eps = 1e-3;
    // Weight of the current batch statistics in the running-average update.
    double momentum = 0.1;
};

// Normalises each channel of x ([b, c] or [b, c, L]) over batch and length.
// Running statistics use the biased batch variance.
template <class Scalar>
Var batchnorm(Tape<Scalar>& tape, Var x, Var gamma, Var beta, BatchNormStats<Scalar>& stats, Mode mode,
              BatchNormOptions opt = {})
{
    const auto& xs = tape.value(x).shape();
    if (xs.size() != 2 && xs.size() != 3)
        throw DimensionError("batchnorm expects [b,c] or [b,c,L], got " + shape_str(xs));
    const Index batch = xs[0], channels = xs[1], length = xs.size() == 3 ? xs[2] : 1;
    if (tape.value(gamma).size() != channels || tape.value(beta).size() != channels ||
        stats.running_mean.size() != channels)
        throw DimensionError("batchnorm channel mismatch: input " + shape_str(xs) + " vs gamma " +
                             shape_str(tape.value(gamma).shape()));
    const Index n = batch * length;
    if (mode == Mode::train && n < 2)
        throw DimensionError("batchnorm in train mode needs batch*length > 1");

    const auto& xv = tape.value(x);
    Vector<Scalar> mean(channels), invstd(channels);
    if (mode == Mode::train) {
        mean.setZero();
        Vector<Scalar> var = Vector<Scalar>::Zero(channels);
        for (Index b = 0; b < batch; ++b)
            for (Index c = 0; c < channels; ++c) {
                const Scalar* p = xv.ptr() + (b * channels + c) * length;
                mean[c] += Eigen::Map<const Vector<Scalar>>(p, length).sum();
            }
        mean /= Scalar(n);
        for (Index b = 0; b < batch; ++b)
            for (Index c = 0; c < channels; ++c) {
                const Scalar* p = xv.ptr() + (b * channels + c) * length;
                var[c] += (Eigen::Map<const Vector<Scalar>>(p, length).array() - mean[c]).square().sum();
            }
        var /= Scalar(n);
        invstd = (var.array() + Scalar(opt.eps)).rsqrt();
        const Scalar m = Scalar(opt.momentum);
        stats.running_mean = (Scalar(1) - m) * stats.running_mean + m * mean;
        stats.running_var = (Scalar(1) - m) * stats.running_var + m * var;
    } else {
        mean = stats.running_mean;
        invstd = (stats.running_var.array() + Scalar(opt.eps)).rsqrt();
    }

    Tensor<Scalar> xhat(xs);
    Tensor<Scalar> y(xs);
    const auto& g = tape.value(gamma).data();
    const auto& be = tape.value(beta).data();
    for (Index b = 0; b < batch; ++b)
        for (Index c = 0; c < channels; ++c) {
            const Index off = (b * channels + c) * length;
            auto xin = Eigen::Map<const Vector<Scalar>>(xv.ptr() + off, length).array();
            auto xh = Eigen::Map<Vector<Scalar>>(xhat.ptr() + off, length).array();
            xh = (xin - mean[c]) * invstd[c];
            Eigen::Map<Vector<Scalar>>(y.ptr() + off, length).array() = g[c] * xh + be[c];
        }

    return tape.record(
        OpKind::batchnorm, std::move(y), {x, gamma, beta},
        [=, xhat = std::move(xhat)](Tape<Scalar>& t, int self) {
            const auto& dy = t.node(Var{self}).grad;
            Vector<Scalar> sum_dy = Vector<Scalar>::Zero(channels);
            Vector<Scalar> sum_dy_xhat = Vector<Scalar>::Zero(channels);
            for (Index b = 0; b < batch; ++b)
                for (Index c = 0; c < channels; ++c) {
                    const Index off = (b * channels + c) * length;
                    auto d = Eigen::Map<const Vector<Scalar>>(dy.ptr() + off, length);
                    auto xh = Eigen::Map<const Vector<Scalar>>(xhat.ptr() + off, length);
                    sum_dy[c] += d.sum();
                    sum_dy_xhat[c] += d.dot(xh);
                }
            if (t.requires_grad(gamma)) t.grad(gamma).data() += sum_dy_xhat;
            if (t.requires_grad(beta)) t.grad(beta).data() += sum_dy;
            if (!t.requires_grad(x)) return;
            const auto& gv = t.value(gamma).data();
            auto& dx = t.grad(x);
            for (Index b = 0; b < batch; ++b)
                for (Index c = 0; c < channels; ++c) {
                    const Index off = (b * channels + c) * length;
                    auto d = Eigen::Map<const Vector<Scalar>>(dy.ptr() + off, length).array();
                    auto xh = Eigen::Map<const Vector<Scalar>>(xhat.ptr() + off, length).array();
                    auto out = Eigen::Map<Vector<Scalar>>(dx.ptr() + off, length).array();
                    const Scalar scale = gv[c] * invstd[c];
                    if (mode == Mode::train) {
                        const Scalar inv_n = Scalar(1) / Scalar(n);
                        out += scale * (d - inv_n * sum_dy[c] - xh * (inv_n * sum_dy_xhat[c]));
                    } else {
                        out += scale * d;
                    }
                }
        });
}

template <class Scalar>
Var relu(Tape<Scalar>& tape, Var x)
{
    Tensor<Scalar> y(tape.value(x).shape());
    y.data() = tape.value(x).data().cwiseMax(Scalar(0));
    return tape.record(OpKind::relu, std::move(y), {x}, [=](Tape<Scalar>& t, int self) {
        const auto& dy = t.node(Var{self}).grad.data();
        t.grad(x).data().array() += (t.value(x).data().array() > Scalar(0)).select(dy.array(), Scalar(0));
    });
}

template <class Scalar>
Var elu(Tape<Scalar>& tape, Var x, Scalar alpha = Scalar(1))
{
    const auto xa = tape.value(x).data().array();
    Tensor<Scalar> y(tape.value(x).shape());
    y.data().array() = (xa > Scalar(0)).select(xa, alpha * (xa.exp() - Scalar(1)));
    return tape.record(OpKind::elu, std::move(y), {x}, [=](Tape<Scalar>& t, int self) {
        const auto& n = t.node(Var{self});
        const auto xa = t.value(x).data().array();
        const auto slope = (xa > Scalar(0)).select(Vector<Scalar>::Ones(xa.size()).array(), n.value.data().array() + alpha);
        t.grad(x).data().array() += slope * n.grad.data().array();
    });
}

template <class Scalar>
Var maxpool1d(Tape<Scalar>& tape, Var x, Index kernel, Index stride)
{
    const auto& xs = tape.value(x).shape();
    detail::require_rank(xs, 3, "maxpool1d");
    if (kernel < 1 || stride < 1) throw DimensionError("maxpool1d kernel and stride must be >= 1");
    if (kernel > xs[2])
        throw DimensionError("maxpool1d window " + std::to_string(kernel) + " exceeds length " + std::to_string(xs[2]));
    const Index rows = xs[0] * xs[1], length = xs[2], out_len = (length - kernel) / stride + 1;
    Tensor<Scalar> y({xs[0], xs[1], out_len});
    std::vector<Index> argmax(static_cast<std::size_t>(rows * out_len));
    const auto& xv = tape.value(x);
    for (Index r = 0; r < rows; ++r)
        for (Index t = 0; t < out_len; ++t) {
            const Scalar* p = xv.ptr() + r * length + t * stride;
            Index best = 0;
            for (Index j = 1; j < kernel; ++j)
                if (p[j] > p[best]) best = j;
            y[r * out_len + t] = p[best];
            argmax[static_cast<std::size_t>(r * out_len + t)] = r * length + t * stride + best;
        }
    return tape.record(OpKind::maxpool1d, std::move(y), {x}, [=, argmax = std::move(argmax)](Tape<Scalar>& t, int self) {
        const auto& dy = t.node(Var{self}).grad;
        auto& dx = t.grad(x);
        for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += dy[static_cast<Index>(i)];
    });
}

template <class Scalar>
Var avgpool1d(Tape<Scalar>& tape, Var x, Index kernel, Index stride)
{
    const auto& xs = tape.value(x).shape();
    detail::require_rank(xs, 3, "avgpool1d");
    if (kernel < 1 || stride < 1) throw DimensionError("avgpool1d kernel and stride must be >= 1");
    if (kernel > xs[2])
        throw DimensionError("avgpool1d window " + std::to_string(kernel) + " exceeds length " + std::to_string(xs[2]));
    const Index rows = xs[0] * xs[1], length = xs[2], out_len = (length - kernel) / stride + 1;
    Tensor<Scalar> y({xs[0], xs[1], out_len});
    const auto& xv = tape.value(x);
    const Scalar inv = Scalar(1) / Scalar(kernel);
    for (Index r = 0; r < rows; ++r)
        for (Index t = 0; t < out_len; ++t) {
            const Scalar* p = xv.ptr() + r * length + t * stride;
            Scalar s = 0;
            for (Index j = 0; j < kernel; ++j) s += p[j];
            y[r * out_len + t] = s * inv;
        }
    return tape.record(OpKind::avgpool1d, std::move(y), {x}, [=](Tape<Scalar>& t, int self) {
        const auto& dy = t.node(Var{self}).grad;
        auto& dx = t.grad(x);
        for (Index r = 0; r < rows; ++r)
            for (Index o = 0; o < out_len; ++o) {
                const Scalar g = dy[r * out_len + o] * inv;
                Scalar* p = dx.ptr() + r * length + o * stride;
                for (Index j = 0; j < kernel; ++j) p[j] += g;
            }
    });
}

// Global average pooling: [b, c, L] -> [b, c].
template <class Scalar>
Var gap(Tape<Scalar>& tape, Var x)
{
    const auto& xs = tape.value(x).shape();
    detail::require_rank(xs, 3, "gap");
    const Index rows = xs[0] * xs[1], length = xs[2];
    if (length < 1) throw DimensionError("gap needs length >= 1");
    Tensor<Scalar> y({xs[0], xs[1]});
    y.data() = tape.value(x).matrix(rows, length).rowwise().mean();
    return tape.record(OpKind::gap, std::move(y), {x}, [=](Tape<Scalar>& t, int self) {
        const auto& dy = t.node(Var{self}).grad.data();
        t.grad(x).matrix(rows, length).colwise() += dy / Scalar(length);
    });
}

// Key of the counter-based dropout stream: (seed, layer id, training step).
struct DropoutKey {
    std::uint64_t seed = 0;
    std::uint64_t layer = 0;
    std::uint64_t step = 0;
};

// Inverted dropout. Identity in eval mode or when rate == 0.
template <class Scalar>
Var dropout(Tape<Scalar>& tape, Var x, double rate, Mode mode, DropoutKey key)
{
    if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must be in [0, 1)");
    if (mode == Mode::eval || rate == 0.0) return x;
    const CounterRng rng{hash_combine(hash_combine(key.seed, key.layer), key.step)};
    const auto& xv = tape.value(x);
    Vector<Scalar> mask(xv.size());
    const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
    // Four 16-bit uniforms per hash; the drop probability is rate rounded up
    // to a multiple of 2^-16.
    const auto threshold = static_cast<std::uint32_t>(std::ceil(rate * 65536.0));
    for (Index i = 0; i < mask.size(); i += 4) {
        std::uint64_t bits = hash_combine(rng.key, static_cast<std::uint64_t>(i / 4));
        for (Index j = i; j < std::min(i + 4, mask.size()); ++j, bits >>= 16)
            mask[j] = static_cast<std::uint32_t>(bits & 0xFFFFu) < threshold ? Scalar(0) : keep_scale;
    }
    Tensor<Scalar> y(xv.shape());
    y.data() = xv.data().cwiseProduct(mask);
    return tape.record(OpKind::dropout, std::move(y), {x}, [=, mask = std::move(mask)](Tape<Scalar>& t, int self) {
        t.grad(x).data() += t.node(Var{self}).grad.data().cwiseProduct(mask);
    });
}

template <class Scalar>
Var add(Tape<Scalar>& tape, Var a, Var b)
{
    if (tape.value(a).shape() != tape.value(b).shape())
        throw DimensionError("add shape mismatch: " + shape_str(tape.value(a).shape()) + " vs " +
                             shape_str(tape.value(b).shape()));
    Tensor<Scalar> y(tape.value(a).shape());
    y.data() = tape.value(a).data() + tape.value(b).data();
    return tape.record(OpKind::add, std::move(y), {a, b}, [=](Tape<Scalar>& t, int self) {
        const auto& dy = t.node(Var{self}).grad.data();
        if (t.requires_grad(a)) t.grad(a).data() += dy;
        if (t.requires_grad(b)) t.grad(b).data() += dy;
    });
}

template <class Scalar>
Var reshape(Tape<Scalar>& tape, Var x, Shape shape)
{
    if (numel(shape) != tape.value(x).size())
        throw DimensionError("reshape " + shape_str(tape.value(x).shape()) + " -> " + shape_str(shape));
    Tensor<Scalar> y = tape.value(x).reshaped(std::move(shape));
    return tape.record(OpKind::reshape, std::move(y), {x}, [=](Tape<Scalar>& t, int self) {
        t.grad(x).data() += t.node(Var{self}).grad.data();
    });
}

// [b, c, L] -> [b, c*L].
template <class Scalar>
Var flatten(Tape<Scalar>& tape, Var x)
{
    const auto& s = tape.value(x).shape();
    return reshape(tape, x, Shape{s[0], numel(s) / s[0]});
}

// Zero-pads the channel axis of [b, c, L] up to `channels`.
template <class Scalar>
Var pad_channels(Tape<Scalar>& tape, Var x, Index channels)
{
    const auto& xs = tape.value(x).shape();
    detail::require_rank(xs, 3, "pad_channels");
    if (channels < xs[1]) throw DimensionError("pad_channels cannot shrink " + shape_str(xs));
    if (channels == xs[1]) return x;
    const Index batch = xs[0], c_in = xs[1], length = xs[2];
    Tensor<Scalar> y({batch, channels, length});
    for (Index b = 0; b < batch; ++b)
        y.item(b).topRows(c_in) = tape.value(x).item(b);
    return tape.record(OpKind::pad_channels, std::move(y), {x}, [=](Tape<Scalar>& t, int self) {
        auto& dx = t.grad(x);
        const auto& dy = t.node(Var{self}).grad;
        for (Index b = 0; b < batch; ++b) dx.item(b) += dy.item(b).topRows(c_in);
    });
}

template <class Scalar>
Var sum(Tape<Scalar>& tape, Var x)
{
    Tensor<Scalar> y({1});
    y[0] = tape.value(x).data().sum();
    return tape.record(OpKind::sum, std::move(y), {x}, [=](Tape<Scalar>& t, int self) {
        t.grad(x).data().array() += t.node(Var{self}).grad[0];
    });
}

// sum(x * weights) for a constant weight tensor of the same size.
template <class Scalar>
Var weighted_sum(Tape<Scalar>& tape, Var x, Tensor<Scalar> weights)
{
    if (weights.size() != tape.value(x).size())
        throw DimensionError("weighted_sum size mismatch: " + shape_str(tape.value(x).shape()) + " vs " +
                             shape_str(weights.shape()));
    Tensor<Scalar> y({1});
    y[0] = tape.value(x).data().dot(weights.data());
    return tape.record(OpKind::weighted_sum, std::move(y), {x},
                       [=, w = std::move(weights)](Tape<Scalar>& t, int self) {
                           t.grad(x).data() += t.node(Var{self}).grad[0] * w.data();
                       });
}

// Row-wise max-shifted softmax of [b, n] logits.
template <class Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits)
{
    const Index b = logits.dim(0), n = logits.dim(1);
    Tensor<Scalar> p(logits.shape());
    auto lm = logits.matrix(b, n);
    auto pm = p.matrix(b, n);
    for (Index r = 0; r < b; ++r) {
        const Scalar mx = lm.row(r).maxCoeff();
        pm.row(r) = (lm.row(r).array() - mx).exp().matrix();
        pm.row(r) /= pm.row(r).sum();
    }
    return p;
}

template <class Scalar>
struct XentResult {
    Var loss;
    Tensor<Scalar> probs;
};

// Mean cross-entropy of softmax(logits) against integer labels.
template <class Scalar>
XentResult<Scalar> softmax_xent(Tape<Scalar>& tape, Var logits, std::span<const int> labels)
{
    const auto& ls = tape.value(logits).shape();
    detail::require_rank(ls, 2, "softmax_xent");
    const Index b = ls[0], n = ls[1];
    if (static_cast<Index>(labels.size()) != b)
        throw DimensionError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch of " +
                             std::to_string(b));
    for (int l : labels)
        if (l < 0 || l >= n) throw ValidationError("label " + std::to_string(l) + " out of range");

    Tensor<Scalar> probs = softmax(tape.value(logits));
    const auto lm = tape.value(logits).matrix(b, n);
    Scalar loss = 0;
    for (Index r = 0; r < b; ++r) {
        const Scalar mx = lm.row(r).maxCoeff();
        const Scalar lse = mx + std::log((lm.row(r).array() - mx).exp().sum());
        loss += lse - lm(r, labels[static_cast<std::size_t>(r)]);
    }
    Tensor<Scalar> y({1});
    y[0] = loss / Scalar(b);
    std::vector<int> lab(labels.begin(), labels.end());
    Var v = tape.record(OpKind::softmax_xent, std::move(y), {logits},
                        [=, p = probs, lab = std::move(lab)](Tape<Scalar>& t, int self) {
                            const Scalar g = t.node(Var{self}).grad[0] / Scalar(b);
                            auto dl = t.grad(logits).matrix(b, n);
                            const auto pm = p.matrix(b, n);
                            for (Index r = 0; r < b; ++r) {
                                dl.row(r) += g * pm.row(r);
                                dl(r, lab[static_cast<std::size_t>(r)]) -= g;
                            }
                        });
    return {v, std::move(probs)};
}

// factor * sum of squared entries over all given tensors.
template <class Scalar>
Var l2_penalty(Tape<Scalar>& tape, std::span<const Var> params, Scalar factor)
{
    Tensor<Scalar> y({1});
    for (auto p : params) y[0] += tape.value(p).data().squaredNorm();
    y[0] *= factor;
    std::vector<Var> inputs(params.begin(), params.end());
    return tape.record(OpKind::l2_penalty, std::move(y), inputs, [=](Tape<Scalar>& t, int self) {
        const Scalar g = t.node(Var{self}).grad[0] * Scalar(2) * factor;
        for (auto p : inputs)
            if (t.requires_grad(p)) t.grad(p).data() += g * t.value(p).data();
    });
}

}  // namespace epg::ad
