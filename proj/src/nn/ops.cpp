#include "forchestra/nn/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "forchestra/error.hpp"

namespace forchestra::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using CStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;

CMatMap cmat(const Tensor& x, std::size_t rows, std::size_t cols) {
    return CMatMap(x.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MatMap mat(Tensor& x, std::size_t rows, std::size_t cols) {
    return MatMap(x.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_same_shape(const Tape& t, Var a, Var b, const char* op) {
    if (t.shape(a) != t.shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + to_string(t.shape(a)) +
                             " vs " + to_string(t.shape(b)));
    }
}

void require_rank(const Tape& t, Var a, std::size_t rank, const char* op) {
    if (t.shape(a).size() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             ", got " + to_string(t.shape(a)));
    }
}

void accumulate(Tensor& dst, const Tensor& src) {
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <class F, class G>
Var unary(Tape& t, Var a, const char* name, F forward, G derivative) {
    const Tensor& x = t.value(a);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
    return t.record(std::move(y), name, {a}, [a, derivative](Tape& tp, Var self) {
        const Tensor& x = tp.value(a);
        const Tensor& yv = tp.value(self);
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * derivative(x[i], yv[i]);
    });
}

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
    require_same_shape(t, a, b, "add");
    Tensor y = t.value(a);
    accumulate(y, t.value(b));
    return t.record(std::move(y), "add", {a, b}, [a, b](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a)) accumulate(tp.grad(a), g);
        if (tp.requires_grad(b)) accumulate(tp.grad(b), g);
    });
}

Var sub(Tape& t, Var a, Var b) {
    require_same_shape(t, a, b, "sub");
    Tensor y = t.value(a);
    const Tensor& bv = t.value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
    return t.record(std::move(y), "sub", {a, b}, [a, b](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a)) accumulate(tp.grad(a), g);
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var mul(Tape& t, Var a, Var b) {
    require_same_shape(t, a, b, "mul");
    Tensor y = t.value(a);
    const Tensor& bv = t.value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
    return t.record(std::move(y), "mul", {a, b}, [a, b](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad(a);
            const Tensor& bv = tp.value(b);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad(b);
            const Tensor& av = tp.value(a);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var scale(Tape& t, Var a, double factor) {
    return unary(
        t, a, "scale", [factor](double x) { return factor * x; },
        [factor](double, double) { return factor; });
}

Var square(Tape& t, Var a) {
    return unary(
        t, a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var relu(Tape& t, Var a) {
    return unary(
        t, a, "relu", [](double x) { return x > 0 ? x : 0.0; },
        [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var tanh(Tape& t, Var a) {
    return unary(
        t, a, "tanh", [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Tape& t, Var a) {
    return unary(
        t, a, "sigmoid", sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var gelu(Tape& t, Var a) {
    static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    static const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
    return unary(
        t, a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [](double x, double) {
            return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
        });
}

Var sum(Tape& t, Var a) {
    double s = 0.0;
    for (double v : t.value(a).data()) s += v;
    return t.record(Tensor::scalar(s), "sum", {a}, [a](Tape& tp, Var self) {
        const double g = tp.grad(self)[0];
        for (double& v : tp.grad(a).data()) v += g;
    });
}

Var mean(Tape& t, Var a) {
    const std::size_t n = t.value(a).size();
    if (n == 0) throw DimensionError("mean of empty tensor");
    return scale(t, sum(t, a), 1.0 / static_cast<double>(n));
}

Var reshape(Tape& t, Var a, Shape shape) {
    Tensor y = t.value(a).reshaped(std::move(shape));
    return t.record(std::move(y), "reshape", {a}, [a](Tape& tp, Var self) {
        accumulate(tp.grad(a), tp.grad(self));
    });
}

Var matmul(Tape& t, Var a, Var b) {
    require_rank(t, a, 2, "matmul");
    require_rank(t, b, 2, "matmul");
    const std::size_t m = t.shape(a)[0], k = t.shape(a)[1], n = t.shape(b)[1];
    if (t.shape(b)[0] != k) {
        throw DimensionError("matmul: " + to_string(t.shape(a)) + " x " + to_string(t.shape(b)));
    }
    Tensor y(Shape{m, n});
    mat(y, m, n).noalias() = cmat(t.value(a), m, k) * cmat(t.value(b), k, n);
    return t.record(std::move(y), "matmul", {a, b}, [a, b, m, k, n](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a)) {
            mat(tp.grad(a), m, k).noalias() += cmat(g, m, n) * cmat(tp.value(b), k, n).transpose();
        }
        if (tp.requires_grad(b)) {
            mat(tp.grad(b), k, n).noalias() += cmat(tp.value(a), m, k).transpose() * cmat(g, m, n);
        }
    });
}

Var linear(Tape& t, Var x, Var weight, Var bias) {
    const Shape& xs = t.shape(x);
    require_rank(t, weight, 2, "linear");
    require_rank(t, bias, 1, "linear");
    const std::size_t in = t.shape(weight)[0], out = t.shape(weight)[1];
    if (xs.empty() || xs.back() != in || t.shape(bias)[0] != out) {
        throw DimensionError("linear: input " + to_string(xs) + " incompatible with weight " +
                             to_string(t.shape(weight)) + " and bias " + to_string(t.shape(bias)));
    }
    const std::size_t rows = t.value(x).size() / in;
    Shape ys = xs;
    ys.back() = out;
    Tensor y(ys);
    auto ym = mat(y, rows, out);
    ym.noalias() = cmat(t.value(x), rows, in) * cmat(t.value(weight), in, out);
    ym.rowwise() += CVecMap(t.value(bias).raw(), static_cast<Eigen::Index>(out)).transpose();
    return t.record(std::move(y), "linear", {x, weight, bias},
                    [x, weight, bias, rows, in, out](Tape& tp, Var self) {
                        const auto g = cmat(tp.grad(self), rows, out);
                        if (tp.requires_grad(x)) {
                            mat(tp.grad(x), rows, in).noalias() +=
                                g * cmat(tp.value(weight), in, out).transpose();
                        }
                        if (tp.requires_grad(weight)) {
                            mat(tp.grad(weight), in, out).noalias() +=
                                cmat(tp.value(x), rows, in).transpose() * g;
                        }
                        if (tp.requires_grad(bias)) {
                            VecMap(tp.grad(bias).raw(), static_cast<Eigen::Index>(out)) +=
                                g.colwise().sum().transpose();
                        }
                    });
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

Var softmax(Tape& t, Var logits) {
    const Tensor& x = t.value(logits);
    if (x.rank() == 0 || x.shape().back() == 0) {
        throw DimensionError("softmax: needs a nonempty last axis, got " + to_string(x.shape()));
    }
    const std::size_t n = x.shape().back();
    const std::size_t rows = x.size() / n;
    Tensor y(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = softmax(x.data().subspan(r * n, n));
        std::copy(row.begin(), row.end(), y.raw() + r * n);
    }
    return t.record(std::move(y), "softmax", {logits}, [logits, rows, n](Tape& tp, Var self) {
        const Tensor& yv = tp.value(self);
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(logits);
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += yv[r * n + i] * g[r * n + i];
            for (std::size_t i = 0; i < n; ++i) {
                gx[r * n + i] += yv[r * n + i] * (g[r * n + i] - dot);
            }
        }
    });
}

Var l1_loss(Tape& t, Var prediction, Var target) {
    require_same_shape(t, prediction, target, "l1_loss");
    const Tensor& p = t.value(prediction);
    const Tensor& y = t.value(target);
    if (p.empty()) throw DimensionError("l1_loss of empty tensors");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - y[i]);
    const double n = static_cast<double>(p.size());
    return t.record(Tensor::scalar(s / n), "l1_loss", {prediction, target},
                    [prediction, target, n](Tape& tp, Var self) {
                        const double g = tp.grad(self)[0] / n;
                        const Tensor& p = tp.value(prediction);
                        const Tensor& y = tp.value(target);
                        auto sign = [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); };
                        if (tp.requires_grad(prediction)) {
                            Tensor& gp = tp.grad(prediction);
                            for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * sign(p[i] - y[i]);
                        }
                        if (tp.requires_grad(target)) {
                            Tensor& gy = tp.grad(target);
                            for (std::size_t i = 0; i < p.size(); ++i) gy[i] -= g * sign(p[i] - y[i]);
                        }
                    });
}

Var masked_l1_loss(Tape& t, Var prediction, Var target, std::span<const double> mask) {
    require_same_shape(t, prediction, target, "masked_l1_loss");
    const Tensor& p = t.value(prediction);
    const Tensor& y = t.value(target);
    if (mask.size() != p.size()) throw DimensionError("masked_l1_loss: mask size differs from prediction size");
    double s = 0.0, n = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        s += mask[i] * std::abs(p[i] - y[i]);
        n += mask[i];
    }
    std::vector<double> m(mask.begin(), mask.end());
    const double denom = n > 0.0 ? n : 1.0;
    return t.record(Tensor::scalar(s / denom), "masked_l1_loss", {prediction, target},
                    [prediction, target, denom, m = std::move(m)](Tape& tp, Var self) {
                        const double g = tp.grad(self)[0] / denom;
                        const Tensor& p = tp.value(prediction);
                        const Tensor& y = tp.value(target);
                        auto sign = [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); };
                        if (tp.requires_grad(prediction)) {
                            Tensor& gp = tp.grad(prediction);
                            for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * m[i] * sign(p[i] - y[i]);
                        }
                        if (tp.requires_grad(target)) {
                            Tensor& gy = tp.grad(target);
                            for (std::size_t i = 0; i < p.size(); ++i) gy[i] -= g * m[i] * sign(p[i] - y[i]);
                        }
                    });
}

Var last_timestep(Tape& t, Var x) {
    require_rank(t, x, 3, "last_timestep");
    const std::size_t T = t.shape(x)[1];
    if (T == 0) throw DimensionError("last_timestep: empty time axis");
    Var s = slice_time(t, x, T - 1, 1);
    return reshape(t, s, Shape{t.shape(x)[0], t.shape(x)[2]});
}

Var slice_time(Tape& t, Var x, std::size_t begin, std::size_t length) {
    require_rank(t, x, 3, "slice_time");
    const std::size_t B = t.shape(x)[0], T = t.shape(x)[1], D = t.shape(x)[2];
    if (begin + length > T) {
        throw DimensionError("slice_time: [" + std::to_string(begin) + ", " +
                             std::to_string(begin + length) + ") exceeds " + to_string(t.shape(x)));
    }
    const Tensor& xv = t.value(x);
    Tensor y(Shape{B, length, D});
    for (std::size_t b = 0; b < B; ++b) {
        std::copy_n(xv.raw() + (b * T + begin) * D, length * D, y.raw() + b * length * D);
    }
    return t.record(std::move(y), "slice_time", {x},
                    [x, B, T, D, begin, length](Tape& tp, Var self) {
                        const Tensor& g = tp.grad(self);
                        Tensor& gx = tp.grad(x);
                        for (std::size_t b = 0; b < B; ++b) {
                            const double* src = g.raw() + b * length * D;
                            double* dst = gx.raw() + (b * T + begin) * D;
                            for (std::size_t i = 0; i < length * D; ++i) dst[i] += src[i];
                        }
                    });
}

Var mask_time(Tape& t, Var x, std::span<const std::uint8_t> keep) {
    require_rank(t, x, 3, "mask_time");
    const std::size_t B = t.shape(x)[0], T = t.shape(x)[1], D = t.shape(x)[2];
    if (keep.size() != B * T) {
        throw DimensionError("mask_time: mask has " + std::to_string(keep.size()) +
                             " entries for " + to_string(t.shape(x)));
    }
    std::vector<std::uint8_t> flags(keep.begin(), keep.end());
    Tensor y = t.value(x);
    for (std::size_t bt = 0; bt < B * T; ++bt) {
        if (!flags[bt]) std::fill_n(y.raw() + bt * D, D, 0.0);
    }
    return t.record(std::move(y), "mask_time", {x}, [x, D, flags](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (std::size_t bt = 0; bt < flags.size(); ++bt) {
            if (!flags[bt]) continue;
            for (std::size_t d = 0; d < D; ++d) gx[bt * D + d] += g[bt * D + d];
        }
    });
}

Var max_pool_time(Tape& t, Var x, std::optional<std::size_t> window) {
    const Shape& xs = t.shape(x);
    if (xs.size() != 2 && xs.size() != 3) {
        throw DimensionError("max_pool_time: expected [T x D] or [B x T x D], got " + to_string(xs));
    }
    const bool batched = xs.size() == 3;
    const std::size_t B = batched ? xs[0] : 1;
    const std::size_t T = xs[batched ? 1 : 0];
    const std::size_t D = xs.back();
    if (T == 0) throw DimensionError("max_pool_time: empty time axis");
    const std::size_t w = window.value_or(T);
    if (w == 0) throw ConfigError("max_pool_time: window must be positive");
    const std::size_t out_T = (T + w - 1) / w;

    const Tensor& xv = t.value(x);
    Shape ys = xs;
    ys[batched ? 1 : 0] = out_T;
    Tensor y(ys);
    std::vector<std::size_t> argmax(y.size());
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < out_T; ++o) {
            const std::size_t t0 = o * w, t1 = std::min(T, t0 + w);
            for (std::size_t d = 0; d < D; ++d) {
                std::size_t best = (b * T + t0) * D + d;
                for (std::size_t s = t0 + 1; s < t1; ++s) {
                    const std::size_t idx = (b * T + s) * D + d;
                    if (xv[idx] > xv[best]) best = idx;
                }
                const std::size_t out = (b * out_T + o) * D + d;
                y[out] = xv[best];
                argmax[out] = best;
            }
        }
    }
    return t.record(std::move(y), "max_pool_time", {x}, [x, argmax](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
    });
}

Var lstm(Tape& t, Var x, Var w_ih, Var w_hh, Var bias) {
    require_rank(t, x, 3, "lstm");
    require_rank(t, w_ih, 2, "lstm");
    require_rank(t, w_hh, 2, "lstm");
    require_rank(t, bias, 1, "lstm");
    const std::size_t B = t.shape(x)[0], T = t.shape(x)[1], in = t.shape(x)[2];
    const std::size_t H = t.shape(w_hh)[0];
    const std::size_t G = 4 * H;
    if (T == 0) throw ContractError("lstm: empty time axis in input " + to_string(t.shape(x)));
    if (t.shape(w_ih)[0] != in || t.shape(w_ih)[1] != G || t.shape(w_hh)[1] != G ||
        t.shape(bias)[0] != G) {
        throw DimensionError("lstm: input " + to_string(t.shape(x)) + " incompatible with w_ih " +
                             to_string(t.shape(w_ih)) + ", w_hh " + to_string(t.shape(w_hh)) +
                             ", bias " + to_string(t.shape(bias)));
    }
    const auto Bi = static_cast<Eigen::Index>(B);
    const auto Hi = static_cast<Eigen::Index>(H);
    const auto Gi = static_cast<Eigen::Index>(G);

    // Pre-activations for every (b, t) at once; rows ordered (b, t).
    Tensor gates(Shape{B, T, G});
    auto gm = mat(gates, B * T, G);
    gm.noalias() = cmat(t.value(x), B * T, in) * cmat(t.value(w_ih), in, G);
    gm.rowwise() += CVecMap(t.value(bias).raw(), Gi).transpose();

    const auto whh = cmat(t.value(w_hh), H, G);
    Tensor h(Shape{B, T, H});
    Tensor c(Shape{B, T, H});
    Tensor tanh_c(Shape{B, T, H});
    RowMat h_prev = RowMat::Zero(Bi, Hi);
    RowMat c_prev = RowMat::Zero(Bi, Hi);
    const Eigen::OuterStride<> gstride(static_cast<Eigen::Index>(T * G));
    const Eigen::OuterStride<> hstride(static_cast<Eigen::Index>(T * H));
    for (std::size_t s = 0; s < T; ++s) {
        StridedMap z(gates.raw() + s * G, Bi, Gi, gstride);
        if (s > 0) z.noalias() += h_prev * whh;
        StridedMap cs(c.raw() + s * H, Bi, Hi, hstride);
        StridedMap hs(h.raw() + s * H, Bi, Hi, hstride);
        StridedMap tc(tanh_c.raw() + s * H, Bi, Hi, hstride);
        for (Eigen::Index b = 0; b < Bi; ++b) {
            for (Eigen::Index j = 0; j < Hi; ++j) {
                const double ig = sigmoid_scalar(z(b, j));
                const double fg = sigmoid_scalar(z(b, Hi + j));
                const double gg = std::tanh(z(b, 2 * Hi + j));
                const double og = sigmoid_scalar(z(b, 3 * Hi + j));
                z(b, j) = ig;
                z(b, Hi + j) = fg;
                z(b, 2 * Hi + j) = gg;
                z(b, 3 * Hi + j) = og;
                const double cv = fg * c_prev(b, j) + ig * gg;
                cs(b, j) = cv;
                tc(b, j) = std::tanh(cv);
                hs(b, j) = og * tc(b, j);
            }
        }
        h_prev = hs;
        c_prev = cs;
    }

    if (!t.grad_enabled()) return t.record(std::move(h), "lstm", {x, w_ih, w_hh, bias}, {});

    return t.record(
        std::move(h), "lstm", {x, w_ih, w_hh, bias},
        [x, w_ih, w_hh, bias, B, T, in, H, G, gates = std::move(gates), c = std::move(c),
         tanh_c = std::move(tanh_c)](Tape& tp, Var self) {
            const auto Bi = static_cast<Eigen::Index>(B);
            const auto Hi = static_cast<Eigen::Index>(H);
            const auto Gi = static_cast<Eigen::Index>(G);
            const Eigen::OuterStride<> gstride(static_cast<Eigen::Index>(T * G));
            const Eigen::OuterStride<> hstride(static_cast<Eigen::Index>(T * H));
            const Tensor& hv = tp.value(self);
            const Tensor& dy = tp.grad(self);
            const auto whh = cmat(tp.value(w_hh), H, G);

            Tensor dz(Shape{B, T, G});
            RowMat dh_next = RowMat::Zero(Bi, Hi);
            RowMat dc_next = RowMat::Zero(Bi, Hi);
            RowMat dwhh = RowMat::Zero(Hi, Gi);
            for (std::size_t s = T; s-- > 0;) {
                CStridedMap act(gates.raw() + s * G, Bi, Gi, gstride);
                CStridedMap tc(tanh_c.raw() + s * H, Bi, Hi, hstride);
                CStridedMap g_out(dy.raw() + s * H, Bi, Hi, hstride);
                StridedMap dzs(dz.raw() + s * G, Bi, Gi, gstride);
                for (Eigen::Index b = 0; b < Bi; ++b) {
                    for (Eigen::Index j = 0; j < Hi; ++j) {
                        const double ig = act(b, j), fg = act(b, Hi + j);
                        const double gg = act(b, 2 * Hi + j), og = act(b, 3 * Hi + j);
                        const double c_prev = s > 0 ? c[(b * T + s - 1) * H + j] : 0.0;
                        const double dh = g_out(b, j) + dh_next(b, j);
                        const double dc = dh * og * (1.0 - tc(b, j) * tc(b, j)) + dc_next(b, j);
                        dzs(b, j) = dc * gg * ig * (1.0 - ig);
                        dzs(b, Hi + j) = dc * c_prev * fg * (1.0 - fg);
                        dzs(b, 2 * Hi + j) = dc * ig * (1.0 - gg * gg);
                        dzs(b, 3 * Hi + j) = dh * tc(b, j) * og * (1.0 - og);
                        dc_next(b, j) = dc * fg;
                    }
                }
                if (s > 0) {
                    CStridedMap h_prev(hv.raw() + (s - 1) * H, Bi, Hi, hstride);
                    dwhh.noalias() += h_prev.transpose() * dzs;
                    dh_next.noalias() = dzs * whh.transpose();
                }
            }
            const auto dzm = cmat(dz, B * T, G);
            if (tp.requires_grad(w_hh)) mat(tp.grad(w_hh), H, G) += dwhh;
            if (tp.requires_grad(w_ih)) {
                mat(tp.grad(w_ih), in, G).noalias() += cmat(tp.value(x), B * T, in).transpose() * dzm;
            }
            if (tp.requires_grad(bias)) {
                VecMap(tp.grad(bias).raw(), Gi) += dzm.colwise().sum().transpose();
            }
            if (tp.requires_grad(x)) {
                mat(tp.grad(x), B * T, in).noalias() += dzm * cmat(tp.value(w_ih), in, G).transpose();
            }
        });
}

Var conv1d(Tape& t, Var x, Var kernel, Var bias, std::size_t dilation) {
    require_rank(t, x, 3, "conv1d");
    require_rank(t, kernel, 3, "conv1d");
    require_rank(t, bias, 1, "conv1d");
    const std::size_t B = t.shape(x)[0], T = t.shape(x)[1], cin = t.shape(x)[2];
    const std::size_t k = t.shape(kernel)[0], cout = t.shape(kernel)[2];
    if (k % 2 == 0) throw ConfigError("conv1d: kernel size must be odd, got " + std::to_string(k));
    if (dilation == 0) throw ConfigError("conv1d: dilation must be >= 1");
    if (t.shape(kernel)[1] != cin || t.shape(bias)[0] != cout) {
        throw DimensionError("conv1d: input " + to_string(t.shape(x)) + " incompatible with kernel " +
                             to_string(t.shape(kernel)) + " and bias " + to_string(t.shape(bias)));
    }
    const auto center = static_cast<std::ptrdiff_t>(k / 2);
    const auto Tl = static_cast<std::ptrdiff_t>(T);

    // Output rows [t0, t0 + n) read input rows [t0 + shift, ...) for tap j.
    struct Tap {
        std::size_t out_begin, in_begin, rows;
    };
    std::vector<Tap> taps(k);
    for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t shift = (static_cast<std::ptrdiff_t>(j) - center) *
                                     static_cast<std::ptrdiff_t>(dilation);
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(Tl, Tl - shift);
        taps[j] = hi > lo ? Tap{static_cast<std::size_t>(lo), static_cast<std::size_t>(lo + shift),
                                static_cast<std::size_t>(hi - lo)}
                          : Tap{0, 0, 0};
    }

    const Tensor& xv = t.value(x);
    const Tensor& kv = t.value(kernel);
    Tensor y(Shape{B, T, cout});
    mat(y, B * T, cout).rowwise() =
        CVecMap(t.value(bias).raw(), static_cast<Eigen::Index>(cout)).transpose();
    for (std::size_t j = 0; j < k; ++j) {
        if (taps[j].rows == 0) continue;
        const auto kj = cmat(kv, k * cin, cout).middleRows(static_cast<Eigen::Index>(j * cin),
                                                             static_cast<Eigen::Index>(cin));
        for (std::size_t b = 0; b < B; ++b) {
            auto yb = MatMap(y.raw() + (b * T + taps[j].out_begin) * cout,
                             static_cast<Eigen::Index>(taps[j].rows), static_cast<Eigen::Index>(cout));
            auto xb = CMatMap(xv.raw() + (b * T + taps[j].in_begin) * cin,
                              static_cast<Eigen::Index>(taps[j].rows), static_cast<Eigen::Index>(cin));
            yb.noalias() += xb * kj;
        }
    }
    return t.record(
        std::move(y), "conv1d", {x, kernel, bias},
        [x, kernel, bias, B, T, cin, cout, k, taps](Tape& tp, Var self) {
            const Tensor& g = tp.grad(self);
            const Tensor& xv = tp.value(x);
            const Tensor& kv = tp.value(kernel);
            const bool need_x = tp.requires_grad(x), need_k = tp.requires_grad(kernel);
            for (std::size_t j = 0; j < k; ++j) {
                if (taps[j].rows == 0) continue;
                const auto rows = static_cast<Eigen::Index>(taps[j].rows);
                const auto kj = cmat(kv, k * cin, cout).middleRows(static_cast<Eigen::Index>(j * cin),
                                                                     static_cast<Eigen::Index>(cin));
                for (std::size_t b = 0; b < B; ++b) {
                    auto gb = CMatMap(g.raw() + (b * T + taps[j].out_begin) * cout, rows,
                                      static_cast<Eigen::Index>(cout));
                    if (need_x) {
                        auto gxb = MatMap(tp.grad(x).raw() + (b * T + taps[j].in_begin) * cin, rows,
                                          static_cast<Eigen::Index>(cin));
                        gxb.noalias() += gb * kj.transpose();
                    }
                    if (need_k) {
                        auto xb = CMatMap(xv.raw() + (b * T + taps[j].in_begin) * cin, rows,
                                          static_cast<Eigen::Index>(cin));
                        mat(tp.grad(kernel), k * cin, cout)
                            .middleRows(static_cast<Eigen::Index>(j * cin), static_cast<Eigen::Index>(cin))
                            .noalias() += xb.transpose() * gb;
                    }
                }
            }
            if (tp.requires_grad(bias)) {
                VecMap(tp.grad(bias).raw(), static_cast<Eigen::Index>(cout)) +=
                    cmat(g, B * T, cout).colwise().sum().transpose();
            }
        });
}

Var stack(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw ConfigError("stack: no inputs");
    const Shape& s0 = t.shape(parts.front());
    if (s0.size() != 2) throw DimensionError("stack: expected [B x P] parts, got " + to_string(s0));
    for (Var p : parts) {
        if (t.shape(p) != s0) {
            throw DimensionError("stack: shape mismatch " + to_string(s0) + " vs " + to_string(t.shape(p)));
        }
    }
    const std::size_t B = s0[0], P = s0[1], K = parts.size();
    Tensor y(Shape{B, K, P});
    for (std::size_t k = 0; k < K; ++k) {
        const Tensor& v = t.value(parts[k]);
        for (std::size_t b = 0; b < B; ++b) {
            std::copy_n(v.raw() + b * P, P, y.raw() + (b * K + k) * P);
        }
    }
    return t.record(std::move(y), "stack", std::span<const Var>(parts),
                    [parts, B, P, K](Tape& tp, Var self) {
                        const Tensor& g = tp.grad(self);
                        for (std::size_t k = 0; k < K; ++k) {
                            if (!tp.requires_grad(parts[k])) continue;
                            Tensor& gp = tp.grad(parts[k]);
                            for (std::size_t b = 0; b < B; ++b) {
                                const double* src = g.raw() + (b * K + k) * P;
                                for (std::size_t p = 0; p < P; ++p) gp[b * P + p] += src[p];
                            }
                        }
                    });
}

Var weighted_sum(Tape& t, Var weights, Var predictions) {
    require_rank(t, weights, 2, "weighted_sum");
    require_rank(t, predictions, 3, "weighted_sum");
    const std::size_t B = t.shape(predictions)[0], K = t.shape(predictions)[1],
                      P = t.shape(predictions)[2];
    if (t.shape(weights)[0] != B || t.shape(weights)[1] != K) {
        throw DimensionError("weighted_sum: weights " + to_string(t.shape(weights)) +
                             " vs predictions " + to_string(t.shape(predictions)));
    }
    const Tensor& w = t.value(weights);
    const Tensor& yp = t.value(predictions);
    Tensor y(Shape{B, P});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t k = 0; k < K; ++k) {
            const double wk = w[b * K + k];
            for (std::size_t p = 0; p < P; ++p) y[b * P + p] += wk * yp[(b * K + k) * P + p];
        }
    }
    return t.record(std::move(y), "weighted_sum", {weights, predictions},
                    [weights, predictions, B, K, P](Tape& tp, Var self) {
                        const Tensor& g = tp.grad(self);
                        const Tensor& w = tp.value(weights);
                        const Tensor& yp = tp.value(predictions);
                        if (tp.requires_grad(weights)) {
                            Tensor& gw = tp.grad(weights);
                            for (std::size_t b = 0; b < B; ++b) {
                                for (std::size_t k = 0; k < K; ++k) {
                                    double acc = 0.0;
                                    for (std::size_t p = 0; p < P; ++p) {
                                        acc += g[b * P + p] * yp[(b * K + k) * P + p];
                                    }
                                    gw[b * K + k] += acc;
                                }
                            }
                        }
                        if (tp.requires_grad(predictions)) {
                            Tensor& gp = tp.grad(predictions);
                            for (std::size_t b = 0; b < B; ++b) {
                                for (std::size_t k = 0; k < K; ++k) {
                                    for (std::size_t p = 0; p < P; ++p) {
                                        gp[(b * K + k) * P + p] += w[b * K + k] * g[b * P + p];
                                    }
                                }
                            }
                        }
                    });
}

}  // namespace forchestra::nn
