#include "forchestra/ssl/contrastive.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <optional>

#include "forchestra/error.hpp"
#include "forchestra/nn/ops.hpp"

namespace forchestra::ssl {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Members n of group g live at offset(g, n) * D. Temporal contrast groups by
// instance over time; instance contrast groups by timestep over the batch.
struct Layout {
    std::size_t groups = 0;
    std::size_t members = 0;
    std::size_t D = 0;
    std::size_t g_stride = 0;
    std::size_t n_stride = 0;

    std::size_t offset(std::size_t g, std::size_t n) const { return (g * g_stride + n * n_stride) * D; }
};

RowMat gather(const nn::Tensor& x, const Layout& l, std::size_t g) {
    RowMat m(static_cast<Eigen::Index>(l.members), static_cast<Eigen::Index>(l.D));
    for (std::size_t n = 0; n < l.members; ++n) {
        const double* src = x.raw() + l.offset(g, n);
        for (std::size_t d = 0; d < l.D; ++d) m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)) = src[d];
    }
    return m;
}

void scatter_add(nn::Tensor& x, const Layout& l, std::size_t g, const RowMat& m) {
    for (std::size_t n = 0; n < l.members; ++n) {
        double* dst = x.raw() + l.offset(g, n);
        for (std::size_t d = 0; d < l.D; ++d) dst[d] += m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    }
}

// Softmax weights of every candidate per anchor row, kept for the backward pass.
struct GroupState {
    RowMat p_cross;  // against the other view, [N x N]
    RowMat p_self;   // against the same view, zero diagonal
};

double contrast_group(const RowMat& a, const RowMat& a2, GroupState* state) {
    const Eigen::Index N = a.rows();
    const RowMat cross = a * a2.transpose();
    const RowMat self = a * a.transpose();
    double total = 0.0;
    if (state) {
        state->p_cross.resize(N, N);
        state->p_self.resize(N, N);
    }
    for (Eigen::Index n = 0; n < N; ++n) {
        double mx = cross.row(n).maxCoeff();
        for (Eigen::Index m = 0; m < N; ++m) {
            if (m != n) mx = std::max(mx, self(n, m));
        }
        double s = 0.0;
        for (Eigen::Index m = 0; m < N; ++m) {
            s += std::exp(cross(n, m) - mx);
            if (m != n) s += std::exp(self(n, m) - mx);
        }
        const double lse = mx + std::log(s);
        total += lse - cross(n, n);
        if (state) {
            for (Eigen::Index m = 0; m < N; ++m) {
                state->p_cross(n, m) = std::exp(cross(n, m) - lse);
                state->p_self(n, m) = m == n ? 0.0 : std::exp(self(n, m) - lse);
            }
        }
    }
    return total;
}

nn::Var contrast(nn::Tape& tape, nn::Var r, nn::Var r2, bool over_time, const char* name) {
    const nn::Shape& s = tape.shape(r);
    if (s.size() != 3) throw DimensionError(std::string(name) + ": expected [B x T x D], got " + nn::to_string(s));
    if (s != tape.shape(r2)) {
        throw DimensionError(std::string(name) + ": views differ, " + nn::to_string(s) + " vs " +
                             nn::to_string(tape.shape(r2)));
    }
    const std::size_t B = s[0], T = s[1], D = s[2];
    if (B == 0 || T == 0) throw DimensionError(std::string(name) + ": empty batch or time axis");
    Layout l;
    l.D = D;
    if (over_time) {
        l.groups = B, l.members = T, l.g_stride = T, l.n_stride = 1;
    } else {
        l.groups = T, l.members = B, l.g_stride = 1, l.n_stride = T;
    }
    const nn::Tensor& rv = tape.value(r);
    const nn::Tensor& r2v = tape.value(r2);
    const bool keep = tape.grad_enabled() && (tape.requires_grad(r) || tape.requires_grad(r2));
    auto states = std::make_shared<std::vector<GroupState>>(keep ? l.groups : 0);
    double total = 0.0;
    for (std::size_t g = 0; g < l.groups; ++g) {
        total += contrast_group(gather(rv, l, g), gather(r2v, l, g), keep ? &(*states)[g] : nullptr);
    }
    const double count = static_cast<double>(l.groups * l.members);
    return tape.record(nn::Tensor::scalar(total / count), name, {r, r2}, [r, r2, l, states, count](nn::Tape& tp, nn::Var self) {
        const double c = tp.grad(self)[0] / count;
        const auto N = static_cast<Eigen::Index>(l.members);
        for (std::size_t g = 0; g < l.groups; ++g) {
            const GroupState& st = (*states)[g];
            const RowMat a = gather(tp.value(r), l, g);
            const RowMat a2 = gather(tp.value(r2), l, g);
            const RowMat pc = st.p_cross - RowMat::Identity(N, N);
            if (tp.requires_grad(r)) {
                const RowMat ga = c * (pc * a2 + (st.p_self + st.p_self.transpose()) * a);
                scatter_add(tp.grad(r), l, g, ga);
            }
            if (tp.requires_grad(r2)) {
                const RowMat ga2 = c * (pc.transpose() * a);
                scatter_add(tp.grad(r2), l, g, ga2);
            }
        }
    });
}

template <class F>
double evaluate(F f, const nn::Tensor& r, const nn::Tensor& r2) {
    nn::Tape tape(false);
    return tape.value(f(tape, tape.constant(r), tape.constant(r2))).item();
}

}  // namespace

nn::Var temporal_loss(nn::Tape& tape, nn::Var r, nn::Var r2) { return contrast(tape, r, r2, true, "temporal_loss"); }

nn::Var instance_loss(nn::Tape& tape, nn::Var r, nn::Var r2) { return contrast(tape, r, r2, false, "instance_loss"); }

std::vector<std::size_t> level_lengths(std::size_t T, const HierarchyOptions& options) {
    if (T == 0) throw DimensionError("level_lengths: empty time axis");
    std::vector<std::size_t> out;
    std::size_t len = T;
    for (std::size_t p = 0; (std::size_t{1} << p) <= T; ++p) {
        if (p > 0 || options.include_level0) out.push_back(len);
        len = (len + 1) / 2;
    }
    return out;
}

nn::Var hierarchical_loss(nn::Tape& tape, nn::Var r, nn::Var r2, const HierarchyOptions& options) {
    const nn::Shape s = tape.shape(r);  // the tape grows below
    if (s.size() != 3) throw DimensionError("hierarchical_loss: expected [B x T x D], got " + nn::to_string(s));
    const std::size_t levels = level_lengths(s[1], options).size();
    if (levels == 0) return tape.constant(nn::Tensor::scalar(0.0));
    std::optional<nn::Var> total;
    for (std::size_t p = 0; (std::size_t{1} << p) <= s[1]; ++p) {
        if (p > 0) {
            r = nn::max_pool_time(tape, r, 2);
            r2 = nn::max_pool_time(tape, r2, 2);
        }
        if (p == 0 && !options.include_level0) continue;
        const nn::Var level = nn::add(tape, temporal_loss(tape, r, r2), instance_loss(tape, r, r2));
        total = total ? nn::add(tape, *total, level) : level;
    }
    return nn::scale(tape, *total, 1.0 / (2.0 * static_cast<double>(levels)));
}

double temporal_loss(const nn::Tensor& r, const nn::Tensor& r2) {
    return evaluate([](nn::Tape& t, nn::Var a, nn::Var b) { return temporal_loss(t, a, b); }, r, r2);
}

double instance_loss(const nn::Tensor& r, const nn::Tensor& r2) {
    return evaluate([](nn::Tape& t, nn::Var a, nn::Var b) { return instance_loss(t, a, b); }, r, r2);
}

double hierarchical_loss(const nn::Tensor& r, const nn::Tensor& r2, const HierarchyOptions& options) {
    return evaluate([&](nn::Tape& t, nn::Var a, nn::Var b) { return hierarchical_loss(t, a, b, options); }, r, r2);
}

}  // namespace forchestra::ssl
