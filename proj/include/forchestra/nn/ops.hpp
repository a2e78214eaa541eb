#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "forchestra/nn/tape.hpp"

namespace forchestra::nn {

// Elementwise ops require equal shapes; there is no broadcasting.
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double factor);
Var square(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
/// Exact (erf) GELU.
Var gelu(Tape& t, Var a);

/// Scalar reductions.
Var sum(Tape& t, Var a);
Var mean(Tape& t, Var a);

Var reshape(Tape& t, Var a, Shape shape);

/// [M x K] . [K x N]
Var matmul(Tape& t, Var a, Var b);

/// y = x W + b over the last axis of x. x is [..., in], W is [in x out], b is [out].
Var linear(Tape& t, Var x, Var weight, Var bias);

/// Softmax over the last axis with max subtraction.
Var softmax(Tape& t, Var logits);
std::vector<double> softmax(std::span<const double> logits);

/// Mean absolute difference over all elements; subgradient 0 at ties.
Var l1_loss(Tape& t, Var prediction, Var target);

/// Sum of mask-weighted absolute differences divided by the mask sum
/// (0 when the mask is all zero). The mask is a constant.
Var masked_l1_loss(Tape& t, Var prediction, Var target, std::span<const double> mask);

/// [B x T x D] -> [B x D], the final timestep.
Var last_timestep(Tape& t, Var x);

/// [B x T x D] -> [B x length x D] starting at `begin`.
Var slice_time(Tape& t, Var x, std::size_t begin, std::size_t length);

/// Zeroes x[b, t, :] wherever keep[b * T + t] == 0.
Var mask_time(Tape& t, Var x, std::span<const std::uint8_t> keep);

/// Max over non-overlapping windows along the time axis of a [T x D] or
/// [B x T x D] tensor. The trailing partial window is pooled as-is.
/// std::nullopt pools the whole axis to length 1. Gradient goes to the
/// first maximal element of each window.
Var max_pool_time(Tape& t, Var x, std::optional<std::size_t> window);

/// One LSTM layer over [B x T x in] with zero initial state.
/// w_ih: [in x 4H], w_hh: [H x 4H], bias: [4H]; gate blocks ordered i, f, g, o.
/// Returns the hidden sequence [B x T x H].
Var lstm(Tape& t, Var x, Var w_ih, Var w_hh, Var bias);

/// Same-length, zero-padded, non-causal dilated 1-D convolution.
/// x: [B x T x Cin], kernel: [k x Cin x Cout] with k odd, bias: [Cout].
Var conv1d(Tape& t, Var x, Var kernel, Var bias, std::size_t dilation);

/// K tensors of shape [B x P] -> [B x K x P].
Var stack(Tape& t, const std::vector<Var>& parts);

/// out[b, p] = sum_k weights[b, k] * predictions[b, k, p]
Var weighted_sum(Tape& t, Var weights, Var predictions);

}  // namespace forchestra::nn
