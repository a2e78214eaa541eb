#pragma once

#include <cstdint>
#include <vector>

#include "forchestra/nn/tape.hpp"

namespace forchestra::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators for a fixed list of parameters.
/// Accumulators are allocated on the first step and then keyed by position.
struct AdamState {
    AdamConfig config;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update using each parameter's current gradient.
void adam_step(const std::vector<Parameter*>& params, AdamState& state);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

}  // namespace forchestra::nn
