#pragma once

#include <vector>

#include "forchestra/nn/tape.hpp"

namespace forchestra::ssl {

/// Contrast across time within each instance. r and r2 are the two views,
/// [B x T x D], over the same overlapping days. Each anchor r[i,t] is scored
/// against r2[i,t'] for every t' and r[i,t'] for t' != t, with r2[i,t] as the
/// positive. Mean over (i, t) of the negative log-probability.
nn::Var temporal_loss(nn::Tape& tape, nn::Var r, nn::Var r2);

/// Same construction across the batch at each timestep.
nn::Var instance_loss(nn::Tape& tape, nn::Var r, nn::Var r2);

struct HierarchyOptions {
    bool include_level0 = true;  // score the unpooled sequence too
};

/// Time lengths of the scored levels: ceil(T / 2^p) for p = 0..floor(log2 T),
/// dropping p = 0 when excluded.
std::vector<std::size_t> level_lengths(std::size_t T, const HierarchyOptions& options = {});

/// Sum of (temporal + instance) over the levels of repeated width-2 max
/// pooling, divided by 2 x the number of levels. Zero when no level remains.
nn::Var hierarchical_loss(nn::Tape& tape, nn::Var r, nn::Var r2, const HierarchyOptions& options = {});

double temporal_loss(const nn::Tensor& r, const nn::Tensor& r2);
double instance_loss(const nn::Tensor& r, const nn::Tensor& r2);
double hierarchical_loss(const nn::Tensor& r, const nn::Tensor& r2, const HierarchyOptions& options = {});

}  // namespace forchestra::ssl
