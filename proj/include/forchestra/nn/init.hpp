#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "forchestra/nn/tape.hpp"

namespace forchestra::nn {

using Rng = std::mt19937_64;

/// Uniform(-bound, bound) entries.
Tensor uniform(Shape shape, double bound, Rng& rng);

/// Weight initialised uniformly in +-1/sqrt(fan_in).
Parameter make_weight(std::string name, Shape shape, std::size_t fan_in, Rng& rng);
Parameter make_bias(std::string name, std::size_t size);

/// Adds independent Uniform(-scale, scale) noise to every entry.
void perturb(Parameter& p, double scale, Rng& rng);

/// Derives an independent stream seed from a base seed and a tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace forchestra::nn
