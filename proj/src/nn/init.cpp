#include "forchestra/nn/init.hpp"

#include <cmath>

namespace forchestra::nn {

Tensor uniform(Shape shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

Parameter make_weight(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
    return Parameter(std::move(name), uniform(std::move(shape), bound, rng));
}

Parameter make_bias(std::string name, std::size_t size) {
    return Parameter(std::move(name), Tensor(Shape{size}));
}

void perturb(Parameter& p, double scale, Rng& rng) {
    if (scale <= 0) return;
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& v : p.value.data()) v += dist(rng);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    // splitmix64 finaliser over the combined words
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace forchestra::nn
