#pragma once

#include <vector>

#include "forchestra/data/split.hpp"
#include "forchestra/data/synthetic.hpp"
#include "forchestra/nn/init.hpp"

namespace forchestra::testing {

/// Small synthetic dataset with a split and stride-1 training windows.
struct SmallProblem {
    data::Dataset dataset;
    data::Split split;
    data::WindowSet windows;
};

inline SmallProblem small_problem(std::size_t n_instances = 12, std::size_t n_days = 120, std::uint64_t seed = 3,
                                  data::WindowShape shape = {7, 14, 21}, std::size_t regimes = 2) {
    data::SyntheticSpec spec;
    spec.n_instances = n_instances;
    spec.n_days = n_days;
    spec.n_regimes = regimes;
    spec.seed = seed;
    SmallProblem p;
    p.dataset = data::generate_synthetic(spec, shape);
    data::SplitSpec ss;
    ss.test_days = 14;
    ss.validation_days = 14;
    ss.holdout_fraction = 0.0;
    p.split = data::split(p.dataset, ss, seed);
    p.windows = data::make_windows(p.dataset, p.split.train_instances, p.split.train, 1);
    return p;
}

inline nn::Tensor random_tensor(nn::Shape shape, std::uint64_t seed, double bound = 1.0) {
    nn::Rng rng(seed);
    return nn::uniform(std::move(shape), bound, rng);
}

inline bool same_values(const std::vector<nn::Parameter*>& a, const std::vector<nn::Parameter*>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i]->value == b[i]->value)) return false;
    }
    return true;
}

}  // namespace forchestra::testing
