#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "forchestra/data/dataset.hpp"

namespace forchestra::data {

/// Shape of one regime's mean curve:
/// level + trend * (t - (T-1)/2) + amplitude * sin(2 pi (t + phase) / 7)
struct RegimeParams {
    double level = 5.0;
    double amplitude = 0.0;
    double phase = 0.0;  // days
    double trend = 0.0;  // per day
};

struct SyntheticSpec {
    std::size_t n_instances = 200;
    std::size_t n_days = 400;
    std::size_t n_regimes = 4;
    double noise_level = 1.0;
    std::uint64_t seed = 0;
    double non_sale_fraction = 0.1;  // upper bound on non_sale days per instance
    std::vector<RegimeParams> regimes;  // empty: drawn from the seed
};

/// Distinct regimes: stratified levels, amplitude ratios, phases and trends.
std::vector<RegimeParams> draw_regimes(std::size_t n_regimes, std::size_t n_days, std::uint64_t seed);

/// Instance i belongs to regime i mod n_regimes, recorded in metadata
/// under "regime". Pure function of (spec, shape).
Dataset generate_synthetic(const SyntheticSpec& spec, WindowShape shape = {});

nlohmann::json to_json(const SyntheticSpec& spec);
/// Missing keys keep their defaults. Throws ConfigError on bad values.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc);

}  // namespace forchestra::data
