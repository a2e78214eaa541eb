#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "forchestra/data/split.hpp"
#include "forchestra/nn/init.hpp"
#include "forchestra/nn/tape.hpp"

namespace forchestra::ssl {

struct AugmentationConfig {
    double mask_probability = 0.5;  // per timestep, on the projected embedding
    std::size_t min_overlap = 8;
    std::size_t max_overlap = 0;    // 0: the window length

    void validate() const;
    bool operator==(const AugmentationConfig&) const = default;
};

nlohmann::json to_json(const AugmentationConfig& c);
AugmentationConfig augmentation_config_from_json(const nlohmann::json& doc);

/// Two half-open crops of a window and their shared span.
struct CropPair {
    data::TimeRange first;
    data::TimeRange second;
    data::TimeRange overlap;  // first ∩ second
};

/// Overlap length is drawn from [min_overlap, max_overlap]; each crop then
/// extends the overlap by a random amount on one side only, first to the
/// left and second to the right. nullopt when the window is shorter than
/// 2 x min_overlap.
std::optional<CropPair> crop_pair(std::size_t window_length, const AugmentationConfig& config, nn::Rng& rng);

/// keep[b * T + t] is 0 with the given probability, independently.
std::vector<std::uint8_t> draw_keep_mask(std::size_t B, std::size_t T, double probability, nn::Rng& rng);

/// Zeroes whole [b, t, :] vectors with the given probability.
nn::Var mask_timesteps(nn::Tape& tape, nn::Var projected, double probability, nn::Rng& rng);
nn::Tensor mask_timesteps(const nn::Tensor& projected, double probability, std::uint64_t seed);

}  // namespace forchestra::ssl
