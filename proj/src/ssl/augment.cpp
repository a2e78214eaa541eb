#include "forchestra/ssl/augment.hpp"

#include <algorithm>

#include "forchestra/error.hpp"
#include "forchestra/nn/ops.hpp"

namespace forchestra::ssl {

void AugmentationConfig::validate() const {
    if (!(mask_probability >= 0.0 && mask_probability <= 1.0)) {
        throw ConfigError("mask_probability must lie in [0, 1]");
    }
    if (min_overlap == 0) throw ConfigError("min_overlap must be >= 1");
    if (max_overlap != 0 && max_overlap < min_overlap) throw ConfigError("max_overlap must be >= min_overlap");
}

nlohmann::json to_json(const AugmentationConfig& c) {
    return {{"mask_probability", c.mask_probability}, {"min_overlap", c.min_overlap}, {"max_overlap", c.max_overlap}};
}

AugmentationConfig augmentation_config_from_json(const nlohmann::json& doc) {
    AugmentationConfig c;
    try {
        c.mask_probability = doc.value("mask_probability", c.mask_probability);
        c.min_overlap = doc.value("min_overlap", c.min_overlap);
        c.max_overlap = doc.value("max_overlap", c.max_overlap);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("augmentation config: ") + e.what());
    }
    c.validate();
    return c;
}

std::optional<CropPair> crop_pair(std::size_t L, const AugmentationConfig& cfg, nn::Rng& rng) {
    cfg.validate();
    if (L < 2 * cfg.min_overlap) return std::nullopt;
    const std::size_t hi = cfg.max_overlap == 0 ? L : std::min(cfg.max_overlap, L);
    auto uniform = [&](std::size_t a, std::size_t b) { return std::uniform_int_distribution<std::size_t>(a, b)(rng); };
    const std::size_t len = uniform(cfg.min_overlap, hi);
    const std::size_t left = uniform(0, L - len);
    const std::size_t right = left + len;
    const std::size_t ext_left = uniform(0, left);
    const std::size_t ext_right = uniform(right, L);
    return CropPair{{ext_left, right}, {left, ext_right}, {left, right}};
}

std::vector<std::uint8_t> draw_keep_mask(std::size_t B, std::size_t T, double probability, nn::Rng& rng) {
    if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("mask probability must lie in [0, 1]");
    std::bernoulli_distribution drop(probability);
    std::vector<std::uint8_t> keep(B * T);
    for (auto& k : keep) k = drop(rng) ? 0 : 1;
    return keep;
}

nn::Var mask_timesteps(nn::Tape& tape, nn::Var projected, double probability, nn::Rng& rng) {
    const nn::Shape& s = tape.shape(projected);
    if (s.size() != 3) throw DimensionError("mask_timesteps: expected [B x T x D], got " + nn::to_string(s));
    const auto keep = draw_keep_mask(s[0], s[1], probability, rng);
    return nn::mask_time(tape, projected, keep);
}

nn::Tensor mask_timesteps(const nn::Tensor& projected, double probability, std::uint64_t seed) {
    nn::Rng rng(seed);
    nn::Tape tape(false);
    return tape.value(mask_timesteps(tape, tape.constant(projected), probability, rng));
}

}  // namespace forchestra::ssl
