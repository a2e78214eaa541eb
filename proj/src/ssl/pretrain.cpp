#include "forchestra/ssl/pretrain.hpp"

#include "forchestra/error.hpp"
#include "forchestra/nn/ops.hpp"

namespace forchestra::ssl {

nlohmann::json to_json(const NcPretrainConfig& c) {
    return {{"augmentation", to_json(c.augmentation)},
            {"include_level0", c.hierarchy.include_level0},
            {"optim", model::to_json(c.optim)},
            {"stride", c.stride}};
}

NcPretrainConfig nc_pretrain_config_from_json(const nlohmann::json& doc) {
    NcPretrainConfig c;
    try {
        if (doc.contains("augmentation")) c.augmentation = augmentation_config_from_json(doc.at("augmentation"));
        if (doc.contains("optim")) c.optim = model::optim_config_from_json(doc.at("optim"));
        c.hierarchy.include_level0 = doc.value("include_level0", c.hierarchy.include_level0);
        c.stride = doc.value("stride", c.stride);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("pre-training config: ") + e.what());
    }
    if (c.stride == 0) throw ConfigError("stride must be >= 1");
    return c;
}

nn::Var contrastive_loss(nn::Tape& tape, model::RepresentationModule& rm, const nn::Tensor& rep_context,
                         const AugmentationConfig& aug, const HierarchyOptions& hierarchy, nn::Rng& rng) {
    if (rep_context.rank() != 3) {
        throw DimensionError("contrastive_loss: expected [B x W x input_dim], got " + nn::to_string(rep_context.shape()));
    }
    const auto crops = crop_pair(rep_context.dim(1), aug, rng);
    if (!crops) {
        throw ConfigError("window of " + std::to_string(rep_context.dim(1)) + " days is shorter than twice the minimum overlap");
    }
    const nn::Var x = tape.constant(rep_context);
    auto view = [&](data::TimeRange crop) {
        nn::Var h = rm.project(tape, nn::slice_time(tape, x, crop.begin, crop.size()));
        h = mask_timesteps(tape, h, aug.mask_probability, rng);
        const nn::Var r = rm.encode_projected(tape, h);
        return nn::slice_time(tape, r, crops->overlap.begin - crop.begin, crops->overlap.size());
    };
    const nn::Var r = view(crops->first);
    const nn::Var r2 = view(crops->second);
    return hierarchical_loss(tape, r, r2, hierarchy);
}

NcPretrainResult pretrain_nc(model::RepresentationModule& rm, const data::Dataset& ds,
                             std::span<const std::size_t> instances, data::TimeRange region,
                             const NcPretrainConfig& cfg, std::uint64_t seed) {
    cfg.augmentation.validate();
    if (ds.size() == 0 || instances.empty()) throw ConfigError("pre-training needs at least one instance");
    if (rm.config.window < 2 * cfg.augmentation.min_overlap) {
        throw ConfigError("representation window " + std::to_string(rm.config.window) +
                          " is shorter than twice the minimum overlap");
    }
    if (ds.shape.representation_window != rm.config.window) {
        throw ConfigError("dataset representation window differs from the module's");
    }
    const data::WindowSet windows = data::make_windows(ds, instances, region, cfg.stride);
    if (windows.empty()) throw ConfigError("no pre-training window fits the region");
    auto params = rm.parameters();
    NcPretrainResult out;
    out.training = model::train_loop(
        ds, windows,
        [&](nn::Tape& tape, const data::Batch& batch, std::uint64_t batch_seed) {
            nn::Rng rng(batch_seed);
            return contrastive_loss(tape, rm, batch.rep_context, cfg.augmentation, cfg.hierarchy, rng);
        },
        params, params, cfg.optim, seed, {}, false);
    return out;
}

}  // namespace forchestra::ssl
