#pragma once

#include <cstdint>
#include <span>

#include <json.hpp>

#include "forchestra/model/representation.hpp"
#include "forchestra/model/trainer.hpp"
#include "forchestra/ssl/augment.hpp"
#include "forchestra/ssl/contrastive.hpp"

namespace forchestra::ssl {

struct NcPretrainConfig {
    AugmentationConfig augmentation;
    HierarchyOptions hierarchy;
    model::OptimConfig optim;
    std::size_t stride = 1;  // between window anchors
};

nlohmann::json to_json(const NcPretrainConfig& c);
NcPretrainConfig nc_pretrain_config_from_json(const nlohmann::json& doc);

/// Two cropped and masked views of `rep_context` [B x W x input_dim] encoded
/// by `rm`, contrasted on their overlap. Crop offsets are shared by the batch.
nn::Var contrastive_loss(nn::Tape& tape, model::RepresentationModule& rm, const nn::Tensor& rep_context,
                         const AugmentationConfig& augmentation, const HierarchyOptions& hierarchy, nn::Rng& rng);

struct NcPretrainResult {
    model::TrainResult training;
};

/// Adam on the hierarchical contrastive loss over windows of `instances`
/// inside `region`. Throws ConfigError when the representation window is
/// shorter than 2 x min_overlap or no window fits.
NcPretrainResult pretrain_nc(model::RepresentationModule& rm, const data::Dataset& dataset,
                             std::span<const std::size_t> instances, data::TimeRange region,
                             const NcPretrainConfig& config, std::uint64_t seed);

}  // namespace forchestra::ssl
