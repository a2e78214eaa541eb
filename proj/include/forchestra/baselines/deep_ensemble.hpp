#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "forchestra/model/pretrain_bp.hpp"

namespace forchestra::baselines {

struct DeepEnsemble {
    std::vector<model::BasePredictor> members;
    std::vector<model::TrainResult> training;
};

/// One pretrain_bp run per seed. A diverging member raises TrainingError
/// naming its seed.
DeepEnsemble deep_ensembles(const model::BasePredictorConfig& config, const data::Dataset& dataset,
                            const data::WindowSet& windows, const model::OptimConfig& optim,
                            std::span<const std::uint64_t> seeds, const model::ValidationSet* validation = nullptr,
                            std::size_t jobs = 1);

/// Unweighted mean of member predictions.
eval::BatchPredictor ensemble_predictor(DeepEnsemble& ensemble);

}  // namespace forchestra::baselines
