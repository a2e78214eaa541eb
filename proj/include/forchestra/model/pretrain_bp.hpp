#pragma once

#include <cstdint>
#include <optional>

#include "forchestra/eval/evaluate.hpp"
#include "forchestra/model/base_predictor.hpp"
#include "forchestra/model/trainer.hpp"

namespace forchestra::model {

/// Instances and region scored for checkpoint selection (mean masked MASE).
struct ValidationSet {
    const data::Dataset* dataset = nullptr;
    std::vector<std::size_t> instances;
    data::TimeRange region;
    eval::EvalFilters filters{0};

    std::optional<double> score(const eval::BatchPredictor& predict) const;
};

/// Scaled batch predictions of a lone predictor.
eval::BatchPredictor bp_predictor(BasePredictor& bp);

struct BpTrainResult {
    BasePredictor bp;
    TrainResult training;
};

/// Trains one freshly initialised predictor on the L1 objective.
BpTrainResult pretrain_bp(const BasePredictorConfig& config, const data::Dataset& dataset,
                          const data::WindowSet& windows, const OptimConfig& optim, std::uint64_t seed,
                          const ValidationSet* validation = nullptr);

/// Continues training an existing predictor in place.
TrainResult fit_bp(BasePredictor& bp, const data::Dataset& dataset, const data::WindowSet& windows,
                   const OptimConfig& optim, std::uint64_t seed, const ValidationSet* validation = nullptr);

}  // namespace forchestra::model
