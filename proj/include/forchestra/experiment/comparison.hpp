#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forchestra/data/split.hpp"
#include "forchestra/eval/evaluate.hpp"
#include "forchestra/model/forchestra.hpp"
#include "forchestra/ssl/pretrain.hpp"

namespace forchestra::experiment {

/// One desk-scale comparison of Forchestra against its baselines.
struct ComparisonConfig {
    data::SplitSpec split;
    model::ForchestraConfig model;
    model::OptimConfig bp_optim;     // every stand-alone predictor, pool members included
    ssl::NcPretrainConfig nc;        // representation pre-training
    model::OptimConfig train_optim;  // joint training
    double perturbation = 1e-3;
    std::size_t pool_size = 5;       // independently trained predictors for Top-K
    bool pretrain_nc = true;
    bool pretrain_bps = true;
    bool freeze_representation = false;
    bool freeze_bps = false;
    eval::EvalFilters filters{7};
    std::size_t jobs = 1;
};

nlohmann::json to_json(const ComparisonConfig& c);
/// Missing keys keep their defaults.
ComparisonConfig comparison_config_from_json(const nlohmann::json& doc);

struct ComparisonResult {
    std::uint64_t seed = 0;
    std::size_t sma_look_back = 0;
    double sma = 0.0;              // test MASE on training instances
    double single_bp = 0.0;        // the first pool member on its own
    double best_top_k = 0.0;       // lowest test MASE over the Top-K rows
    std::string best_top_k_label;
    double forchestra = 0.0;
    std::optional<double> forchestra_holdout;
    std::optional<double> sma_holdout;
    model::TrainResult forchestra_training;
    std::shared_ptr<model::ForchestraModel> trained;  // the scored Forchestra model
    double seconds = 0.0;
};

nlohmann::json to_json(const ComparisonResult& r);

/// Split used by every stage of a run with this seed.
data::Split make_split(const data::Dataset& dataset, const ComparisonConfig& config, std::uint64_t seed);
/// Training windows and validation scorer over the split's training instances.
data::WindowSet training_windows(const data::Dataset& dataset, const data::Split& split);
model::ValidationSet validation_set(const data::Dataset& dataset, const data::Split& split);

/// Seed of the j-th independently trained predictor; member 0 initialises Forchestra.
std::uint64_t pool_seed(std::uint64_t seed, std::size_t member);

/// The representation module Forchestra starts from, pre-trained on the
/// training region.
model::RepresentationModule pretrained_representation(const data::Dataset& dataset, const ComparisonConfig& config,
                                                      const data::Split& split, std::uint64_t seed);

/// Fresh model with K experts; `bp` and `rm`, when given, replace the random
/// experts (spawned with perturbation) and representation module. Throws
/// ConfigError when their configuration differs from the model's.
model::ForchestraModel initial_model(const ComparisonConfig& config, std::size_t K, const model::BasePredictor* bp,
                                     const model::RepresentationModule* rm, std::uint64_t seed);

/// Joint training with the configured freeze flags and best-validation selection.
model::TrainResult train_model(model::ForchestraModel& model, const data::Dataset& dataset,
                               const ComparisonConfig& config, const data::Split& split, std::uint64_t seed);

/// Trains the predictor pool, pre-trains the representation module, trains
/// Forchestra from the first pool member and scores everything on the test
/// region. Pure function of (dataset, config, seed) when jobs is 1.
ComparisonResult run_comparison(const data::Dataset& dataset, const ComparisonConfig& config, std::uint64_t seed);

/// Test MASE of a Forchestra model trained with `K` experts, everything else
/// as in run_comparison.
double scaling_point(const data::Dataset& dataset, const ComparisonConfig& config, std::size_t K,
                     std::uint64_t seed);

double median(std::vector<double> values);

}  // namespace forchestra::experiment
