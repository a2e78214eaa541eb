#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forchestra/model/base_predictor.hpp"
#include "forchestra/model/pretrain_bp.hpp"
#include "forchestra/model/representation.hpp"

namespace forchestra::model {

/// Which representation feeds the meta learner: the anchor's r_t or the
/// max over the window.
enum class MetaInput { last, pooled };
std::string to_string(MetaInput m);
MetaInput meta_input_from_string(const std::string& s);

struct ForchestraConfig {
    std::size_t K = 5;
    BasePredictorConfig bp;
    RepresentationConfig rep;
    MetaInput meta_input = MetaInput::last;

    void validate() const;
};

nlohmann::json to_json(const ForchestraConfig& c);
ForchestraConfig forchestra_config_from_json(const nlohmann::json& doc);

/// Linear D -> K head producing importance logits.
struct MetaLearner {
    nn::LinearLayer linear;

    static MetaLearner create(std::size_t D, std::size_t K, std::uint64_t seed, const std::string& prefix = "ml.");
    std::vector<nn::Parameter*> parameters() { return {&linear.weight, &linear.bias}; }
};

/// softmax(h(r)) per row: [B x D] -> [B x K].
nn::Var weigh(nn::Tape& tape, MetaLearner& ml, nn::Var representation);
nn::Tensor weigh(MetaLearner& ml, const nn::Tensor& representation);

struct ForchestraModel {
    ForchestraConfig config;
    std::vector<BasePredictor> bps;
    RepresentationModule rm;
    MetaLearner ml;

    /// Fresh, independently initialised components.
    static ForchestraModel create(const ForchestraConfig& config, std::uint64_t seed);

    struct Output {
        nn::Var prediction;  // [B x P], scaled
        nn::Var weights;     // [B x K]
        nn::Var bp_outputs;  // [B x K x P]
    };
    Output forward(nn::Tape& tape, nn::Var context, nn::Var rep_context);

    std::vector<nn::Parameter*> bp_parameters();
    std::vector<nn::Parameter*> rm_parameters() { return rm.parameters(); }
    std::vector<nn::Parameter*> ml_parameters() { return ml.parameters(); }
    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
};

struct ForecastResult {
    nn::Tensor prediction;  // [B x P]
    nn::Tensor weights;     // [B x K]
    nn::Tensor bp_outputs;  // [B x K x P]
};

ForecastResult forecast(ForchestraModel& model, const nn::Tensor& context, const nn::Tensor& rep_context);

/// Scaled batch predictions of the whole model.
eval::BatchPredictor forchestra_predictor(ForchestraModel& model);

std::size_t count_parameters(const ForchestraModel& model);
std::size_t count_parameters(const ForchestraConfig& config);

struct TrainConfig {
    OptimConfig optim;
    bool freeze_representation = false;
    bool freeze_bps = false;
    bool pretrained_nc = false;   // informational: recorded in the manifest
    bool pretrained_bps = false;  // informational: recorded in the manifest
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& doc);

/// Joint end-to-end training on the L1 objective. Frozen components are
/// excluded from the optimiser; the best validation checkpoint is kept.
TrainResult train_forchestra(ForchestraModel& model, const data::Dataset& dataset, const data::WindowSet& windows,
                             const TrainConfig& config, const ValidationSet* validation = nullptr);

nlohmann::json forchestra_checkpoint(const ForchestraModel& model);
ForchestraModel forchestra_from_checkpoint(const nlohmann::json& doc);

}  // namespace forchestra::model
