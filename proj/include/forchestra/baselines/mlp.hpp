#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "forchestra/model/pretrain_bp.hpp"
#include "forchestra/nn/layers.hpp"

namespace forchestra::baselines {

struct MlpConfig {
    std::size_t num_layers = 1;  // hidden layers after the input layer
    std::size_t hidden_size = 512;
    std::size_t input_dim = 2;
    std::size_t context_length = 28;
    std::size_t prediction_length = 7;

    void validate() const;
};

nlohmann::json to_json(const MlpConfig& c);
MlpConfig mlp_config_from_json(const nlohmann::json& doc);

/// Flattened context -> hidden, num_layers further hidden layers, -> P.
/// ReLU after every hidden layer.
struct Mlp {
    MlpConfig config;
    std::vector<nn::LinearLayer> layers;  // input, hidden..., output

    static Mlp create(const MlpConfig& config, std::uint64_t seed);
    /// [B x C x input_dim] -> [B x P]
    nn::Var forward(nn::Tape& tape, nn::Var context);
    std::vector<nn::Parameter*> parameters();
};

eval::BatchPredictor mlp_predictor(Mlp& mlp);

struct MlpTrainResult {
    Mlp mlp;
    model::TrainResult training;
};

MlpTrainResult train_mlp(const MlpConfig& config, const data::Dataset& dataset, const data::WindowSet& windows,
                         const model::OptimConfig& optim, std::uint64_t seed,
                         const model::ValidationSet* validation = nullptr);

}  // namespace forchestra::baselines
