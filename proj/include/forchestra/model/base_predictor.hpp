#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "forchestra/nn/layers.hpp"

namespace forchestra::model {

struct BasePredictorConfig {
    std::size_t num_layers = 4;
    std::size_t hidden_size = 32;
    std::size_t input_dim = 2;  // sales + availability (+ extra features)
    std::size_t prediction_length = 7;
    std::size_t context_length = 28;

    void validate() const;
    bool operator==(const BasePredictorConfig&) const = default;
};

nlohmann::json to_json(const BasePredictorConfig& c);
BasePredictorConfig bp_config_from_json(const nlohmann::json& doc);

/// LSTM stack over the context followed by a linear head on the final
/// hidden state.
struct BasePredictor {
    BasePredictorConfig config;
    std::vector<nn::LstmLayer> layers;
    nn::LinearLayer head;
    std::size_t index = 0;

    /// Parameters are named "<prefix>lstm<l>.w_ih", ..., "<prefix>head.bias".
    static BasePredictor create(const BasePredictorConfig& config, std::uint64_t seed, std::string prefix = "bp.");

    /// [B x C x input_dim] -> [B x P]. Throws DimensionError on a shape mismatch.
    nn::Var forward(nn::Tape& tape, nn::Var context);

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    /// Renames every parameter to the given prefix.
    void set_prefix(const std::string& prefix);

    static std::size_t parameter_count(const BasePredictorConfig& config);
};

/// Tape-free inference, [B x C x input_dim] -> [B x P].
nn::Tensor predict(BasePredictor& bp, const nn::Tensor& context);

/// [B x K x P]; row k equals predict(bps[k], context). Throws ConfigError when empty.
nn::Tensor joint_predict(std::vector<BasePredictor>& bps, const nn::Tensor& context);

/// K copies of `pretrained`, each perturbed with independent
/// Uniform(-scale, scale) noise. Copy k is named "bp<k>.".
std::vector<BasePredictor> spawn_bps(const BasePredictor& pretrained, std::size_t K, double perturbation_scale,
                                     std::uint64_t seed);

nlohmann::json bp_checkpoint(const BasePredictor& bp);
/// Throws ParseError when the document does not describe a base predictor.
BasePredictor bp_from_checkpoint(const nlohmann::json& doc);

}  // namespace forchestra::model
