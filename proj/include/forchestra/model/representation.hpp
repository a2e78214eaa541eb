#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "forchestra/nn/layers.hpp"

namespace forchestra::model {

struct RepresentationConfig {
    std::size_t input_dim = 2;
    std::size_t projection_dim = 64;
    std::size_t num_blocks = 5;  // block i uses dilation 2^i
    std::size_t kernel_size = 3;
    std::size_t output_dim = 32;  // D
    std::size_t window = 56;      // W

    void validate() const;
    bool operator==(const RepresentationConfig&) const = default;
};

nlohmann::json to_json(const RepresentationConfig& c);
RepresentationConfig rep_config_from_json(const nlohmann::json& doc);

/// Input projection, residual dilated conv blocks, output projection to D.
struct RepresentationModule {
    RepresentationConfig config;
    nn::LinearLayer input;
    std::vector<nn::ConvBlock> blocks;
    nn::LinearLayer output;

    static RepresentationModule create(const RepresentationConfig& config, std::uint64_t seed,
                                       const std::string& prefix = "rm.");

    /// [B x T x input_dim] -> [B x T x projection_dim]
    nn::Var project(nn::Tape& tape, nn::Var x);
    /// [B x T x projection_dim] -> [B x T x D]
    nn::Var encode_projected(nn::Tape& tape, nn::Var h);
    /// [B x W x input_dim] -> [B x W x D]. Throws DimensionError unless the time axis is W.
    nn::Var encode(nn::Tape& tape, nn::Var rep_context);

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    static std::size_t parameter_count(const RepresentationConfig& config);
};

nn::Tensor encode(RepresentationModule& rm, const nn::Tensor& rep_context);
/// Max over time of encode's output, [B x D].
nn::Tensor instance_representation(RepresentationModule& rm, const nn::Tensor& rep_context);

nlohmann::json rm_checkpoint(const RepresentationModule& rm);
RepresentationModule rm_from_checkpoint(const nlohmann::json& doc);

}  // namespace forchestra::model
