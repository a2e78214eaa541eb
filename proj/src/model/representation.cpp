#include "forchestra/model/representation.hpp"

#include "forchestra/error.hpp"
#include "forchestra/nn/checkpoint.hpp"
#include "forchestra/nn/ops.hpp"

namespace forchestra::model {

void RepresentationConfig::validate() const {
    if (input_dim == 0 || projection_dim == 0 || output_dim == 0 || window == 0) {
        throw ConfigError("representation sizes must be positive");
    }
    if (kernel_size % 2 == 0) throw ConfigError("representation kernel_size must be odd");
    if (num_blocks > 30) throw ConfigError("too many conv blocks");
}

nlohmann::json to_json(const RepresentationConfig& c) {
    return {{"input_dim", c.input_dim},     {"projection_dim", c.projection_dim}, {"num_blocks", c.num_blocks},
            {"kernel_size", c.kernel_size}, {"output_dim", c.output_dim},         {"window", c.window}};
}

RepresentationConfig rep_config_from_json(const nlohmann::json& doc) {
    RepresentationConfig c;
    try {
        c.input_dim = doc.value("input_dim", c.input_dim);
        c.projection_dim = doc.value("projection_dim", c.projection_dim);
        c.num_blocks = doc.value("num_blocks", c.num_blocks);
        c.kernel_size = doc.value("kernel_size", c.kernel_size);
        c.output_dim = doc.value("output_dim", c.output_dim);
        c.window = doc.value("window", c.window);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("representation config: ") + e.what());
    }
    c.validate();
    return c;
}

RepresentationModule RepresentationModule::create(const RepresentationConfig& config, std::uint64_t seed,
                                                  const std::string& prefix) {
    config.validate();
    nn::Rng rng(seed);
    RepresentationModule rm;
    rm.config = config;
    rm.input = nn::LinearLayer::create(prefix + "input", config.input_dim, config.projection_dim, rng);
    for (std::size_t i = 0; i < config.num_blocks; ++i) {
        nn::ConvBlockConfig bc;
        bc.in_channels = config.projection_dim;
        bc.out_channels = config.projection_dim;
        bc.kernel_size = config.kernel_size;
        bc.dilation = std::size_t{1} << i;
        rm.blocks.push_back(nn::ConvBlock::create(prefix + "block" + std::to_string(i), bc, rng));
    }
    rm.output = nn::LinearLayer::create(prefix + "output", config.projection_dim, config.output_dim, rng);
    return rm;
}

nn::Var RepresentationModule::project(nn::Tape& t, nn::Var x) {
    const nn::Shape& s = t.shape(x);
    if (s.size() != 3 || s[2] != config.input_dim) {
        throw DimensionError("representation module expects [B x T x " + std::to_string(config.input_dim) +
                             "], got " + nn::to_string(s));
    }
    return input.forward(t, x);
}

nn::Var RepresentationModule::encode_projected(nn::Tape& t, nn::Var h) {
    for (auto& block : blocks) h = nn::dilated_conv_block_forward(t, h, block);
    return output.forward(t, h);
}

nn::Var RepresentationModule::encode(nn::Tape& t, nn::Var rep_context) {
    const nn::Shape& s = t.shape(rep_context);
    if (s.size() != 3 || s[1] != config.window) {
        throw DimensionError("encode expects a window of " + std::to_string(config.window) + " steps, got " +
                             nn::to_string(s));
    }
    return encode_projected(t, project(t, rep_context));
}

std::vector<nn::Parameter*> RepresentationModule::parameters() {
    std::vector<nn::Parameter*> out{&input.weight, &input.bias};
    for (auto& b : blocks) {
        out.push_back(&b.kernel);
        out.push_back(&b.bias);
    }
    out.push_back(&output.weight);
    out.push_back(&output.bias);
    return out;
}

std::vector<const nn::Parameter*> RepresentationModule::parameters() const {
    auto mut = const_cast<RepresentationModule*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::size_t RepresentationModule::parameter_count(const RepresentationConfig& c) {
    const std::size_t H = c.projection_dim;
    return (c.input_dim * H + H) + c.num_blocks * (c.kernel_size * H * H + H) + (H * c.output_dim + c.output_dim);
}

nn::Tensor encode(RepresentationModule& rm, const nn::Tensor& rep_context) {
    nn::Tape tape(false);
    return tape.value(rm.encode(tape, tape.constant(rep_context)));
}

nn::Tensor instance_representation(RepresentationModule& rm, const nn::Tensor& rep_context) {
    nn::Tape tape(false);
    const nn::Var r = nn::max_pool_time(tape, rm.encode(tape, tape.constant(rep_context)), std::nullopt);
    const nn::Shape& s = tape.shape(r);
    return tape.value(r).reshaped({s[0], s[2]});
}

nlohmann::json rm_checkpoint(const RepresentationModule& rm) {
    return nn::make_checkpoint("representation", to_json(rm.config), rm.parameters());
}

RepresentationModule rm_from_checkpoint(const nlohmann::json& doc) {
    nn::check_checkpoint(doc, "representation");
    RepresentationModule rm = RepresentationModule::create(rep_config_from_json(doc.at("config")), 0);
    nn::parameters_from_json(doc, rm.parameters());
    return rm;
}

}  // namespace forchestra::model
