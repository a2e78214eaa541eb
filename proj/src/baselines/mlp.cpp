#include "forchestra/baselines/mlp.hpp"

#include "forchestra/error.hpp"

namespace forchestra::baselines {

void MlpConfig::validate() const {
    if (hidden_size == 0 || input_dim == 0 || context_length == 0 || prediction_length == 0) {
        throw ConfigError("mlp sizes must be >= 1");
    }
}

nlohmann::json to_json(const MlpConfig& c) {
    return {{"num_layers", c.num_layers},
            {"hidden_size", c.hidden_size},
            {"input_dim", c.input_dim},
            {"context_length", c.context_length},
            {"prediction_length", c.prediction_length}};
}

MlpConfig mlp_config_from_json(const nlohmann::json& doc) {
    MlpConfig c;
    try {
        c.num_layers = doc.value("num_layers", c.num_layers);
        c.hidden_size = doc.value("hidden_size", c.hidden_size);
        c.input_dim = doc.value("input_dim", c.input_dim);
        c.context_length = doc.value("context_length", c.context_length);
        c.prediction_length = doc.value("prediction_length", c.prediction_length);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mlp config: ") + e.what());
    }
    c.validate();
    return c;
}

Mlp Mlp::create(const MlpConfig& config, std::uint64_t seed) {
    config.validate();
    nn::Rng rng(seed);
    Mlp m{config, {}};
    m.layers.push_back(nn::LinearLayer::create("mlp.in", config.context_length * config.input_dim, config.hidden_size, rng));
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        m.layers.push_back(nn::LinearLayer::create("mlp.hidden" + std::to_string(l), config.hidden_size, config.hidden_size, rng));
    }
    m.layers.push_back(nn::LinearLayer::create("mlp.out", config.hidden_size, config.prediction_length, rng));
    return m;
}

nn::Var Mlp::forward(nn::Tape& t, nn::Var context) {
    const nn::Shape s = t.shape(context);
    if (s.size() != 3 || s[1] != config.context_length || s[2] != config.input_dim) {
        throw DimensionError("mlp expects [B x " + std::to_string(config.context_length) + " x " +
                             std::to_string(config.input_dim) + "], got " + nn::to_string(s));
    }
    nn::Var h = nn::reshape(t, context, {s[0], s[1] * s[2]});
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) h = nn::relu(t, layers[l].forward(t, h));
    return layers.back().forward(t, h);
}

std::vector<nn::Parameter*> Mlp::parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& l : layers) {
        for (auto* p : l.parameters()) out.push_back(p);
    }
    return out;
}

eval::BatchPredictor mlp_predictor(Mlp& mlp) {
    return [&mlp](const data::Batch& batch) {
        nn::Tape tape(false);
        return tape.value(mlp.forward(tape, tape.constant(batch.context)));
    };
}

MlpTrainResult train_mlp(const MlpConfig& config, const data::Dataset& ds, const data::WindowSet& windows,
                         const model::OptimConfig& optim, std::uint64_t seed, const model::ValidationSet* validation) {
    MlpTrainResult out{Mlp::create(config, nn::derive_seed(seed, 1)), {}};
    Mlp& m = out.mlp;
    const auto params = m.parameters();
    model::ForwardFn forward = [&m](nn::Tape& t, const data::Batch& b) { return m.forward(t, t.constant(b.context)); };
    model::ValidateFn validate;
    if (validation != nullptr) validate = [&] { return validation->score(mlp_predictor(m)); };
    out.training = model::train_on_windows(ds, windows, forward, params, params, optim, nn::derive_seed(seed, 2), validate);
    return out;
}

}  // namespace forchestra::baselines
