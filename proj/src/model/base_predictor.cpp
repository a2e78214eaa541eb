#include "forchestra/model/base_predictor.hpp"

#include "forchestra/error.hpp"
#include "forchestra/nn/checkpoint.hpp"
#include "forchestra/nn/ops.hpp"

namespace forchestra::model {

void BasePredictorConfig::validate() const {
    if (num_layers == 0 || hidden_size == 0 || input_dim == 0 || prediction_length == 0 || context_length == 0) {
        throw ConfigError("base predictor sizes must all be positive");
    }
}

nlohmann::json to_json(const BasePredictorConfig& c) {
    return {{"num_layers", c.num_layers},
            {"hidden_size", c.hidden_size},
            {"input_dim", c.input_dim},
            {"prediction_length", c.prediction_length},
            {"context_length", c.context_length}};
}

BasePredictorConfig bp_config_from_json(const nlohmann::json& doc) {
    BasePredictorConfig c;
    try {
        c.num_layers = doc.value("num_layers", c.num_layers);
        c.hidden_size = doc.value("hidden_size", c.hidden_size);
        c.input_dim = doc.value("input_dim", c.input_dim);
        c.prediction_length = doc.value("prediction_length", c.prediction_length);
        c.context_length = doc.value("context_length", c.context_length);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("base predictor config: ") + e.what());
    }
    c.validate();
    return c;
}

BasePredictor BasePredictor::create(const BasePredictorConfig& config, std::uint64_t seed, std::string prefix) {
    config.validate();
    nn::Rng rng(seed);
    BasePredictor bp;
    bp.config = config;
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        const std::size_t in = l == 0 ? config.input_dim : config.hidden_size;
        bp.layers.push_back(
            nn::LstmLayer::create(prefix + "lstm" + std::to_string(l), in, config.hidden_size, rng));
    }
    bp.head = nn::LinearLayer::create(prefix + "head", config.hidden_size, config.prediction_length, rng);
    return bp;
}

nn::Var BasePredictor::forward(nn::Tape& t, nn::Var context) {
    const nn::Shape& s = t.shape(context);
    if (s.size() != 3 || s[1] != config.context_length || s[2] != config.input_dim) {
        throw DimensionError("base predictor expects [B x " + std::to_string(config.context_length) + " x " +
                             std::to_string(config.input_dim) + "], got " + nn::to_string(s));
    }
    nn::Var h = nn::lstm_forward(t, context, layers);
    return head.forward(t, nn::last_timestep(t, h));
}

std::vector<nn::Parameter*> BasePredictor::parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& l : layers) {
        out.push_back(&l.w_ih);
        out.push_back(&l.w_hh);
        out.push_back(&l.bias);
    }
    out.push_back(&head.weight);
    out.push_back(&head.bias);
    return out;
}

std::vector<const nn::Parameter*> BasePredictor::parameters() const {
    auto mut = const_cast<BasePredictor*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

void BasePredictor::set_prefix(const std::string& prefix) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string base = prefix + "lstm" + std::to_string(l);
        layers[l].w_ih.name = base + ".w_ih";
        layers[l].w_hh.name = base + ".w_hh";
        layers[l].bias.name = base + ".bias";
    }
    head.weight.name = prefix + "head.weight";
    head.bias.name = prefix + "head.bias";
}

std::size_t BasePredictor::parameter_count(const BasePredictorConfig& c) {
    std::size_t n = 0;
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        n += nn::LstmLayer::parameter_count(l == 0 ? c.input_dim : c.hidden_size, c.hidden_size);
    }
    return n + c.hidden_size * c.prediction_length + c.prediction_length;
}

nn::Tensor predict(BasePredictor& bp, const nn::Tensor& context) {
    nn::Tape tape(false);
    return tape.value(bp.forward(tape, tape.constant(context)));
}

nn::Tensor joint_predict(std::vector<BasePredictor>& bps, const nn::Tensor& context) {
    if (bps.empty()) throw ConfigError("joint_predict needs at least one base predictor");
    for (const auto& bp : bps) {
        if (!(bp.config == bps.front().config)) throw ConfigError("joint_predict: base predictor configs differ");
    }
    nn::Tape tape(false);
    const nn::Var x = tape.constant(context);
    std::vector<nn::Var> parts;
    for (auto& bp : bps) parts.push_back(bp.forward(tape, x));
    return tape.value(nn::stack(tape, parts));
}

std::vector<BasePredictor> spawn_bps(const BasePredictor& pretrained, std::size_t K, double perturbation_scale,
                                     std::uint64_t seed) {
    if (K == 0) throw ConfigError("spawn_bps: K must be >= 1");
    if (perturbation_scale < 0.0) throw ConfigError("perturbation scale must be >= 0");
    std::vector<BasePredictor> out;
    out.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        BasePredictor bp = pretrained;
        bp.index = k;
        bp.set_prefix("bp" + std::to_string(k) + ".");
        if (perturbation_scale > 0.0) {
            nn::Rng rng(nn::derive_seed(seed, k));
            for (nn::Parameter* p : bp.parameters()) nn::perturb(*p, perturbation_scale, rng);
        }
        for (nn::Parameter* p : bp.parameters()) p->zero_grad();
        out.push_back(std::move(bp));
    }
    return out;
}

nlohmann::json bp_checkpoint(const BasePredictor& bp) {
    const BasePredictor copy = [&] {
        BasePredictor c = bp;
        c.set_prefix("bp.");
        return c;
    }();
    return nn::make_checkpoint("base_predictor", to_json(bp.config), copy.parameters());
}

BasePredictor bp_from_checkpoint(const nlohmann::json& doc) {
    nn::check_checkpoint(doc, "base_predictor");
    BasePredictor bp = BasePredictor::create(bp_config_from_json(doc.at("config")), 0, "bp.");
    nn::parameters_from_json(doc, bp.parameters());
    return bp;
}

}  // namespace forchestra::model
