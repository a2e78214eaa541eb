#include "forchestra/model/forchestra.hpp"

#include "forchestra/error.hpp"
#include "forchestra/nn/checkpoint.hpp"
#include "forchestra/nn/init.hpp"
#include "forchestra/nn/ops.hpp"

namespace forchestra::model {

std::string to_string(MetaInput m) { return m == MetaInput::last ? "last" : "pooled"; }

MetaInput meta_input_from_string(const std::string& s) {
    if (s == "last") return MetaInput::last;
    if (s == "pooled") return MetaInput::pooled;
    throw ConfigError("meta input must be 'last' or 'pooled', got '" + s + "'");
}

void ForchestraConfig::validate() const {
    if (K == 0) throw ConfigError("K must be >= 1");
    bp.validate();
    rep.validate();
    if (bp.input_dim != rep.input_dim) throw ConfigError("base predictor and representation input widths differ");
}

nlohmann::json to_json(const ForchestraConfig& c) {
    return {{"K", c.K}, {"bp", to_json(c.bp)}, {"rep", to_json(c.rep)}, {"meta_input", to_string(c.meta_input)}};
}

ForchestraConfig forchestra_config_from_json(const nlohmann::json& doc) {
    ForchestraConfig c;
    try {
        c.K = doc.value("K", c.K);
        if (doc.contains("bp")) c.bp = bp_config_from_json(doc.at("bp"));
        if (doc.contains("rep")) c.rep = rep_config_from_json(doc.at("rep"));
        c.meta_input = meta_input_from_string(doc.value("meta_input", std::string("last")));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("forchestra config: ") + e.what());
    }
    c.validate();
    return c;
}

MetaLearner MetaLearner::create(std::size_t D, std::size_t K, std::uint64_t seed, const std::string& prefix) {
    nn::Rng rng(seed);
    return MetaLearner{nn::LinearLayer::create(prefix + "linear", D, K, rng)};
}

nn::Var weigh(nn::Tape& t, MetaLearner& ml, nn::Var representation) {
    return nn::softmax(t, ml.linear.forward(t, representation));
}

nn::Tensor weigh(MetaLearner& ml, const nn::Tensor& representation) {
    nn::Tape tape(false);
    return tape.value(weigh(tape, ml, tape.constant(representation)));
}

ForchestraModel ForchestraModel::create(const ForchestraConfig& config, std::uint64_t seed) {
    config.validate();
    ForchestraModel m;
    m.config = config;
    for (std::size_t k = 0; k < config.K; ++k) {
        BasePredictor bp = BasePredictor::create(config.bp, nn::derive_seed(seed, 100 + k), "bp" + std::to_string(k) + ".");
        bp.index = k;
        m.bps.push_back(std::move(bp));
    }
    m.rm = RepresentationModule::create(config.rep, nn::derive_seed(seed, 1));
    m.ml = MetaLearner::create(config.rep.output_dim, config.K, nn::derive_seed(seed, 2));
    return m;
}

ForchestraModel::Output ForchestraModel::forward(nn::Tape& t, nn::Var context, nn::Var rep_context) {
    if (t.shape(context)[0] != t.shape(rep_context)[0]) throw DimensionError("context and rep_context batch sizes differ");
    std::vector<nn::Var> parts;
    parts.reserve(bps.size());
    for (auto& bp : bps) parts.push_back(bp.forward(t, context));
    const nn::Var stacked = nn::stack(t, parts);
    const nn::Var r = rm.encode(t, rep_context);
    nn::Var summary;
    if (config.meta_input == MetaInput::last) {
        summary = nn::last_timestep(t, r);
    } else {
        const nn::Shape s = t.shape(r);
        summary = nn::reshape(t, nn::max_pool_time(t, r, std::nullopt), nn::Shape{s[0], s[2]});
    }
    const nn::Var w = weigh(t, ml, summary);
    return {nn::weighted_sum(t, w, stacked), w, stacked};
}

std::vector<nn::Parameter*> ForchestraModel::bp_parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& bp : bps) {
        for (auto* p : bp.parameters()) out.push_back(p);
    }
    return out;
}

std::vector<nn::Parameter*> ForchestraModel::parameters() {
    auto out = bp_parameters();
    for (auto* p : rm.parameters()) out.push_back(p);
    for (auto* p : ml.parameters()) out.push_back(p);
    return out;
}

std::vector<const nn::Parameter*> ForchestraModel::parameters() const {
    auto mut = const_cast<ForchestraModel*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

ForecastResult forecast(ForchestraModel& model, const nn::Tensor& context, const nn::Tensor& rep_context) {
    nn::Tape tape(false);
    const auto out = model.forward(tape, tape.constant(context), tape.constant(rep_context));
    return {tape.value(out.prediction), tape.value(out.weights), tape.value(out.bp_outputs)};
}

eval::BatchPredictor forchestra_predictor(ForchestraModel& model) {
    return [&model](const data::Batch& b) { return forecast(model, b.context, b.rep_context).prediction; };
}

std::size_t count_parameters(const ForchestraConfig& c) {
    return c.K * BasePredictor::parameter_count(c.bp) + RepresentationModule::parameter_count(c.rep) +
           c.rep.output_dim * c.K + c.K;
}

std::size_t count_parameters(const ForchestraModel& model) {
    std::size_t n = 0;
    for (const auto* p : model.parameters()) n += p->size();
    return n;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"optim", to_json(c.optim)},
            {"freeze_representation", c.freeze_representation},
            {"freeze_bps", c.freeze_bps},
            {"pretrained_nc", c.pretrained_nc},
            {"pretrained_bps", c.pretrained_bps},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
    TrainConfig c;
    try {
        if (doc.contains("optim")) c.optim = optim_config_from_json(doc.at("optim"));
        c.freeze_representation = doc.value("freeze_representation", c.freeze_representation);
        c.freeze_bps = doc.value("freeze_bps", c.freeze_bps);
        c.pretrained_nc = doc.value("pretrained_nc", c.pretrained_nc);
        c.pretrained_bps = doc.value("pretrained_bps", c.pretrained_bps);
        c.seed = doc.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    return c;
}

TrainResult train_forchestra(ForchestraModel& model, const data::Dataset& ds, const data::WindowSet& windows,
                             const TrainConfig& cfg, const ValidationSet* validation) {
    if (windows.empty()) throw ConfigError("train_forchestra needs a nonempty window stream");
    std::vector<nn::Parameter*> trainable;
    if (!cfg.freeze_bps) {
        for (auto* p : model.bp_parameters()) trainable.push_back(p);
    }
    if (!cfg.freeze_representation) {
        for (auto* p : model.rm_parameters()) trainable.push_back(p);
    }
    for (auto* p : model.ml_parameters()) trainable.push_back(p);

    ForwardFn forward = [&model](nn::Tape& t, const data::Batch& b) {
        return model.forward(t, t.constant(b.context), t.constant(b.rep_context)).prediction;
    };
    ValidateFn validate;
    if (validation != nullptr) validate = [&] { return validation->score(forchestra_predictor(model)); };
    return train_on_windows(ds, windows, forward, trainable, model.parameters(), cfg.optim, cfg.seed, validate);
}

nlohmann::json forchestra_checkpoint(const ForchestraModel& model) {
    return nn::make_checkpoint("forchestra", to_json(model.config), model.parameters());
}

ForchestraModel forchestra_from_checkpoint(const nlohmann::json& doc) {
    nn::check_checkpoint(doc, "forchestra");
    ForchestraModel m = ForchestraModel::create(forchestra_config_from_json(doc.at("config")), 0);
    nn::parameters_from_json(doc, m.parameters());
    return m;
}

}  // namespace forchestra::model
