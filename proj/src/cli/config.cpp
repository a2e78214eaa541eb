#include "forchestra/cli/config.hpp"

#include <fstream>

#include "forchestra/data/m5.hpp"
#include "forchestra/error.hpp"

namespace forchestra::cli {

ExperimentConfig default_config() {
    ExperimentConfig c;
    auto& m = c.run.model;
    m.K = 5;
    m.bp.num_layers = 1;
    m.bp.hidden_size = 32;
    m.bp.context_length = 28;
    m.bp.prediction_length = 7;
    m.rep.window = 56;
    c.run.bp_optim.epochs = 20;
    c.run.bp_optim.samples_per_epoch = 4096;
    c.run.bp_optim.batch_size = 64;
    c.run.nc.optim.epochs = 5;
    c.run.nc.optim.samples_per_epoch = 2048;
    c.run.nc.optim.batch_size = 32;
    c.run.train_optim.epochs = 10;
    c.run.train_optim.samples_per_epoch = 4096;
    c.run.train_optim.batch_size = 64;
    return c;
}

nlohmann::json to_json(const baselines::EnsembleSpec& s) {
    nlohmann::json j{{"strategy", baselines::to_string(s.strategy)}, {"scope", baselines::to_string(s.scope)},
                     {"epsilon", s.epsilon}};
    j["k"] = s.k ? nlohmann::json(*s.k) : nlohmann::json(nullptr);
    return j;
}

baselines::EnsembleSpec ensemble_spec_from_json(const nlohmann::json& doc) {
    baselines::EnsembleSpec s;
    try {
        s.strategy = baselines::strategy_from_string(doc.at("strategy").get<std::string>());
        if (doc.contains("scope")) s.scope = baselines::scope_from_string(doc.at("scope").get<std::string>());
        if (doc.contains("k") && !doc.at("k").is_null()) s.k = doc.at("k").get<std::size_t>();
        s.epsilon = doc.value("epsilon", s.epsilon);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("ensemble spec: ") + e.what());
    }
    s.validate();
    return s;
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json ds{{"source", c.dataset.kind}};
    if (c.dataset.kind == "synthetic") {
        ds["synthetic"] = data::to_json(c.dataset.synthetic);
    } else {
        ds["path"] = c.dataset.path;
        ds["availability"] = c.dataset.availability;
        ds["max_rows"] = c.dataset.max_rows;
        ds["max_days"] = c.dataset.max_days;
    }
    nlohmann::json ens = nlohmann::json::array();
    for (const auto& s : c.ensembles) ens.push_back(to_json(s));
    return {{"seed", c.seed},         {"dataset", ds},           {"experiment", experiment::to_json(c.run)},
            {"members", c.members},   {"init_nc", c.init_nc},    {"init_bps", c.init_bps},
            {"ensembles", ens},       {"seeds", c.seeds}};
}

ExperimentConfig config_from_json(const nlohmann::json& doc, const ExperimentConfig& base) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c = base;
    try {
        c.seed = doc.value("seed", c.seed);
        if (doc.contains("dataset")) {
            const auto& d = doc.at("dataset");
            c.dataset.kind = d.value("source", c.dataset.kind);
            if (c.dataset.kind == "synthetic") {
                if (d.contains("synthetic")) c.dataset.synthetic = data::synthetic_spec_from_json(d.at("synthetic"));
            } else if (c.dataset.kind == "m5") {
                c.dataset.path = d.value("path", c.dataset.path);
                c.dataset.availability = d.value("availability", c.dataset.availability);
                c.dataset.max_rows = d.value("max_rows", c.dataset.max_rows);
                c.dataset.max_days = d.value("max_days", c.dataset.max_days);
            } else {
                throw ConfigError("dataset source must be 'synthetic' or 'm5', got '" + c.dataset.kind + "'");
            }
        }
        if (doc.contains("experiment")) {
            // merge over the current values so partial documents keep defaults
            nlohmann::json merged = experiment::to_json(c.run);
            merged.merge_patch(doc.at("experiment"));
            c.run = experiment::comparison_config_from_json(merged);
        }
        c.members = doc.value("members", c.members);
        c.init_nc = doc.value("init_nc", c.init_nc);
        c.init_bps = doc.value("init_bps", c.init_bps);
        if (doc.contains("ensembles")) {
            c.ensembles.clear();
            for (const auto& s : doc.at("ensembles")) c.ensembles.push_back(ensemble_spec_from_json(s));
        }
        if (doc.contains("seeds")) c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.members == 0) throw ConfigError("members must be >= 1");
    c.run.model.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

data::WindowShape window_shape(const ExperimentConfig& c) {
    return {c.run.model.bp.prediction_length, c.run.model.bp.context_length, c.run.model.rep.window};
}

data::Dataset load_dataset(ExperimentConfig& c) {
    data::Dataset ds;
    if (c.dataset.kind == "synthetic") {
        ds = data::generate_synthetic(c.dataset.synthetic, window_shape(c));
    } else {
        if (c.dataset.path.empty()) throw ConfigError("m5 dataset needs a path");
        data::M5Options opts;
        if (!c.dataset.availability.empty()) opts.availability_path = c.dataset.availability;
        opts.max_rows = c.dataset.max_rows;
        opts.max_days = c.dataset.max_days;
        opts.shape = window_shape(c);
        ds = data::load_m5_csv(c.dataset.path, opts);
    }
    c.run.model.bp.input_dim = ds.input_dim();
    c.run.model.rep.input_dim = ds.input_dim();
    return ds;
}

}  // namespace forchestra::cli
