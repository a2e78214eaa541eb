#include "forchestra/experiment/comparison.hpp"

#include <algorithm>
#include <chrono>

#include "forchestra/baselines/deep_ensemble.hpp"
#include "forchestra/baselines/ensemble.hpp"
#include "forchestra/baselines/sma.hpp"
#include "forchestra/error.hpp"
#include "forchestra/nn/init.hpp"

namespace forchestra::experiment {

nlohmann::json to_json(const ComparisonConfig& c) {
    return {{"split", data::to_json(c.split)},
            {"model", model::to_json(c.model)},
            {"bp_optim", model::to_json(c.bp_optim)},
            {"nc", ssl::to_json(c.nc)},
            {"train_optim", model::to_json(c.train_optim)},
            {"perturbation", c.perturbation},
            {"pool_size", c.pool_size},
            {"pretrain_nc", c.pretrain_nc},
            {"pretrain_bps", c.pretrain_bps},
            {"freeze_representation", c.freeze_representation},
            {"freeze_bps", c.freeze_bps},
            {"min_sale_days", c.filters.min_sale_days},
            {"jobs", c.jobs}};
}

ComparisonConfig comparison_config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("comparison config must be a JSON object");
    ComparisonConfig c;
    try {
        if (doc.contains("split")) c.split = data::split_spec_from_json(doc.at("split"));
        if (doc.contains("model")) c.model = model::forchestra_config_from_json(doc.at("model"));
        if (doc.contains("bp_optim")) c.bp_optim = model::optim_config_from_json(doc.at("bp_optim"));
        if (doc.contains("nc")) c.nc = ssl::nc_pretrain_config_from_json(doc.at("nc"));
        if (doc.contains("train_optim")) c.train_optim = model::optim_config_from_json(doc.at("train_optim"));
        c.perturbation = doc.value("perturbation", c.perturbation);
        c.pool_size = doc.value("pool_size", c.pool_size);
        c.pretrain_nc = doc.value("pretrain_nc", c.pretrain_nc);
        c.pretrain_bps = doc.value("pretrain_bps", c.pretrain_bps);
        c.freeze_representation = doc.value("freeze_representation", c.freeze_representation);
        c.freeze_bps = doc.value("freeze_bps", c.freeze_bps);
        c.filters.min_sale_days = doc.value("min_sale_days", c.filters.min_sale_days);
        c.jobs = doc.value("jobs", c.jobs);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("comparison config: ") + e.what());
    }
    if (c.pool_size == 0) throw ConfigError("pool_size must be >= 1");
    return c;
}

nlohmann::json to_json(const ComparisonResult& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"seed", r.seed},
            {"sma_look_back", r.sma_look_back},
            {"sma", r.sma},
            {"single_bp", r.single_bp},
            {"best_top_k", r.best_top_k},
            {"best_top_k_label", r.best_top_k_label},
            {"forchestra", r.forchestra},
            {"forchestra_holdout", opt(r.forchestra_holdout)},
            {"sma_holdout", opt(r.sma_holdout)}};
}

double median(std::vector<double> v) {
    if (v.empty()) throw ContractError("median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

data::Split make_split(const data::Dataset& ds, const ComparisonConfig& cfg, std::uint64_t seed) {
    return data::split(ds, cfg.split, nn::derive_seed(seed, 0x5b17));
}

data::WindowSet training_windows(const data::Dataset& ds, const data::Split& split) {
    return data::make_windows(ds, split.train_instances, split.train, 1);
}

model::ValidationSet validation_set(const data::Dataset& ds, const data::Split& split) {
    return model::ValidationSet{&ds, split.train_instances, split.validation, eval::EvalFilters{0}};
}

std::uint64_t pool_seed(std::uint64_t seed, std::size_t member) { return nn::derive_seed(seed, 100 + member); }

model::RepresentationModule pretrained_representation(const data::Dataset& ds, const ComparisonConfig& cfg,
                                                      const data::Split& split, std::uint64_t seed) {
    // the same initialisation a fresh model would draw for its representation module
    model::RepresentationModule rm =
        model::RepresentationModule::create(cfg.model.rep, nn::derive_seed(nn::derive_seed(seed, 200), 1));
    ssl::pretrain_nc(rm, ds, split.train_instances, split.train, cfg.nc, nn::derive_seed(seed, 202));
    return rm;
}

model::ForchestraModel initial_model(const ComparisonConfig& cfg, std::size_t K, const model::BasePredictor* bp,
                                     const model::RepresentationModule* rm, std::uint64_t seed) {
    model::ForchestraConfig mc = cfg.model;
    mc.K = K;
    model::ForchestraModel m = model::ForchestraModel::create(mc, nn::derive_seed(seed, 200));
    if (bp != nullptr) {
        if (!(bp->config == mc.bp)) throw ConfigError("base predictor checkpoint does not match the model's bp config");
        m.bps = model::spawn_bps(*bp, K, cfg.perturbation, nn::derive_seed(seed, 201));
    }
    if (rm != nullptr) {
        if (!(rm->config == mc.rep)) {
            throw ConfigError("representation checkpoint does not match the model's rep config");
        }
        m.rm = *rm;
    }
    return m;
}

model::TrainResult train_model(model::ForchestraModel& m, const data::Dataset& ds, const ComparisonConfig& cfg,
                               const data::Split& split, std::uint64_t seed) {
    model::TrainConfig tc;
    tc.optim = cfg.train_optim;
    tc.freeze_representation = cfg.freeze_representation;
    tc.freeze_bps = cfg.freeze_bps;
    tc.pretrained_nc = cfg.pretrain_nc;
    tc.pretrained_bps = cfg.pretrain_bps;
    tc.seed = nn::derive_seed(seed, 203);
    const auto windows = training_windows(ds, split);
    const auto validation = validation_set(ds, split);
    return model::train_forchestra(m, ds, windows, tc, &validation);
}

namespace {

double require(const std::optional<double>& v, const std::string& what) {
    if (!v) throw NumericError(what + " has no defined test MASE");
    return *v;
}

struct Context {
    const data::Dataset& ds;
    const ComparisonConfig& cfg;
    data::Split split;
    data::WindowSet windows;
    model::ValidationSet validation;
};

Context make_context(const data::Dataset& ds, const ComparisonConfig& cfg, std::uint64_t seed) {
    Context c{ds, cfg, make_split(ds, cfg, seed), {}, {}};
    c.windows = training_windows(ds, c.split);
    c.validation = validation_set(ds, c.split);
    return c;
}

model::ForchestraModel full_model(const Context& c, std::size_t K, const model::BasePredictor* pretrained,
                                  std::uint64_t seed, model::TrainResult* history = nullptr) {
    std::optional<model::RepresentationModule> rm;
    if (c.cfg.pretrain_nc) rm = pretrained_representation(c.ds, c.cfg, c.split, seed);
    if (c.cfg.pretrain_bps && pretrained == nullptr) {
        throw ContractError("BP pre-training requested without a predictor");
    }
    model::ForchestraModel m =
        initial_model(c.cfg, K, c.cfg.pretrain_bps ? pretrained : nullptr, rm ? &*rm : nullptr, seed);
    auto result = train_model(m, c.ds, c.cfg, c.split, seed);
    if (history != nullptr) *history = std::move(result);
    return m;
}

}  // namespace

ComparisonResult run_comparison(const data::Dataset& ds, const ComparisonConfig& cfg, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const Context c = make_context(ds, cfg, seed);
    const auto& train = c.split.train_instances;
    ComparisonResult out;
    out.seed = seed;

    // SMA with the look-back picked on validation
    const auto look_backs = baselines::default_look_backs();
    const auto sel = baselines::select_look_back(ds, train, c.split.validation, look_backs);
    out.sma_look_back = sel.look_back;
    out.sma = require(eval::mean_mase(baselines::sma_forecasts(ds, train, c.split.test, sel.look_back), ds, cfg.filters),
                      "SMA");

    // independently trained pool; member 0 doubles as the single predictor
    std::vector<std::uint64_t> seeds;
    for (std::size_t j = 0; j < cfg.pool_size; ++j) seeds.push_back(pool_seed(seed, j));
    baselines::DeepEnsemble pool =
        baselines::deep_ensembles(cfg.model.bp, ds, c.windows, cfg.bp_optim, seeds, &c.validation, cfg.jobs);

    std::vector<eval::Forecasts> val_pool, test_pool;
    for (auto& bp : pool.members) {
        val_pool.push_back(eval::backtest_forecasts(ds, train, c.split.validation, model::bp_predictor(bp)));
        test_pool.push_back(eval::backtest_forecasts(ds, train, c.split.test, model::bp_predictor(bp)));
    }
    out.single_bp = require(eval::mean_mase(test_pool[0], ds, cfg.filters), "single BP");

    std::vector<baselines::EnsembleSpec> specs;
    for (auto scope : {baselines::Scope::global, baselines::Scope::instance_wise}) {
        for (std::size_t k = 1; k <= cfg.pool_size; ++k) specs.push_back({baselines::Strategy::top_k, k, scope});
    }
    const auto rows = baselines::run_ensembles(val_pool, test_pool, ds, specs, cfg.filters);
    out.best_top_k = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        if (r.report.mase.mean && *r.report.mase.mean < out.best_top_k) {
            out.best_top_k = *r.report.mase.mean;
            out.best_top_k_label = r.spec.label();
        }
    }

    model::ForchestraModel m = full_model(c, cfg.model.K, &pool.members[0], seed, &out.forchestra_training);
    out.forchestra = require(
        eval::mean_mase(eval::backtest_forecasts(ds, train, c.split.test, model::forchestra_predictor(m)), ds,
                        cfg.filters),
        "Forchestra");

    const auto& holdout = c.split.holdout_instances;
    if (!holdout.empty()) {
        out.forchestra_holdout = eval::evaluate(
            eval::backtest_forecasts(ds, holdout, c.split.test, model::forchestra_predictor(m)), ds, cfg.filters)
                                     .mase.mean;
        out.sma_holdout =
            eval::mean_mase(baselines::sma_forecasts(ds, holdout, c.split.test, sel.look_back), ds, cfg.filters);
    }
    out.trained = std::make_shared<model::ForchestraModel>(std::move(m));
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

double scaling_point(const data::Dataset& ds, const ComparisonConfig& cfg, std::size_t K, std::uint64_t seed) {
    const Context c = make_context(ds, cfg, seed);
    std::optional<model::BasePredictor> pretrained;
    if (cfg.pretrain_bps) {
        pretrained = model::pretrain_bp(cfg.model.bp, ds, c.windows, cfg.bp_optim, pool_seed(seed, 0), &c.validation).bp;
    }
    model::ForchestraModel m = full_model(c, K, pretrained ? &*pretrained : nullptr, seed);
    return require(eval::mean_mase(eval::backtest_forecasts(ds, c.split.train_instances, c.split.test,
                                                            model::forchestra_predictor(m)),
                                   ds, cfg.filters),
                   "Forchestra");
}

}  // namespace forchestra::experiment
