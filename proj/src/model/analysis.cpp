#include "forchestra/model/analysis.hpp"

#include <algorithm>
#include <set>

#include "forchestra/error.hpp"
#include "forchestra/model/pretrain_bp.hpp"

namespace forchestra::model {

std::vector<std::optional<double>> instance_mase(const eval::Forecasts& fc, const data::Dataset& ds,
                                                 const eval::EvalFilters& filters) {
    const eval::MetricReport report = eval::evaluate(fc, ds, filters);
    std::vector<std::optional<double>> out(fc.instances.size());
    // report rows keep the forecast order, minus skipped instances
    std::size_t row = 0;
    for (const auto& m : report.instances) {
        while (fc.instances[row] != m.instance) ++row;
        out[row] = m.mase;
        ++row;
    }
    return out;
}

namespace {

std::vector<std::vector<std::optional<double>>> per_bp_mase(ForchestraModel& model, const data::Dataset& ds,
                                                            std::span<const std::size_t> instances,
                                                            data::TimeRange region, const eval::EvalFilters& filters) {
    const std::size_t K = model.bps.size();
    std::vector<std::vector<std::optional<double>>> out(instances.size(), std::vector<std::optional<double>>(K));
    for (std::size_t k = 0; k < K; ++k) {
        const auto fc = eval::backtest_forecasts(ds, instances, region, bp_predictor(model.bps[k]));
        const auto scores = instance_mase(fc, ds, filters);
        for (std::size_t i = 0; i < instances.size(); ++i) out[i][k] = scores[i];
    }
    return out;
}

}  // namespace

eval::RankingInputs ranking_inputs(ForchestraModel& model, const data::Dataset& ds,
                                   std::span<const std::size_t> instances, data::TimeRange validation,
                                   data::TimeRange test, const eval::EvalFilters& filters) {
    const std::size_t K = model.bps.size();
    eval::RankingInputs in;
    in.test_mase = per_bp_mase(model, ds, instances, test, filters);
    in.instance_validation = per_bp_mase(model, ds, instances, validation, filters);

    in.global_validation.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::optional<double>> col;
        for (const auto& row : in.instance_validation) col.push_back(row[k]);
        const auto agg = eval::aggregate(col);
        if (!agg.mean) throw ConfigError("base predictor " + std::to_string(k) + " has no defined validation MASE");
        in.global_validation[k] = *agg.mean;
    }

    const auto periods = data::backtest_periods(test, ds.shape.prediction_length);
    in.conductor_weights.assign(instances.size(), std::vector<double>(K, 0.0));
    std::vector<data::WindowSample> samples;
    for (const auto& period : periods) {
        samples.clear();
        for (std::size_t i : instances) samples.push_back({i, period.context_end});
        if (samples.empty()) break;
        const data::Batch batch = data::make_batch(ds, samples, false);
        const nn::Tensor w = forecast(model, batch.context, batch.rep_context).weights;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                in.conductor_weights[i][k] += w.at(i, k) / static_cast<double>(periods.size());
            }
        }
    }
    return in;
}

eval::RankingAnalysis rank_analysis(ForchestraModel& model, const data::Dataset& ds, const data::Split& split,
                                    std::span<const std::size_t> depths, const eval::EvalFilters& filters) {
    const auto in = ranking_inputs(model, ds, split.train_instances, split.validation, split.test, filters);
    return eval::rank_analysis(in, depths);
}

eval::MetricReport transfer_evaluate(ForchestraModel& model, const data::Dataset& ds,
                                     std::span<const std::size_t> holdout,
                                     std::span<const std::size_t> training_instances, data::TimeRange region,
                                     const eval::EvalFilters& filters) {
    const std::set<std::size_t> seen(training_instances.begin(), training_instances.end());
    for (std::size_t i : holdout) {
        if (seen.count(i)) {
            const std::string id = i < ds.size() ? ds.instances[i].id : std::to_string(i);
            throw LeakError("hold-out instance '" + id + "' was used in training");
        }
    }
    if (holdout.empty()) return {};
    return eval::evaluate(eval::backtest_forecasts(ds, holdout, region, forchestra_predictor(model)), ds, filters);
}

}  // namespace forchestra::model
