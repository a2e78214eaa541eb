#pragma once

#include <span>
#include <vector>

#include "forchestra/data/split.hpp"
#include "forchestra/eval/evaluate.hpp"
#include "forchestra/eval/ranking.hpp"
#include "forchestra/model/forchestra.hpp"

namespace forchestra::model {

/// Per-instance MASE over `region` for every row of `forecasts`, aligned with
/// forecasts.instances; std::nullopt where the instance fails the filters or
/// its MASE is undefined.
std::vector<std::optional<double>> instance_mase(const eval::Forecasts& forecasts, const data::Dataset& dataset,
                                                 const eval::EvalFilters& filters);

/// Inputs for the ranking comparison: each BP's test and validation MASE per
/// instance, the global validation means and the conductor weights averaged
/// over the test periods.
eval::RankingInputs ranking_inputs(ForchestraModel& model, const data::Dataset& dataset,
                                   std::span<const std::size_t> instances, data::TimeRange validation,
                                   data::TimeRange test, const eval::EvalFilters& filters = eval::EvalFilters{0});

eval::RankingAnalysis rank_analysis(ForchestraModel& model, const data::Dataset& dataset, const data::Split& split,
                                    std::span<const std::size_t> depths = {},
                                    const eval::EvalFilters& filters = eval::EvalFilters{0});

/// Zero-shot evaluation of hold-out instances over `region`. Throws LeakError
/// if a hold-out instance appears among `training_instances`.
eval::MetricReport transfer_evaluate(ForchestraModel& model, const data::Dataset& dataset,
                                     std::span<const std::size_t> holdout, std::span<const std::size_t> training_instances,
                                     data::TimeRange region, const eval::EvalFilters& filters = {});

}  // namespace forchestra::model
