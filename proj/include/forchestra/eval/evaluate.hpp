#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "forchestra/data/split.hpp"
#include "forchestra/nn/tensor.hpp"

namespace forchestra::eval {

/// Point forecasts in original units over a region, one row per instance.
struct Forecasts {
    data::TimeRange region;
    std::vector<std::size_t> instances;       // dataset indices
    std::vector<std::vector<double>> values;  // values[i].size() == region.size()
};

/// Maps a batch to scaled predictions [B x P].
using BatchPredictor = std::function<nn::Tensor(const data::Batch&)>;

/// Runs `predict` over consecutive P-day periods covering `region` and
/// rescales the outputs by each window's scale.
Forecasts backtest_forecasts(const data::Dataset& dataset, std::span<const std::size_t> instances,
                             data::TimeRange region, const BatchPredictor& predict, std::size_t batch_size = 256);

enum class SkipReason { zero_mase_denominator, insufficient_sale_days };
std::string to_string(SkipReason reason);

struct InstanceMetrics {
    std::size_t instance = 0;
    std::string id;
    std::size_t sale_days = 0;
    std::optional<double> mase;
    std::optional<double> mae;
    std::optional<double> rmse;
};

struct Aggregate {
    std::size_t count = 0;
    std::optional<double> mean;
    std::optional<double> std;  // population standard deviation
};

struct Skip {
    std::string id;
    SkipReason reason;
};

struct EvalFilters {
    std::size_t min_sale_days = 7;  // sale days over the whole evaluated region
};

struct MetricReport {
    std::vector<InstanceMetrics> instances;  // instances passing the filters, in dataset order
    std::vector<Skip> skipped;
    Aggregate mase;
    Aggregate mae;
    Aggregate rmse;

    nlohmann::json to_json() const;
    /// Columns: id, sale_days, mase, mae, rmse (empty cell when undefined).
    void write_csv(const std::filesystem::path& path) const;
};

Aggregate aggregate(std::span<const std::optional<double>> values);

/// Scores forecasts over their region. The MASE scale uses every day before
/// the region start. Throws CoverageError on missing or short rows.
MetricReport evaluate(const Forecasts& forecasts, const data::Dataset& dataset, const EvalFilters& filters = {});

/// Mean test MASE, or std::nullopt if no instance has one.
std::optional<double> mean_mase(const Forecasts& forecasts, const data::Dataset& dataset,
                                const EvalFilters& filters = {});

}  // namespace forchestra::eval
