#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forchestra/eval/evaluate.hpp"
#include "forchestra/nn/tensor.hpp"

namespace forchestra::baselines {

enum class Strategy { average, top_k, w_inv, w_sqr, w_exp };
enum class Scope { global, instance_wise };

std::string to_string(Strategy s);
std::string to_string(Scope s);
/// Throws ConfigError on unknown names.
Strategy strategy_from_string(const std::string& name);
Scope scope_from_string(const std::string& name);

struct EnsembleSpec {
    Strategy strategy = Strategy::average;
    std::optional<std::size_t> k;  // top_k only
    Scope scope = Scope::global;
    double epsilon = 1e-10;

    void validate() const;
    /// e.g. "top_k(k=5)/instance_wise"
    std::string label() const;
};

/// Combination weights from validation scores (lower is better). top_k
/// breaks ties by model index; k above the pool size takes every model.
/// Throws ConfigError on non-finite or negative scores and NumericError if
/// an exponential weight cannot be represented.
std::vector<double> ensemble_weights(std::span<const double> scores, const EnsembleSpec& spec);

/// Weighted sum over the model axis of [K x P] predictions. Throws
/// ContractError unless the weights sum to 1 within 1e-9.
nn::Tensor combine(const nn::Tensor& predictions, std::span<const double> weights);

struct InstanceWeights {
    std::vector<std::vector<double>> weights;  // one vector per instance
    std::vector<bool> fallback;                // true where global weights were used
};

/// ensemble_weights per instance; instances with any undefined score fall
/// back to the weights of `global_scores`.
InstanceWeights instance_wise_weights(const std::vector<std::vector<std::optional<double>>>& scores,
                                      std::span<const double> global_scores, const EnsembleSpec& spec);

/// Per-instance and mean MASE of every pool member on the same region.
struct PoolScores {
    std::vector<std::vector<std::optional<double>>> per_instance;  // [instance][model]
    std::vector<double> global;                                    // mean over instances with a defined MASE
};

/// Throws ConfigError if the members cover different instances or regions,
/// or some member has no defined MASE anywhere.
PoolScores score_pool(std::span<const eval::Forecasts> pool, const data::Dataset& dataset,
                      const eval::EvalFilters& filters = eval::EvalFilters{0});

/// Per-instance weighted combination of member forecasts.
eval::Forecasts combine_forecasts(std::span<const eval::Forecasts> pool,
                                  const std::vector<std::vector<double>>& weights);

/// Weights for `spec` given validation scores, one vector per instance.
std::vector<std::vector<double>> spec_weights(const PoolScores& validation, const EnsembleSpec& spec);

struct EnsembleRow {
    EnsembleSpec spec;
    eval::MetricReport report;
    std::size_t fallbacks = 0;  // instance-wise rows that used global weights
    bool best = false;          // lowest test MASE among the rows
};

/// Average, Top-K for k in {1, 2, 5, 10, min(50, pool)} and the three
/// weighted schemes, global and instance-wise.
std::vector<EnsembleSpec> default_specs(std::size_t pool_size);

/// Scores every spec: weights from the validation pool, evaluation on the
/// test pool. Tags the row with the lowest test MASE.
std::vector<EnsembleRow> run_ensembles(std::span<const eval::Forecasts> validation_pool,
                                       std::span<const eval::Forecasts> test_pool, const data::Dataset& dataset,
                                       std::span<const EnsembleSpec> specs, const eval::EvalFilters& filters = {});

/// Columns: strategy, scope, k, mase, mase_std, mae, mae_std, rmse, rmse_std, best.
void write_ensemble_csv(const std::filesystem::path& path, std::span<const EnsembleRow> rows);

}  // namespace forchestra::baselines
