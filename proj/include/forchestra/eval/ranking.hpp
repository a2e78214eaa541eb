#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace forchestra::eval {

/// Truncated rank-biased overlap, normalised so identical prefixes score 1:
///   sum_{d<=depth} p^(d-1) |A[:d] & B[:d]| / d  /  sum_{d<=depth} p^(d-1)
/// Throws ContractError unless a and b are permutations of the same set,
/// depth >= 1 and 0 < p < 1. Depth above the ranking length is clamped.
double rbo(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t depth,
           double persistence = 0.9);

/// Model indices by ascending score; ties keep index order.
std::vector<std::size_t> rank_ascending(std::span<const double> scores);
/// Model indices by descending value; ties keep index order.
std::vector<std::size_t> rank_descending(std::span<const double> values);

struct RankingInputs {
    std::vector<std::vector<std::optional<double>>> test_mase;            // [instance][model]
    std::vector<std::vector<double>> conductor_weights;                   // [instance][model]
    std::vector<double> global_validation;                                // [model]
    std::vector<std::vector<std::optional<double>>> instance_validation;  // [instance][model]
};

struct RankRow {
    std::string comparison;  // conductor | global_validation | instance_validation
    std::size_t depth = 0;            // requested
    std::size_t effective_depth = 0;  // after clamping to K
    double rbo = 0.0;                 // mean over instances
    std::size_t instances = 0;
};

struct RankingAnalysis {
    std::size_t models = 0;
    std::size_t instances_used = 0;
    std::size_t instances_skipped = 0;  // some test MASE undefined
    std::size_t validation_fallbacks = 0;  // instance-wise ranking replaced by the global one
    std::vector<RankRow> rows;
    std::vector<std::string> notes;

    const RankRow& row(const std::string& comparison, std::size_t depth) const;
    /// Columns: comparison, depth, effective_depth, rbo, instances.
    void write_csv(const std::filesystem::path& path) const;
};

/// Ground truth per instance is the ascending test-MASE order. Instances
/// with an undefined test MASE are skipped; an instance with an undefined
/// validation score uses the global validation ranking.
RankingAnalysis rank_analysis(const RankingInputs& inputs, std::span<const std::size_t> depths = {},
                              double persistence = 0.9);

}  // namespace forchestra::eval
