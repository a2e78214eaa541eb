#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "forchestra/data/dataset.hpp"
#include "forchestra/nn/tensor.hpp"

namespace forchestra::data {

/// Half-open day range [begin, end).
struct TimeRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
    bool contains(std::size_t t) const noexcept { return t >= begin && t < end; }
    bool operator==(const TimeRange&) const = default;
};

struct SplitSpec {
    std::size_t test_days = 28;
    std::size_t validation_days = 28;
    double holdout_fraction = 0.05;
    std::size_t backtest_periods = 1;
    std::size_t backtest_stride = 0;  // 0: one period spanning test_days
};

struct Split {
    TimeRange train;
    TimeRange validation;
    TimeRange test;
    std::vector<std::size_t> train_instances;    // ascending dataset indices
    std::vector<std::size_t> holdout_instances;  // ascending dataset indices
};

/// Suffix time regions plus floor(N * holdout_fraction) hold-out instances
/// drawn without replacement. Throws ConfigError when the series are too short.
Split split(const Dataset& dataset, const SplitSpec& spec, std::uint64_t seed);

/// Window anchored at day t: context [t-C+1, t], rep_context [t-W+1, t],
/// target [t+1, t+P].
struct WindowSample {
    std::size_t instance = 0;
    std::size_t anchor = 0;
    bool operator==(const WindowSample&) const = default;
};

/// Indexable window stream over a region. Context and target both lie inside
/// the region; anchors advance by `stride`.
class WindowSet {
public:
    WindowSet() = default;
    WindowSet(std::vector<std::size_t> instances, TimeRange region, WindowShape shape, std::size_t stride);

    std::size_t size() const noexcept { return instances_.size() * per_instance_; }
    bool empty() const noexcept { return size() == 0; }
    std::size_t per_instance() const noexcept { return per_instance_; }
    WindowSample operator[](std::size_t i) const;
    std::vector<WindowSample> materialize() const;
    const TimeRange& region() const noexcept { return region_; }

private:
    std::vector<std::size_t> instances_;
    TimeRange region_;
    std::size_t first_anchor_ = 0;
    std::size_t stride_ = 1;
    std::size_t per_instance_ = 0;
};

WindowSet make_windows(const Dataset& dataset, std::span<const std::size_t> instances, TimeRange region,
                       std::size_t stride = 1);

struct BacktestPeriod {
    std::size_t context_end = 0;  // anchor: last observed day
    TimeRange target;
};

/// Consecutive non-overlapping periods covering `region`. Throws ConfigError
/// unless period_length divides the region length.
std::vector<BacktestPeriod> backtest_periods(TimeRange region, std::size_t period_length);

/// Model inputs for a list of windows. Channels: sales / scale, availability,
/// extra features. scale = 1 + mean sales over the context window; targets
/// are divided by the same scale. Days before the series start read as zero.
struct Batch {
    nn::Tensor context;      // [B x C x input_dim]
    nn::Tensor rep_context;  // [B x W x input_dim]
    nn::Tensor target;       // [B x P], scaled; empty when targets were not requested
    nn::Tensor target_mask;  // [B x P], 1 on sale days
    std::vector<double> scale;
    std::vector<WindowSample> samples;

    std::size_t size() const noexcept { return samples.size(); }
};

/// Throws ContractError when a requested target runs past the series end.
Batch make_batch(const Dataset& dataset, std::span<const WindowSample> samples, bool with_target = true);

nlohmann::json to_json(const SplitSpec& spec);
SplitSpec split_spec_from_json(const nlohmann::json& doc);

}  // namespace forchestra::data
