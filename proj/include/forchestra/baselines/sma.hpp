#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "forchestra/eval/evaluate.hpp"

namespace forchestra::baselines {

struct SmaForecast {
    std::vector<double> values;  // P copies of the mean
    bool no_sales = false;       // history had no sale day; values are 0
};

/// Mean of the last min(look_back, n) sale-day values of the history, where
/// n counts its sale days. Throws ConfigError on an empty history or a zero
/// look-back.
SmaForecast sma_forecast(std::span<const double> sales, std::span<const std::uint8_t> availability,
                         std::size_t look_back, std::size_t P);

/// Backtested SMA over `region` in P-day periods; each period sees only the
/// days before its first target day.
eval::Forecasts sma_forecasts(const data::Dataset& dataset, std::span<const std::size_t> instances,
                              data::TimeRange region, std::size_t look_back);

/// Look-backs 7, 14, ..., 70.
std::vector<std::size_t> default_look_backs();

struct SmaSelection {
    std::size_t look_back = 0;
    std::optional<double> validation_mase;
};

/// The candidate with the lowest mean MASE over `region` (first on ties).
SmaSelection select_look_back(const data::Dataset& dataset, std::span<const std::size_t> instances,
                              data::TimeRange region, std::span<const std::size_t> candidates,
                              const eval::EvalFilters& filters = eval::EvalFilters{0});

}  // namespace forchestra::baselines
