#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace forchestra::eval {

// Availability-masked point metrics. `y`, `y_hat` and `availability` cover
// the prediction range; only sale days (availability 1) contribute.
// Undefined results (no sale days, zero scale) are std::nullopt.

std::optional<double> masked_mae(std::span<const double> y, std::span<const double> y_hat,
                                 std::span<const std::uint8_t> availability);
std::optional<double> masked_rmse(std::span<const double> y, std::span<const double> y_hat,
                                  std::span<const std::uint8_t> availability);

/// Mean |h_t - h_{t-1}| over consecutive history days that are both sale days.
std::optional<double> naive_scale(std::span<const double> history,
                                  std::span<const std::uint8_t> history_availability);

std::optional<double> masked_mase(std::span<const double> y, std::span<const double> y_hat,
                                  std::span<const std::uint8_t> availability, std::span<const double> history,
                                  std::span<const std::uint8_t> history_availability);

}  // namespace forchestra::eval
