#include "forchestra/eval/metrics.hpp"

#include <cmath>

#include "forchestra/error.hpp"

namespace forchestra::eval {
namespace {

void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
    if (a != b || a != c) throw DimensionError("metric inputs must have equal lengths");
}

}  // namespace

std::optional<double> masked_mae(std::span<const double> y, std::span<const double> y_hat,
                                 std::span<const std::uint8_t> availability) {
    check_lengths(y.size(), y_hat.size(), availability.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (availability[t] == 0) continue;
        sum += std::abs(y[t] - y_hat[t]);
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> masked_rmse(std::span<const double> y, std::span<const double> y_hat,
                                  std::span<const std::uint8_t> availability) {
    check_lengths(y.size(), y_hat.size(), availability.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (availability[t] == 0) continue;
        const double d = y[t] - y_hat[t];
        sum += d * d;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return std::sqrt(sum / static_cast<double>(n));
}

std::optional<double> naive_scale(std::span<const double> history,
                                  std::span<const std::uint8_t> history_availability) {
    if (history.size() != history_availability.size()) throw DimensionError("history length mismatch");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 1; t < history.size(); ++t) {
        if (history_availability[t] == 0 || history_availability[t - 1] == 0) continue;
        sum += std::abs(history[t] - history[t - 1]);
        ++n;
    }
    if (n == 0 || sum == 0.0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> masked_mase(std::span<const double> y, std::span<const double> y_hat,
                                  std::span<const std::uint8_t> availability, std::span<const double> history,
                                  std::span<const std::uint8_t> history_availability) {
    const auto mae = masked_mae(y, y_hat, availability);
    const auto scale = naive_scale(history, history_availability);
    if (!mae || !scale) return std::nullopt;
    return *mae / *scale;
}

}  // namespace forchestra::eval
