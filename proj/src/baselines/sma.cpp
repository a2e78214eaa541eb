#include "forchestra/baselines/sma.hpp"

#include "forchestra/error.hpp"

namespace forchestra::baselines {

SmaForecast sma_forecast(std::span<const double> sales, std::span<const std::uint8_t> availability,
                         std::size_t look_back, std::size_t P) {
    if (sales.empty()) throw ConfigError("sma_forecast: empty history");
    if (sales.size() != availability.size()) throw DimensionError("sma_forecast: availability length differs");
    if (look_back == 0) throw ConfigError("sma_forecast: look_back must be >= 1");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = sales.size(); t-- > 0 && n < look_back;) {
        if (availability[t] != data::kSale) continue;
        sum += sales[t];
        ++n;
    }
    SmaForecast out;
    out.no_sales = n == 0;
    out.values.assign(P, n ? sum / static_cast<double>(n) : 0.0);
    return out;
}

eval::Forecasts sma_forecasts(const data::Dataset& ds, std::span<const std::size_t> instances,
                              data::TimeRange region, std::size_t look_back) {
    const std::size_t P = ds.shape.prediction_length;
    const auto periods = data::backtest_periods(region, P);
    eval::Forecasts out;
    out.region = region;
    out.instances.assign(instances.begin(), instances.end());
    for (std::size_t i : instances) {
        const auto& s = ds.instances.at(i);
        std::vector<double> row(region.size());
        for (const auto& period : periods) {
            const std::size_t seen = period.target.begin;
            if (seen == 0) throw ConfigError("sma_forecasts: region starts at day 0");
            const auto f = sma_forecast(std::span(s.sales).first(seen), std::span(s.availability).first(seen),
                                        look_back, P);
            std::copy(f.values.begin(), f.values.end(), row.begin() + (period.target.begin - region.begin));
        }
        out.values.push_back(std::move(row));
    }
    return out;
}

std::vector<std::size_t> default_look_backs() {
    std::vector<std::size_t> out;
    for (std::size_t w = 7; w <= 70; w += 7) out.push_back(w);
    return out;
}

SmaSelection select_look_back(const data::Dataset& ds, std::span<const std::size_t> instances, data::TimeRange region,
                              std::span<const std::size_t> candidates, const eval::EvalFilters& filters) {
    if (candidates.empty()) throw ConfigError("select_look_back: no candidates");
    SmaSelection best;
    for (std::size_t w : candidates) {
        const auto score = eval::mean_mase(sma_forecasts(ds, instances, region, w), ds, filters);
        if (score && (!best.validation_mase || *score < *best.validation_mase)) {
            best.look_back = w;
            best.validation_mase = score;
        }
    }
    if (best.look_back == 0) best.look_back = candidates.front();
    return best;
}

}  // namespace forchestra::baselines
