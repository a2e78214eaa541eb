#include "forchestra/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "forchestra/error.hpp"
#include "forchestra/nn/init.hpp"

namespace forchestra::data {

Split split(const Dataset& ds, const SplitSpec& spec, std::uint64_t seed) {
    if (spec.holdout_fraction < 0.0 || spec.holdout_fraction >= 1.0) {
        throw ConfigError("holdout_fraction must lie in [0, 1)");
    }
    if (spec.backtest_periods > 0 && spec.backtest_stride > 0 &&
        spec.backtest_periods * spec.backtest_stride > spec.test_days) {
        throw ConfigError("backtest_periods x backtest_stride exceeds test_days");
    }
    const std::size_t T = ds.length();
    const std::size_t minimum = spec.test_days + spec.validation_days + ds.shape.context_length +
                                ds.shape.prediction_length + 1;
    if (T < minimum) {
        throw ConfigError("series length " + std::to_string(T) + " is too short: need at least " +
                          std::to_string(minimum) + " days (test + validation + C + P + 1)");
    }
    Split out;
    out.test = {T - spec.test_days, T};
    out.validation = {T - spec.test_days - spec.validation_days, T - spec.test_days};
    out.train = {0, out.validation.begin};

    const std::size_t N = ds.size();
    const auto n_holdout = static_cast<std::size_t>(std::floor(spec.holdout_fraction * static_cast<double>(N)));
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    nn::Rng rng(nn::derive_seed(seed, 0x401d));
    std::shuffle(order.begin(), order.end(), rng);
    out.holdout_instances.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_holdout));
    out.train_instances.assign(order.begin() + static_cast<std::ptrdiff_t>(n_holdout), order.end());
    std::sort(out.holdout_instances.begin(), out.holdout_instances.end());
    std::sort(out.train_instances.begin(), out.train_instances.end());
    return out;
}

WindowSet::WindowSet(std::vector<std::size_t> instances, TimeRange region, WindowShape shape, std::size_t stride)
    : instances_(std::move(instances)), region_(region), stride_(stride) {
    if (stride == 0) throw ConfigError("window stride must be >= 1");
    const std::size_t C = shape.context_length;
    const std::size_t P = shape.prediction_length;
    first_anchor_ = region.begin + C - 1;
    if (region.size() >= C + P) per_instance_ = (region.size() - C - P) / stride + 1;
}

WindowSample WindowSet::operator[](std::size_t i) const {
    if (i >= size()) throw ContractError("window index out of range");
    return {instances_[i / per_instance_], first_anchor_ + (i % per_instance_) * stride_};
}

std::vector<WindowSample> WindowSet::materialize() const {
    std::vector<WindowSample> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i]);
    return out;
}

WindowSet make_windows(const Dataset& ds, std::span<const std::size_t> instances, TimeRange region,
                       std::size_t stride) {
    if (region.end > ds.length()) throw ConfigError("window region extends past the series end");
    for (std::size_t i : instances) {
        if (i >= ds.size()) throw ConfigError("window instance index out of range");
    }
    return WindowSet({instances.begin(), instances.end()}, region, ds.shape, stride);
}

std::vector<BacktestPeriod> backtest_periods(TimeRange region, std::size_t period_length) {
    if (period_length == 0 || region.size() % period_length != 0) {
        throw ConfigError("period length " + std::to_string(period_length) + " does not divide the " +
                          std::to_string(region.size()) + "-day region");
    }
    if (region.begin == 0) throw ConfigError("backtest region needs at least one day of history");
    std::vector<BacktestPeriod> out;
    for (std::size_t b = region.begin; b < region.end; b += period_length) {
        out.push_back({b - 1, {b, b + period_length}});
    }
    return out;
}

Batch make_batch(const Dataset& ds, std::span<const WindowSample> samples, bool with_target) {
    const std::size_t B = samples.size();
    const std::size_t C = ds.shape.context_length;
    const std::size_t W = ds.shape.representation_window;
    const std::size_t P = ds.shape.prediction_length;
    const std::size_t D = ds.input_dim();
    const std::size_t T = ds.length();
    Batch batch;
    batch.context = nn::Tensor({B, C, D});
    batch.rep_context = nn::Tensor({B, W, D});
    if (with_target) {
        batch.target = nn::Tensor({B, P});
        batch.target_mask = nn::Tensor({B, P});
    }
    batch.scale.resize(B);
    batch.samples.assign(samples.begin(), samples.end());

    auto fill = [&](nn::Tensor& out, std::size_t b, std::size_t len, const SeriesInstance& s, std::size_t anchor,
                    double scale) {
        double* row = out.raw() + b * len * D;
        for (std::size_t j = 0; j < len; ++j) {
            // day index anchor - len + 1 + j; negative days stay zero
            if (anchor + 1 + j < len) continue;
            const std::size_t t = anchor + 1 + j - len;
            double* cell = row + j * D;
            cell[0] = s.sales[t] / scale;
            cell[1] = static_cast<double>(s.availability[t]);
            for (std::size_t f = 0; f < s.features.size(); ++f) cell[2 + f] = s.features[f][t];
        }
    };

    for (std::size_t b = 0; b < B; ++b) {
        const WindowSample& w = samples[b];
        if (w.instance >= ds.size() || w.anchor >= T) throw ContractError("window outside the dataset");
        const SeriesInstance& s = ds.instances[w.instance];
        double total = 0.0;
        for (std::size_t j = 0; j < C; ++j) {
            if (w.anchor + 1 + j >= C) total += s.sales[w.anchor + 1 + j - C];
        }
        const double scale = 1.0 + total / static_cast<double>(C);
        batch.scale[b] = scale;
        fill(batch.context, b, C, s, w.anchor, scale);
        fill(batch.rep_context, b, W, s, w.anchor, scale);
        if (with_target) {
            if (w.anchor + P >= T) throw ContractError("window target runs past the series end");
            for (std::size_t p = 0; p < P; ++p) {
                batch.target[b * P + p] = s.sales[w.anchor + 1 + p] / scale;
                batch.target_mask[b * P + p] = static_cast<double>(s.availability[w.anchor + 1 + p]);
            }
        }
    }
    return batch;
}

nlohmann::json to_json(const SplitSpec& spec) {
    return {{"test_days", spec.test_days},
            {"validation_days", spec.validation_days},
            {"holdout_fraction", spec.holdout_fraction},
            {"backtest_periods", spec.backtest_periods},
            {"backtest_stride", spec.backtest_stride}};
}

SplitSpec split_spec_from_json(const nlohmann::json& doc) {
    SplitSpec spec;
    try {
        spec.test_days = doc.value("test_days", spec.test_days);
        spec.validation_days = doc.value("validation_days", spec.validation_days);
        spec.holdout_fraction = doc.value("holdout_fraction", spec.holdout_fraction);
        spec.backtest_periods = doc.value("backtest_periods", spec.backtest_periods);
        spec.backtest_stride = doc.value("backtest_stride", spec.backtest_stride);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("split spec: ") + e.what());
    }
    return spec;
}

}  // namespace forchestra::data
