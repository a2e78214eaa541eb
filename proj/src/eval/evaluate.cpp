#include "forchestra/eval/evaluate.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "forchestra/error.hpp"
#include "forchestra/eval/metrics.hpp"

namespace forchestra::eval {

Forecasts backtest_forecasts(const data::Dataset& ds, std::span<const std::size_t> instances, data::TimeRange region,
                             const BatchPredictor& predict, std::size_t batch_size) {
    const std::size_t P = ds.shape.prediction_length;
    const auto periods = data::backtest_periods(region, P);
    Forecasts out;
    out.region = region;
    out.instances.assign(instances.begin(), instances.end());
    out.values.assign(instances.size(), std::vector<double>(region.size(), 0.0));

    std::vector<data::WindowSample> all;
    all.reserve(instances.size() * periods.size());
    for (std::size_t i : instances) {
        for (const auto& period : periods) all.push_back({i, period.context_end});
    }
    if (batch_size == 0) batch_size = all.size();
    for (std::size_t start = 0; start < all.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, all.size() - start);
        const std::span<const data::WindowSample> chunk(all.data() + start, n);
        const data::Batch batch = data::make_batch(ds, chunk, false);
        const nn::Tensor pred = predict(batch);
        if (pred.shape() != nn::Shape{n, P}) {
            throw DimensionError("predictor returned " + nn::to_string(pred.shape()) + ", expected [" +
                                 std::to_string(n) + "x" + std::to_string(P) + "]");
        }
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t flat = start + b;
            const std::size_t row = flat / periods.size();
            const std::size_t offset = periods[flat % periods.size()].target.begin - region.begin;
            for (std::size_t p = 0; p < P; ++p) out.values[row][offset + p] = pred[b * P + p] * batch.scale[b];
        }
    }
    return out;
}

std::string to_string(SkipReason reason) {
    switch (reason) {
        case SkipReason::zero_mase_denominator:
            return "zero_mase_denominator";
        case SkipReason::insufficient_sale_days:
            return "insufficient_sale_days";
    }
    return "unknown";
}

Aggregate aggregate(std::span<const std::optional<double>> values) {
    Aggregate a;
    double sum = 0.0;
    for (const auto& v : values) {
        if (!v) continue;
        sum += *v;
        ++a.count;
    }
    if (a.count == 0) return a;
    const double mean = sum / static_cast<double>(a.count);
    double ss = 0.0;
    for (const auto& v : values) {
        if (v) ss += (*v - mean) * (*v - mean);
    }
    a.mean = mean;
    a.std = std::sqrt(ss / static_cast<double>(a.count));
    return a;
}

MetricReport evaluate(const Forecasts& fc, const data::Dataset& ds, const EvalFilters& filters) {
    if (fc.values.size() != fc.instances.size()) throw CoverageError("forecast rows do not match instance list");
    const data::TimeRange r = fc.region;
    if (r.end > ds.length()) throw CoverageError("forecast region extends past the series end");
    MetricReport report;
    std::vector<std::optional<double>> mase, mae, rmse;
    for (std::size_t row = 0; row < fc.instances.size(); ++row) {
        const std::size_t idx = fc.instances[row];
        if (idx >= ds.size()) throw CoverageError("forecast instance index out of range");
        const auto& s = ds.instances[idx];
        if (fc.values[row].size() != r.size()) {
            throw CoverageError("instance '" + s.id + "' has " + std::to_string(fc.values[row].size()) +
                                " forecast days, expected " + std::to_string(r.size()));
        }
        const std::span<const double> y(s.sales.data() + r.begin, r.size());
        const std::span<const std::uint8_t> a(s.availability.data() + r.begin, r.size());
        const std::span<const double> hist(s.sales.data(), r.begin);
        const std::span<const std::uint8_t> hist_a(s.availability.data(), r.begin);

        InstanceMetrics m;
        m.instance = idx;
        m.id = s.id;
        for (auto flag : a) m.sale_days += flag;
        if (m.sale_days < filters.min_sale_days || m.sale_days == 0) {
            report.skipped.push_back({s.id, SkipReason::insufficient_sale_days});
            continue;
        }
        m.mae = masked_mae(y, fc.values[row], a);
        m.rmse = masked_rmse(y, fc.values[row], a);
        m.mase = masked_mase(y, fc.values[row], a, hist, hist_a);
        if (!m.mase) report.skipped.push_back({s.id, SkipReason::zero_mase_denominator});
        mase.push_back(m.mase);
        mae.push_back(m.mae);
        rmse.push_back(m.rmse);
        report.instances.push_back(std::move(m));
    }
    report.mase = aggregate(mase);
    report.mae = aggregate(mae);
    report.rmse = aggregate(rmse);
    return report;
}

std::optional<double> mean_mase(const Forecasts& forecasts, const data::Dataset& dataset, const EvalFilters& filters) {
    return evaluate(forecasts, dataset, filters).mase.mean;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json agg_json(const Aggregate& a) {
    return {{"count", a.count}, {"mean", opt(a.mean)}, {"std", opt(a.std)}};
}

std::string cell(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream os;
    os << std::setprecision(17) << *v;
    return os.str();
}

}  // namespace

nlohmann::json MetricReport::to_json() const {
    nlohmann::json skips = nlohmann::json::array();
    std::size_t n_zero = 0, n_days = 0;
    for (const auto& s : skipped) {
        skips.push_back({{"id", s.id}, {"reason", eval::to_string(s.reason)}});
        (s.reason == SkipReason::zero_mase_denominator ? n_zero : n_days) += 1;
    }
    return {{"instances", instances.size()},
            {"mase", agg_json(mase)},
            {"mae", agg_json(mae)},
            {"rmse", agg_json(rmse)},
            {"skipped",
             {{"zero_mase_denominator", n_zero}, {"insufficient_sale_days", n_days}, {"entries", skips}}}};
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "id,sale_days,mase,mae,rmse\n";
    for (const auto& m : instances) {
        out << m.id << ',' << m.sale_days << ',' << cell(m.mase) << ',' << cell(m.mae) << ',' << cell(m.rmse) << '\n';
    }
}

}  // namespace forchestra::eval
