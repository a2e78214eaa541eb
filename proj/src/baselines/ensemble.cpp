#include "forchestra/baselines/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "forchestra/error.hpp"

namespace forchestra::baselines {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::average: return "average";
        case Strategy::top_k: return "top_k";
        case Strategy::w_inv: return "w_inv";
        case Strategy::w_sqr: return "w_sqr";
        case Strategy::w_exp: return "w_exp";
    }
    return "unknown";
}

std::string to_string(Scope s) { return s == Scope::global ? "global" : "instance_wise"; }

Strategy strategy_from_string(const std::string& name) {
    for (Strategy s : {Strategy::average, Strategy::top_k, Strategy::w_inv, Strategy::w_sqr, Strategy::w_exp}) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown ensemble strategy '" + name + "'");
}

Scope scope_from_string(const std::string& name) {
    if (name == "global") return Scope::global;
    if (name == "instance_wise") return Scope::instance_wise;
    throw ConfigError("unknown ensemble scope '" + name + "'");
}

void EnsembleSpec::validate() const {
    if (strategy == Strategy::top_k && (!k || *k == 0)) throw ConfigError("top_k needs k >= 1");
    if (!(epsilon > 0.0)) throw ConfigError("ensemble epsilon must be > 0");
}

std::string EnsembleSpec::label() const {
    std::string out = to_string(strategy);
    if (strategy == Strategy::top_k && k) out += "(k=" + std::to_string(*k) + ")";
    return out + "/" + to_string(scope);
}

std::vector<double> ensemble_weights(std::span<const double> scores, const EnsembleSpec& spec) {
    spec.validate();
    const std::size_t K = scores.size();
    if (K == 0) throw ConfigError("ensemble_weights: empty pool");
    for (std::size_t k = 0; k < K; ++k) {
        if (!std::isfinite(scores[k])) throw ConfigError("ensemble_weights: score " + std::to_string(k) + " is not finite");
    }
    std::vector<double> w(K, 0.0);
    switch (spec.strategy) {
        case Strategy::average:
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(K));
            return w;
        case Strategy::top_k: {
            const std::size_t k = std::min(*spec.k, K);
            std::vector<std::size_t> order(K);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
            for (std::size_t j = 0; j < k; ++j) w[order[j]] = 1.0 / static_cast<double>(k);
            return w;
        }
        default:
            break;
    }
    std::vector<double> g(K);
    for (std::size_t k = 0; k < K; ++k) {
        if (scores[k] < 0.0) throw ConfigError("ensemble_weights: negative score " + std::to_string(scores[k]));
        g[k] = 1.0 / (scores[k] + spec.epsilon);
    }
    if (spec.strategy == Strategy::w_exp) {
        // exp(g_k) / sum exp(g_j) with the largest exponent factored out
        const double top = *std::max_element(g.begin(), g.end());
        for (std::size_t k = 0; k < K; ++k) {
            if (!std::isfinite(g[k])) {
                throw NumericError("w_exp: exponent for score " + std::to_string(scores[k]) + " overflows");
            }
            w[k] = std::exp(g[k] - top);
        }
    } else {
        for (std::size_t k = 0; k < K; ++k) w[k] = spec.strategy == Strategy::w_sqr ? g[k] * g[k] : g[k];
    }
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    if (!std::isfinite(sum) || sum <= 0.0) throw NumericError("ensemble weights cannot be normalised");
    for (double& v : w) v /= sum;
    return w;
}

nn::Tensor combine(const nn::Tensor& predictions, std::span<const double> weights) {
    if (predictions.rank() != 2) throw DimensionError("combine: expected [K x P], got " + nn::to_string(predictions.shape()));
    const std::size_t K = predictions.dim(0), P = predictions.dim(1);
    if (weights.size() != K) {
        throw DimensionError("combine: " + std::to_string(weights.size()) + " weights for " + std::to_string(K) + " models");
    }
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("combine: weights sum to " + std::to_string(sum));
    nn::Tensor out({P});
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t p = 0; p < P; ++p) out[p] += weights[k] * predictions.at(k, p);
    }
    return out;
}

InstanceWeights instance_wise_weights(const std::vector<std::vector<std::optional<double>>>& scores,
                                      std::span<const double> global_scores, const EnsembleSpec& spec) {
    const std::vector<double> global = ensemble_weights(global_scores, spec);
    InstanceWeights out;
    for (const auto& row : scores) {
        if (row.size() != global_scores.size()) throw DimensionError("instance_wise_weights: ragged score matrix");
        const bool defined = std::all_of(row.begin(), row.end(), [](const auto& s) { return s.has_value(); });
        if (!defined) {
            out.weights.push_back(global);
            out.fallback.push_back(true);
            continue;
        }
        std::vector<double> s(row.size());
        for (std::size_t k = 0; k < row.size(); ++k) s[k] = *row[k];
        out.weights.push_back(ensemble_weights(s, spec));
        out.fallback.push_back(false);
    }
    return out;
}

namespace {

void check_aligned(std::span<const eval::Forecasts> pool) {
    if (pool.empty()) throw ConfigError("ensemble pool is empty");
    for (const auto& f : pool) {
        if (f.instances != pool.front().instances || !(f.region == pool.front().region)) {
            throw ConfigError("ensemble pool members cover different instances or regions");
        }
    }
}

}  // namespace

PoolScores score_pool(std::span<const eval::Forecasts> pool, const data::Dataset& ds, const eval::EvalFilters& filters) {
    check_aligned(pool);
    const auto& instances = pool.front().instances;
    PoolScores out;
    out.per_instance.assign(instances.size(), std::vector<std::optional<double>>(pool.size()));
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const eval::MetricReport report = eval::evaluate(pool[k], ds, filters);
        std::size_t row = 0;
        for (const auto& m : report.instances) {
            while (row < instances.size() && instances[row] != m.instance) ++row;
            if (row == instances.size()) throw ConfigError("score_pool: report order differs from forecast order");
            out.per_instance[row][k] = m.mase;
        }
        if (!report.mase.mean) throw ConfigError("pool member " + std::to_string(k) + " has no defined MASE");
        out.global.push_back(*report.mase.mean);
    }
    return out;
}

eval::Forecasts combine_forecasts(std::span<const eval::Forecasts> pool, const std::vector<std::vector<double>>& weights) {
    check_aligned(pool);
    const std::size_t N = pool.front().instances.size();
    if (weights.size() != N) throw DimensionError("combine_forecasts: one weight vector per instance required");
    eval::Forecasts out;
    out.region = pool.front().region;
    out.instances = pool.front().instances;
    const std::size_t L = out.region.size();
    for (std::size_t i = 0; i < N; ++i) {
        nn::Tensor stacked({pool.size(), L});
        for (std::size_t k = 0; k < pool.size(); ++k) {
            std::copy(pool[k].values[i].begin(), pool[k].values[i].end(), stacked.raw() + k * L);
        }
        out.values.push_back(combine(stacked, weights[i]).values());
    }
    return out;
}

std::vector<std::vector<double>> spec_weights(const PoolScores& validation, const EnsembleSpec& spec) {
    if (spec.scope == Scope::global) {
        return std::vector<std::vector<double>>(validation.per_instance.size(), ensemble_weights(validation.global, spec));
    }
    return instance_wise_weights(validation.per_instance, validation.global, spec).weights;
}

std::vector<EnsembleSpec> default_specs(std::size_t pool_size) {
    std::vector<EnsembleSpec> out;
    out.push_back({Strategy::average, std::nullopt, Scope::global});
    for (Scope scope : {Scope::global, Scope::instance_wise}) {
        std::vector<std::size_t> ks;
        for (std::size_t k : {std::size_t{1}, std::size_t{2}, std::size_t{5}, std::size_t{10}, std::min<std::size_t>(50, pool_size)}) {
            if (k <= pool_size && std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
        }
        for (std::size_t k : ks) out.push_back({Strategy::top_k, k, scope});
        for (Strategy s : {Strategy::w_inv, Strategy::w_sqr, Strategy::w_exp}) out.push_back({s, std::nullopt, scope});
    }
    return out;
}

std::vector<EnsembleRow> run_ensembles(std::span<const eval::Forecasts> validation_pool,
                                       std::span<const eval::Forecasts> test_pool, const data::Dataset& ds,
                                       std::span<const EnsembleSpec> specs, const eval::EvalFilters& filters) {
    if (validation_pool.size() != test_pool.size()) throw ConfigError("validation and test pools differ in size");
    check_aligned(test_pool);
    if (validation_pool.front().instances != test_pool.front().instances) {
        throw ConfigError("validation and test pools cover different instances");
    }
    const PoolScores scores = score_pool(validation_pool, ds);
    std::vector<EnsembleRow> rows;
    for (const auto& spec : specs) {
        EnsembleRow row;
        row.spec = spec;
        std::vector<std::vector<double>> w;
        if (spec.scope == Scope::instance_wise) {
            auto iw = instance_wise_weights(scores.per_instance, scores.global, spec);
            row.fallbacks = static_cast<std::size_t>(std::count(iw.fallback.begin(), iw.fallback.end(), true));
            w = std::move(iw.weights);
        } else {
            w = spec_weights(scores, spec);
        }
        row.report = eval::evaluate(combine_forecasts(test_pool, w), ds, filters);
        rows.push_back(std::move(row));
    }
    std::optional<std::size_t> best;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& m = rows[r].report.mase.mean;
        if (m && (!best || *m < *rows[*best].report.mase.mean)) best = r;
    }
    if (best) rows[*best].best = true;
    return rows;
}

void write_ensemble_csv(const std::filesystem::path& path, std::span<const EnsembleRow> rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << std::setprecision(17);
    out << "strategy,scope,k,mase,mase_std,mae,mae_std,rmse,rmse_std,best\n";
    auto cell = [&](const std::optional<double>& v) {
        if (v) out << *v;
    };
    for (const auto& r : rows) {
        out << to_string(r.spec.strategy) << ',' << to_string(r.spec.scope) << ',';
        if (r.spec.strategy == Strategy::top_k && r.spec.k) out << *r.spec.k;
        for (const auto* a : {&r.report.mase, &r.report.mae, &r.report.rmse}) {
            out << ',';
            cell(a->mean);
            out << ',';
            cell(a->std);
        }
        out << ',' << (r.best ? 1 : 0) << '\n';
    }
}

}  // namespace forchestra::baselines
