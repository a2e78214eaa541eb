#include "forchestra/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "forchestra/error.hpp"
#include "forchestra/nn/init.hpp"

namespace forchestra::data {

std::vector<RegimeParams> draw_regimes(std::size_t n_regimes, std::size_t n_days, std::uint64_t seed) {
    nn::Rng rng(nn::derive_seed(seed, 0x5e91));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double R = static_cast<double>(n_regimes);
    // one stratum per regime on each axis, strata shuffled independently
    auto strata = [&] {
        std::vector<double> s(n_regimes);
        for (std::size_t r = 0; r < n_regimes; ++r) s[r] = (static_cast<double>(r) + 0.25 + 0.5 * u(rng)) / R;
        std::shuffle(s.begin(), s.end(), rng);
        return s;
    };
    const auto level_q = strata();
    const auto amp_q = strata();
    const auto phase_q = strata();
    const auto trend_q = strata();
    std::vector<RegimeParams> out(n_regimes);
    for (std::size_t r = 0; r < n_regimes; ++r) {
        RegimeParams& p = out[r];
        p.level = 2.0 * std::pow(20.0, level_q[r]);        // 2 .. 40
        p.amplitude = p.level * (0.05 + 0.75 * amp_q[r]);  // 5% .. 80% of level
        p.phase = 7.0 * phase_q[r];
        // total drift over the series spans -30% .. +30% of the level
        p.trend = p.level * 0.6 * (trend_q[r] - 0.5) / std::max<double>(1.0, static_cast<double>(n_days));
    }
    return out;
}

Dataset generate_synthetic(const SyntheticSpec& spec, WindowShape shape) {
    if (spec.n_regimes == 0) throw ConfigError("n_regimes must be >= 1");
    if (spec.noise_level < 0.0) throw ConfigError("noise_level must be >= 0");
    if (spec.non_sale_fraction < 0.0 || spec.non_sale_fraction >= 1.0) {
        throw ConfigError("non_sale_fraction must lie in [0, 1)");
    }
    if (!spec.regimes.empty() && spec.regimes.size() != spec.n_regimes) {
        throw ConfigError("explicit regimes must number n_regimes");
    }
    const auto regimes = spec.regimes.empty() ? draw_regimes(spec.n_regimes, spec.n_days, spec.seed) : spec.regimes;
    const std::size_t T = spec.n_days;
    const double centre = (static_cast<double>(T) - 1.0) / 2.0;
    const std::size_t budget = static_cast<std::size_t>(std::floor(spec.non_sale_fraction * static_cast<double>(T)));
    const std::size_t max_stretches = 3;

    std::vector<SeriesInstance> instances;
    instances.reserve(spec.n_instances);
    const int width = std::max<int>(4, static_cast<int>(std::to_string(spec.n_instances).size()));
    for (std::size_t i = 0; i < spec.n_instances; ++i) {
        nn::Rng rng(nn::derive_seed(spec.seed, i + 1));
        std::normal_distribution<double> noise(0.0, 1.0);
        const std::size_t r = i % spec.n_regimes;
        const RegimeParams& p = regimes[r];

        SeriesInstance s;
        std::string num = std::to_string(i);
        s.id = "syn_" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0') + num;
        s.metadata.emplace_back("regime", std::to_string(r));
        s.sales.resize(T);
        s.availability.assign(T, kSale);
        for (std::size_t t = 0; t < T; ++t) {
            const double td = static_cast<double>(t);
            const double base = p.level + p.trend * (td - centre) +
                                p.amplitude * std::sin(2.0 * std::numbers::pi * (td + p.phase) / 7.0);
            const double eps = spec.noise_level > 0.0 ? spec.noise_level * noise(rng) : 0.0;
            s.sales[t] = std::round(std::max(0.0, base + eps));
        }
        // up to three stretches, each at most budget/3 days long, so the total stays within budget
        const std::size_t longest = budget / max_stretches;
        if (longest > 0) {
            const std::size_t count = std::uniform_int_distribution<std::size_t>(0, max_stretches)(rng);
            for (std::size_t k = 0; k < count; ++k) {
                const std::size_t len = std::uniform_int_distribution<std::size_t>(1, longest)(rng);
                const std::size_t start = std::uniform_int_distribution<std::size_t>(0, T - len)(rng);
                for (std::size_t t = start; t < start + len; ++t) {
                    s.availability[t] = kNonSale;
                    s.sales[t] = 0.0;
                }
            }
        }
        instances.push_back(std::move(s));
    }
    return make_dataset(std::move(instances), shape);
}

nlohmann::json to_json(const SyntheticSpec& spec) {
    nlohmann::json regimes = nlohmann::json::array();
    for (const auto& r : spec.regimes) {
        regimes.push_back({{"level", r.level}, {"amplitude", r.amplitude}, {"phase", r.phase}, {"trend", r.trend}});
    }
    return {{"n_instances", spec.n_instances}, {"n_days", spec.n_days},
            {"n_regimes", spec.n_regimes},     {"noise_level", spec.noise_level},
            {"seed", spec.seed},               {"non_sale_fraction", spec.non_sale_fraction},
            {"regimes", regimes}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("synthetic spec must be a JSON object");
    SyntheticSpec spec;
    try {
        spec.n_instances = doc.value("n_instances", spec.n_instances);
        spec.n_days = doc.value("n_days", spec.n_days);
        spec.n_regimes = doc.value("n_regimes", spec.n_regimes);
        spec.noise_level = doc.value("noise_level", spec.noise_level);
        spec.seed = doc.value("seed", spec.seed);
        spec.non_sale_fraction = doc.value("non_sale_fraction", spec.non_sale_fraction);
        if (doc.contains("regimes")) {
            for (const auto& r : doc.at("regimes")) {
                spec.regimes.push_back(RegimeParams{r.value("level", 5.0), r.value("amplitude", 0.0),
                                                    r.value("phase", 0.0), r.value("trend", 0.0)});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic spec: ") + e.what());
    }
    return spec;
}

}  // namespace forchestra::data
