#include "forchestra/data/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "forchestra/error.hpp"

namespace forchestra::data {

std::optional<std::string> SeriesInstance::meta(const std::string& key) const {
    for (const auto& [k, v] : metadata) {
        if (k == key) return v;
    }
    return std::nullopt;
}

void validate(const SeriesInstance& s) {
    const std::size_t T = s.sales.size();
    if (s.availability.size() != T) {
        throw ConfigError("instance '" + s.id + "': availability has " +
                          std::to_string(s.availability.size()) + " days, sales has " + std::to_string(T));
    }
    for (const auto& f : s.features) {
        if (f.size() != T) throw ConfigError("instance '" + s.id + "': feature channel length mismatch");
    }
    for (std::size_t t = 0; t < T; ++t) {
        if (!(s.sales[t] >= 0.0) || !std::isfinite(s.sales[t])) {
            throw ConfigError("instance '" + s.id + "': invalid sales value at day " + std::to_string(t));
        }
        if (s.availability[t] != kSale && s.availability[t] != kNonSale) {
            throw ConfigError("instance '" + s.id + "': availability must be 0 or 1");
        }
    }
}

std::optional<std::size_t> Dataset::find(const std::string& id) const {
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i].id == id) return i;
    }
    return std::nullopt;
}

Dataset make_dataset(std::vector<SeriesInstance> instances, WindowShape shape) {
    if (shape.prediction_length == 0 || shape.context_length == 0 || shape.representation_window == 0) {
        throw ConfigError("prediction_length, context_length and representation_window must be >= 1");
    }
    std::size_t T = 0;
    for (const auto& s : instances) {
        validate(s);
        T = std::max(T, s.length());
        if (s.features.size() != instances.front().features.size()) {
            throw ConfigError("instance '" + s.id + "' has a different number of feature channels");
        }
    }
    for (auto& s : instances) {
        const std::size_t pad = T - s.length();
        if (pad == 0) continue;
        s.sales.insert(s.sales.begin(), pad, 0.0);
        s.availability.insert(s.availability.begin(), pad, kNonSale);
        for (auto& f : s.features) f.insert(f.begin(), pad, 0.0);
    }
    return Dataset{std::move(instances), shape};
}

}  // namespace forchestra::data
