#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace forchestra::data {

inline constexpr std::uint8_t kSale = 1;
inline constexpr std::uint8_t kNonSale = 0;

/// One product's daily history. All per-day channels share the same length.
struct SeriesInstance {
    std::string id;
    std::vector<double> sales;               // nonnegative integer counts
    std::vector<std::uint8_t> availability;  // kSale / kNonSale per day
    std::vector<std::vector<double>> features;  // optional extra channels, each of length T
    std::vector<std::pair<std::string, std::string>> metadata;

    std::size_t length() const noexcept { return sales.size(); }
    /// Value of a metadata column, if present.
    std::optional<std::string> meta(const std::string& key) const;
};

/// Throws ConfigError on ragged channels, negative sales or bad flags.
void validate(const SeriesInstance& instance);

/// Window lengths shared by every model consuming a dataset.
struct WindowShape {
    std::size_t prediction_length = 7;       // P
    std::size_t context_length = 28;         // C
    std::size_t representation_window = 56;  // W
};

struct Dataset {
    std::vector<SeriesInstance> instances;
    WindowShape shape;

    std::size_t size() const noexcept { return instances.size(); }
    /// Common calendar length T (0 when empty).
    std::size_t length() const noexcept { return instances.empty() ? 0 : instances.front().length(); }
    std::size_t extra_features() const noexcept {
        return instances.empty() ? 0 : instances.front().features.size();
    }
    /// Model input width: sales + availability + extra features.
    std::size_t input_dim() const noexcept { return 2 + extra_features(); }
    std::optional<std::size_t> find(const std::string& id) const;
};

/// Validates every instance and left-pads shorter series with zero sales
/// marked non_sale so that all share the longest length. Throws ConfigError
/// when a window length is zero or feature channel counts differ.
Dataset make_dataset(std::vector<SeriesInstance> instances, WindowShape shape);

}  // namespace forchestra::data
