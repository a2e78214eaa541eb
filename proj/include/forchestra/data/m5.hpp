#pragma once

#include <filesystem>
#include <optional>

#include "forchestra/data/dataset.hpp"

namespace forchestra::data {

struct M5Options {
    std::optional<std::filesystem::path> availability_path;  // sidecar CSV with 0/1 cells
    std::size_t max_rows = 0;  // 0 = all rows; otherwise the first max_rows
    std::size_t max_days = 0;  // 0 = all days; otherwise the most recent max_days
    WindowShape shape;
};

/// Reads an M5-style wide CSV: an `id` column, day columns `d_<n>`, and any
/// other columns kept as metadata. Throws IoError / ParseError.
Dataset load_m5_csv(const std::filesystem::path& path, const M5Options& options = {});

/// Writes sales (and optionally availability) in the same wide layout.
void write_m5_csv(const Dataset& dataset, const std::filesystem::path& sales_path,
                  const std::optional<std::filesystem::path>& availability_path = std::nullopt);

}  // namespace forchestra::data
