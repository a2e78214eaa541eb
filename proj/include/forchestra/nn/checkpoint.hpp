#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "forchestra/nn/tape.hpp"

namespace forchestra::nn {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "forchestra-checkpoint";

// Checkpoint document layout:
// {
//   "format": "forchestra-checkpoint", "version": 1, "kind": "<model kind>",
//   "config": { ... },
//   "parameters": [ {"name": ..., "shape": [...], "values": [...]}, ... ]
// }

nlohmann::json parameters_to_json(const std::vector<const Parameter*>& params);

/// Copies values into `params` by name. Throws ParseError on a missing name or
/// a shape mismatch.
void parameters_from_json(const nlohmann::json& doc, const std::vector<Parameter*>& params);

nlohmann::json make_checkpoint(const std::string& kind, nlohmann::json config,
                               const std::vector<const Parameter*>& params);

/// Validates the header and kind; returns the document.
const nlohmann::json& check_checkpoint(const nlohmann::json& doc, const std::string& kind);

/// Pretty-printed, trailing newline. Throws IoError.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace forchestra::nn
