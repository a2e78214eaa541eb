#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "forchestra/baselines/ensemble.hpp"
#include "forchestra/data/dataset.hpp"
#include "forchestra/data/synthetic.hpp"
#include "forchestra/experiment/comparison.hpp"

namespace forchestra::cli {

struct DatasetSource {
    std::string kind = "synthetic";  // synthetic | m5
    data::SyntheticSpec synthetic;
    std::string path;          // m5: wide sales CSV
    std::string availability;  // m5: optional 0/1 sidecar
    std::size_t max_rows = 0;
    std::size_t max_days = 0;
};

/// Everything a command needs; the resolved form is written to every run
/// directory and can be fed back through --config.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    DatasetSource dataset;
    experiment::ComparisonConfig run;  // split, model, optimisers, flags, filters, jobs
    std::size_t members = 1;           // pretrain-bp: independently trained predictors
    std::string init_nc;               // train: representation checkpoint
    std::string init_bps;              // train: base predictor checkpoint
    std::vector<baselines::EnsembleSpec> ensembles;  // empty: the default catalogue
    std::vector<std::uint64_t> seeds;                // compare / scaling; empty: {seed}
};

/// Desk-scale defaults: 200 x 400 synthetic days, K = 5, hidden 32.
ExperimentConfig default_config();

nlohmann::json to_json(const ExperimentConfig& c);
/// Keys absent from `doc` keep the values of `base`.
ExperimentConfig config_from_json(const nlohmann::json& doc, const ExperimentConfig& base = default_config());
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const baselines::EnsembleSpec& s);
baselines::EnsembleSpec ensemble_spec_from_json(const nlohmann::json& doc);

/// Window lengths taken from the model configuration.
data::WindowShape window_shape(const ExperimentConfig& c);

/// Loads or generates the dataset and sets the model input widths to match.
data::Dataset load_dataset(ExperimentConfig& c);

}  // namespace forchestra::cli
