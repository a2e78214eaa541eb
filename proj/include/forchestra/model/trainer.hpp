#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "forchestra/data/split.hpp"
#include "forchestra/nn/tape.hpp"

namespace forchestra::model {

struct OptimConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::size_t samples_per_epoch = 0;  // 0: every window once per epoch
    double clip_norm = 1.0;             // <= 0 disables clipping
    std::size_t probe_size = 128;       // fixed batch whose loss is tracked per epoch
};

nlohmann::json to_json(const OptimConfig& c);
OptimConfig optim_config_from_json(const nlohmann::json& doc);

struct EpochRecord {
    std::size_t epoch = 0;       // 1-based
    double train_loss = 0.0;     // mean minibatch loss over the epoch
    double probe_loss = 0.0;     // loss on the fixed probe batch after the epoch
    std::optional<double> validation;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::optional<double> initial_validation;
    std::size_t best_epoch = 0;  // 0: the initial parameters were kept
    std::size_t steps = 0;
};

/// Writes epoch,train_loss,probe_loss,validation rows.
void write_history_csv(const std::filesystem::path& path, const TrainResult& result);

/// Scaled predictions [B x P] for a batch, recorded on the tape.
using ForwardFn = std::function<nn::Var(nn::Tape&, const data::Batch&)>;
/// Validation score after an epoch (lower is better); nullopt when undefined.
using ValidateFn = std::function<std::optional<double>()>;

/// Scalar minibatch loss. `batch_seed` is fixed for the probe batch and
/// fresh for every training step, for losses that draw random augmentations.
using BatchLossFn = std::function<nn::Var(nn::Tape&, const data::Batch&, std::uint64_t batch_seed)>;

/// Minibatch Adam on `trainable`: each epoch visits a uniform subsample of
/// `windows` without replacement. When `validate` is given, the parameters in
/// `tracked` with the best score (including the initial state) are restored
/// at the end. Throws TrainingError on a non-finite loss.
TrainResult train_loop(const data::Dataset& dataset, const data::WindowSet& windows, const BatchLossFn& loss,
                       const std::vector<nn::Parameter*>& trainable, const std::vector<nn::Parameter*>& tracked,
                       const OptimConfig& config, std::uint64_t seed, const ValidateFn& validate = {},
                       bool with_target = true);

/// train_loop on the masked L1 forecast loss.
TrainResult train_on_windows(const data::Dataset& dataset, const data::WindowSet& windows, const ForwardFn& forward,
                             const std::vector<nn::Parameter*>& trainable, const std::vector<nn::Parameter*>& tracked,
                             const OptimConfig& config, std::uint64_t seed, const ValidateFn& validate = {});

/// The L1 objective on sale days of the scaled target.
nn::Var window_loss(nn::Tape& tape, nn::Var prediction, const data::Batch& batch);

}  // namespace forchestra::model
