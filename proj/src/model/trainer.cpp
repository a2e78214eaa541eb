#include "forchestra/model/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "forchestra/error.hpp"
#include "forchestra/nn/adam.hpp"
#include "forchestra/nn/init.hpp"
#include "forchestra/nn/ops.hpp"

namespace forchestra::model {

nlohmann::json to_json(const OptimConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"samples_per_epoch", c.samples_per_epoch},
            {"clip_norm", c.clip_norm},
            {"probe_size", c.probe_size}};
}

OptimConfig optim_config_from_json(const nlohmann::json& doc) {
    OptimConfig c;
    try {
        c.epochs = doc.value("epochs", c.epochs);
        c.batch_size = doc.value("batch_size", c.batch_size);
        c.learning_rate = doc.value("learning_rate", c.learning_rate);
        c.samples_per_epoch = doc.value("samples_per_epoch", c.samples_per_epoch);
        c.clip_norm = doc.value("clip_norm", c.clip_norm);
        c.probe_size = doc.value("probe_size", c.probe_size);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("optimizer config: ") + e.what());
    }
    if (c.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    return c;
}

void write_history_csv(const std::filesystem::path& path, const TrainResult& result) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << std::setprecision(17);
    out << "epoch,train_loss,probe_loss,validation\n";
    for (const auto& r : result.history) {
        out << r.epoch << ',' << r.train_loss << ',' << r.probe_loss << ',';
        if (r.validation) out << *r.validation;
        out << '\n';
    }
}

nn::Var window_loss(nn::Tape& tape, nn::Var prediction, const data::Batch& batch) {
    return nn::masked_l1_loss(tape, prediction, tape.constant(batch.target), batch.target_mask.data());
}

namespace {

std::vector<nn::Tensor> snapshot(const std::vector<nn::Parameter*>& params) {
    std::vector<nn::Tensor> out;
    out.reserve(params.size());
    for (const auto* p : params) out.push_back(p->value);
    return out;
}

}  // namespace

TrainResult train_on_windows(const data::Dataset& ds, const data::WindowSet& windows, const ForwardFn& forward,
                             const std::vector<nn::Parameter*>& trainable, const std::vector<nn::Parameter*>& tracked,
                             const OptimConfig& cfg, std::uint64_t seed, const ValidateFn& validate) {
    return train_loop(
        ds, windows,
        [&](nn::Tape& tape, const data::Batch& batch, std::uint64_t) { return window_loss(tape, forward(tape, batch), batch); },
        trainable, tracked, cfg, seed, validate);
}

TrainResult train_loop(const data::Dataset& ds, const data::WindowSet& windows, const BatchLossFn& loss_fn,
                       const std::vector<nn::Parameter*>& trainable, const std::vector<nn::Parameter*>& tracked,
                       const OptimConfig& cfg, std::uint64_t seed, const ValidateFn& validate, bool with_target) {
    if (windows.empty()) throw ConfigError("training needs at least one window");
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    TrainResult result;
    nn::Rng rng(nn::derive_seed(seed, 0x7a11));

    // the probe batch is drawn once from its own stream
    std::vector<data::WindowSample> probe_samples;
    {
        nn::Rng probe_rng(nn::derive_seed(seed, 0x9b0e));
        std::uniform_int_distribution<std::size_t> pick(0, windows.size() - 1);
        for (std::size_t i = 0; i < std::min(cfg.probe_size, windows.size()); ++i) {
            probe_samples.push_back(windows[pick(probe_rng)]);
        }
    }
    const data::Batch probe = data::make_batch(ds, probe_samples, with_target);
    const std::uint64_t probe_seed = nn::derive_seed(seed, 0x9b0f);
    const std::uint64_t step_seed = nn::derive_seed(seed, 0x57e9);
    auto probe_loss = [&] {
        nn::Tape tape(false);
        return tape.value(loss_fn(tape, probe, probe_seed)).item();
    };

    std::optional<double> best;
    std::vector<nn::Tensor> best_values;
    if (validate) {
        result.initial_validation = validate();
        best = result.initial_validation;
        best_values = snapshot(tracked);
    }

    nn::AdamState adam;
    adam.config.learning_rate = cfg.learning_rate;
    std::vector<std::size_t> order(windows.size());
    const std::size_t per_epoch =
        cfg.samples_per_epoch == 0 ? windows.size() : std::min(cfg.samples_per_epoch, windows.size());

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // partial Fisher-Yates: uniform subsample without replacement
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = 0; i < per_epoch; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
            std::swap(order[i], order[pick(rng)]);
        }
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < per_epoch; start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, per_epoch - start);
            std::vector<data::WindowSample> samples;
            samples.reserve(n);
            for (std::size_t i = 0; i < n; ++i) samples.push_back(windows[order[start + i]]);
            const data::Batch batch = data::make_batch(ds, samples, with_target);

            nn::zero_gradients(tracked);
            nn::zero_gradients(trainable);
            nn::Tape tape;
            ++result.steps;
            const nn::Var loss = loss_fn(tape, batch, nn::derive_seed(step_seed, result.steps));
            const double value = tape.value(loss).item();
            if (!std::isfinite(value)) throw TrainingError("non-finite training loss", result.steps);
            tape.backward(loss);
            if (!trainable.empty()) {
                nn::clip_grad_norm(trainable, cfg.clip_norm);
                nn::adam_step(trainable, adam);
            }
            loss_sum += value;
            ++batches;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        rec.probe_loss = probe_loss();
        if (!std::isfinite(rec.probe_loss)) throw TrainingError("non-finite probe loss", result.steps);
        if (validate) {
            rec.validation = validate();
            if (rec.validation && (!best || *rec.validation < *best)) {
                best = rec.validation;
                best_values = snapshot(tracked);
                result.best_epoch = epoch;
            }
        } else {
            result.best_epoch = epoch;
        }
        result.history.push_back(rec);
    }
    if (validate && best) {
        for (std::size_t i = 0; i < tracked.size(); ++i) tracked[i]->value = best_values[i];
    }
    return result;
}

}  // namespace forchestra::model
