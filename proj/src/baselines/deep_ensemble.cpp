#include "forchestra/baselines/deep_ensemble.hpp"

#include <optional>

#include "forchestra/error.hpp"
#include "forchestra/util/parallel.hpp"

namespace forchestra::baselines {

DeepEnsemble deep_ensembles(const model::BasePredictorConfig& config, const data::Dataset& ds,
                            const data::WindowSet& windows, const model::OptimConfig& optim,
                            std::span<const std::uint64_t> seeds, const model::ValidationSet* validation,
                            std::size_t jobs) {
    if (seeds.empty()) throw ConfigError("deep ensemble needs at least one member");
    std::vector<std::optional<model::BpTrainResult>> runs(seeds.size());
    util::parallel_for(seeds.size(), jobs, [&](std::size_t m) {
        try {
            runs[m] = model::pretrain_bp(config, ds, windows, optim, seeds[m], validation);
        } catch (const TrainingError& e) {
            throw TrainingError("ensemble member with seed " + std::to_string(seeds[m]) + " diverged", e.step());
        }
    });
    DeepEnsemble out;
    for (auto& r : runs) {
        out.members.push_back(std::move(r->bp));
        out.training.push_back(std::move(r->training));
    }
    return out;
}

eval::BatchPredictor ensemble_predictor(DeepEnsemble& ensemble) {
    return [&ensemble](const data::Batch& batch) {
        const nn::Tensor joint = model::joint_predict(ensemble.members, batch.context);
        const std::size_t B = joint.dim(0), K = joint.dim(1), P = joint.dim(2);
        nn::Tensor out({B, P});
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t p = 0; p < P; ++p) {
                double s = 0.0;
                for (std::size_t k = 0; k < K; ++k) s += joint.at(b, k, p);
                out.at(b, p) = s / static_cast<double>(K);
            }
        }
        return out;
    };
}

}  // namespace forchestra::baselines
