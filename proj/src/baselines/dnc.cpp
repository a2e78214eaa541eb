#include "forchestra/baselines/dnc.hpp"

#include <algorithm>
#include <numeric>

#include "forchestra/error.hpp"
#include "forchestra/util/parallel.hpp"

namespace forchestra::baselines {

nn::Tensor representations_at(model::RepresentationModule& rm, const data::Dataset& ds,
                              std::span<const std::size_t> instances, std::size_t anchor) {
    std::vector<data::WindowSample> samples;
    for (std::size_t i : instances) samples.push_back({i, anchor});
    if (samples.empty()) return nn::Tensor({0, rm.config.output_dim});
    const data::Batch batch = data::make_batch(ds, samples, false);
    return model::instance_representation(rm, batch.rep_context);
}

DncModel dnc_train(const data::Dataset& ds, const model::RepresentationModule& rm, const model::BasePredictor& initial,
                   std::span<const std::size_t> instances, data::TimeRange region, const DncConfig& cfg,
                   std::uint64_t seed, const model::ValidationSet* validation, std::size_t jobs) {
    if (instances.empty()) throw ConfigError("dnc_train needs at least one instance");
    if (region.size() == 0) throw ConfigError("dnc_train needs a nonempty region");
    DncModel m;
    m.rm = rm;
    const nn::Tensor reps = representations_at(m.rm, ds, instances, region.end - 1);
    m.clustering = kmeans(reps, cfg.K, cfg.kmeans_iters, nn::derive_seed(seed, 1));
    m.centroids = m.clustering.centroids;
    m.bps = model::spawn_bps(initial, cfg.K, cfg.perturbation, nn::derive_seed(seed, 2));
    m.assignment.assign(ds.size(), std::nullopt);
    std::vector<std::vector<std::size_t>> members(cfg.K);
    for (std::size_t j = 0; j < instances.size(); ++j) {
        m.assignment[instances[j]] = m.clustering.assignments[j];
        members[m.clustering.assignments[j]].push_back(instances[j]);
    }
    std::vector<std::uint8_t> skipped(cfg.K, 0);  // not vector<bool>: written from worker threads
    util::parallel_for(cfg.K, jobs, [&](std::size_t k) {
        auto& own = members[k];
        std::sort(own.begin(), own.end());
        const data::WindowSet windows = data::make_windows(ds, own, region, 1);
        if (windows.empty()) {
            skipped[k] = 1;
            return;
        }
        std::optional<model::ValidationSet> val;
        if (validation != nullptr) {
            val = *validation;
            std::vector<std::size_t> keep;
            std::set_intersection(validation->instances.begin(), validation->instances.end(), own.begin(), own.end(),
                                  std::back_inserter(keep));
            val->instances = std::move(keep);
            if (val->instances.empty()) val.reset();
        }
        model::fit_bp(m.bps[k], ds, windows, cfg.optim, nn::derive_seed(seed, 10 + k), val ? &*val : nullptr);
    });
    m.untrained.assign(skipped.begin(), skipped.end());
    return m;
}

std::vector<std::size_t> route(DncModel& m, const data::Batch& batch) {
    std::vector<std::size_t> out(batch.size());
    std::optional<nn::Tensor> reps;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const std::size_t i = batch.samples[b].instance;
        if (i < m.assignment.size() && m.assignment[i]) {
            out[b] = *m.assignment[i];
            continue;
        }
        if (!reps) reps = model::instance_representation(m.rm, batch.rep_context);
        const std::size_t D = reps->dim(1);
        out[b] = nearest_centroid(m.centroids, std::span<const double>(reps->raw() + b * D, D));
    }
    return out;
}

eval::BatchPredictor dnc_predictor(DncModel& m) {
    return [&m](const data::Batch& batch) {
        const auto clusters = route(m, batch);
        const std::size_t B = batch.size(), P = m.bps.front().config.prediction_length;
        const std::size_t C = batch.context.dim(1), F = batch.context.dim(2);
        nn::Tensor out({B, P});
        for (std::size_t k = 0; k < m.bps.size(); ++k) {
            std::vector<std::size_t> rows;
            for (std::size_t b = 0; b < B; ++b) {
                if (clusters[b] == k) rows.push_back(b);
            }
            if (rows.empty()) continue;
            nn::Tensor ctx({rows.size(), C, F});
            for (std::size_t r = 0; r < rows.size(); ++r) {
                std::copy_n(batch.context.raw() + rows[r] * C * F, C * F, ctx.raw() + r * C * F);
            }
            const nn::Tensor pred = model::predict(m.bps[k], ctx);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                std::copy_n(pred.raw() + r * P, P, out.raw() + rows[r] * P);
            }
        }
        return out;
    };
}

double cluster_agreement(std::span<const std::size_t> clusters, std::span<const std::size_t> labels) {
    if (clusters.size() != labels.size()) throw DimensionError("cluster_agreement: length mismatch");
    if (clusters.empty()) return 1.0;
    const std::size_t n = std::max(*std::max_element(clusters.begin(), clusters.end()),
                                   *std::max_element(labels.begin(), labels.end())) + 1;
    if (n > 9) throw ConfigError("cluster_agreement: at most 9 clusters are supported");
    std::vector<std::vector<std::size_t>> counts(n, std::vector<std::size_t>(n, 0));
    for (std::size_t i = 0; i < clusters.size(); ++i) ++counts[clusters[i]][labels[i]];
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hit = 0;
        for (std::size_t c = 0; c < n; ++c) hit += counts[c][perm[c]];
        best = std::max(best, hit);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(clusters.size());
}

}  // namespace forchestra::baselines
