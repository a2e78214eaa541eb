#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "forchestra/baselines/kmeans.hpp"
#include "forchestra/model/pretrain_bp.hpp"
#include "forchestra/model/representation.hpp"

namespace forchestra::baselines {

/// Instance representations [N x D] from the W days ending at `anchor`.
nn::Tensor representations_at(model::RepresentationModule& rm, const data::Dataset& dataset,
                              std::span<const std::size_t> instances, std::size_t anchor);

/// Divide and conquer: one expert per k-means cluster of instance
/// representations.
struct DncModel {
    model::RepresentationModule rm;
    nn::Tensor centroids;                                 // [K x D]
    std::vector<model::BasePredictor> bps;                // one per cluster
    std::vector<std::optional<std::size_t>> assignment;   // per dataset index, set for clustered instances
    std::vector<bool> untrained;                          // clusters with no member keep their initialisation
    KMeansResult clustering;
};

struct DncConfig {
    std::size_t K = 4;
    double perturbation = 1e-3;  // spawn noise around the shared initial predictor
    std::size_t kmeans_iters = 100;
    model::OptimConfig optim;
};

/// Clusters `instances` by their representation at the end of `region`,
/// spawns K predictors from `initial`, and fine-tunes each on the windows of
/// its own cluster only. `validation`, when given, is restricted per cluster.
DncModel dnc_train(const data::Dataset& dataset, const model::RepresentationModule& rm,
                   const model::BasePredictor& initial, std::span<const std::size_t> instances,
                   data::TimeRange region, const DncConfig& config, std::uint64_t seed,
                   const model::ValidationSet* validation = nullptr, std::size_t jobs = 1);

/// Cluster per batch row: the stored assignment for clustered instances,
/// else the nearest centroid of the row's representation.
std::vector<std::size_t> route(DncModel& model, const data::Batch& batch);

/// Each row predicted by its routed expert alone.
eval::BatchPredictor dnc_predictor(DncModel& model);

/// Fraction of instances whose cluster maps to their label under the best
/// one-to-one matching of clusters to labels.
double cluster_agreement(std::span<const std::size_t> clusters, std::span<const std::size_t> labels);

}  // namespace forchestra::baselines
