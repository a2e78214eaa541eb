#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "forchestra/nn/tensor.hpp"

namespace forchestra::baselines {

struct KMeansResult {
    nn::Tensor centroids;                  // [K x D]
    std::vector<std::size_t> assignments;  // one cluster per point
    std::vector<double> inertia;           // after each assignment step
    std::size_t iterations = 0;
    bool converged = false;
    std::size_t reseeded = 0;  // empty clusters moved to the farthest point
};

/// Lloyd's algorithm from k-means++ seeding on the rows of `points` [N x D].
/// Ties go to the lower cluster index. Throws ConfigError when K is 0 or
/// exceeds N.
KMeansResult kmeans(const nn::Tensor& points, std::size_t K, std::size_t max_iters, std::uint64_t seed);

/// Index of the centroid closest to `point` (length D).
std::size_t nearest_centroid(const nn::Tensor& centroids, std::span<const double> point);

}  // namespace forchestra::baselines
