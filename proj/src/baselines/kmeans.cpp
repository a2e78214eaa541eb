#include "forchestra/baselines/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "forchestra/error.hpp"
#include "forchestra/nn/init.hpp"

namespace forchestra::baselines {

namespace {

double sq_dist(const double* a, const double* b, std::size_t D) {
    double s = 0.0;
    for (std::size_t d = 0; d < D; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
}

}  // namespace

std::size_t nearest_centroid(const nn::Tensor& centroids, std::span<const double> point) {
    const std::size_t K = centroids.dim(0), D = centroids.dim(1);
    if (point.size() != D) throw DimensionError("nearest_centroid: point has the wrong width");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
        const double d = sq_dist(centroids.raw() + k * D, point.data(), D);
        if (d < best_d) best_d = d, best = k;
    }
    return best;
}

KMeansResult kmeans(const nn::Tensor& points, std::size_t K, std::size_t max_iters, std::uint64_t seed) {
    if (points.rank() != 2) throw DimensionError("kmeans: expected [N x D], got " + nn::to_string(points.shape()));
    const std::size_t N = points.dim(0), D = points.dim(1);
    if (K == 0) throw ConfigError("kmeans: K must be >= 1");
    if (K > N) throw ConfigError("kmeans: K = " + std::to_string(K) + " exceeds " + std::to_string(N) + " points");
    auto row = [&](std::size_t i) { return points.raw() + i * D; };
    nn::Rng rng(seed);

    KMeansResult out;
    out.centroids = nn::Tensor({K, D});
    auto centroid = [&](std::size_t k) { return out.centroids.raw() + k * D; };

    // k-means++: each next centre drawn with probability proportional to the
    // squared distance to the nearest chosen one
    std::vector<double> closest(N, std::numeric_limits<double>::infinity());
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, N - 1)(rng);
    for (std::size_t k = 0; k < K; ++k) {
        std::copy_n(row(pick), D, centroid(k));
        double total = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            closest[i] = std::min(closest[i], sq_dist(row(i), centroid(k), D));
            total += closest[i];
        }
        if (k + 1 == K) break;
        if (total > 0.0) {
            std::discrete_distribution<std::size_t> draw(closest.begin(), closest.end());
            pick = draw(rng);
        } else {
            pick = (pick + 1) % N;  // every point coincides with a centre
        }
    }

    out.assignments.assign(N, K);
    for (std::size_t it = 0; it < std::max<std::size_t>(max_iters, 1); ++it) {
        bool changed = false;
        double inertia = 0.0;
        std::vector<double> dist(N);
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t a = nearest_centroid(out.centroids, std::span(row(i), D));
            dist[i] = sq_dist(row(i), centroid(a), D);
            inertia += dist[i];
            changed |= a != out.assignments[i];
            out.assignments[i] = a;
        }
        out.inertia.push_back(inertia);
        out.iterations = it + 1;
        if (!changed) {
            out.converged = true;
            break;
        }
        std::vector<std::size_t> counts(K, 0);
        out.centroids.fill(0.0);
        for (std::size_t i = 0; i < N; ++i) {
            ++counts[out.assignments[i]];
            double* c = centroid(out.assignments[i]);
            for (std::size_t d = 0; d < D; ++d) c[d] += row(i)[d];
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (counts[k] == 0) continue;
            for (std::size_t d = 0; d < D; ++d) centroid(k)[d] /= static_cast<double>(counts[k]);
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (counts[k] != 0) continue;
            // move the empty centre onto the point worst served by its own centre
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double d = sq_dist(row(i), centroid(out.assignments[i]), D);
                if (counts[out.assignments[i]] > 1 && d > far_d) far_d = d, far = i;
            }
            std::copy_n(row(far), D, centroid(k));
            --counts[out.assignments[far]];
            ++counts[k];
            out.assignments[far] = k;
            ++out.reseeded;
        }
    }
    return out;
}

}  // namespace forchestra::baselines
