#include "forchestra/eval/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "forchestra/error.hpp"

namespace forchestra::eval {

namespace {

void check_permutations(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw ContractError("rbo: rankings have different lengths");
    std::vector<std::size_t> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (std::adjacent_find(sa.begin(), sa.end()) != sa.end()) throw ContractError("rbo: repeated item in ranking");
    if (sa != sb) throw ContractError("rbo: rankings cover different items");
}

const std::vector<std::size_t> kDefaultDepths{5, 10, 50};

}  // namespace

double rbo(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t depth, double p) {
    check_permutations(a, b);
    if (depth == 0) throw ContractError("rbo: depth must be at least 1");
    if (!(p > 0.0 && p < 1.0)) throw ContractError("rbo: persistence must lie in (0, 1)");
    if (a.empty()) throw ContractError("rbo: empty rankings");
    depth = std::min(depth, a.size());

    std::vector<std::size_t> sorted(a.begin(), a.end());
    std::sort(sorted.begin(), sorted.end());
    auto slot = [&](std::size_t item) {
        return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), item) - sorted.begin());
    };
    // seen[x]: bit 1 when x is in A's prefix, bit 2 for B's
    std::vector<unsigned char> seen(a.size(), 0);
    std::size_t overlap = 0;
    double num = 0.0, den = 0.0, weight = 1.0;
    for (std::size_t d = 1; d <= depth; ++d) {
        const std::size_t x = slot(a[d - 1]), y = slot(b[d - 1]);
        seen[x] |= 1;
        if (seen[x] == 3) ++overlap;
        if (!(seen[y] & 2)) {
            seen[y] |= 2;
            if (seen[y] == 3) ++overlap;
        }
        num += weight * static_cast<double>(overlap) / static_cast<double>(d);
        den += weight;
        weight *= p;
    }
    return num / den;
}

std::vector<std::size_t> rank_ascending(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
    return order;
}

std::vector<std::size_t> rank_descending(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] > values[j]; });
    return order;
}

const RankRow& RankingAnalysis::row(const std::string& comparison, std::size_t depth) const {
    for (const auto& r : rows) {
        if (r.comparison == comparison && r.depth == depth) return r;
    }
    throw ContractError("no rank row for " + comparison + "@" + std::to_string(depth));
}

void RankingAnalysis::write_csv(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "comparison,depth,effective_depth,rbo,instances\n" << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.comparison << ',' << r.depth << ',' << r.effective_depth << ',' << r.rbo << ',' << r.instances
            << '\n';
    }
}

RankingAnalysis rank_analysis(const RankingInputs& in, std::span<const std::size_t> depths, double p) {
    if (depths.empty()) depths = kDefaultDepths;
    const std::size_t N = in.test_mase.size();
    const std::size_t K = in.global_validation.size();
    if (K == 0) throw ContractError("rank analysis needs at least one model");
    if (in.conductor_weights.size() != N || in.instance_validation.size() != N) {
        throw ContractError("rank analysis inputs cover different instance counts");
    }
    for (std::size_t i = 0; i < N; ++i) {
        if (in.test_mase[i].size() != K || in.conductor_weights[i].size() != K ||
            in.instance_validation[i].size() != K) {
            throw ContractError("rank analysis inputs cover different model counts");
        }
    }

    RankingAnalysis out;
    out.models = K;
    const auto global_rank = rank_ascending(in.global_validation);
    const std::vector<std::string> names{"conductor", "global_validation", "instance_validation"};
    std::vector<std::vector<double>> sums(names.size(), std::vector<double>(depths.size(), 0.0));

    std::vector<double> buf(K);
    for (std::size_t i = 0; i < N; ++i) {
        bool defined = true;
        for (std::size_t k = 0; k < K; ++k) {
            if (!in.test_mase[i][k]) {
                defined = false;
                break;
            }
            buf[k] = *in.test_mase[i][k];
        }
        if (!defined) {
            ++out.instances_skipped;
            continue;
        }
        ++out.instances_used;
        const auto truth = rank_ascending(buf);
        const auto by_weight = rank_descending(in.conductor_weights[i]);

        std::vector<std::size_t> by_instance = global_rank;
        bool val_defined = true;
        for (std::size_t k = 0; k < K && val_defined; ++k) {
            if (in.instance_validation[i][k]) {
                buf[k] = *in.instance_validation[i][k];
            } else {
                val_defined = false;
            }
        }
        if (val_defined) {
            by_instance = rank_ascending(buf);
        } else {
            ++out.validation_fallbacks;
        }

        const std::vector<const std::vector<std::size_t>*> candidates{&by_weight, &global_rank, &by_instance};
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            for (std::size_t d = 0; d < depths.size(); ++d) sums[c][d] += rbo(truth, *candidates[c], depths[d], p);
        }
    }

    for (std::size_t d = 0; d < depths.size(); ++d) {
        if (depths[d] > K) {
            out.notes.push_back("depth " + std::to_string(depths[d]) + " exceeds K=" + std::to_string(K) +
                                "; clamped to " + std::to_string(K));
        }
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
        for (std::size_t d = 0; d < depths.size(); ++d) {
            RankRow r;
            r.comparison = names[c];
            r.depth = depths[d];
            r.effective_depth = std::min(depths[d], K);
            r.instances = out.instances_used;
            r.rbo = out.instances_used ? sums[c][d] / static_cast<double>(out.instances_used) : 0.0;
            out.rows.push_back(r);
        }
    }
    if (out.instances_used == 0) out.notes.push_back("no instance has a defined test MASE for every model");
    return out;
}

}  // namespace forchestra::eval
