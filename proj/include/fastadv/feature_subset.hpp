/**
 * \file feature_subset.hpp
 *
 * Counting which features adversarial examples change, and ranking them.
 */

#ifndef FASTADV_FEATURE_SUBSET_HPP
#define FASTADV_FEATURE_SUBSET_HPP

#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace fastadv {

/// Default subset fractions tried by the selection rounds, and the fallback.
inline constexpr double kDefaultFractions[] = {0.05, 0.10, 0.20, 0.30};
inline constexpr double kDefaultFallbackFraction = 0.40;

struct PerturbationCounts {
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    explicit PerturbationCounts(std::size_t d = 0) : counts(d, 0) {}

    std::size_t size() const { return counts.size(); }

    void add(const Example& x, const Example& adv)
    {
        if (x.size() != counts.size() || adv.size() != counts.size())
            throw ModelError("perturbation pair has the wrong dimension");
        for (std::size_t f = 0; f < counts.size(); ++f)
            if (adv.values[f] != x.values[f])
                ++counts[f];
        ++total;
    }

    void merge(const PerturbationCounts& o)
    {
        if (o.size() != size())
            throw ModelError("cannot merge counts of different dimension");
        for (std::size_t f = 0; f < counts.size(); ++f)
            counts[f] += o.counts[f];
        total += o.total;
    }
};

using ExamplePair = std::pair<Example, Example>;

/// For each feature, the number of pairs (x, adversarial) that differ on it.
inline PerturbationCounts count_perturbed(std::span<const ExamplePair> pairs, std::size_t d)
{
    PerturbationCounts c(d);
    for (const auto& [x, adv] : pairs)
        c.add(x, adv);
    return c;
}

struct FeatureSubset {
    /// Selected features, most perturbed first (ties by index).
    std::vector<FeatureId> features;
    double fraction = 0.0;
    /// Selection round that produced this subset.
    std::size_t round = 0;

    std::size_t size() const { return features.size(); }
    bool operator==(const FeatureSubset&) const = default;
};

/// Number of features a fraction of `d` stands for (rounded up).
inline std::size_t subset_size(double fraction, std::size_t d)
{
    // Guard against products like 0.05 * 100 landing a hair above an integer.
    const double want = fraction * static_cast<double>(d);
    return std::min(d, static_cast<std::size_t>(std::ceil(want - 1e-9)));
}

/// All features ordered by descending count, ties by ascending index.
inline std::vector<FeatureId> feature_ranking(const PerturbationCounts& counts)
{
    std::vector<FeatureId> order(counts.size());
    std::iota(order.begin(), order.end(), FeatureId{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](FeatureId a, FeatureId b) { return counts.counts[a] > counts.counts[b]; });
    return order;
}

inline FeatureSubset rank_features(const PerturbationCounts& counts, double fraction, std::size_t d)
{
    if (counts.size() != d)
        throw ModelError("counts cover " + std::to_string(counts.size()) + " features, expected " +
                         std::to_string(d));
    std::vector<FeatureId> order = feature_ranking(counts);
    order.resize(subset_size(fraction, d));
    return {std::move(order), fraction, 0};
}

/**
 * Grows `current` to ceil(fraction * d) features: keeps every current member
 * and tops up with the highest-ranked features not yet selected. The result
 * is re-sorted by the refreshed counts.
 */
inline FeatureSubset expand_subset(const FeatureSubset& current, const PerturbationCounts& counts, double fraction,
                                   std::size_t d)
{
    const std::size_t want = std::max(subset_size(fraction, d), current.size());
    std::vector<bool> in(d, false);
    std::vector<FeatureId> out = current.features;
    for (FeatureId f : out)
        in[f] = true;
    for (FeatureId f : feature_ranking(counts)) {
        if (out.size() >= want)
            break;
        if (!in[f]) {
            in[f] = true;
            out.push_back(f);
        }
    }
    std::stable_sort(out.begin(), out.end(), [&](FeatureId a, FeatureId b) {
        if (counts.counts[a] != counts.counts[b])
            return counts.counts[a] > counts.counts[b];
        return a < b;
    });
    return {std::move(out), fraction, current.round};
}

} // namespace fastadv

#endif // FASTADV_FEATURE_SUBSET_HPP
