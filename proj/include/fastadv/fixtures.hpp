/**
 * \file fixtures.hpp
 *
 * Synthetic models and datasets with known structure, used by the tests,
 * the benchmark harness and the `gen` command.
 */

#ifndef FASTADV_FIXTURES_HPP
#define FASTADV_FIXTURES_HPP

#include "model.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

namespace fastadv::fixtures {

/// (f0 < 0.5 ? +1 : -1) + (f1 < 0.5 ? +1 : -1) over two features.
inline Ensemble two_stumps()
{
    auto stump = [](FeatureId f) {
        return Tree({Node::split(f, 0.5, 1, 2), Node::leaf(1.0), Node::leaf(-1.0)});
    };
    return Ensemble({stump(0), stump(1)}, 2, 0.0);
}

/// `k` distinct features out of `d`, chosen by `seed`, ascending.
inline std::vector<FeatureId> pick_features(std::size_t d, std::size_t k, std::uint64_t seed)
{
    std::vector<FeatureId> all(d);
    std::iota(all.begin(), all.end(), FeatureId{0});
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(k, d));
    std::sort(all.begin(), all.end());
    return all;
}

struct SparseFixtureParams {
    std::size_t num_features = 100;
    std::size_t informative = 3;
    std::size_t trees = 20;
    std::size_t depth = 5;
    double leaf_scale = 1.0;
    /// Low-weight trees splitting only on the other features.
    std::size_t noise_trees = 0;
    std::size_t noise_depth = 3;
    double noise_scale = 0.01;
    std::uint64_t seed = 0;
};

struct SparseFixture {
    Ensemble model;
    std::vector<FeatureId> informative;
};

/**
 * A model whose large-valued trees split only on a few informative features,
 * optionally followed by small-valued trees over the remaining features.
 */
inline SparseFixture sparse_fixture(const SparseFixtureParams& p)
{
    SparseFixture fx;
    fx.informative = pick_features(p.num_features, p.informative, p.seed ^ 0x9e3779b97f4a7c15ULL);
    RandomEnsembleParams main{p.trees, p.depth, p.num_features, p.leaf_scale, p.seed, fx.informative};
    fx.model = random_ensemble(main);
    if (p.noise_trees > 0) {
        std::vector<FeatureId> rest;
        for (FeatureId f = 0; f < p.num_features; ++f)
            if (!std::binary_search(fx.informative.begin(), fx.informative.end(), f))
                rest.push_back(f);
        RandomEnsembleParams noise{p.noise_trees, p.noise_depth, p.num_features, p.noise_scale, p.seed + 1,
                                   std::move(rest)};
        fx.model = merge(fx.model, random_ensemble(noise));
    }
    return fx;
}

/**
 * One stump per feature, arranged so that only crossing every threshold
 * flips the label: feature values in [0.5, 0.5 + spread) classify +1, and
 * each stump moved below 0.5 subtracts 2 from a margin of 2d - 1.
 */
inline Ensemble parity_ensemble(std::size_t d)
{
    std::vector<Tree> trees;
    for (FeatureId f = 0; f < d; ++f)
        trees.emplace_back(std::vector<Node>{Node::split(f, 0.5, 1, 2), Node::leaf(-1.0), Node::leaf(1.0)});
    return Ensemble(std::move(trees), d, static_cast<double>(d) - 1.0);
}

/// Examples with every feature uniform in [lo, hi), labelled by `model`.
inline std::vector<Example> random_examples(const Ensemble& model, std::size_t count, std::uint64_t seed,
                                            double lo = 0.0, double hi = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Example> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Example x;
        x.values.resize(model.num_features());
        for (double& v : x.values)
            v = u(rng);
        x.label = predict_label(model, x);
        out.push_back(std::move(x));
    }
    return out;
}

} // namespace fastadv::fixtures

#endif // FASTADV_FIXTURES_HPP
