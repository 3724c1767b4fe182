/**
 * \file select.hpp
 *
 * Finding the features that adversarial examples need.
 *
 * Round 0 attacks n examples with an empty subset in the mixed setting, so
 * every example falls through to the full attack and the witnesses give the
 * first perturbation counts. Each later round attacks n fresh examples in
 * the mixed setting with the current subset and measures the fraction of
 * false negatives. The subset is accepted once that fraction is at most
 * tau - Delta; otherwise it grows through the fraction schedule, ending at
 * the fallback fraction.
 */

#ifndef FASTADV_SELECT_HPP
#define FASTADV_SELECT_HPP

#include "feature_subset.hpp"
#include "pipeline.hpp"
#include "stat_test.hpp"

#include <algorithm>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fastadv {

/// A seeded random permutation of `data`, so consecutive slices are
/// samples without replacement.
inline std::vector<Example> shuffled(std::span<const Example> data, std::uint64_t seed)
{
    std::vector<Example> out(data.begin(), data.end());
    std::mt19937_64 rng(seed);
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

struct SelectionSchedule {
    std::vector<double> fractions{std::begin(kDefaultFractions), std::end(kDefaultFractions)};
    double fallback = kDefaultFallbackFraction;
};

struct SelectionReport {
    FeatureSubset subset;
    PerturbationCounts counts;
    /// Observed false-negative fraction of each test round, in order.
    std::vector<double> v_bar_history;
    double delta_margin = 0.0;
    /// Rounds run, including round 0.
    std::size_t rounds_used = 0;
    bool accepted = false;
    /// Every record produced while selecting, in pool order.
    std::vector<AttackRecord> records;
};

/**
 * Runs the selection rounds over `pool`, which must already be in random
 * order and hold at least (schedule size + 1) * n examples. `stat.N` is the
 * population the false negative rate refers to.
 */
inline SelectionReport select_subset(const Ensemble& e, std::span<const Example> pool, const RunConfig& run,
                                     const StatTestConfig& stat, const SelectionSchedule& schedule = {})
{
    const std::size_t n = stat.n;
    const std::size_t rounds = schedule.fractions.size() + 1;
    if (pool.size() < rounds * n)
        throw ConfigError("subset selection needs at least " + std::to_string(rounds * n) +
                          " examples, the pool has " + std::to_string(pool.size()));
    const std::size_t d = e.num_features();

    SelectionReport rep;
    rep.delta_margin = choose_margin(stat);
    rep.counts = PerturbationCounts(d);
    const double accept_at = stat.tau - rep.delta_margin;

    auto run_round = [&](std::size_t k, const FeatureSubset& subset) {
        const std::span<const Example> slice = pool.subspan(k * n, n);
        std::vector<AttackRecord> recs = generate(e, slice, subset.features, Setting::mixed, run, k * n);
        for (const ExamplePair& p : adversarial_pairs(slice, recs, k * n))
            rep.counts.add(p.first, p.second);
        std::size_t fn = 0;
        for (const AttackRecord& r : recs)
            fn += is_false_negative(r) ? 1 : 0;
        rep.records.insert(rep.records.end(), recs.begin(), recs.end());
        ++rep.rounds_used;
        return static_cast<double>(fn) / static_cast<double>(n);
    };

    run_round(0, FeatureSubset{});

    FeatureSubset subset = rank_features(rep.counts, schedule.fractions.front(), d);
    subset.round = 1;
    for (std::size_t k = 1; k < rounds; ++k) {
        const double v_bar = run_round(k, subset);
        rep.v_bar_history.push_back(v_bar);
        if (v_bar <= accept_at) {
            rep.accepted = true;
            rep.subset = std::move(subset);
            return rep;
        }
        const double next = k < schedule.fractions.size() ? schedule.fractions[k] : schedule.fallback;
        subset = expand_subset(subset, rep.counts, next, d);
        subset.round = k + 1;
    }
    rep.subset = std::move(subset);
    return rep;
}

} // namespace fastadv

#endif // FASTADV_SELECT_HPP
