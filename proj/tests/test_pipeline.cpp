#include "oracles.hpp"

#include <fastadv/fixtures.hpp>
#include <fastadv/pipeline.hpp>

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace fastadv;

namespace {

PhaseResult phase(Status s, double wall = 0.0, double margin = 0.0)
{
    PhaseResult p;
    p.outcome.status = s;
    p.outcome.margin = margin;
    if (s == Status::sat)
        p.outcome.witness = Example{{0.0}, {}};
    p.wall_s = wall;
    return p;
}

AttackRecord paired(std::size_t id, Status pruned, Status full, double wall = 0.0)
{
    AttackRecord r;
    r.example_id = id;
    r.setting = Setting::mixed;
    r.pruned = phase(pruned, wall);
    if (pruned != Status::sat) {
        r.full = phase(full, wall);
        r.used_fallback = true;
    }
    r.final_outcome = pruned == Status::sat ? r.pruned->outcome : r.full->outcome;
    return r;
}

AttackRecord full_only(std::size_t id, Status s, double wall, double margin = 0.0)
{
    AttackRecord r;
    r.example_id = id;
    r.full = phase(s, wall, margin);
    r.final_outcome = r.full->outcome;
    return r;
}

std::vector<FeatureId> all_features(std::size_t d)
{
    std::vector<FeatureId> f(d);
    std::iota(f.begin(), f.end(), FeatureId{0});
    return f;
}

} // namespace

TEST(Settings, ParseAndPrint)
{
    for (Setting s : {Setting::full, Setting::pruned, Setting::mixed})
        EXPECT_EQ(parse_setting(to_string(s)), s);
    EXPECT_EQ(parse_engine("exact"), EngineKind::exact);
    EXPECT_EQ(parse_engine("heuristic"), EngineKind::heuristic);
    EXPECT_THROW(parse_setting("half"), ConfigError);
    EXPECT_THROW(parse_engine("fast"), ConfigError);
    EXPECT_EQ(default_pruned_timeout(EngineKind::exact), 1.0);
    EXPECT_EQ(default_pruned_timeout(EngineKind::heuristic), 0.1);
}

TEST(RunConfig, Validation)
{
    RunConfig c;
    EXPECT_NO_THROW(c.validate());
    c.t_prun = 60.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.delta = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.threads = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Generate, FullSettingHasNoPrunedPhase)
{
    Ensemble e = random_ensemble({10, 3, 6, 1.0, 4, {}});
    auto data = fixtures::random_examples(e, 30, 9);
    auto recs = generate(e, data, {}, Setting::full, RunConfig::untimed(0.1));
    ASSERT_EQ(recs.size(), data.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(recs[i].example_id, i);
        EXPECT_FALSE(recs[i].pruned);
        EXPECT_TRUE(recs[i].full);
        EXPECT_FALSE(recs[i].used_fallback);
    }
}

TEST(Generate, MixedWithAllFeaturesNeverFallsBackWithoutTimeout)
{
    Ensemble e = random_ensemble({10, 3, 6, 1.0, 4, {}});
    auto data = fixtures::random_examples(e, 40, 10);
    auto recs = generate(e, data, all_features(6), Setting::mixed, RunConfig::untimed(0.1));
    std::size_t unsat = 0;
    for (const AttackRecord& r : recs) {
        ASSERT_TRUE(r.pruned);
        EXPECT_EQ(r.used_fallback, r.pruned->outcome.status == Status::timeout);
        unsat += r.final_outcome.status == Status::unsat ? 1 : 0;
    }
    EXPECT_GT(unsat, 0u);
    EXPECT_EQ(false_negative_rate(recs), 0.0);
}

TEST(Generate, MisclassifiedExamplesAreNotAttacked)
{
    Ensemble e = fixtures::two_stumps();
    std::vector<Example> data{{{0.6, 0.6}, 1}, {{0.6, 0.6}, -1}};
    auto recs = generate(e, data, {}, Setting::full, RunConfig::untimed(0.2));
    EXPECT_EQ(recs[0].status, RecordStatus::misclassified);
    EXPECT_TRUE(recs[0].final_outcome.is_sat());
    EXPECT_EQ(recs[0].final_outcome.witness->values, data[0].values);
    EXPECT_EQ(recs[1].status, RecordStatus::attacked);
    EXPECT_TRUE(recs[1].final_outcome.is_sat());
}

TEST(Generate, ThreadsGiveSameOutcomes)
{
    Ensemble e = random_ensemble({15, 4, 8, 1.0, 6, {}});
    auto data = fixtures::random_examples(e, 60, 1);
    RunConfig one = RunConfig::untimed(0.1);
    RunConfig four = one;
    four.threads = 4;
    auto a = generate(e, data, all_features(8), Setting::mixed, one, 100);
    auto b = generate(e, data, all_features(8), Setting::mixed, four, 100);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].example_id, 100 + i);
        EXPECT_EQ(b[i].example_id, 100 + i);
        EXPECT_EQ(a[i].final_outcome.status, b[i].final_outcome.status);
        EXPECT_EQ(a[i].final_outcome.witness, b[i].final_outcome.witness);
        EXPECT_EQ(a[i].expansions(), b[i].expansions());
    }
}

TEST(Generate, NodeBudgetTimesOutAndMixedFallsBack)
{
    Ensemble e = random_ensemble({30, 4, 6, 1.0, 2, {}});
    auto data = fixtures::random_examples(e, 10, 3);
    RunConfig c = RunConfig::untimed(0.3);
    c.node_budget = 1;
    auto recs = generate(e, data, all_features(6), Setting::mixed, c);
    for (const AttackRecord& r : recs) {
        if (r.pruned->outcome.status == Status::timeout) {
            EXPECT_TRUE(r.used_fallback);
            EXPECT_TRUE(r.full);
        }
    }
}

TEST(Generate, RejectsBadSubset)
{
    Ensemble e = fixtures::two_stumps();
    std::vector<Example> data{{{0.6, 0.6}, {}}};
    std::vector<FeatureId> bad{7};
    EXPECT_THROW(generate(e, data, bad, Setting::pruned, RunConfig::untimed(0.2)), ModelError);
}

TEST(FalseNegativeRate, Examples)
{
    std::vector<AttackRecord> none;
    for (std::size_t i = 0; i < 10; ++i)
        none.push_back(paired(i, i % 2 ? Status::sat : Status::timeout, Status::sat));
    EXPECT_EQ(false_negative_rate(none), 0.0);

    std::vector<AttackRecord> all;
    for (std::size_t i = 0; i < 10; ++i)
        all.push_back(paired(i, Status::unsat, Status::sat));
    EXPECT_EQ(false_negative_rate(all), 1.0);

    std::vector<AttackRecord> mix;
    for (std::size_t i = 0; i < 100; ++i) {
        if (i < 7)
            mix.push_back(paired(i, Status::unsat, Status::sat));
        else if (i < 10)
            mix.push_back(paired(i, Status::timeout, Status::sat));
        else
            mix.push_back(paired(i, i % 2 ? Status::sat : Status::unsat, Status::unsat));
    }
    EXPECT_DOUBLE_EQ(false_negative_rate(mix), 0.07);
}

TEST(FalseNegativeRate, NeedsPairing)
{
    std::vector<AttackRecord> r{full_only(0, Status::sat, 1.0)};
    EXPECT_THROW(false_negative_rate(r), ConfigError);
    EXPECT_FALSE(summarize(r).fnr);
}

TEST(PairRecords, CombinesRuns)
{
    Ensemble e = fixtures::two_stumps();
    std::vector<Example> data{{{0.6, 0.6}, {}}, {{0.9, 0.9}, {}}};
    std::vector<FeatureId> f0{0};
    RunConfig c = RunConfig::untimed(0.2);
    auto pruned = generate(e, data, f0, Setting::pruned, c);
    auto full = generate(e, data, {}, Setting::full, c);
    auto both = pair_records(pruned, full);
    ASSERT_EQ(both.size(), 2u);
    EXPECT_TRUE(both[0].pruned && both[0].full);
    EXPECT_TRUE(both[0].pruned->outcome.is_sat());
    EXPECT_EQ(both[1].pruned->outcome.status, Status::unsat);
    EXPECT_EQ(both[1].full->outcome.status, Status::unsat);
    EXPECT_EQ(false_negative_rate(both), 0.0);
    EXPECT_THROW(pair_records(pruned, std::span<const AttackRecord>(full).first(1)), ConfigError);
}

TEST(Summarize, SpeedupArithmetic)
{
    std::vector<AttackRecord> ref, run;
    for (std::size_t i = 0; i < 4; ++i) {
        ref.push_back(full_only(i, Status::sat, 50.0));
        run.push_back(full_only(i, Status::sat, 6.25));
    }
    RunSummary s = summarize(run, std::span<const AttackRecord>(ref));
    ASSERT_TRUE(s.speedup);
    EXPECT_DOUBLE_EQ(*s.speedup, 8.0);
    RunSummary self = summarize(ref, std::span<const AttackRecord>(ref));
    EXPECT_DOUBLE_EQ(*self.speedup, 1.0);
    EXPECT_DOUBLE_EQ(*self.mean_probability_delta, 0.0);
}

TEST(Summarize, Counts)
{
    std::vector<AttackRecord> recs;
    recs.push_back(paired(0, Status::unsat, Status::sat, 1.0));
    recs.push_back(paired(1, Status::timeout, Status::unsat, 1.0));
    recs.push_back(paired(2, Status::sat, Status::sat, 1.0));
    AttackRecord skipped;
    skipped.example_id = 3;
    skipped.status = RecordStatus::skipped;
    skipped.final_outcome.status = Status::timeout;
    recs.push_back(skipped);
    AttackRecord mis;
    mis.example_id = 4;
    mis.status = RecordStatus::misclassified;
    mis.final_outcome.status = Status::sat;
    recs.push_back(mis);

    RunSummary s = summarize(recs);
    EXPECT_EQ(s.records, 5u);
    EXPECT_EQ(s.attacked, 3u);
    EXPECT_EQ(s.skipped, 1u);
    EXPECT_EQ(s.misclassified, 1u);
    EXPECT_EQ(s.sat, 2u);
    EXPECT_EQ(s.unsat, 1u);
    EXPECT_EQ(s.full_calls, 2u);
    EXPECT_EQ(s.false_negatives, 1u);
    EXPECT_DOUBLE_EQ(*s.fnr, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.fallback_fraction, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.skipped_fraction, 0.2);
    EXPECT_DOUBLE_EQ(s.total_wall_s, 5.0);
}

TEST(Histogram, Buckets)
{
    PerturbationCounts none(10);
    none.total = 100;
    Histogram h = perturbation_histogram(none);
    EXPECT_EQ(h.never, 10u);
    EXPECT_EQ(h.rare, 0u);
    EXPECT_EQ(h.frequent, 0u);

    PerturbationCounts empty(4);
    EXPECT_EQ(perturbation_histogram(empty).never, 4u);

    PerturbationCounts c(4);
    c.total = 100;
    c.counts = {1, 5, 6, 0};
    h = perturbation_histogram(c);
    EXPECT_EQ(h.never, 1u);
    EXPECT_EQ(h.rare, 2u); // 1% and exactly 5%
    EXPECT_EQ(h.frequent, 1u);
    EXPECT_EQ(h.frequent_features, (std::vector<FeatureId>{2}));
}

TEST(Histogram, FromPairs)
{
    std::vector<ExamplePair> pairs;
    for (int i = 0; i < 100; ++i) {
        Example x{{0.0, 0.0}, {}};
        Example y = x;
        if (i == 0)
            y.values[0] = 1.0;
        pairs.emplace_back(x, y);
    }
    Histogram h = perturbation_histogram(pairs, 100, 2);
    EXPECT_EQ(h.rare, 1u);
    EXPECT_EQ(h.never, 1u);
}

TEST(ProbabilityDelta, Examples)
{
    std::vector<AttackRecord> a{full_only(0, Status::sat, 1.0, 2.0)};
    std::vector<AttackRecord> b{full_only(0, Status::sat, 1.0, 1.0)};
    auto d = probability_delta(a, b);
    ASSERT_TRUE(d);
    EXPECT_NEAR(*d, sigmoid(2.0) - sigmoid(1.0), 1e-15);
    EXPECT_NEAR(*d, 0.1497, 1e-4);
    EXPECT_EQ(*probability_delta(a, a), 0.0);

    // Flip towards -1: confidence is 1 - sigmoid.
    std::vector<AttackRecord> c{full_only(0, Status::sat, 1.0, -2.0)};
    std::vector<AttackRecord> e{full_only(0, Status::sat, 1.0, -1.0)};
    EXPECT_NEAR(*probability_delta(c, e), sigmoid(2.0) - sigmoid(1.0), 1e-15);

    std::vector<AttackRecord> unsat{full_only(0, Status::unsat, 1.0)};
    EXPECT_FALSE(probability_delta(a, unsat));
}

TEST(ProbabilityDelta, ZeroWhenPrunedSearchSpaceIsFull)
{
    Ensemble e = random_ensemble({10, 3, 5, 1.0, 12, {}});
    auto data = fixtures::random_examples(e, 50, 2);
    RunConfig c = RunConfig::untimed(0.2);
    auto full = generate(e, data, {}, Setting::full, c);
    auto pruned = generate(e, data, all_features(5), Setting::pruned, c);
    auto d = probability_delta(full, pruned);
    ASSERT_TRUE(d);
    EXPECT_EQ(*d, 0.0);
}

TEST(PrunedWitness, FlipsFullEnsemble)
{
    std::mt19937_64 rng(42);
    int sat = 0;
    for (int i = 0; i < 200; ++i) {
        Ensemble e = oracle::small_random_ensemble(rng, 5, 4, 6);
        const std::size_t d = e.num_features();
        auto data = fixtures::random_examples(e, 1, rng());
        auto fs = fixtures::pick_features(d, 1 + rng() % d, rng());
        auto recs = generate(e, data, fs, Setting::pruned, RunConfig::untimed(0.3));
        const AttackOutcome& o = recs[0].final_outcome;
        if (!o.is_sat())
            continue;
        ++sat;
        const Example& x = data[0];
        EXPECT_NE(predict_label(e, *o.witness), predict_label(e, x));
        for (std::size_t f = 0; f < d; ++f) {
            if (std::find(fs.begin(), fs.end(), f) == fs.end()) {
                EXPECT_EQ(o.witness->values[f], x.values[f]);
            }
            EXPECT_LT(std::abs(o.witness->values[f] - x.values[f]), 0.3);
        }
    }
    EXPECT_GT(sat, 10);
}

TEST(MixedSetting, SameOutcomesAsFull)
{
    std::mt19937_64 rng(7);
    for (int i = 0; i < 40; ++i) {
        Ensemble e = random_ensemble({1 + rng() % 10, 1 + rng() % 4, 2 + rng() % 6, 1.0, rng(), {}});
        const std::size_t d = e.num_features();
        auto data = fixtures::random_examples(e, 10, rng());
        auto fs = fixtures::pick_features(d, rng() % (d + 1), rng());
        RunConfig c = RunConfig::untimed(0.15);
        auto mixed = generate(e, data, fs, Setting::mixed, c);
        auto full = generate(e, data, {}, Setting::full, c);
        for (std::size_t k = 0; k < data.size(); ++k)
            EXPECT_EQ(mixed[k].final_outcome.is_sat(), full[k].final_outcome.is_sat());
    }
}

TEST(Robustness, TwoStumps)
{
    Ensemble e = fixtures::two_stumps();
    std::vector<Example> data{{{0.6, 0.6}, {}}, {{0.4, 0.4}, {}}};
    auto recs = empirical_robustness(e, data, {}, Setting::full, RunConfig::untimed(1.0));
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_NEAR(recs[0].result.delta_star, 0.1, 1e-12);
    // From (0.4, 0.4) both coordinates must reach 0.5: margin +2 -> 0 -> -2.
    EXPECT_NEAR(recs[1].result.delta_star, 0.1, 1e-12);
    EXPECT_NEAR(*mean_robustness(recs), 0.1, 1e-12);
}

TEST(Robustness, PrunedNeverBelowFull)
{
    Ensemble e = random_ensemble({8, 3, 6, 1.0, 17, {}});
    auto data = fixtures::random_examples(e, 40, 8);
    std::vector<FeatureId> fs{0, 2, 4};
    RunConfig c = RunConfig::untimed(1.0);
    auto full = empirical_robustness(e, data, fs, Setting::full, c);
    auto pruned = empirical_robustness(e, data, fs, Setting::pruned, c);
    auto same = empirical_robustness(e, data, all_features(6), Setting::pruned, c);
    for (std::size_t i = 0; i < data.size(); ++i) {
        EXPECT_GE(pruned[i].result.delta_star, full[i].result.delta_star);
        EXPECT_EQ(same[i].result.delta_star, full[i].result.delta_star);
    }
}

TEST(Robustness, MixedFallsBackWhenPrunedHasNoAdversarial)
{
    Ensemble e = fixtures::two_stumps();
    std::vector<Example> data{{{0.6, 0.6}, {}}};
    // Pruning to the empty subset freezes every tree.
    auto recs = empirical_robustness(e, data, {}, Setting::mixed, RunConfig::untimed(1.0));
    EXPECT_TRUE(recs[0].used_fallback);
    EXPECT_NEAR(recs[0].result.delta_star, 0.1, 1e-12);
}
