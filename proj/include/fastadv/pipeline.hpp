/**
 * \file pipeline.hpp
 *
 * Repeated adversarial example generation over a dataset in three settings:
 *
 *  - full:   attack the original ensemble.
 *  - pruned: prune the ensemble to the selected features for each example
 *            and attack the pruned ensemble under a short timeout.
 *  - mixed:  pruned first; on UNSAT or TIMEOUT, attack the full ensemble.
 *
 * Plus the metrics computed from the resulting records.
 */

#ifndef FASTADV_PIPELINE_HPP
#define FASTADV_PIPELINE_HPP

#include "attack.hpp"
#include "feature_subset.hpp"
#include "model.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fastadv {

enum class Setting { full, pruned, mixed };
enum class EngineKind { exact, heuristic };

inline const char* to_string(Setting s)
{
    switch (s) {
    case Setting::full: return "full";
    case Setting::pruned: return "pruned";
    case Setting::mixed: return "mixed";
    }
    return "?";
}

inline const char* to_string(EngineKind k) { return k == EngineKind::exact ? "exact" : "heuristic"; }

inline Setting parse_setting(const std::string& s)
{
    if (s == "full")
        return Setting::full;
    if (s == "pruned")
        return Setting::pruned;
    if (s == "mixed")
        return Setting::mixed;
    throw ConfigError("unknown setting '" + s + "' (expected full, pruned or mixed)");
}

inline EngineKind parse_engine(const std::string& s)
{
    if (s == "exact")
        return EngineKind::exact;
    if (s == "heuristic")
        return EngineKind::heuristic;
    throw ConfigError("unknown engine '" + s + "' (expected exact or heuristic)");
}

/// The exact engine answers the fixed-radius decision problem with a
/// nearest witness; the heuristic engine optimizes the output within delta.
inline SearchMode mode_of(EngineKind k) { return k == EngineKind::exact ? SearchMode::decision : SearchMode::optimize; }

/// Default pruned-phase timeout per engine, in seconds.
inline double default_pruned_timeout(EngineKind k) { return k == EngineKind::exact ? 1.0 : 0.1; }

struct RunConfig {
    double delta = 0.1;
    EngineKind engine = EngineKind::exact;
    double t_full = 60.0;
    double t_prun = 1.0;
    double global_timeout = 21600.0;
    std::uint64_t node_budget = 0;
    TreeOrder tree_order = TreeOrder::range_descending;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate() const
    {
        if (!(delta > 0.0))
            throw ConfigError("delta must be positive");
        if (!(t_full > 0.0) || !(t_prun > 0.0) || !(global_timeout > 0.0))
            throw ConfigError("timeouts must be positive");
        if (!(t_prun < t_full) && t_full != kInf)
            throw ConfigError("the pruned timeout must be shorter than the full timeout");
        if (threads == 0)
            throw ConfigError("threads must be at least 1");
    }

    EngineConfig engine_config(double timeout) const
    {
        EngineConfig c;
        c.mode = mode_of(engine);
        c.timeout = timeout;
        c.node_budget = node_budget;
        c.tree_order = tree_order;
        return c;
    }

    /// A configuration without any wall-clock limits.
    static RunConfig untimed(double delta, EngineKind engine = EngineKind::exact)
    {
        RunConfig c;
        c.delta = delta;
        c.engine = engine;
        c.t_full = kInf;
        c.t_prun = kInf;
        c.global_timeout = kInf;
        return c;
    }
};

struct PhaseResult {
    AttackOutcome outcome;
    double wall_s = 0.0;
    std::uint64_t expansions = 0;
};

enum class RecordStatus { attacked, misclassified, skipped };

inline const char* to_string(RecordStatus s)
{
    switch (s) {
    case RecordStatus::attacked: return "attacked";
    case RecordStatus::misclassified: return "misclassified";
    case RecordStatus::skipped: return "skipped";
    }
    return "?";
}

struct AttackRecord {
    std::size_t example_id = 0;
    Setting setting = Setting::full;
    RecordStatus status = RecordStatus::attacked;
    std::optional<PhaseResult> pruned;
    std::optional<PhaseResult> full;
    AttackOutcome final_outcome;
    bool used_fallback = false;

    double wall_s() const { return (pruned ? pruned->wall_s : 0.0) + (full ? full->wall_s : 0.0); }
    std::uint64_t expansions() const
    {
        return (pruned ? pruned->expansions : 0) + (full ? full->expansions : 0);
    }
};

namespace detail {

inline PhaseResult run_phase(const Ensemble& e, const Example& x, double delta, const EngineConfig& cfg)
{
    AttackResult r = search(e, x, delta, cfg);
    return {std::move(r.outcome), r.stats.wall_time, r.stats.expansions};
}

inline AttackRecord attack_one(const Ensemble& e, const Example& x, std::size_t id,
                               std::span<const FeatureId> features, Setting setting, const RunConfig& cfg)
{
    AttackRecord rec;
    rec.example_id = id;
    rec.setting = setting;
    const int label = predict_label(e, x);
    if (x.label && *x.label != label) {
        rec.status = RecordStatus::misclassified;
        rec.final_outcome.status = Status::sat;
        rec.final_outcome.witness = Example{x.values, std::nullopt};
        rec.final_outcome.margin = predict_margin(e, x);
        return rec;
    }

    if (setting != Setting::full) {
        const auto t0 = std::chrono::steady_clock::now();
        const Ensemble pruned = prune(e, x, features);
        const double prune_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        PhaseResult p = run_phase(pruned, x, cfg.delta, cfg.engine_config(cfg.t_prun));
        p.wall_s += prune_s;
        if (p.outcome.is_sat() && !is_adversarial(e, x, label, *p.outcome.witness, cfg.delta))
            throw InvariantError("pruned witness for example " + std::to_string(id) +
                                 " is not adversarial on the full ensemble");
        rec.pruned = std::move(p);
        rec.final_outcome = rec.pruned->outcome;
        if (setting == Setting::pruned || rec.final_outcome.is_sat())
            return rec;
        // Pruning only removes nodes. When it removed none, the pruned search
        // covered the full search space and its UNSAT is final.
        if (rec.final_outcome.status == Status::unsat && pruned.num_nodes() == e.num_nodes())
            return rec;
        rec.used_fallback = true;
    }
    rec.full = run_phase(e, x, cfg.delta, cfg.engine_config(cfg.t_full));
    rec.final_outcome = rec.full->outcome;
    return rec;
}

} // namespace detail

/**
 * Attacks every example of `data` in the given setting. `features` is the
 * perturbable subset used by the pruned and mixed settings; it is ignored by
 * the full setting. Records come back in input order with ids starting at
 * `first_id`. Examples not yet started when the global timeout expires are
 * recorded as skipped.
 */
inline std::vector<AttackRecord> generate(const Ensemble& e, std::span<const Example> data,
                                          std::span<const FeatureId> features, Setting setting,
                                          const RunConfig& cfg, std::size_t first_id = 0)
{
    cfg.validate();
    for (const Example& x : data)
        check_dimensions(e, x.values);
    if (setting != Setting::full)
        (void)feature_mask(features, e.num_features());

    std::vector<AttackRecord> records(data.size());
    detail::Deadline global(cfg.global_timeout);
    std::atomic<std::size_t> next{0};

    auto worker = [&](std::exception_ptr& err) {
        try {
            for (std::size_t i = next++; i < data.size(); i = next++) {
                if (global.expired()) {
                    records[i].example_id = first_id + i;
                    records[i].setting = setting;
                    records[i].status = RecordStatus::skipped;
                    records[i].final_outcome.status = Status::timeout;
                    continue;
                }
                records[i] = detail::attack_one(e, data[i], first_id + i, features, setting, cfg);
            }
        } catch (...) {
            err = std::current_exception();
            next = data.size();
        }
    };

    const unsigned nthreads = std::min<std::size_t>(cfg.threads, std::max<std::size_t>(1, data.size()));
    std::vector<std::exception_ptr> errors(nthreads);
    if (nthreads == 1) {
        worker(errors[0]);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t)
            pool.emplace_back(worker, std::ref(errors[t]));
        for (std::thread& th : pool)
            th.join();
    }
    for (const std::exception_ptr& err : errors)
        if (err)
            std::rethrow_exception(err);
    return records;
}

/**
 * Combines a pruned-setting run and a full-setting run over the same
 * examples into mixed-style records carrying both phase outcomes.
 */
inline std::vector<AttackRecord> pair_records(std::span<const AttackRecord> pruned,
                                              std::span<const AttackRecord> full)
{
    if (pruned.size() != full.size())
        throw ConfigError("paired runs must cover the same examples");
    std::vector<AttackRecord> out;
    out.reserve(pruned.size());
    for (std::size_t i = 0; i < pruned.size(); ++i) {
        if (pruned[i].example_id != full[i].example_id)
            throw ConfigError("paired runs list examples in a different order");
        AttackRecord r = pruned[i];
        r.full = full[i].full;
        out.push_back(std::move(r));
    }
    return out;
}

/// Whether a record shows the pruned search missing an adversarial example
/// that the full search found.
inline bool is_false_negative(const AttackRecord& r)
{
    return r.pruned && r.full && r.pruned->outcome.status == Status::unsat && r.full->outcome.is_sat();
}

/**
 * Whether the full outcome of `r` is known next to its pruned outcome. A
 * pruned SAT implies a full SAT, and a mixed record that stopped at a pruned
 * UNSAT did so because pruning removed nothing, so the full outcome is UNSAT.
 */
inline bool is_paired(const AttackRecord& r)
{
    if (!r.pruned)
        return false;
    return r.full || r.pruned->outcome.is_sat() ||
           (r.setting == Setting::mixed && r.pruned->outcome.status == Status::unsat);
}

/**
 * Fraction of attacked examples where the pruned search returned UNSAT but
 * the full search returned SAT. A pruned TIMEOUT is not a false negative.
 * Every attacked record needs a pruned outcome, and a full outcome unless
 * the pruned outcome is SAT (which implies a full SAT).
 */
inline double false_negative_rate(std::span<const AttackRecord> records)
{
    std::size_t n = 0;
    std::size_t fn = 0;
    for (const AttackRecord& r : records) {
        if (r.status != RecordStatus::attacked)
            continue;
        if (!is_paired(r))
            throw ConfigError("false negative rate needs paired pruned and full outcomes (example " +
                              std::to_string(r.example_id) + ")");
        ++n;
        fn += is_false_negative(r) ? 1 : 0;
    }
    return n == 0 ? 0.0 : static_cast<double>(fn) / static_cast<double>(n);
}

inline bool has_pairing(std::span<const AttackRecord> records)
{
    return std::all_of(records.begin(), records.end(),
                       [](const AttackRecord& r) { return r.status != RecordStatus::attacked || is_paired(r); });
}

/// (x, adversarial) pairs for every attacked record that ended in SAT.
inline std::vector<ExamplePair> adversarial_pairs(std::span<const Example> data, std::span<const AttackRecord> records,
                                                  std::size_t first_id = 0)
{
    std::vector<ExamplePair> pairs;
    for (const AttackRecord& r : records)
        if (r.status == RecordStatus::attacked && r.final_outcome.is_sat())
            pairs.emplace_back(data[r.example_id - first_id], *r.final_outcome.witness);
    return pairs;
}

struct RunSummary {
    std::size_t records = 0;
    std::size_t attacked = 0;
    std::size_t misclassified = 0;
    std::size_t skipped = 0;
    std::size_t sat = 0;
    std::size_t unsat = 0;
    std::size_t timeouts = 0;
    std::size_t full_calls = 0;
    std::size_t false_negatives = 0;
    double total_wall_s = 0.0;
    double mean_wall_s = 0.0;
    std::uint64_t total_expansions = 0;
    std::optional<double> speedup;
    std::optional<double> fnr;
    double fallback_fraction = 0.0;
    double timeout_fraction = 0.0;
    double skipped_fraction = 0.0;
    /// Mean L-infinity distance of the SAT witnesses.
    std::optional<double> mean_linf;
    std::optional<double> mean_probability_delta;

    bool operator==(const RunSummary&) const = default;
};

/// Mean over examples with SAT witnesses in both runs of the difference in
/// confidence for the mispredicted class, `full` minus `other`.
inline std::optional<double> probability_delta(std::span<const AttackRecord> full, std::span<const AttackRecord> other)
{
    std::map<std::size_t, const AttackRecord*> by_id;
    for (const AttackRecord& r : other)
        if (r.status == RecordStatus::attacked && r.final_outcome.is_sat())
            by_id[r.example_id] = &r;
    double sum = 0.0;
    std::size_t n = 0;
    for (const AttackRecord& r : full) {
        if (r.status != RecordStatus::attacked || !r.final_outcome.is_sat())
            continue;
        auto it = by_id.find(r.example_id);
        if (it == by_id.end())
            continue;
        // The adversarial label is the sign of the witness margin.
        const double a = r.final_outcome.margin;
        const double b = it->second->final_outcome.margin;
        const bool positive = label_of_margin(a) > 0;
        const double pa = positive ? sigmoid(a) : 1.0 - sigmoid(a);
        const double pb = positive ? sigmoid(b) : 1.0 - sigmoid(b);
        sum += pa - pb;
        ++n;
    }
    if (n == 0)
        return std::nullopt;
    return sum / static_cast<double>(n);
}

inline RunSummary summarize(std::span<const AttackRecord> records,
                            std::optional<std::span<const AttackRecord>> reference = std::nullopt)
{
    RunSummary s;
    s.records = records.size();
    double linf = 0.0;
    for (const AttackRecord& r : records) {
        switch (r.status) {
        case RecordStatus::misclassified: ++s.misclassified; continue;
        case RecordStatus::skipped: ++s.skipped; continue;
        case RecordStatus::attacked: break;
        }
        ++s.attacked;
        switch (r.final_outcome.status) {
        case Status::sat:
            ++s.sat;
            linf += r.final_outcome.linf;
            break;
        case Status::unsat: ++s.unsat; break;
        case Status::timeout: ++s.timeouts; break;
        }
        if (r.used_fallback)
            ++s.full_calls;
        if (is_false_negative(r))
            ++s.false_negatives;
        s.total_wall_s += r.wall_s();
        s.total_expansions += r.expansions();
    }
    if (s.attacked > 0) {
        const auto a = static_cast<double>(s.attacked);
        s.mean_wall_s = s.total_wall_s / a;
        s.fallback_fraction = static_cast<double>(s.full_calls) / a;
        s.timeout_fraction = static_cast<double>(s.timeouts) / a;
    }
    if (s.records > 0)
        s.skipped_fraction = static_cast<double>(s.skipped) / static_cast<double>(s.records);
    if (s.sat > 0)
        s.mean_linf = linf / static_cast<double>(s.sat);
    if (s.attacked > 0 && has_pairing(records) &&
        std::any_of(records.begin(), records.end(), [](const AttackRecord& r) { return r.pruned.has_value(); }))
        s.fnr = false_negative_rate(records);
    if (reference) {
        double ref = 0.0;
        for (const AttackRecord& r : *reference)
            if (r.status == RecordStatus::attacked)
                ref += r.wall_s();
        if (s.total_wall_s > 0.0)
            s.speedup = ref / s.total_wall_s;
        s.mean_probability_delta = probability_delta(*reference, records);
    }
    return s;
}

struct Histogram {
    std::size_t never = 0;
    std::size_t rare = 0;
    std::size_t frequent = 0;
    /// Features changed by more than 5% of the adversarial examples.
    std::vector<FeatureId> frequent_features;
};

/**
 * Buckets features by the fraction of adversarial examples that change them:
 * never (0), rare (at most 5%) and frequent (more than 5%). With no
 * adversarial examples every feature is in the never bucket.
 */
inline Histogram perturbation_histogram(const PerturbationCounts& counts)
{
    Histogram h;
    for (std::size_t f = 0; f < counts.size(); ++f) {
        const std::uint64_t c = counts.counts[f];
        if (c == 0)
            ++h.never;
        else if (c * 20 <= counts.total)
            ++h.rare;
        else {
            ++h.frequent;
            h.frequent_features.push_back(f);
        }
    }
    return h;
}

inline Histogram perturbation_histogram(std::span<const ExamplePair> pairs, std::size_t total_adv, std::size_t d)
{
    PerturbationCounts c = count_perturbed(pairs, d);
    c.total = total_adv;
    return perturbation_histogram(c);
}

struct RobustnessRecord {
    std::size_t example_id = 0;
    Setting setting = Setting::full;
    RobustnessResult result;
    bool used_fallback = false;
};

/**
 * Distance to the nearest adversarial example for every example of `data`,
 * on the full ensemble or on the per-example pruned ensemble. Mixed uses
 * the pruned value unless the pruned ensemble admits no adversarial example
 * at all (or times out), in which case the full ensemble is searched.
 */
inline std::vector<RobustnessRecord> empirical_robustness(const Ensemble& e, std::span<const Example> data,
                                                          std::span<const FeatureId> features, Setting setting,
                                                          const RunConfig& cfg, std::size_t first_id = 0)
{
    std::vector<RobustnessRecord> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Example& x = data[i];
        RobustnessRecord rec{first_id + i, setting, {}, false};
        if (setting == Setting::full) {
            rec.result = min_robustness(e, x, cfg.engine_config(cfg.t_full));
        } else {
            const Ensemble pruned = prune(e, x, features);
            rec.result = min_robustness(pruned, x, cfg.engine_config(cfg.t_prun));
            if (rec.result.witness && rec.result.status == RobustnessStatus::exact &&
                !flips(predict_margin(e, *rec.result.witness), predict_label(e, x)))
                throw InvariantError("pruned robustness witness does not flip the full ensemble");
            const bool found = rec.result.status == RobustnessStatus::exact ||
                               rec.result.status == RobustnessStatus::misclassified;
            if (setting == Setting::mixed && !found) {
                rec.result = min_robustness(e, x, cfg.engine_config(cfg.t_full));
                rec.used_fallback = true;
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

/// Mean delta_star over records with an exact finite value.
inline std::optional<double> mean_robustness(std::span<const RobustnessRecord> records)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const RobustnessRecord& r : records) {
        if (r.result.status != RobustnessStatus::exact)
            continue;
        sum += r.result.delta_star;
        ++n;
    }
    if (n == 0)
        return std::nullopt;
    return sum / static_cast<double>(n);
}

} // namespace fastadv

#endif // FASTADV_PIPELINE_HPP
