/**
 * \file attack.hpp
 *
 * Complete best-first branch-and-bound over per-tree leaf choices.
 *
 * A search state fixes one reachable leaf for each of the first `cursor`
 * trees (in the engine's tree order) and keeps the box of inputs compatible
 * with all of them, intersected with the open delta-ball around x. Its bound
 * adds, for every remaining tree, the best leaf value still reachable in the
 * box; states whose bound cannot flip the label are never queued.
 *
 * Two objectives share the engine:
 *  - decision: is there an adversarial example within delta? States are
 *    expanded nearest-first (L-infinity distance of the box from x, then the
 *    number of features the box forces away from x), so the first flipping
 *    completion popped is a minimum-distance witness that perturbs as few
 *    features as possible.
 *  - optimize: the best output reachable within delta, expanded by bound.
 *    The first flipping completion popped is optimal.
 */

#ifndef FASTADV_ATTACK_HPP
#define FASTADV_ATTACK_HPP

#include "box.hpp"
#include "model.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fastadv {

class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class SearchMode { decision, optimize };
enum class Direction { maximize, minimize };
enum class TreeOrder { model_order, range_descending };

struct EngineConfig {
    SearchMode mode = SearchMode::decision;
    /// Wall-clock limit in seconds; infinity disables it.
    double timeout = kInf;
    /// Maximum number of expansions; 0 disables it.
    std::uint64_t node_budget = 0;
    TreeOrder tree_order = TreeOrder::range_descending;

    void validate() const
    {
        if (!(timeout > 0.0))
            throw ConfigError("timeout must be positive");
    }
};

/// Direction that moves the margin away from `label`.
inline Direction attack_direction(int label) { return label < 0 ? Direction::maximize : Direction::minimize; }

/// Whether `margin` is classified differently from `label`.
inline bool flips(double margin, int label) { return label_of_margin(margin) != label; }

enum class Status { sat, unsat, timeout };

inline const char* to_string(Status s)
{
    switch (s) {
    case Status::sat: return "SAT";
    case Status::unsat: return "UNSAT";
    case Status::timeout: return "TIMEOUT";
    }
    return "?";
}

struct AttackOutcome {
    Status status = Status::unsat;
    std::optional<Example> witness;
    double linf = 0.0;
    double margin = 0.0;

    bool is_sat() const { return status == Status::sat; }
};

struct AttackStats {
    std::uint64_t expansions = 0;
    double wall_time = 0.0;
    bool optimal_proven = false;
    /// Best bound on the margin still open when the search stopped.
    double best_bound = 0.0;
    /// Best label-flipping completion seen before a timeout, if any.
    std::optional<AttackOutcome> incumbent;
};

struct AttackResult {
    AttackOutcome outcome;
    AttackStats stats;
};

/** A reachable leaf together with the constraints its path adds to a box. */
struct LeafChoice {
    double value = 0.0;
    NodeId leaf = -1;
    /// Features whose interval the path narrows, with the narrowed interval.
    std::vector<std::pair<FeatureId, Interval>> narrowed;
};

/// Every leaf of `tree` whose path constraints intersect `box`.
inline std::vector<LeafChoice> reachable_choices(const Tree& tree, const FeatureBox& box)
{
    std::vector<LeafChoice> out;
    std::vector<std::pair<FeatureId, Interval>> path;
    FeatureBox work = box;

    // Recursion depth equals tree depth.
    auto visit = [&](auto&& self, NodeId id) -> void {
        const Node& n = tree.node(id);
        if (n.is_leaf()) {
            LeafChoice c{n.value, id, {}};
            // Keep only the last (tightest) interval per feature.
            for (auto it = path.rbegin(); it != path.rend(); ++it) {
                bool seen = std::any_of(c.narrowed.begin(), c.narrowed.end(),
                                        [&](const auto& p) { return p.first == it->first; });
                if (!seen)
                    c.narrowed.push_back(*it);
            }
            out.push_back(std::move(c));
            return;
        }
        const Interval saved = work[n.feature];
        if (saved.reaches_left(n.threshold)) {
            Interval iv{saved.lo, std::min(saved.hi, below(n.threshold))};
            if (iv != saved) {
                work[n.feature] = iv;
                path.emplace_back(n.feature, iv);
            }
            self(self, n.left);
            if (iv != saved) {
                path.pop_back();
                work[n.feature] = saved;
            }
        }
        if (saved.reaches_right(n.threshold)) {
            Interval iv{std::max(saved.lo, n.threshold), saved.hi};
            if (iv != saved) {
                work[n.feature] = iv;
                path.emplace_back(n.feature, iv);
            }
            self(self, n.right);
            if (iv != saved) {
                path.pop_back();
                work[n.feature] = saved;
            }
        }
    };
    visit(visit, tree.root());
    return out;
}

struct ReachableLeaf {
    double value = 0.0;
    FeatureBox box;
};

/// The leaves of `tree` compatible with `box`, each with its region intersected with `box`.
inline std::vector<ReachableLeaf> reachable_leaves(const Tree& tree, const FeatureBox& box)
{
    std::vector<ReachableLeaf> out;
    for (LeafChoice& c : reachable_choices(tree, box)) {
        FeatureBox b = box;
        for (const auto& [f, iv] : c.narrowed)
            b[f] = iv;
        out.push_back({c.value, std::move(b)});
    }
    return out;
}

/// Largest (maximize) or smallest (minimize) leaf value of `tree` reachable in `box`.
inline double extreme_leaf(const Tree& tree, const FeatureBox& box, Direction dir)
{
    const bool maximize = dir == Direction::maximize;
    double best = maximize ? -kInf : kInf;
    std::vector<NodeId> stack{tree.root()};
    while (!stack.empty()) {
        const Node& n = tree.node(stack.back());
        stack.pop_back();
        if (n.is_leaf()) {
            best = maximize ? std::max(best, n.value) : std::min(best, n.value);
            continue;
        }
        const Interval& iv = box[n.feature];
        if (iv.reaches_left(n.threshold))
            stack.push_back(n.left);
        if (iv.reaches_right(n.threshold))
            stack.push_back(n.right);
    }
    return best;
}

/**
 * Optimistic value of the trees `order[from..]` given `box`: the sum of each
 * tree's extreme reachable leaf value. No completion of a state with this
 * box does better in direction `dir`.
 */
inline double remaining_bound(const Ensemble& e, std::span<const std::size_t> order, std::size_t from,
                              const FeatureBox& box, Direction dir)
{
    double h = 0.0;
    for (std::size_t i = from; i < order.size(); ++i)
        h += extreme_leaf(e.tree(order[i]), box, dir);
    return h;
}

/// Nearest point of `box` to `x`, feature by feature.
inline Example witness(const FeatureBox& box, const Example& x)
{
    if (box.empty())
        throw InvariantError("witness requested for an empty box");
    Example w{x.values, std::nullopt};
    for (std::size_t f = 0; f < box.size(); ++f)
        w.values[f] = box[f].clamp(x.values[f]);
    return w;
}

inline double linf_distance(std::span<const double> a, std::span<const double> b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/**
 * Checks the adversarial-example contract on `e`: the witness stays strictly
 * within `delta` of `x` and its label differs from `label`.
 */
inline bool is_adversarial(const Ensemble& e, const Example& x, int label, const Example& w, double delta)
{
    return linf_distance(w.values, x.values) < delta && flips(predict_margin(e, w), label);
}

namespace detail {

class Deadline {
public:
    using clock = std::chrono::steady_clock;

    explicit Deadline(double seconds) : start_(clock::now()), limit_(seconds) {}

    double elapsed() const { return std::chrono::duration<double>(clock::now() - start_).count(); }
    bool expired() const { return limit_ != kInf && elapsed() >= limit_; }

private:
    clock::time_point start_;
    double limit_;
};

struct State {
    FeatureBox box;
    double g = 0.0;     // margin of the chosen leaves (plus constant part)
    double bound = 0.0; // g + optimistic remaining value
    double dist = 0.0;  // L-infinity distance of box from x
    std::uint32_t moved = 0; // features the box forces away from x
    std::uint32_t cursor = 0;
    std::uint64_t seq = 0;
};

} // namespace detail

/**
 * Searches for an input within the open delta-ball around `x` whose label on
 * `e` differs from the label `e` assigns to `x`.
 */
inline AttackResult search(const Ensemble& e, const Example& x, double delta, const EngineConfig& cfg)
{
    using detail::State;
    check_dimensions(e, x.values);
    cfg.validate();

    detail::Deadline clock(cfg.timeout);
    AttackResult res;
    auto finish = [&](Status s) {
        res.outcome.status = s;
        res.stats.wall_time = clock.elapsed();
        return res;
    };

    const double base_margin = predict_margin(e, x);
    const int label = label_of_margin(base_margin);
    const Direction dir = attack_direction(label);
    const bool maximize = dir == Direction::maximize;
    // Larger score is better for the attacker.
    auto score = [&](double m) { return maximize ? m : -m; };
    auto can_flip = [&](double bound) { return maximize ? bound >= 0.0 : bound < 0.0; };

    const FeatureBox ball = delta_box(x.values, delta);

    // Trees with a single reachable leaf contribute a constant.
    double constant = e.bias();
    std::vector<std::size_t> order;
    std::vector<double> range;
    for (std::size_t t = 0; t < e.size(); ++t) {
        const double hi = extreme_leaf(e.tree(t), ball, Direction::maximize);
        if (e.tree(t).size() == 1 || reachable_choices(e.tree(t), ball).size() == 1) {
            constant += hi;
            continue;
        }
        const double lo = extreme_leaf(e.tree(t), ball, Direction::minimize);
        order.push_back(t);
        range.push_back(hi - lo);
    }
    if (cfg.tree_order == TreeOrder::range_descending) {
        std::vector<std::size_t> idx(order.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return range[a] > range[b]; });
        std::vector<std::size_t> sorted;
        sorted.reserve(idx.size());
        for (std::size_t i : idx)
            sorted.push_back(order[i]);
        order = std::move(sorted);
    }
    const auto depth = static_cast<std::uint32_t>(order.size());

    const bool decision = cfg.mode == SearchMode::decision;
    auto worse = [&](const State& a, const State& b) {
        // true when a should be expanded after b
        if (decision) {
            if (a.dist != b.dist)
                return a.dist > b.dist;
            if (a.moved != b.moved)
                return a.moved > b.moved;
        }
        if (a.bound != b.bound)
            return score(a.bound) < score(b.bound);
        if (a.cursor != b.cursor)
            return a.cursor < b.cursor;
        return a.seq > b.seq;
    };
    std::priority_queue<State, std::vector<State>, decltype(worse)> open(worse);

    std::uint64_t seq = 0;
    {
        State root{ball, constant, constant + remaining_bound(e, order, 0, ball, dir), 0.0, 0, 0, seq++};
        res.stats.best_bound = root.bound;
        if (!can_flip(root.bound))
            return finish(Status::unsat);
        open.push(std::move(root));
    }

    auto make_outcome = [&](const FeatureBox& box) -> std::optional<AttackOutcome> {
        Example w = witness(box, x);
        const double m = predict_margin(e, w);
        // Leaf sums in search order can differ from model order in the last
        // bit; only a re-evaluated flip counts.
        if (!flips(m, label))
            return std::nullopt;
        const double d = linf_distance(w.values, x.values);
        if (!(d < delta))
            throw InvariantError("search produced a witness outside the delta-ball");
        return AttackOutcome{Status::sat, std::move(w), d, m};
    };

    while (!open.empty()) {
        State s = open.top();
        open.pop();
        res.stats.best_bound = s.bound;

        if (s.cursor == depth) {
            if (auto out = make_outcome(s.box)) {
                res.outcome = std::move(*out);
                res.stats.optimal_proven = true;
                return finish(Status::sat);
            }
            continue;
        }

        if (cfg.node_budget != 0 && res.stats.expansions >= cfg.node_budget)
            return finish(Status::timeout);
        if (res.stats.expansions % 256 == 0 && clock.expired())
            return finish(Status::timeout);
        ++res.stats.expansions;

        const Tree& tree = e.tree(order[s.cursor]);
        for (LeafChoice& c : reachable_choices(tree, s.box)) {
            State child;
            child.box = s.box;
            child.dist = s.dist;
            child.moved = s.moved;
            for (const auto& [f, iv] : c.narrowed) {
                const bool was_in = s.box[f].contains(x.values[f]);
                child.box[f] = iv;
                if (was_in && !iv.contains(x.values[f]))
                    ++child.moved;
                child.dist = std::max(child.dist, iv.distance(x.values[f]));
            }
            child.cursor = s.cursor + 1;
            child.g = s.g + c.value;
            child.bound = child.g + remaining_bound(e, order, child.cursor, child.box, dir);
            child.seq = seq++;
            if (!can_flip(child.bound))
                continue;
            if (!decision && child.cursor == depth) {
                const auto& inc = res.stats.incumbent;
                if (!inc || score(child.g) > score(inc->margin)) {
                    if (auto out = make_outcome(child.box)) {
                        res.stats.incumbent = std::move(out);
                        if (clock.expired())
                            return finish(Status::timeout);
                    }
                }
            }
            open.push(std::move(child));
        }
    }
    return finish(Status::unsat);
}

/// Every distinct L-infinity distance at which some split of `e` changes
/// side for `x`, ascending.
inline std::vector<double> crossing_distances(const Ensemble& e, const Example& x)
{
    std::vector<double> d;
    for (const Tree& t : e.trees()) {
        for (const Node& n : t.nodes()) {
            if (n.is_leaf())
                continue;
            const double v = x.values[n.feature];
            d.push_back(n.threshold > v ? n.threshold - v : v - below(n.threshold));
        }
    }
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
}

enum class RobustnessStatus { exact, misclassified, no_adversarial, timeout };

inline const char* to_string(RobustnessStatus s)
{
    switch (s) {
    case RobustnessStatus::exact: return "exact";
    case RobustnessStatus::misclassified: return "misclassified";
    case RobustnessStatus::no_adversarial: return "no_adversarial";
    case RobustnessStatus::timeout: return "timeout";
    }
    return "?";
}

struct RobustnessResult {
    RobustnessStatus status = RobustnessStatus::exact;
    /// Distance to the nearest adversarial example (infinity when none exists).
    double delta_star = kInf;
    std::optional<Example> witness;
    /// On timeout: delta_star lies in (bracket_lo, bracket_hi].
    double bracket_lo = 0.0;
    double bracket_hi = kInf;
    std::uint64_t expansions = 0;
    double wall_time = 0.0;
    std::size_t decision_calls = 0;
};

/**
 * Smallest L-infinity distance from `x` to an input with a different label.
 *
 * The answer of the fixed-radius decision problem only changes at split
 * crossing distances, so a binary search over those radii with the decision
 * engine is exact. `cfg.timeout` bounds the whole search.
 */
inline RobustnessResult min_robustness(const Ensemble& e, const Example& x, const EngineConfig& cfg)
{
    check_dimensions(e, x.values);
    cfg.validate();
    detail::Deadline clock(cfg.timeout);
    RobustnessResult r;

    if (x.label && predict_label(e, x) != *x.label) {
        r.status = RobustnessStatus::misclassified;
        r.delta_star = 0.0;
        r.witness = x;
        return r;
    }

    const std::vector<double> dist = crossing_distances(e, x);
    EngineConfig dc = cfg;
    dc.mode = SearchMode::decision;

    // probe(i): is there an adversarial example strictly closer than just above dist[i]?
    auto probe = [&](std::size_t i) -> std::optional<AttackResult> {
        const double left = cfg.timeout == kInf ? kInf : cfg.timeout - clock.elapsed();
        if (left <= 0.0)
            return std::nullopt;
        dc.timeout = left;
        AttackResult a = search(e, x, above(dist[i]), dc);
        ++r.decision_calls;
        r.expansions += a.stats.expansions;
        if (a.outcome.status == Status::timeout)
            return std::nullopt;
        return a;
    };

    auto timed_out = [&](double lo, double hi) {
        r.status = RobustnessStatus::timeout;
        r.bracket_lo = lo;
        r.bracket_hi = hi;
        r.wall_time = clock.elapsed();
        return r;
    };

    if (dist.empty()) {
        r.status = RobustnessStatus::no_adversarial;
        r.wall_time = clock.elapsed();
        return r;
    }

    // Invariant: probe(hi) is SAT (with `best`), every index below lo is UNSAT.
    std::size_t lo = 0;
    std::size_t hi = dist.size() - 1;
    auto top = probe(hi);
    if (!top)
        return timed_out(0.0, kInf);
    if (!top->outcome.is_sat()) {
        r.status = RobustnessStatus::no_adversarial;
        r.wall_time = clock.elapsed();
        return r;
    }
    AttackOutcome best = std::move(top->outcome);
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        auto a = probe(mid);
        if (!a)
            return timed_out(lo == 0 ? 0.0 : dist[lo - 1], dist[hi]);
        if (a->outcome.is_sat()) {
            hi = mid;
            best = std::move(a->outcome);
        } else {
            lo = mid + 1;
        }
    }
    r.status = RobustnessStatus::exact;
    r.delta_star = best.linf;
    r.witness = std::move(best.witness);
    r.bracket_lo = lo == 0 ? 0.0 : dist[lo - 1];
    r.bracket_hi = dist[hi];
    r.wall_time = clock.elapsed();
    return r;
}

} // namespace fastadv

#endif // FASTADV_ATTACK_HPP
