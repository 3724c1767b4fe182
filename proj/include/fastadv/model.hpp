/**
 * \file model.hpp
 *
 * Additive tree ensembles over dense real feature vectors: evaluation,
 * example-conditioned pruning and random fixture generation.
 */

#ifndef FASTADV_MODEL_HPP
#define FASTADV_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastadv {

using FeatureId = std::size_t;
using NodeId = std::int32_t;

/** Raised when a model and an example (or a feature subset) disagree on
 * dimensions, or a model violates its structural invariants. */
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** One node of a tree in index-array form. A node is a leaf iff `left < 0`. */
struct Node {
    FeatureId feature = 0;
    double threshold = 0.0;
    NodeId left = -1;
    NodeId right = -1;
    double value = 0.0;

    static Node leaf(double v) { return Node{0, 0.0, -1, -1, v}; }
    static Node split(FeatureId f, double t, NodeId l, NodeId r) { return Node{f, t, l, r, 0.0}; }

    bool is_leaf() const { return left < 0; }
    bool operator==(const Node&) const = default;
};

class Tree {
public:
    Tree() : nodes_{Node::leaf(0.0)} {}
    explicit Tree(std::vector<Node> nodes, NodeId root = 0)
        : nodes_(std::move(nodes)), root_(root) {}

    static Tree single_leaf(double v) { return Tree({Node::leaf(v)}); }

    NodeId root() const { return root_; }
    const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

    std::size_t num_leaves() const
    {
        return static_cast<std::size_t>(
            std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
    }

    /** Checks that the node array is exactly a tree rooted at `root()` with
     * finite thresholds, finite leaf values and split features below `d`. */
    void validate(std::size_t num_features) const;

    /** Leaf reached by routing left iff `x[f] < threshold`. */
    NodeId leaf_index(std::span<const double> x) const
    {
        NodeId id = root_;
        while (!node(id).is_leaf()) {
            const Node& n = node(id);
            id = x[n.feature] < n.threshold ? n.left : n.right;
        }
        return id;
    }

    double eval(std::span<const double> x) const { return node(leaf_index(x)).value; }

    bool operator==(const Tree&) const = default;

private:
    std::vector<Node> nodes_;
    NodeId root_ = 0;
};

/** A labelled (or unlabelled) dense input vector. Labels are -1 or +1. */
struct Example {
    std::vector<double> values;
    std::optional<int> label;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    bool operator==(const Example&) const = default;
};

class Ensemble {
public:
    Ensemble() = default;
    Ensemble(std::vector<Tree> trees, std::size_t num_features, double bias = 0.0)
        : trees_(std::move(trees)), num_features_(num_features), bias_(bias)
    {
        validate();
    }

    const std::vector<Tree>& trees() const { return trees_; }
    const Tree& tree(std::size_t i) const { return trees_[i]; }
    std::size_t size() const { return trees_.size(); }
    std::size_t num_features() const { return num_features_; }
    double bias() const { return bias_; }

    std::size_t num_nodes() const
    {
        std::size_t n = 0;
        for (const Tree& t : trees_)
            n += t.size();
        return n;
    }

    void validate() const
    {
        if (num_features_ == 0)
            throw ModelError("ensemble must have at least one feature");
        if (!std::isfinite(bias_))
            throw ModelError("ensemble bias is not finite");
        for (std::size_t i = 0; i < trees_.size(); ++i) {
            try {
                trees_[i].validate(num_features_);
            } catch (const ModelError& e) {
                throw ModelError("tree " + std::to_string(i) + ": " + e.what());
            }
        }
    }

    bool operator==(const Ensemble&) const = default;

private:
    std::vector<Tree> trees_;
    std::size_t num_features_ = 1;
    double bias_ = 0.0;
};

inline void Tree::validate(std::size_t num_features) const
{
    if (nodes_.empty())
        throw ModelError("tree has no nodes");
    const auto n = static_cast<NodeId>(nodes_.size());
    if (root_ < 0 || root_ >= n)
        throw ModelError("root index out of range");
    std::vector<int> parents(nodes_.size(), 0);
    for (NodeId i = 0; i < n; ++i) {
        const Node& nd = nodes_[static_cast<std::size_t>(i)];
        const std::string where = "node " + std::to_string(i);
        if (nd.is_leaf()) {
            if (!std::isfinite(nd.value))
                throw ModelError(where + ": leaf value is not finite");
            continue;
        }
        if (nd.feature >= num_features)
            throw ModelError(where + ": feature " + std::to_string(nd.feature) +
                             " out of range for " + std::to_string(num_features) + " features");
        if (!std::isfinite(nd.threshold))
            throw ModelError(where + ": threshold is not finite");
        if (nd.right < 0 || nd.left >= n || nd.right >= n || nd.left == nd.right)
            throw ModelError(where + ": invalid children");
        if (nd.left == root_ || nd.right == root_)
            throw ModelError(where + ": child points at the root");
        ++parents[static_cast<std::size_t>(nd.left)];
        ++parents[static_cast<std::size_t>(nd.right)];
    }
    for (NodeId i = 0; i < n; ++i)
        if (i != root_ && parents[static_cast<std::size_t>(i)] != 1)
            throw ModelError("node " + std::to_string(i) + ": expected exactly one parent");
    // One parent per non-root node plus a parentless root leaves cycles as
    // the only failure mode; count what is reachable from the root.
    std::vector<NodeId> stack{root_};
    std::size_t seen = 0;
    while (!stack.empty()) {
        const Node& nd = node(stack.back());
        stack.pop_back();
        if (++seen > nodes_.size())
            break;
        if (!nd.is_leaf()) {
            stack.push_back(nd.left);
            stack.push_back(nd.right);
        }
    }
    if (seen != nodes_.size())
        throw ModelError("tree contains nodes unreachable from the root");
}

inline void check_dimensions(const Ensemble& e, std::span<const double> x)
{
    if (x.size() != e.num_features())
        throw ModelError("example has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(e.num_features()));
}

inline double evaluate_tree(const Tree& tree, std::span<const double> x)
{
    return tree.eval(x);
}

inline double predict_margin(const Ensemble& e, std::span<const double> x)
{
    check_dimensions(e, x);
    double m = e.bias();
    for (const Tree& t : e.trees())
        m += t.eval(x);
    return m;
}

inline double predict_margin(const Ensemble& e, const Example& x) { return predict_margin(e, x.values); }

inline double sigmoid(double margin) { return 1.0 / (1.0 + std::exp(-margin)); }

inline double predict_proba(const Ensemble& e, const Example& x) { return sigmoid(predict_margin(e, x)); }

/// Label for a margin; a margin of exactly zero is classified +1.
inline int label_of_margin(double margin) { return margin >= 0.0 ? 1 : -1; }

inline int predict_label(const Ensemble& e, std::span<const double> x)
{
    return label_of_margin(predict_margin(e, x));
}

inline int predict_label(const Ensemble& e, const Example& x) { return predict_label(e, x.values); }

/** Membership mask for a feature subset. */
inline std::vector<bool> feature_mask(std::span<const FeatureId> selected, std::size_t d)
{
    std::vector<bool> mask(d, false);
    for (FeatureId f : selected) {
        if (f >= d)
            throw ModelError("feature subset references feature " + std::to_string(f) +
                             " but the model has " + std::to_string(d));
        mask[f] = true;
    }
    return mask;
}

/**
 * Restricts `tree` to the features in `selected`: every split on a feature
 * outside the mask is replaced by the child that `x` is routed to, and the
 * other child's subtree is dropped. Surviving nodes are renumbered in
 * pre-order starting at 0.
 */
inline Tree prune_tree(const Tree& tree, std::span<const double> x, const std::vector<bool>& selected)
{
    std::vector<Node> out;
    out.reserve(tree.size());

    // Skip through unselected splits to the node x actually reaches.
    auto follow = [&](NodeId id) {
        while (!tree.node(id).is_leaf() && !selected[tree.node(id).feature]) {
            const Node& n = tree.node(id);
            id = x[n.feature] < n.threshold ? n.left : n.right;
        }
        return id;
    };

    struct Frame {
        NodeId src;
        NodeId dst;
    };
    std::vector<Frame> stack;
    out.push_back(tree.node(follow(tree.root())));
    stack.push_back({follow(tree.root()), 0});
    while (!stack.empty()) {
        Frame fr = stack.back();
        stack.pop_back();
        const Node& src = tree.node(fr.src);
        if (src.is_leaf())
            continue;
        NodeId l = follow(src.left);
        NodeId r = follow(src.right);
        auto li = static_cast<NodeId>(out.size());
        out.push_back(tree.node(l));
        auto ri = static_cast<NodeId>(out.size());
        out.push_back(tree.node(r));
        out[static_cast<std::size_t>(fr.dst)].left = li;
        out[static_cast<std::size_t>(fr.dst)].right = ri;
        stack.push_back({r, ri});
        stack.push_back({l, li});
    }
    for (Node& n : out)
        if (n.is_leaf())
            n = Node::leaf(n.value);
    return Tree(std::move(out), 0);
}

/** The ensemble as seen by examples that agree with `x` on every feature
 * outside `selected`. */
inline Ensemble prune(const Ensemble& e, const Example& x, std::span<const FeatureId> selected)
{
    check_dimensions(e, x.values);
    const std::vector<bool> mask = feature_mask(selected, e.num_features());
    std::vector<Tree> trees;
    trees.reserve(e.size());
    for (const Tree& t : e.trees())
        trees.push_back(prune_tree(t, x.values, mask));
    return Ensemble(std::move(trees), e.num_features(), e.bias());
}

struct RandomEnsembleParams {
    std::size_t num_trees = 10;
    std::size_t max_depth = 4;
    std::size_t num_features = 10;
    double leaf_scale = 1.0;
    std::uint64_t seed = 0;
    /// Features that splits may use; empty means all features.
    std::vector<FeatureId> split_features;
};

/**
 * Deterministic random ensemble: full binary trees of exactly `max_depth`
 * levels, split thresholds uniform in [0, 1), leaf values uniform in
 * [-leaf_scale, leaf_scale].
 */
inline Ensemble random_ensemble(const RandomEnsembleParams& p)
{
    if (p.num_trees == 0 || p.num_features == 0)
        throw ModelError("random_ensemble needs a positive tree and feature count");
    for (FeatureId f : p.split_features)
        if (f >= p.num_features)
            throw ModelError("split feature " + std::to_string(f) + " out of range");

    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick_feature = [&]() -> FeatureId {
        if (p.split_features.empty())
            return static_cast<FeatureId>(rng() % p.num_features);
        return p.split_features[rng() % p.split_features.size()];
    };

    std::vector<Tree> trees;
    trees.reserve(p.num_trees);
    for (std::size_t t = 0; t < p.num_trees; ++t) {
        std::vector<Node> nodes;
        // Build in pre-order with an explicit stack of (node index, depth).
        std::vector<std::pair<NodeId, std::size_t>> stack;
        nodes.push_back(Node{});
        stack.emplace_back(0, 0);
        while (!stack.empty()) {
            auto [id, depth] = stack.back();
            stack.pop_back();
            if (depth == p.max_depth) {
                nodes[static_cast<std::size_t>(id)] = Node::leaf(p.leaf_scale * (2.0 * unit(rng) - 1.0));
                continue;
            }
            const FeatureId f = pick_feature();
            const double thr = unit(rng);
            auto l = static_cast<NodeId>(nodes.size());
            nodes.push_back(Node{});
            auto r = static_cast<NodeId>(nodes.size());
            nodes.push_back(Node{});
            nodes[static_cast<std::size_t>(id)] = Node::split(f, thr, l, r);
            stack.emplace_back(r, depth + 1);
            stack.emplace_back(l, depth + 1);
        }
        trees.emplace_back(std::move(nodes), 0);
    }
    return Ensemble(std::move(trees), p.num_features, 0.0);
}

/** Concatenates the trees of two ensembles over the same feature space. */
inline Ensemble merge(const Ensemble& a, const Ensemble& b)
{
    if (a.num_features() != b.num_features())
        throw ModelError("cannot merge ensembles with different feature counts");
    std::vector<Tree> trees = a.trees();
    trees.insert(trees.end(), b.trees().begin(), b.trees().end());
    return Ensemble(std::move(trees), a.num_features(), a.bias() + b.bias());
}

} // namespace fastadv

#endif // FASTADV_MODEL_HPP
