#include "oracles.hpp"

#include <fastadv/fixtures.hpp>
#include <fastadv/io.hpp>
#include <fastadv/model.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace fastadv;

namespace {

Tree stump(FeatureId f, double t, double l, double r)
{
    return Tree({Node::split(f, t, 1, 2), Node::leaf(l), Node::leaf(r)});
}

std::vector<double> random_point(std::mt19937_64& rng, std::size_t d)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(d);
    for (double& v : x)
        v = u(rng);
    return x;
}

} // namespace

TEST(EvaluateTree, SingleLeaf)
{
    Tree t = Tree::single_leaf(0.7);
    std::vector<double> x{0.1, 0.2};
    EXPECT_EQ(evaluate_tree(t, x), 0.7);
}

TEST(EvaluateTree, ThresholdValueGoesRight)
{
    Tree t = stump(0, 0.5, 1.0, -1.0);
    std::vector<double> at{0.5};
    std::vector<double> below_t{std::nextafter(0.5, 0.0)};
    EXPECT_EQ(evaluate_tree(t, at), -1.0);
    EXPECT_EQ(evaluate_tree(t, below_t), 1.0);
}

TEST(EvaluateTree, MatchesRecursiveDescent)
{
    Ensemble e = random_ensemble({1, 3, 5, 1.0, 11, {}});
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        auto x = random_point(rng, 5);
        EXPECT_EQ(evaluate_tree(e.tree(0), x), oracle::naive_eval(e.tree(0), 0, x));
    }
}

TEST(PredictMargin, Examples)
{
    Ensemble cancel({Tree::single_leaf(0.3), Tree::single_leaf(-0.3)}, 1);
    EXPECT_EQ(predict_margin(cancel, Example{{0.0}, {}}), 0.0);

    Ensemble one({Tree::single_leaf(0.7)}, 1);
    EXPECT_EQ(predict_margin(one, Example{{0.0}, {}}), 0.7);
    EXPECT_NEAR(predict_proba(one, Example{{0.0}, {}}), 1.0 / (1.0 + std::exp(-0.7)), 1e-15);
    EXPECT_NEAR(predict_proba(one, Example{{0.0}, {}}), 0.668, 5e-4);

    Ensemble bias_only({}, 3, 1.5);
    EXPECT_EQ(predict_margin(bias_only, Example{{0.0, 0.0, 0.0}, {}}), 1.5);
}

TEST(PredictMargin, DimensionMismatch)
{
    Ensemble e({stump(1, 0.5, 1, -1)}, 2);
    EXPECT_THROW(predict_margin(e, Example{{0.1}, {}}), ModelError);
}

TEST(PredictLabel, TieIsPositive)
{
    EXPECT_EQ(label_of_margin(0.0), 1);
    EXPECT_EQ(label_of_margin(-2.0), -1);
    Ensemble cancel({Tree::single_leaf(0.3), Tree::single_leaf(-0.3)}, 1);
    EXPECT_EQ(predict_label(cancel, Example{{0.0}, {}}), 1);
}

TEST(PredictLabel, AgreesWithMarginSign)
{
    Ensemble e = random_ensemble({8, 4, 6, 1.0, 5, {}});
    std::mt19937_64 rng(17);
    for (int i = 0; i < 1000; ++i) {
        auto x = random_point(rng, 6);
        const double m = oracle::naive_margin(e, x);
        EXPECT_EQ(predict_label(e, x), m >= 0.0 ? 1 : -1);
    }
}

TEST(Validate, RejectsBrokenTrees)
{
    EXPECT_THROW(Ensemble({stump(3, 0.5, 1, -1)}, 2), ModelError);
    EXPECT_THROW(Ensemble({Tree({Node::split(0, 0.5, 1, 1), Node::leaf(1)})}, 1), ModelError);
    EXPECT_THROW(Ensemble({Tree({Node::split(0, std::nan(""), 1, 2), Node::leaf(1), Node::leaf(2)})}, 1),
                 ModelError);
    // Node 3 is unreachable.
    EXPECT_THROW(Ensemble({Tree({Node::split(0, 0.5, 1, 2), Node::leaf(1), Node::leaf(2), Node::leaf(3)})}, 1),
                 ModelError);
}

// Height is feature 0, Age is feature 1. Subtrees (a), (b), (c) are single
// splits on feature 2 with distinct leaves.
TEST(Prune, FigureTwoTree)
{
    std::vector<Node> nodes = {
        Node::split(0, 200.0, 1, 4),   // Height < 200
        Node::split(2, 1.0, 2, 3),     // (a)
        Node::leaf(1.0),   Node::leaf(2.0),
        Node::split(1, 50.0, 5, 8),    // Age < 50
        Node::split(2, 2.0, 6, 7),     // (b)
        Node::leaf(3.0),   Node::leaf(4.0),
        Node::split(2, 3.0, 9, 10),    // (c)
        Node::leaf(5.0),   Node::leaf(6.0),
    };
    Ensemble e({Tree(nodes, 0)}, 3);
    Example x{{180.0, 55.0, 0.0}, {}};
    std::vector<FeatureId> selected{0, 2};
    Ensemble p = prune(e, x, selected);

    const Tree& t = p.tree(0);
    const Node& root = t.node(t.root());
    ASSERT_FALSE(root.is_leaf());
    EXPECT_EQ(root.feature, 0u);
    EXPECT_EQ(root.threshold, 200.0);
    const Node& a = t.node(root.left);
    const Node& c = t.node(root.right);
    EXPECT_EQ(a.threshold, 1.0);
    EXPECT_EQ(c.threshold, 3.0);
    EXPECT_EQ(t.node(c.left).value, 5.0);
    EXPECT_EQ(t.node(c.right).value, 6.0);
    EXPECT_EQ(t.size(), 7u);
    for (const Node& n : t.nodes())
        EXPECT_TRUE(n.is_leaf() || n.feature != 1) << "Age split survived";
    // Input untouched.
    EXPECT_EQ(e.tree(0).size(), 11u);
}

TEST(Prune, AllFeaturesKeepsStructure)
{
    Ensemble e = random_ensemble({5, 4, 8, 1.0, 21, {}});
    std::vector<FeatureId> all{0, 1, 2, 3, 4, 5, 6, 7};
    Example x{std::vector<double>(8, 0.5), {}};
    Ensemble p = prune(e, x, all);
    ASSERT_EQ(p.size(), e.size());
    std::mt19937_64 rng(1);
    for (std::size_t t = 0; t < e.size(); ++t) {
        EXPECT_EQ(p.tree(t).size(), e.tree(t).size());
        EXPECT_EQ(p.tree(t).num_leaves(), e.tree(t).num_leaves());
    }
    for (int i = 0; i < 200; ++i) {
        auto z = random_point(rng, 8);
        EXPECT_EQ(predict_margin(p, z), predict_margin(e, z));
    }
}

TEST(Prune, EmptySubsetCollapsesEveryTree)
{
    Ensemble e = random_ensemble({6, 4, 5, 1.0, 2, {}});
    Example x{{0.1, 0.9, 0.4, 0.3, 0.7}, {}};
    Ensemble p = prune(e, x, {});
    for (const Tree& t : p.trees())
        EXPECT_EQ(t.size(), 1u);
    EXPECT_EQ(predict_margin(p, x), predict_margin(e, x));
}

TEST(Prune, AgreesWithFullModelOffSubset)
{
    Ensemble e = random_ensemble({5, 4, 8, 1.0, 99, {}});
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Example x{random_point(rng, 8), {}};
        std::vector<FeatureId> sel = fixtures::pick_features(8, 3, rng());
        Ensemble p = prune(e, x, sel);
        EXPECT_EQ(predict_margin(p, x), predict_margin(e, x));
        EXPECT_LE(p.num_nodes(), e.num_nodes());
        std::vector<bool> in(8, false);
        for (FeatureId f : sel)
            in[f] = true;
        for (int i = 0; i < 200; ++i) {
            auto z = random_point(rng, 8);
            for (std::size_t f = 0; f < 8; ++f)
                if (!in[f])
                    z[f] = x.values[f];
            ASSERT_EQ(predict_margin(p, z), oracle::naive_margin(e, z));
        }
    }
}

TEST(Prune, RejectsBadSubset)
{
    Ensemble e = random_ensemble({1, 2, 3, 1.0, 2, {}});
    std::vector<FeatureId> bad{5};
    EXPECT_THROW(prune(e, Example{{0, 0, 0}, {}}, bad), ModelError);
}

TEST(RandomEnsemble, DepthZeroIsSingleLeaf)
{
    Ensemble e = random_ensemble({1, 0, 4, 1.0, 7, {}});
    ASSERT_EQ(e.size(), 1u);
    EXPECT_EQ(e.tree(0).size(), 1u);
    EXPECT_TRUE(e.tree(0).node(0).is_leaf());
}

TEST(RandomEnsemble, Deterministic)
{
    RandomEnsembleParams p{10, 4, 12, 0.5, 1234, {}};
    EXPECT_EQ(io::dump_ensemble(random_ensemble(p)), io::dump_ensemble(random_ensemble(p)));
    RandomEnsembleParams q = p;
    q.seed = 1235;
    EXPECT_NE(io::dump_ensemble(random_ensemble(p)), io::dump_ensemble(random_ensemble(q)));
}

TEST(RandomEnsemble, FeatureIndicesInRange)
{
    Ensemble e = random_ensemble({50, 6, 100, 1.0, 42, {}});
    for (const Tree& t : e.trees())
        for (const Node& n : t.nodes())
            if (!n.is_leaf()) {
                EXPECT_LT(n.feature, 100u);
                EXPECT_GE(n.threshold, 0.0);
                EXPECT_LT(n.threshold, 1.0);
            }
}

TEST(RandomEnsemble, RestrictedSplitFeatures)
{
    Ensemble e = random_ensemble({20, 5, 100, 1.0, 8, {3, 40, 77}});
    for (const Tree& t : e.trees())
        for (const Node& n : t.nodes())
            if (!n.is_leaf()) {
                EXPECT_TRUE(n.feature == 3 || n.feature == 40 || n.feature == 77);
            }
}
