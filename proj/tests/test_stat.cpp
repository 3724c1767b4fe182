#include "oracles.hpp"

#include <fastadv/stat_test.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace fastadv;

// Evaluated independently with 50-digit arithmetic before the library existed.
constexpr double kGolden = 0.0321966303365975365;

TEST(GreeneBound, GoldenValue)
{
    const double b = greene_bound(100, 10000, 1.0);
    EXPECT_NEAR(b, kGolden, 1e-9 * kGolden);
}

TEST(GreeneBound, VacuousWhenLambdaTooLarge)
{
    // sqrt(n) - 2 lambda <= 0.
    EXPECT_EQ(greene_bound(100, 10000, 5.0), 1.0);
    EXPECT_EQ(greene_bound(100, 10000, 7.5), 1.0);
}

TEST(GreeneBound, RejectsInvalidSizes)
{
    EXPECT_THROW(greene_bound(100, 100, 1.0), ConfigError);
    EXPECT_THROW(greene_bound(1, 100, 1.0), ConfigError);
    EXPECT_THROW(greene_bound(2, 4, 1.0), ConfigError);
    EXPECT_THROW(greene_bound(10, 100, 0.0), ConfigError);
}

TEST(GreeneBound, WithinUnitInterval)
{
    for (std::size_t n : {5u, 20u, 100u})
        for (double lambda = 0.05; lambda < 6.0; lambda += 0.05) {
            const double b = greene_bound(n, 10 * n, lambda);
            EXPECT_GE(b, 0.0);
            EXPECT_LE(b, 1.0);
        }
}

// Monotone on the valid domain; past its end the bound is vacuous (1).
TEST(GreeneBound, MonotoneInLambda)
{
    for (std::size_t n : {4u, 10u, 50u, 100u, 400u})
        for (std::size_t N : {n + 1, 2 * n, 10 * n, 100 * n}) {
            if (N <= 4)
                continue;
            double prev = 1.0;
            const double end = detail::greene_domain_end(static_cast<double>(n), static_cast<double>(N));
            for (double lambda = 0.01; lambda < end; lambda += 0.01) {
                const double b = greene_bound(n, N, lambda);
                ASSERT_LE(b, prev) << "n=" << n << " N=" << N << " lambda=" << lambda;
                prev = b;
            }
        }
}

TEST(HypergeomTail, Examples)
{
    EXPECT_EQ(hypergeom_tail_exact(5, 5, 10, 5), 1.0);
    EXPECT_EQ(hypergeom_tail_exact(5, 5, 10, -1), 0.0);
    EXPECT_NEAR(hypergeom_tail_exact(5, 5, 10, 2), 0.5, 1e-14);
}

TEST(HypergeomTail, MatchesExactIntegerSum)
{
    for (int N = 2; N <= 40; N += 3)
        for (int n = 1; n < N; n += 2)
            for (int D = 0; D <= N; D += 2)
                for (int k = -1; k <= n; ++k)
                    EXPECT_NEAR(hypergeom_tail_exact(static_cast<std::size_t>(n), static_cast<std::size_t>(D),
                                                     static_cast<std::size_t>(N), k),
                                oracle::hypergeom_cdf_exact(n, D, N, k), 1e-12);
}

TEST(HypergeomTail, FractionalThresholdRoundsDown)
{
    EXPECT_EQ(hypergeom_tail_exact(5, 5, 10, 2.7), hypergeom_tail_exact(5, 5, 10, 2));
}

TEST(ChooseMargin, DefaultParameters)
{
    const double delta = choose_margin(StatTestConfig{});
    EXPECT_GE(delta, 0.08);
    EXPECT_LE(delta, 0.12);
    EXPECT_DOUBLE_EQ(delta, 0.11);
}

TEST(ChooseMargin, IsSmallestQualifyingGridPoint)
{
    StatTestConfig c;
    const double delta = choose_margin(c);
    const double target = c.eta / c.corrections;
    EXPECT_LT(greene_bound(c.n, c.N, delta * 10.0), target);
    EXPECT_GE(greene_bound(c.n, c.N, (delta - 0.01) * 10.0), target);
}

TEST(ChooseMargin, LooseRequirementPicksEarlyGridPoint)
{
    StatTestConfig c;
    c.eta = 0.99;
    c.corrections = 1.0;
    const double delta = choose_margin(c);
    EXPECT_LT(greene_bound(c.n, c.N, delta * 10.0), 0.99);
    for (double smaller = 0.01; smaller < delta - 1e-12; smaller += 0.01)
        EXPECT_GE(greene_bound(c.n, c.N, smaller * 10.0), 0.99);
    EXPECT_LE(delta, 0.03);
}

TEST(ChooseMargin, ShrinksAsConfidenceLoosens)
{
    double prev = 1.0;
    for (double eta : {0.01, 0.05, 0.1, 0.2, 0.5}) {
        StatTestConfig c;
        c.eta = eta;
        const double d = choose_margin(c);
        EXPECT_LE(d, prev);
        prev = d;
    }
}

TEST(ChooseMargin, TinySampleFails)
{
    StatTestConfig c;
    c.n = 3;
    try {
        choose_margin(c);
        FAIL() << "expected a ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("larger n"), std::string::npos);
    }
}

TEST(StatTestConfig, Validation)
{
    StatTestConfig c;
    c.tau = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.eta = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.corrections = 0.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.n = c.N;
    EXPECT_THROW(c.validate(), ConfigError);
}
