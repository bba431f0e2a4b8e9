#include <gtest/gtest.h>

#include <algorithm>

#include "segfair/metrics.hpp"
#include "segfair/rng.hpp"

using namespace segfair;

namespace {

CityGraph path_city(const std::vector<std::pair<Population, Population>>& q_rest) {
    std::vector<VertexRecord> v;
    std::vector<Edge> e;
    for (std::size_t i = 0; i < q_rest.size(); ++i) {
        v.push_back({static_cast<long long>(i), q_rest[i].first + q_rest[i].second, q_rest[i].first});
        if (i > 0) e.push_back({static_cast<VertexId>(i - 1), static_cast<VertexId>(i)});
    }
    return CityGraph("path", v, e);
}

// Direct evaluation of the index formula, independent of the library routine.
double dissimilarity_oracle(const std::vector<std::pair<Population, Population>>& q_rest) {
    double q = 0, r = 0;
    for (auto [a, b] : q_rest) {
        q += a;
        r += b;
    }
    double s = 0;
    for (auto [a, b] : q_rest) s += std::abs(a / q - b / r);
    return s / 2;
}

}  // namespace

TEST(Dissimilarity, HomogeneousBlocksGiveOne) {
    EXPECT_DOUBLE_EQ(dissimilarity(path_city({{10, 0}, {0, 10}})), 1.0);
}

TEST(Dissimilarity, ProportionalBlocksGiveZero) {
    EXPECT_NEAR(dissimilarity(path_city({{3, 7}, {30, 70}, {6, 14}})), 0.0, 1e-12);
}

TEST(Dissimilarity, SixFourExample) {
    EXPECT_NEAR(dissimilarity(path_city({{6, 4}, {4, 6}})), 0.2, 1e-12);
}

TEST(Dissimilarity, UndefinedWithoutBothGroups) {
    EXPECT_THROW(dissimilarity(path_city({{0, 5}, {0, 3}})), UndefinedIndex);
    EXPECT_THROW(dissimilarity(path_city({{5, 0}, {3, 0}})), UndefinedIndex);
}

TEST(Dissimilarity, MatchesFormulaAndInvariances) {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<std::size_t>(uniform_int(rng, 2, 40));
        std::vector<std::pair<Population, Population>> blocks(n);
        for (auto& b : blocks) b = {uniform_int(rng, 0, 50), uniform_int(rng, 0, 50)};
        blocks[0].first += 1;
        blocks[1].second += 1;
        const double d = dissimilarity(path_city(blocks));
        EXPECT_NEAR(d, dissimilarity_oracle(blocks), 1e-12);
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 1.0);

        auto shuffled = blocks;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_NEAR(dissimilarity(path_city(shuffled)), d, 1e-12);

        const Population k = uniform_int(rng, 2, 9);
        auto scaled = blocks;
        for (auto& b : scaled) b = {b.first * k, b.second * k};
        EXPECT_NEAR(dissimilarity(path_city(scaled)), d, 1e-12);
    }
}

TEST(MinorityMajority, StrictMajority) {
    EXPECT_TRUE(is_minority_majority({1000, 501}));
    EXPECT_FALSE(is_minority_majority({1000, 500}));
}

TEST(MinorityMajority, StripesWithThreeHeavyStripes) {
    auto g = build_grid(10, 10, 10);
    std::vector<Population> q(100);
    for (int v = 0; v < 100; ++v) q[v] = v / 10 < 3 ? 6 : 1;
    g = g.with_q(q);
    auto plan = stripes_plan(10, 10, 10);
    // Per-district sums by hand: 60 of 100 for the top three rows, 10 of 100 below.
    int oracle = 0;
    for (int d = 0; d < 10; ++d) {
        Population dq = 0, dp = 0;
        for (int c = 0; c < 10; ++c) {
            dq += q[d * 10 + c];
            dp += 10;
        }
        oracle += 2 * dq > dp;
    }
    EXPECT_EQ(oracle, 3);
    EXPECT_EQ(minority_majority_count(g, plan), 3);
}

TEST(Fairness, WorkedExamples) {
    EXPECT_NEAR(fairness_ratio(3, 10, 30, 100), 1.0, 1e-9);
    EXPECT_NEAR(fairness_ratio(1, 10, 30, 100), 1.0 / 3.0, 1e-9);
    EXPECT_NEAR(fairness_ratio(4, 10, 30, 100), 4.0 / 3.0, 1e-9);
    EXPECT_NEAR(fairness_ratio(6, 10, 70, 100), 0.6 / 0.7, 1e-9);
    EXPECT_NEAR(fairness_ratio(4, 10, 30, 100), 1.33, 0.005);
    EXPECT_NEAR(fairness_ratio(6, 10, 70, 100), 0.85, 0.01);
    EXPECT_THROW(fairness_ratio(0, 10, 0, 100), UndefinedIndex);
}

TEST(Fairness, MinneapolisScaleCheck) {
    // F-bar = 1 with n = 13 and Q/P = 0.209 needs a mean of 13 * 0.209 minority-majority wards.
    EXPECT_NEAR(13 * 0.209, 2.72, 0.005);
    EXPECT_NEAR((2.717 / 13) / 0.209, 1.0, 1e-9);
}

TEST(Fairness, AgreesWithCountOverShare) {
    auto g = build_grid(10, 10, 10);
    std::vector<Population> q(100);
    for (int v = 0; v < 100; ++v) q[v] = (v * 7) % 11;
    g = g.with_q(q);
    auto plan = stripes_plan(10, 10, 5);
    const double expected = (minority_majority_count(g, plan) / 5.0) / g.q_fraction();
    EXPECT_NEAR(fairness(g, plan), expected, 1e-12);
}

TEST(EnsembleFairness, MeanAndHistogram) {
    auto g = build_grid(10, 10, 10);
    std::vector<Population> q(100);
    for (int v = 0; v < 100; ++v) q[v] = v < 30 ? 8 : 1;
    g = g.with_q(q);
    std::vector<DistrictPlan> plans{stripes_plan(10, 10, 10), stripes_plan(10, 10, 10), blocks_plan(10, 10, 2, 5)};
    auto stats = ensemble_fairness(g, plans);
    EXPECT_EQ(stats.n_plans, 3u);
    double sum = 0;
    for (const auto& p : plans) sum += fairness(g, p);
    EXPECT_NEAR(stats.f_bar, sum / 3, 1e-12);
    std::size_t total = 0;
    for (auto [dq, count] : stats.dq_histogram) total += count;
    EXPECT_EQ(total, 3u);

    std::vector<DistrictPlan> one{plans[0]};
    EXPECT_DOUBLE_EQ(ensemble_fairness(g, one).f_bar, fairness(g, plans[0]));
    std::vector<DistrictPlan> same(4, plans[0]);
    auto s = ensemble_fairness(g, same);
    EXPECT_DOUBLE_EQ(s.f_bar, fairness(g, plans[0]));
    EXPECT_EQ(s.dq_histogram.size(), 1u);

    std::vector<DistrictPlan> none;
    EXPECT_THROW(ensemble_fairness(g, none), InvalidArgument);
}
