#include <gtest/gtest.h>

#include <numeric>

#include "segfair/recom.hpp"
#include "segfair/validation.hpp"

using namespace segfair;

namespace {

DistrictPlan vertical_halves() {
    std::vector<DistrictId> a(16);
    for (int v = 0; v < 16; ++v) a[v] = (v % 4) < 2 ? 0 : 1;
    return DistrictPlan(a, 2);
}

DistrictPlan horizontal_halves(bool top_first) {
    std::vector<DistrictId> a(16);
    for (int v = 0; v < 16; ++v) a[v] = ((v / 4) < 2) == top_first ? 0 : 1;
    return DistrictPlan(a, 2);
}

std::vector<VertexId> cells(std::initializer_list<int> ids) { return {ids.begin(), ids.end()}; }

// Set-based distantness straight from the definition.
bool distant_oracle(const PlanSignature& a, const PlanSignature& b) {
    for (int k = 0; k < a.district_count(); ++k) {
        auto x = a.entry(k), y = b.entry(k);
        std::vector<VertexId> both;
        std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(both));
        if (!both.empty()) return false;
    }
    return true;
}

// Largest pairwise-distant subset by exhaustive search over subsets up to size cap.
std::size_t max_clique_oracle(const std::vector<PlanSignature>& sigs, std::size_t cap) {
    const auto n = sigs.size();
    std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) adj[i][j] = i != j && distant_oracle(sigs[i], sigs[j]);
    }
    std::size_t best = n ? 1 : 0;
    std::vector<std::size_t> cur;
    std::function<void(std::size_t)> grow = [&](std::size_t from) {
        best = std::max(best, cur.size());
        if (cur.size() == cap) return;
        for (std::size_t v = from; v < n; ++v) {
            bool ok = true;
            for (auto u : cur) ok = ok && adj[u][v];
            if (!ok) continue;
            cur.push_back(v);
            grow(v + 1);
            cur.pop_back();
        }
    };
    grow(0);
    return best;
}

}  // namespace

TEST(Signature, ReferenceAgainstItselfIsWholeDistricts) {
    auto g = build_grid(30, 30, 1);
    auto ref = stripes_plan(30, 30, 10);
    auto sig = signature(ref, ref);
    for (int k = 0; k < 10; ++k) {
        auto e = sig.entry(k);
        ASSERT_EQ(e.size(), 90u);
        for (auto v : e) EXPECT_EQ(ref[v], k);
    }
}

TEST(Signature, QuadrantExample) {
    auto sig = signature(horizontal_halves(true), vertical_halves());
    EXPECT_EQ(sig.entry(0), cells({0, 1, 4, 5}));
    EXPECT_EQ(sig.entry(1), cells({2, 3, 6, 7}));
    EXPECT_EQ(sig.chosen(0), 0);
    EXPECT_EQ(sig.chosen(1), 0);
}

TEST(Signature, MismatchedUniverse) {
    EXPECT_THROW(signature(stripes_plan(4, 4, 2), stripes_plan(6, 6, 2)), InvalidArgument);
    EXPECT_THROW(signature(stripes_plan(4, 4, 2), stripes_plan(4, 4, 4)), InvalidArgument);
}

TEST(AreDistant, FigureStylePairs) {
    auto ref = vertical_halves();
    auto a = signature(horizontal_halves(true), ref);
    auto b = signature(horizontal_halves(false), ref);
    EXPECT_EQ(b.entry(0), cells({8, 9, 12, 13}));
    EXPECT_TRUE(are_distant(a, b));
    EXPECT_TRUE(are_distant(b, a));
    EXPECT_FALSE(are_distant(a, a));
    auto c = signature(ref, ref);
    EXPECT_FALSE(are_distant(a, c));
}

TEST(AreDistant, DifferentReferencesRejected) {
    auto a = signature(horizontal_halves(true), vertical_halves());
    auto b = signature(horizontal_halves(true), horizontal_halves(false));
    EXPECT_THROW(are_distant(a, b), InvalidArgument);
}

TEST(MaxDistantSet, Singleton) {
    auto ref = stripes_plan(30, 30, 10);
    std::vector<DistrictPlan> one{ref};
    for (auto mode : {SearchMode::Greedy, SearchMode::Exact}) {
        auto set = max_distant_set(one, ref, mode);
        EXPECT_EQ(set.members.size(), 1u);
        EXPECT_EQ(set.upper_bound, 10);
    }
    auto report = coverage_report(one, ref);
    EXPECT_DOUBLE_EQ(report.ratio, 0.1);
}

TEST(MaxDistantSet, ExactMatchesBruteForce) {
    auto g = build_grid(6, 6, 1);
    for (std::uint64_t trial = 0; trial < 6; ++trial) {
        auto seed = seed_with_restarts(g, 3, 0.2, trial);
        ChainConfig cfg;
        cfg.steps = 40;
        cfg.rng_seed = trial + 100;
        auto plans = run_chain(g, seed, cfg);
        auto ref = trial % 2 ? stripes_plan(6, 6, 3) : seed_with_restarts(g, 3, 0.2, trial + 50);
        auto sigs = signatures(plans, ref, 1);
        const auto exact = max_distant_set(sigs, 3, SearchMode::Exact, 1);
        const auto greedy = max_distant_set(sigs, 3, SearchMode::Greedy, 1);
        EXPECT_EQ(exact.members.size(), max_clique_oracle(sigs, 3)) << "trial " << trial;
        EXPECT_GE(exact.members.size(), greedy.members.size());
        for (std::size_t i = 0; i < exact.members.size(); ++i) {
            for (std::size_t j = i + 1; j < exact.members.size(); ++j) {
                EXPECT_TRUE(distant_oracle(sigs[exact.members[i]], sigs[exact.members[j]]));
            }
        }
    }
}

TEST(MaxDistantSet, PigeonholeAndCoverageProperties) {
    auto g = build_grid(12, 12, 1);
    std::vector<DistrictPlan> seeds{seed_with_restarts(g, 4, 0.2, 1), seed_with_restarts(g, 4, 0.2, 2)};
    ChainConfig cfg;
    cfg.rng_seed = 17;
    auto plans = build_ensemble(g, seeds, 300, cfg, 1);
    for (const auto& ref : {stripes_plan(12, 12, 4), blocks_plan(12, 12, 2, 2)}) {
        auto sigs = signatures(plans, ref, 1);
        for (const auto& s : sigs) {
            for (int k = 0; k < 4; ++k) {
                const auto e = s.entry(k);
                EXPECT_GE(e.size(), (36u + 3) / 4);
                for (auto v : e) EXPECT_EQ(ref[v], k);
            }
        }
        for (std::size_t i = 0; i < 40; ++i) {
            for (std::size_t j = 0; j < 40; ++j) {
                EXPECT_EQ(are_distant(sigs[i], sigs[j]), are_distant(sigs[j], sigs[i]));
                EXPECT_EQ(are_distant(sigs[i], sigs[j]), distant_oracle(sigs[i], sigs[j]));
            }
        }
        const auto exact = max_distant_set(sigs, 4, SearchMode::Exact, 1);
        const auto greedy = max_distant_set(sigs, 4, SearchMode::Greedy, 1);
        EXPECT_LE(exact.members.size(), 4u);
        EXPECT_GE(exact.members.size(), greedy.members.size());
        // Union of the members' entries covers at least |set| / n of all blocks.
        std::set<VertexId> covered;
        for (auto m : exact.members) {
            for (int k = 0; k < 4; ++k) {
                for (auto v : sigs[m].entry(k)) covered.insert(v);
            }
        }
        EXPECT_GE(covered.size() * 4, exact.members.size() * g.size());
    }
}

TEST(MaxDistantSet, NeverExceedsBound) {
    // Many relabelled copies of disjoint-entry plans: the cap holds regardless.
    auto ref = vertical_halves();
    std::vector<DistrictPlan> plans;
    for (int i = 0; i < 10; ++i) {
        plans.push_back(horizontal_halves(true));
        plans.push_back(horizontal_halves(false));
    }
    for (auto mode : {SearchMode::Greedy, SearchMode::Exact}) {
        auto set = max_distant_set(plans, ref, mode);
        EXPECT_EQ(set.members.size(), 2u);
    }
}

TEST(CoverageReport, RatioIsSizeOverBound) {
    auto ref = vertical_halves();
    std::vector<DistrictPlan> plans{horizontal_halves(true), horizontal_halves(false)};
    auto r = coverage_report(plans, ref, SearchMode::Exact);
    EXPECT_EQ(r.set_size, 2u);
    EXPECT_EQ(r.upper_bound, 2);
    EXPECT_DOUBLE_EQ(r.ratio, 1.0);
    EXPECT_NEAR(6.0 / 7.0, 0.857, 5e-4);
    EXPECT_NEAR(7.0 / 13.0, 0.538, 5e-4);
}
