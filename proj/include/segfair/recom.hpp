#pragma once

// Recombination (ReCom) chain over valid district plans: merge two adjacent
// districts, draw a random spanning tree of the union, cut one tree edge that
// leaves both sides within the population window. Always-accept.

#include <algorithm>
#include <vector>

#include "segfair/city_graph.hpp"
#include "segfair/errors.hpp"
#include "segfair/parallel.hpp"
#include "segfair/partition.hpp"
#include "segfair/rng.hpp"

namespace segfair {

struct ChainConfig {
    long long steps = 1;
    double epsilon = kDefaultEpsilon;
    std::uint64_t rng_seed = 0;
    int max_split_attempts = 10'000;
    // Fresh district pairs tried in one step before the chain is declared stalled.
    int max_pair_retries = 100;
    long long record_every = 1;

    void validate() const {
        if (steps < 1) throw InvalidArgument("chain: steps must be >= 1");
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("chain: epsilon must lie in (0, 1)");
        if (max_split_attempts < 1 || max_pair_retries < 1) throw InvalidArgument("chain: attempt caps must be >= 1");
        if (record_every < 1) throw InvalidArgument("chain: record_every must be >= 1");
    }
};

namespace detail {

// Scratch buffers reused across steps of one chain.
struct RecomWorkspace {
    std::vector<VertexId> members;        // local -> global
    std::vector<int> local;               // global -> local, -1 outside the pair
    std::vector<Edge> sub_edges;          // local endpoints
    std::vector<std::uint64_t> keys;
    std::vector<std::size_t> order;
    std::vector<std::vector<int>> tree;
    std::vector<int> parent;
    std::vector<int> visit;
    std::vector<Population> subtree_pop;
    std::vector<int> cuts;
};

// Returns the local vertex whose subtree (rooted at local 0) forms one side of
// a balanced cut, or -1 when the sampled tree has no balanced edge.
inline int sample_balanced_cut(const CityGraph& g, RecomWorkspace& ws, const BalanceBounds& bounds,
                               Rng& rng) {
    const auto m = ws.members.size();
    const auto e = ws.sub_edges.size();

    // Random-weight minimum spanning tree (Kruskal).
    ws.keys.resize(e);
    for (auto& k : ws.keys) k = rng();
    ws.order.resize(e);
    std::iota(ws.order.begin(), ws.order.end(), std::size_t{0});
    std::sort(ws.order.begin(), ws.order.end(), [&](std::size_t a, std::size_t b) {
        return ws.keys[a] < ws.keys[b] || (ws.keys[a] == ws.keys[b] && a < b);
    });
    ws.tree.resize(m);
    for (auto& adj : ws.tree) adj.clear();
    DisjointSets sets(m);
    std::size_t taken = 0;
    for (std::size_t idx : ws.order) {
        const Edge& ed = ws.sub_edges[idx];
        if (sets.unite(static_cast<std::size_t>(ed.u), static_cast<std::size_t>(ed.v))) {
            ws.tree[ed.u].push_back(ed.v);
            ws.tree[ed.v].push_back(ed.u);
            if (++taken + 1 == m) break;
        }
    }

    // Subtree populations via BFS order from local 0.
    ws.parent.assign(m, -1);
    ws.visit.clear();
    ws.visit.push_back(0);
    ws.parent[0] = 0;
    for (std::size_t i = 0; i < ws.visit.size(); ++i) {
        const int v = ws.visit[i];
        for (int w : ws.tree[v]) {
            if (ws.parent[w] < 0) {
                ws.parent[w] = v;
                ws.visit.push_back(w);
            }
        }
    }
    ws.subtree_pop.assign(m, 0);
    for (std::size_t i = m; i-- > 0;) {
        const int v = ws.visit[i];
        ws.subtree_pop[v] += g.pop(ws.members[v]);
        if (v != 0) ws.subtree_pop[ws.parent[v]] += ws.subtree_pop[v];
    }
    const Population total = ws.subtree_pop[0];
    ws.cuts.clear();
    for (std::size_t i = 1; i < m; ++i) {
        const int v = ws.visit[i];
        const auto side = static_cast<double>(ws.subtree_pop[v]);
        if (bounds.contains(side) && bounds.contains(static_cast<double>(total) - side)) ws.cuts.push_back(v);
    }
    if (ws.cuts.empty()) return -1;
    return ws.cuts[uniform_index(rng, ws.cuts.size())];
}

}  // namespace detail

// One ReCom move on `assignment` in place. Returns false when no balanced cut
// was found for the chosen pair within cfg.max_split_attempts trees.
class RecomProposal {
public:
    RecomProposal(const CityGraph& g, int n_districts, const ChainConfig& cfg)
        : g_(g), n_(n_districts), cfg_(cfg), bounds_(balance_bounds(g.total_pop(), n_districts, cfg.epsilon)) {
        ws_.local.assign(g.size(), -1);
    }

    bool try_pair(std::vector<DistrictId>& assignment, DistrictId a, DistrictId b, Rng& rng) {
        ws_.members.clear();
        for (VertexId v = 0; v < static_cast<VertexId>(g_.size()); ++v) {
            if (assignment[v] == a || assignment[v] == b) {
                ws_.local[v] = static_cast<int>(ws_.members.size());
                ws_.members.push_back(v);
            }
        }
        ws_.sub_edges.clear();
        for (const Edge& e : g_.edges()) {
            if (ws_.local[e.u] >= 0 && ws_.local[e.v] >= 0) ws_.sub_edges.push_back({ws_.local[e.u], ws_.local[e.v]});
        }
        int cut = -1;
        for (int attempt = 0; attempt < cfg_.max_split_attempts && cut < 0; ++attempt) {
            cut = detail::sample_balanced_cut(g_, ws_, bounds_, rng);
        }
        if (cut >= 0) {
            // The subtree below `cut` takes label a or b with equal probability.
            const bool flip = (rng() & 1u) != 0;
            const DistrictId inside = flip ? b : a;
            const DistrictId outside = flip ? a : b;
            std::vector<char> in_subtree(ws_.members.size(), 0);
            for (std::size_t i = 0; i < ws_.visit.size(); ++i) {
                const int v = ws_.visit[i];
                in_subtree[v] = (v == cut) || (v != 0 && in_subtree[ws_.parent[v]]);
            }
            for (std::size_t i = 0; i < ws_.members.size(); ++i) {
                assignment[ws_.members[i]] = in_subtree[i] ? inside : outside;
            }
        }
        for (VertexId v : ws_.members) ws_.local[v] = -1;
        return cut >= 0;
    }

    // Pair choice is uniform over cut edges, i.e. weighted by shared boundary.
    void step(std::vector<DistrictId>& assignment, Rng& rng) {
        if (n_ < 2) throw InvalidArgument("recom_step: needs at least 2 districts");
        cut_edges_.clear();
        for (std::size_t i = 0; i < g_.edges().size(); ++i) {
            const Edge& e = g_.edges()[i];
            if (assignment[e.u] != assignment[e.v]) cut_edges_.push_back(i);
        }
        if (cut_edges_.empty()) throw InvalidArgument("recom_step: no adjacent district pair");
        for (int retry = 0; retry < cfg_.max_pair_retries; ++retry) {
            const Edge& e = g_.edges()[cut_edges_[uniform_index(rng, cut_edges_.size())]];
            if (try_pair(assignment, assignment[e.u], assignment[e.v], rng)) return;
        }
        throw ChainStall("recom: no balanced split found after " + std::to_string(cfg_.max_pair_retries) +
                         " district pairs");
    }

private:
    const CityGraph& g_;
    int n_;
    ChainConfig cfg_;
    BalanceBounds bounds_;
    detail::RecomWorkspace ws_;
    std::vector<std::size_t> cut_edges_;
};

inline DistrictPlan recom_step(const CityGraph& g, const DistrictPlan& plan, const ChainConfig& cfg, Rng& rng) {
    if (plan.district_count() < 2) throw InvalidArgument("recom_step: needs at least 2 districts");
    RecomProposal proposal(g, plan.district_count(), cfg);
    std::vector<DistrictId> a(plan.assignment().begin(), plan.assignment().end());
    proposal.step(a, rng);
    return DistrictPlan(std::move(a), plan.district_count());
}

// Visits every recorded state (after steps record_every, 2*record_every, ...).
template <class Visitor>
void walk_chain(const CityGraph& g, const DistrictPlan& seed_plan, const ChainConfig& cfg, Visitor&& visit) {
    cfg.validate();
    if (auto report = is_valid(g, seed_plan, cfg.epsilon); !report) {
        throw InvalidArgument("run_chain: seed plan invalid (" + report.describe() + ")");
    }
    Rng rng(cfg.rng_seed);
    RecomProposal proposal(g, seed_plan.district_count(), cfg);
    std::vector<DistrictId> a(seed_plan.assignment().begin(), seed_plan.assignment().end());
    for (long long s = 1; s <= cfg.steps; ++s) {
        proposal.step(a, rng);
        if (s % cfg.record_every == 0) visit(DistrictPlan(a, seed_plan.district_count()));
    }
}

inline std::vector<DistrictPlan> run_chain(const CityGraph& g, const DistrictPlan& seed_plan, const ChainConfig& cfg) {
    std::vector<DistrictPlan> out;
    out.reserve(static_cast<std::size_t>(cfg.steps / std::max(1LL, cfg.record_every)));
    walk_chain(g, seed_plan, cfg, [&](DistrictPlan p) { out.push_back(std::move(p)); });
    return out;
}

// Seeds followed by their chains: [seed_0, chain_0..., seed_1, chain_1..., ...].
// Seed i's chain uses derive_seed(cfg.rng_seed, i).
inline std::vector<DistrictPlan> build_ensemble(const CityGraph& g, std::span<const DistrictPlan> seeds,
                                                long long per_seed_steps, const ChainConfig& cfg,
                                                std::size_t workers = worker_count()) {
    if (seeds.empty()) throw InvalidArgument("build_ensemble: no seeds");
    if (per_seed_steps < 0) throw InvalidArgument("build_ensemble: negative step count");
    const int n = seeds.front().district_count();
    for (const auto& s : seeds) {
        if (s.district_count() != n) throw InvalidArgument("build_ensemble: seeds disagree on district count");
    }
    std::vector<std::vector<DistrictPlan>> chains(seeds.size());
    parallel_for(seeds.size(), workers, [&](std::size_t i) {
        if (per_seed_steps == 0) {
            if (auto report = is_valid(g, seeds[i], cfg.epsilon); !report) {
                throw InvalidArgument("build_ensemble: seed invalid (" + report.describe() + ")");
            }
            return;
        }
        ChainConfig c = cfg;
        c.steps = per_seed_steps;
        c.record_every = 1;
        c.rng_seed = derive_seed(cfg.rng_seed, i, 0xc4a1);
        chains[i] = run_chain(g, seeds[i], c);
    });
    std::vector<DistrictPlan> out;
    out.reserve(seeds.size() * static_cast<std::size_t>(per_seed_steps + 1));
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        out.push_back(seeds[i]);
        for (auto& p : chains[i]) out.push_back(std::move(p));
    }
    return out;
}

}  // namespace segfair
