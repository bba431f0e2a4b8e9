#pragma once

// Synthetic city generation. Per-vertex totals come from a template graph; the
// two subgroups are placed by weighted random draws around hot clusters, then
// Q and P-Q residents are swapped between vertices until the dissimilarity
// index reaches its target.

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <functional>
#include <numeric>
#include <set>
#include <vector>

#include "segfair/city_graph.hpp"
#include "segfair/errors.hpp"
#include "segfair/metrics.hpp"
#include "segfair/rng.hpp"

namespace segfair {

enum class Subgroup { Q, Rest };

struct GenSpec {
    double target_q_frac = 0.3;
    double target_d = 0.5;
    double d_tolerance = 0.01;
    int cluster_count_min = 1;
    int cluster_count_max = 10;
    // Weight lost per BFS step away from a cluster, as a fraction of the max weight.
    double taper_slope_min = 0.02;
    double taper_slope_max = 0.5;
    double floor_weight = 0.01;
    double hot_fraction_q = 0.80;
    double hot_fraction_rest = 0.20;
    Population batch_size = 20;
    long long max_swaps = 1'000'000;
    std::uint64_t rng_seed = 0;

    void validate() const {
        auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
        if (!unit(target_q_frac)) throw InvalidArgument("gen spec: target_q_frac outside [0, 1]");
        if (!unit(target_d)) throw InvalidArgument("gen spec: target_d outside [0, 1]");
        if (!(d_tolerance > 0.0)) throw InvalidArgument("gen spec: d_tolerance must be > 0");
        if (cluster_count_min < 1 || cluster_count_max > 10 || cluster_count_min > cluster_count_max) {
            throw InvalidArgument("gen spec: cluster count range must lie within [1, 10]");
        }
        if (!(taper_slope_min > 0.0) || taper_slope_min > taper_slope_max) {
            throw InvalidArgument("gen spec: taper slope range must be positive and ordered");
        }
        if (!(floor_weight > 0.0 && floor_weight <= 1.0)) throw InvalidArgument("gen spec: floor_weight outside (0, 1]");
        if (!unit(hot_fraction_q) || !unit(hot_fraction_rest)) throw InvalidArgument("gen spec: hot fractions outside [0, 1]");
        if (batch_size < 1) throw InvalidArgument("gen spec: batch_size must be >= 1");
        if (max_swaps < 1) throw InvalidArgument("gen spec: max_swaps must be >= 1");
    }
};

struct WeightCluster {
    std::vector<VertexId> hot;  // vertices carrying the maximal weight 1
    double slope = 0.0;
};

struct WeightField {
    std::vector<double> weight;
    std::vector<WeightCluster> clusters;
    double floor = 0.0;
};

// weight(v) = max(floor, max_c (1 - slope_c * dist(v, hot_c))).
inline WeightField taper_field(const CityGraph& g, std::vector<WeightCluster> clusters, double floor) {
    WeightField field;
    field.floor = floor;
    field.weight.assign(g.size(), floor);
    for (const auto& c : clusters) {
        const auto dist = bfs_distances(g, c.hot);
        for (std::size_t v = 0; v < g.size(); ++v) {
            if (dist[v] < 0) continue;
            field.weight[v] = std::max(field.weight[v], 1.0 - c.slope * dist[v]);
        }
    }
    field.clusters = std::move(clusters);
    return field;
}

// Grows one cluster per seed by round-robin BFS (one vertex per cluster per
// turn, vertices claimed at most once) until the claimed capacity reaches `quota`.
inline std::vector<std::vector<VertexId>> grow_clusters(const CityGraph& g, std::span<const VertexId> seeds,
                                                        Population quota) {
    const auto k = seeds.size();
    std::vector<std::vector<VertexId>> hot(k);
    std::vector<char> claimed(g.size(), 0);
    std::vector<std::deque<VertexId>> frontier(k);
    Population capacity = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (claimed[seeds[c]]) continue;
        claimed[seeds[c]] = 1;
        hot[c].push_back(seeds[c]);
        frontier[c].push_back(seeds[c]);
        capacity += g.pop(seeds[c]);
    }
    bool progressed = true;
    while (capacity < quota && progressed) {
        progressed = false;
        for (std::size_t c = 0; c < k && capacity < quota; ++c) {
            // Pop frontier vertices until one yields an unclaimed neighbour.
            while (!frontier[c].empty()) {
                VertexId grabbed = -1;
                for (VertexId w : g.neighbors(frontier[c].front())) {
                    if (!claimed[w]) {
                        grabbed = w;
                        break;
                    }
                }
                if (grabbed < 0) {
                    frontier[c].pop_front();
                    continue;
                }
                claimed[grabbed] = 1;
                hot[c].push_back(grabbed);
                frontier[c].push_back(grabbed);
                capacity += g.pop(grabbed);
                progressed = true;
                break;
            }
        }
    }
    if (capacity < quota) {
        throw InfeasibleSpec("weight clusters cannot house " + std::to_string(quota) + " people (capacity " +
                             std::to_string(capacity) + ")");
    }
    return hot;
}

inline WeightField assign_weights(const CityGraph& g, const GenSpec& spec, Subgroup subgroup,
                                  Population subgroup_total, Rng& rng) {
    spec.validate();
    const double hot_fraction = subgroup == Subgroup::Q ? spec.hot_fraction_q : spec.hot_fraction_rest;
    if (subgroup_total < 0 || subgroup_total > g.total_pop()) {
        throw InfeasibleSpec("subgroup total " + std::to_string(subgroup_total) + " exceeds city population");
    }
    const auto quota = static_cast<Population>(std::ceil(hot_fraction * static_cast<double>(subgroup_total)));
    const auto k = static_cast<std::size_t>(
        std::min<long long>(uniform_int(rng, spec.cluster_count_min, spec.cluster_count_max),
                            static_cast<long long>(g.size())));
    std::vector<VertexId> order(g.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<VertexId> seeds(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::swap(order[c], order[c + uniform_index(rng, order.size() - c)]);
        seeds[c] = order[c];
    }
    std::vector<WeightCluster> clusters(k);
    for (auto& c : clusters) c.slope = uniform_real(rng, spec.taper_slope_min, spec.taper_slope_max);
    auto hot = grow_clusters(g, seeds, quota);
    for (std::size_t c = 0; c < k; ++c) clusters[c].hot = std::move(hot[c]);
    return taper_field(g, std::move(clusters), spec.floor_weight);
}

namespace detail {

// Fenwick tree over integer weights supporting weighted draws and removal.
class WeightedUrn {
public:
    explicit WeightedUrn(std::span<const std::uint64_t> weights) : tree_(weights.size() + 1, 0), weight_(weights.begin(), weights.end()) {
        for (std::size_t i = 0; i < weights.size(); ++i) add(i, static_cast<std::int64_t>(weights[i]));
    }

    std::uint64_t total() const noexcept { return total_; }

    void remove(std::size_t i) {
        if (weight_[i] == 0) return;
        add(i, -static_cast<std::int64_t>(weight_[i]));
        weight_[i] = 0;
    }

    std::size_t draw(Rng& rng) const {
        std::uint64_t r = std::uniform_int_distribution<std::uint64_t>(0, total_ - 1)(rng);
        std::size_t pos = 0;
        std::size_t step = std::bit_floor(weight_.size());
        for (; step > 0; step >>= 1) {
            if (pos + step < tree_.size() && tree_[pos + step] <= r) {
                pos += step;
                r -= tree_[pos];
            }
        }
        return pos;
    }

private:
    void add(std::size_t i, std::int64_t delta) {
        total_ = static_cast<std::uint64_t>(static_cast<std::int64_t>(total_) + delta);
        for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) {
            tree_[j] = static_cast<std::uint64_t>(static_cast<std::int64_t>(tree_[j]) + delta);
        }
    }

    std::vector<std::uint64_t> tree_;
    std::vector<std::uint64_t> weight_;
    std::uint64_t total_ = 0;
};

inline std::vector<std::uint64_t> quantize(std::span<const double> w) {
    std::vector<std::uint64_t> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(w[i] * 1e6)));
    }
    return out;
}

}  // namespace detail

// Q and P-Q alternately drop batches of up to spec.batch_size people on
// weighted random vertices with spare room; full vertices leave both urns.
inline CityGraph place_populations(const CityGraph& g, const WeightField& wq, const WeightField& wrest,
                                   Population q_total, const GenSpec& spec, Rng& rng) {
    if (q_total < 0 || q_total > g.total_pop()) {
        throw InfeasibleSpec("place_populations: q_total " + std::to_string(q_total) + " outside [0, P]");
    }
    if (wq.weight.size() != g.size() || wrest.weight.size() != g.size()) {
        throw InvalidArgument("place_populations: weight field size mismatch");
    }
    const auto qw = detail::quantize(wq.weight);
    const auto rw = detail::quantize(wrest.weight);
    detail::WeightedUrn urn_q(qw), urn_rest(rw);
    std::vector<Population> room(g.pops().begin(), g.pops().end());
    for (std::size_t v = 0; v < g.size(); ++v) {
        if (room[v] == 0) {
            urn_q.remove(v);
            urn_rest.remove(v);
        }
    }
    std::vector<Population> q(g.size(), 0);
    Population left_q = q_total;
    Population left_rest = g.total_pop() - q_total;

    auto place = [&](detail::WeightedUrn& urn, Population& left, bool is_q) {
        if (urn.total() == 0) throw DataError("place_populations: capacity exhausted mid-placement");
        const std::size_t v = urn.draw(rng);
        const Population n = std::min({spec.batch_size, left, room[v]});
        room[v] -= n;
        left -= n;
        if (is_q) q[v] += n;
        if (room[v] == 0) {
            urn_q.remove(v);
            urn_rest.remove(v);
        }
    };
    while (left_q > 0 || left_rest > 0) {
        if (left_q > 0) place(urn_q, left_q, true);
        if (left_rest > 0) place(urn_rest, left_rest, false);
    }
    return g.with_q(std::move(q));
}

// ---------------------------------------------------------------------------
// Dissimilarity adjustment.

struct AdjustOptions {
    long long max_swaps = 1'000'000;
    // Called after every swap with the current Q counts; `raising` tells the
    // direction (test instrumentation for the monotonicity property).
    std::function<void(std::span<const Population> q, bool raising)> on_swap;
};

namespace detail {

class DissimilarityAdjuster {
public:
    DissimilarityAdjuster(const CityGraph& g, std::uint64_t seed)
        : g_(g), q_(g.qs().begin(), g.qs().end()), rank_(g.size()), e_(g.size()) {
        const double total_q = static_cast<double>(g.total_q());
        const double total_rest = static_cast<double>(g.total_pop() - g.total_q());
        inv_q_ = 1.0 / total_q;
        inv_rest_ = 1.0 / total_rest;
        unit_ = inv_q_ + inv_rest_;
        // Random tie-break among vertices with equal Q share.
        std::vector<VertexId> perm(g.size());
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(seed);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < perm.size(); ++i) rank_[perm[i]] = static_cast<VertexId>(i);
        for (VertexId v = 0; v < static_cast<VertexId>(g.size()); ++v) {
            if (g.pop(v) == 0) continue;
            refresh(v);
            insert(v);
        }
        recompute_d();
    }

    double d() const noexcept { return d_; }
    double unit() const noexcept { return unit_; }
    std::span<const Population> q() const noexcept { return q_; }

    void recompute_d() {
        double sum = 0.0;
        for (double e : e_) sum += std::abs(e);
        d_ = 0.5 * sum;
    }

    // Moves Q residents from the lowest-share vertex to the highest-share one.
    // Returns false when no D-raising move exists.
    bool raise(Population want) {
        if (with_q_.empty() || with_rest_.empty()) return false;
        const VertexId from = with_q_.begin()->v;
        const VertexId to = std::prev(with_rest_.end())->v;
        if (from == to || share(from) > share(to)) return false;
        const Population x = std::min({want, q_[from], g_.pop(to) - q_[to]});
        move_q(from, to, x);
        return true;
    }

    // Moves Q residents from the highest-share vertex to the lowest-share one,
    // never pushing either past the citywide proportion by more than the
    // amount that would increase D.
    bool lower(Population want) {
        if (with_q_.empty() || with_rest_.empty()) return false;
        const VertexId from = std::prev(with_q_.end())->v;
        const VertexId to = with_rest_.begin()->v;
        if (from == to) return false;
        const double excess_from = e_[from] / unit_;
        const double deficit_to = -e_[to] / unit_;
        const double room = std::min(excess_from, deficit_to);
        Population cap = room >= 1.0 ? static_cast<Population>(std::floor(room)) : (room >= 0.5 ? 1 : 0);
        cap = std::min({cap, q_[from], g_.pop(to) - q_[to]});
        if (cap <= 0) return false;
        move_q(from, to, std::min(want, cap));
        return true;
    }

private:
    struct Key {
        double share;
        VertexId rank;
        VertexId v;
        bool operator<(const Key& o) const noexcept {
            return share < o.share || (share == o.share && rank < o.rank);
        }
    };

    double share(VertexId v) const noexcept {
        return static_cast<double>(q_[v]) / static_cast<double>(g_.pop(v));
    }
    void refresh(VertexId v) {
        e_[v] = static_cast<double>(q_[v]) * inv_q_ - static_cast<double>(g_.pop(v) - q_[v]) * inv_rest_;
    }
    void insert(VertexId v) {
        const Key k{share(v), rank_[v], v};
        if (q_[v] > 0) with_q_.insert(k);
        if (q_[v] < g_.pop(v)) with_rest_.insert(k);
    }
    void erase(VertexId v) {
        const Key k{share(v), rank_[v], v};
        with_q_.erase(k);
        with_rest_.erase(k);
    }
    void move_q(VertexId from, VertexId to, Population x) {
        erase(from);
        erase(to);
        d_ -= 0.5 * (std::abs(e_[from]) + std::abs(e_[to]));
        q_[from] -= x;
        q_[to] += x;
        refresh(from);
        refresh(to);
        d_ += 0.5 * (std::abs(e_[from]) + std::abs(e_[to]));
        insert(from);
        insert(to);
        if (++moves_ % 4096 == 0) recompute_d();
    }

    const CityGraph& g_;
    std::vector<Population> q_;
    std::vector<VertexId> rank_;
    std::vector<double> e_;
    std::set<Key> with_q_;
    std::set<Key> with_rest_;
    double inv_q_ = 0.0, inv_rest_ = 0.0, unit_ = 0.0, d_ = 0.0;
    long long moves_ = 0;
};

}  // namespace detail

// Swap granularity: 10 people per swap, 1 once within 0.02 of the target.
// The loop drives D as close to the target as integer populations allow.
inline CityGraph adjust_dissimilarity(const CityGraph& g, double target_d, double tol, std::uint64_t rng_seed,
                                      const AdjustOptions& options = {}) {
    if (!(target_d >= 0.0 && target_d <= 1.0)) throw InvalidArgument("adjust_dissimilarity: target outside [0, 1]");
    if (!(tol > 0.0)) throw InvalidArgument("adjust_dissimilarity: tolerance must be > 0");
    const double start = dissimilarity(g);
    if (std::abs(start - target_d) <= tol) return g;

    detail::DissimilarityAdjuster adj(g, rng_seed);
    long long swaps = 0;
    for (; swaps < options.max_swaps; ++swaps) {
        const double gap = target_d - adj.d();
        const auto needed = static_cast<Population>(std::llround(std::abs(gap) / adj.unit()));
        if (needed == 0) break;
        const Population want = std::min<Population>(needed, std::abs(gap) < 0.02 ? 1 : 10);
        const bool raising = gap > 0;
        if (!(raising ? adj.raise(want) : adj.lower(want))) break;
        if (options.on_swap) options.on_swap(adj.q(), raising);
    }
    std::vector<Population> q(adj.q().begin(), adj.q().end());
    CityGraph out = g.with_q(std::move(q));
    const double achieved = dissimilarity(out);
    if (std::abs(achieved - target_d) > tol) {
        const std::string why = swaps >= options.max_swaps ? "swap cap reached" : "no further improving swap";
        throw AdjustNonConvergence("adjust_dissimilarity: " + why + "; target D = " + std::to_string(target_d) +
                                       ", best achieved D = " + std::to_string(achieved),
                                   achieved);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Whole-city generators.

// Keeps every per-vertex total and the citywide Q of `tmpl`; redistributes
// residents around fresh weight clusters, then tunes D to spec.target_d.
inline CityGraph generate_modeled_city(const CityGraph& tmpl, const GenSpec& spec,
                                       const AdjustOptions& adjust = {}) {
    spec.validate();
    const Population q_total = tmpl.total_q();
    Rng rng(spec.rng_seed);
    const auto wq = assign_weights(tmpl, spec, Subgroup::Q, q_total, rng);
    const auto wrest = assign_weights(tmpl, spec, Subgroup::Rest, tmpl.total_pop() - q_total, rng);
    CityGraph placed = place_populations(tmpl, wq, wrest, q_total, spec, rng);
    AdjustOptions opts = adjust;
    opts.max_swaps = std::min(opts.max_swaps, spec.max_swaps);
    return adjust_dissimilarity(placed, spec.target_d, spec.d_tolerance, derive_seed(spec.rng_seed, 1, 0xad1), opts);
}

inline constexpr int kGridSide = 30;
inline constexpr Population kGridBlockPop = 1000;
inline constexpr int kGridDistricts = 10;

// Grid with `q_total` spread as evenly as integers allow (D = 0 when exact).
inline CityGraph uniform_grid_city(int rows, int cols, Population pop_per_vertex, Population q_total) {
    CityGraph grid = build_grid(rows, cols, pop_per_vertex);
    if (q_total < 0 || q_total > grid.total_pop()) throw InvalidArgument("uniform_grid_city: q_total outside [0, P]");
    const auto n = static_cast<Population>(grid.size());
    std::vector<Population> q(grid.size(), q_total / n);
    for (Population i = 0; i < q_total % n; ++i) ++q[static_cast<std::size_t>(i)];
    return grid.with_q(std::move(q));
}

// 30x30 grid, 1000 people per block. The group placed under the Q rules has
// round(target_q_frac * P) members; labels are swapped afterwards when that
// group is the majority, so the returned Q is always the smaller group.
inline CityGraph generate_grid_city(const GenSpec& spec, const AdjustOptions& adjust = {}) {
    spec.validate();
    const Population total = Population{kGridSide} * kGridSide * kGridBlockPop;
    const auto placed_q = static_cast<Population>(std::llround(spec.target_q_frac * static_cast<double>(total)));
    if (placed_q == 0 || placed_q == total) {
        throw UndefinedIndex("generate_grid_city: target_q_frac leaves one group empty; D undefined");
    }
    CityGraph city = generate_modeled_city(uniform_grid_city(kGridSide, kGridSide, kGridBlockPop, placed_q), spec, adjust);
    if (2 * placed_q > total) {
        std::vector<Population> q(city.size());
        for (VertexId v = 0; v < static_cast<VertexId>(city.size()); ++v) q[v] = city.rest(v);
        city = city.with_q(std::move(q));
    }
    return city;
}

}  // namespace segfair
