#pragma once

// Dual graph of a city: one vertex per census block carrying its total and
// subgroup-Q populations, one edge per pair of blocks sharing a boundary.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "segfair/errors.hpp"

namespace segfair {

using VertexId = std::int32_t;
using Population = std::int64_t;

struct Edge {
    VertexId u;
    VertexId v;
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct VertexRecord {
    long long external_id;
    Population pop;
    Population q;
};

// Union-find over dense ids; path halving + union by size.
class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        return true;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

inline std::size_t count_components(std::size_t vertex_count, std::span<const Edge> edges) {
    DisjointSets sets(vertex_count);
    std::size_t components = vertex_count;
    for (const Edge& e : edges) {
        if (sets.unite(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v))) --components;
    }
    return components;
}

class CityGraph {
public:
    CityGraph() = default;

    // Validates every invariant (ids, populations, self-loops, duplicate edges,
    // connectivity). Edge endpoints are dense indices into `vertices`.
    CityGraph(std::string name, std::vector<VertexRecord> vertices, std::vector<Edge> edges)
    {
        auto built = std::make_shared<Topology>();
        auto& t = *built;
        t.name = std::move(name);
        const auto n = vertices.size();
        if (n == 0) throw InvalidArgument("graph has no vertices");
        if (n > static_cast<std::size_t>(std::numeric_limits<VertexId>::max()))
            throw InvalidArgument("too many vertices");
        t.external_ids.reserve(n);
        pop_.reserve(n);
        q_.reserve(n);
        for (const auto& rec : vertices) {
            if (rec.pop < 0 || rec.q < 0 || rec.q > rec.pop) {
                throw InvariantViolation("vertex " + std::to_string(rec.external_id) +
                                             ": require 0 <= q <= pop (pop=" + std::to_string(rec.pop) +
                                             ", q=" + std::to_string(rec.q) + ")",
                                         rec.external_id);
            }
            t.external_ids.push_back(rec.external_id);
            pop_.push_back(rec.pop);
            q_.push_back(rec.q);
        }
        for (Edge& e : edges) {
            if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n ||
                static_cast<std::size_t>(e.v) >= n) {
                throw InvariantViolation("edge endpoint out of range", std::max(e.u, e.v));
            }
            if (e.u == e.v) {
                throw InvariantViolation("self-loop on vertex " + std::to_string(t.external_ids[e.u]),
                                         t.external_ids[e.u]);
            }
            if (e.u > e.v) std::swap(e.u, e.v);
        }
        std::sort(edges.begin(), edges.end());
        if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
            throw InvariantViolation("duplicate edge " + std::to_string(t.external_ids[dup->u]) + "-" +
                                         std::to_string(t.external_ids[dup->v]),
                                     t.external_ids[dup->u]);
        }
        if (auto comps = count_components(n, edges); comps != 1) throw DisconnectedGraph(comps);

        t.offsets.assign(n + 1, 0);
        for (const Edge& e : edges) {
            ++t.offsets[e.u + 1];
            ++t.offsets[e.v + 1];
        }
        std::partial_sum(t.offsets.begin(), t.offsets.end(), t.offsets.begin());
        t.adjacency.resize(t.offsets.back());
        std::vector<std::size_t> cursor(t.offsets.begin(), t.offsets.end() - 1);
        for (const Edge& e : edges) {
            t.adjacency[cursor[e.u]++] = e.v;
            t.adjacency[cursor[e.v]++] = e.u;
        }
        t.edges = std::move(edges);
        topo_ = std::move(built);
        recount();
    }

    std::size_t size() const noexcept { return pop_.size(); }
    std::size_t edge_count() const noexcept { return topo_ ? topo_->edges.size() : 0; }
    const std::string& name() const noexcept { return topo_->name; }

    std::span<const VertexId> neighbors(VertexId v) const noexcept {
        const auto& t = *topo_;
        return {t.adjacency.data() + t.offsets[v], t.adjacency.data() + t.offsets[v + 1]};
    }
    std::size_t degree(VertexId v) const noexcept { return neighbors(v).size(); }
    std::span<const Edge> edges() const noexcept { return topo_->edges; }

    Population pop(VertexId v) const noexcept { return pop_[v]; }
    Population q(VertexId v) const noexcept { return q_[v]; }
    Population rest(VertexId v) const noexcept { return pop_[v] - q_[v]; }
    std::span<const Population> pops() const noexcept { return pop_; }
    std::span<const Population> qs() const noexcept { return q_; }
    long long external_id(VertexId v) const noexcept { return topo_->external_ids[v]; }

    Population total_pop() const noexcept { return total_pop_; }
    Population total_q() const noexcept { return total_q_; }
    double q_fraction() const noexcept {
        return total_pop_ > 0 ? static_cast<double>(total_q_) / static_cast<double>(total_pop_) : 0.0;
    }

    // Same topology and per-vertex totals, new Q counts.
    CityGraph with_q(std::vector<Population> q) const {
        if (q.size() != size()) throw InvalidArgument("with_q: size mismatch");
        for (std::size_t v = 0; v < q.size(); ++v) {
            if (q[v] < 0 || q[v] > pop_[v]) {
                throw InvariantViolation("vertex " + std::to_string(topo_->external_ids[v]) +
                                             ": q out of [0, pop]",
                                         topo_->external_ids[v]);
            }
        }
        CityGraph out(*this);
        out.q_ = std::move(q);
        out.recount();
        return out;
    }

    CityGraph renamed(std::string name) const {
        CityGraph out(*this);
        auto topo = std::make_shared<Topology>(*topo_);
        topo->name = std::move(name);
        out.topo_ = std::move(topo);
        return out;
    }

    friend bool operator==(const CityGraph& a, const CityGraph& b) {
        if (a.topo_ == b.topo_) return a.pop_ == b.pop_ && a.q_ == b.q_;
        if (!a.topo_ || !b.topo_) return false;
        return a.topo_->name == b.topo_->name && a.topo_->external_ids == b.topo_->external_ids &&
               a.topo_->edges == b.topo_->edges && a.pop_ == b.pop_ && a.q_ == b.q_;
    }

private:
    struct Topology {
        std::string name;
        std::vector<long long> external_ids;
        std::vector<std::size_t> offsets;
        std::vector<VertexId> adjacency;
        std::vector<Edge> edges;
    };

    void recount() {
        total_pop_ = std::accumulate(pop_.begin(), pop_.end(), Population{0});
        total_q_ = std::accumulate(q_.begin(), q_.end(), Population{0});
    }

    std::shared_ptr<const Topology> topo_;
    std::vector<Population> pop_;
    std::vector<Population> q_;
    Population total_pop_ = 0;
    Population total_q_ = 0;
};

// Rook-adjacency grid; vertex id = row * cols + col.
inline CityGraph build_grid(long long rows, long long cols, Population pop_per_vertex,
                            std::string name = "") {
    if (rows < 1 || cols < 1) throw InvalidArgument("build_grid: rows and cols must be >= 1");
    if (pop_per_vertex < 1) throw InvalidArgument("build_grid: pop_per_vertex must be >= 1");
    if (name.empty()) name = "grid" + std::to_string(rows) + "x" + std::to_string(cols);
    std::vector<VertexRecord> vertices;
    vertices.reserve(static_cast<std::size_t>(rows * cols));
    for (long long i = 0; i < rows * cols; ++i) vertices.push_back({i, pop_per_vertex, 0});
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(rows * (cols - 1) + cols * (rows - 1)));
    for (long long r = 0; r < rows; ++r) {
        for (long long c = 0; c < cols; ++c) {
            const auto v = static_cast<VertexId>(r * cols + c);
            if (c + 1 < cols) edges.push_back({v, static_cast<VertexId>(v + 1)});
            if (r + 1 < rows) edges.push_back({v, static_cast<VertexId>(v + cols)});
        }
    }
    return CityGraph(std::move(name), std::move(vertices), std::move(edges));
}

// Multi-source BFS hop distances; unreachable vertices get -1.
inline std::vector<int> bfs_distances(const CityGraph& g, std::span<const VertexId> sources) {
    std::vector<int> dist(g.size(), -1);
    std::queue<VertexId> frontier;
    for (VertexId s : sources) {
        if (dist[s] != 0) {
            dist[s] = 0;
            frontier.push(s);
        }
    }
    while (!frontier.empty()) {
        VertexId v = frontier.front();
        frontier.pop();
        for (VertexId w : g.neighbors(v)) {
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                frontier.push(w);
            }
        }
    }
    return dist;
}

// ---------------------------------------------------------------------------
// Dual-graph file: {"name": str, "nodes": [{"id","pop","q"}...], "edges": [[a,b]...]}

inline CityGraph graph_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("dual graph: top level must be an object");
    for (const char* key : {"name", "nodes", "edges"}) {
        if (!doc.contains(key)) throw ParseError(std::string("dual graph: missing field '") + key + "'");
    }
    try {
        std::vector<VertexRecord> vertices;
        std::unordered_map<long long, VertexId> index;
        for (const auto& node : doc.at("nodes")) {
            VertexRecord rec{node.at("id").get<long long>(), node.at("pop").get<Population>(),
                             node.at("q").get<Population>()};
            if (!index.emplace(rec.external_id, static_cast<VertexId>(vertices.size())).second) {
                throw InvariantViolation("duplicate vertex id " + std::to_string(rec.external_id),
                                         rec.external_id);
            }
            vertices.push_back(rec);
        }
        std::vector<Edge> edges;
        for (const auto& pair : doc.at("edges")) {
            if (!pair.is_array() || pair.size() != 2) throw ParseError("dual graph: edge must be a pair");
            const auto a = pair[0].get<long long>();
            const auto b = pair[1].get<long long>();
            auto ia = index.find(a);
            auto ib = index.find(b);
            if (ia == index.end() || ib == index.end()) {
                const long long bad = ia == index.end() ? a : b;
                throw InvariantViolation("edge " + std::to_string(a) + "-" + std::to_string(b) +
                                             " references unknown vertex " + std::to_string(bad),
                                         bad);
            }
            edges.push_back({ia->second, ib->second});
        }
        return CityGraph(doc.at("name").get<std::string>(), std::move(vertices), std::move(edges));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dual graph: ") + e.what());
    }
}

inline nlohmann::ordered_json graph_to_json(const CityGraph& g) {
    nlohmann::ordered_json doc;
    doc["name"] = g.name();
    auto& nodes = doc["nodes"] = nlohmann::ordered_json::array();
    for (VertexId v = 0; v < static_cast<VertexId>(g.size()); ++v) {
        nlohmann::ordered_json node;
        node["id"] = g.external_id(v);
        node["pop"] = g.pop(v);
        node["q"] = g.q(v);
        nodes.push_back(std::move(node));
    }
    auto& edges = doc["edges"] = nlohmann::ordered_json::array();
    for (const Edge& e : g.edges()) edges.push_back({g.external_id(e.u), g.external_id(e.v)});
    return doc;
}

inline CityGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dual graph '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("dual graph '" + path + "': " + e.what());
    }
    return graph_from_json(doc);
}

inline void save_graph(const CityGraph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dual graph '" + path + "'");
    out << graph_to_json(g).dump() << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace segfair
