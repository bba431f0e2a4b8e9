#pragma once

// District plans: representation, validity (contiguity + population balance),
// from-scratch seed construction, and the assignment/manifest file formats.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "segfair/city_graph.hpp"
#include "segfair/errors.hpp"
#include "segfair/rng.hpp"

namespace segfair {

using DistrictId = std::int32_t;

inline constexpr double kDefaultEpsilon = 0.2;

class DistrictPlan {
public:
    DistrictPlan() = default;
    DistrictPlan(std::vector<DistrictId> assignment, int n_districts)
        : assignment_(std::move(assignment)), n_(n_districts) {
        if (n_ < 1) throw InvalidArgument("district plan needs n >= 1");
        for (std::size_t v = 0; v < assignment_.size(); ++v) {
            if (assignment_[v] < 0 || assignment_[v] >= n_) {
                throw InvalidArgument("vertex " + std::to_string(v) + " assigned to district " +
                                      std::to_string(assignment_[v]) + " outside [0, " +
                                      std::to_string(n_) + ")");
            }
        }
    }

    int district_count() const noexcept { return n_; }
    std::size_t size() const noexcept { return assignment_.size(); }
    DistrictId operator[](VertexId v) const noexcept { return assignment_[v]; }
    std::span<const DistrictId> assignment() const noexcept { return assignment_; }

    friend bool operator==(const DistrictPlan&, const DistrictPlan&) = default;

private:
    std::vector<DistrictId> assignment_;
    int n_ = 0;
};

struct DistrictTally {
    Population pop = 0;
    Population q = 0;
    friend bool operator==(const DistrictTally&, const DistrictTally&) = default;
};

inline std::vector<DistrictTally> district_populations(const CityGraph& g, const DistrictPlan& plan) {
    std::vector<DistrictTally> tally(static_cast<std::size_t>(plan.district_count()));
    const auto n = std::min(g.size(), plan.size());
    for (std::size_t v = 0; v < n; ++v) {
        auto& t = tally[plan[static_cast<VertexId>(v)]];
        t.pop += g.pop(static_cast<VertexId>(v));
        t.q += g.q(static_cast<VertexId>(v));
    }
    return tally;
}

// Number of connected pieces of every district's induced subgraph (0 for empty).
inline std::vector<int> district_piece_counts(const CityGraph& g, std::span<const DistrictId> assignment,
                                              int n_districts) {
    std::vector<int> pieces(static_cast<std::size_t>(n_districts), 0);
    std::vector<char> seen(g.size(), 0);
    std::vector<VertexId> stack;
    for (VertexId s = 0; s < static_cast<VertexId>(g.size()); ++s) {
        if (seen[s]) continue;
        const DistrictId d = assignment[s];
        ++pieces[d];
        seen[s] = 1;
        stack.push_back(s);
        while (!stack.empty()) {
            VertexId v = stack.back();
            stack.pop_back();
            for (VertexId w : g.neighbors(v)) {
                if (!seen[w] && assignment[w] == d) {
                    seen[w] = 1;
                    stack.push_back(w);
                }
            }
        }
    }
    return pieces;
}

// Population window [lo, hi] for one district: |pop - P/n| <= eps * P/n.
struct BalanceBounds {
    double lo;
    double hi;
    bool contains(double pop) const noexcept { return pop >= lo && pop <= hi; }
};

inline BalanceBounds balance_bounds(Population total, int n, double epsilon) {
    const double ideal = static_cast<double>(total) / n;
    // Relative slack keeps exact-boundary districts (e.g. 0.8 * ideal) admissible.
    const double slack = 1e-9 * ideal;
    return {ideal * (1.0 - epsilon) - slack, ideal * (1.0 + epsilon) + slack};
}

enum class PlanIssue { SizeMismatch, Empty, Disconnected, Overpopulated, Underpopulated };

inline const char* to_string(PlanIssue issue) {
    switch (issue) {
        case PlanIssue::SizeMismatch: return "size-mismatch";
        case PlanIssue::Empty: return "empty";
        case PlanIssue::Disconnected: return "disconnected";
        case PlanIssue::Overpopulated: return "over-populated";
        case PlanIssue::Underpopulated: return "under-populated";
    }
    return "?";
}

struct DistrictIssue {
    DistrictId district;  // -1 for whole-plan issues
    PlanIssue issue;
};

struct ValidityReport {
    bool valid = true;
    std::vector<DistrictIssue> issues;

    explicit operator bool() const noexcept { return valid; }
    bool has(PlanIssue issue, DistrictId district) const {
        return std::any_of(issues.begin(), issues.end(), [&](const DistrictIssue& i) {
            return i.issue == issue && i.district == district;
        });
    }
    std::string describe() const {
        if (valid) return "valid";
        std::ostringstream os;
        for (std::size_t i = 0; i < issues.size(); ++i) {
            if (i) os << "; ";
            os << "district " << issues[i].district << ": " << to_string(issues[i].issue);
        }
        return os.str();
    }
};

inline ValidityReport is_valid(const CityGraph& g, const DistrictPlan& plan,
                               double epsilon = kDefaultEpsilon) {
    ValidityReport report;
    if (plan.size() != g.size()) {
        report.valid = false;
        report.issues.push_back({-1, PlanIssue::SizeMismatch});
        return report;
    }
    const int n = plan.district_count();
    const auto tally = district_populations(g, plan);
    const auto pieces = district_piece_counts(g, plan.assignment(), n);
    const auto bounds = balance_bounds(g.total_pop(), n, epsilon);
    for (DistrictId d = 0; d < n; ++d) {
        if (pieces[d] == 0) {
            report.issues.push_back({d, PlanIssue::Empty});
            continue;
        }
        if (pieces[d] > 1) report.issues.push_back({d, PlanIssue::Disconnected});
        const auto pop = static_cast<double>(tally[d].pop);
        if (pop > bounds.hi) report.issues.push_back({d, PlanIssue::Overpopulated});
        if (pop < bounds.lo) report.issues.push_back({d, PlanIssue::Underpopulated});
    }
    report.valid = report.issues.empty();
    return report;
}

// ---------------------------------------------------------------------------
// From-scratch seeding:
//   1. one random vertex per district;
//   2. BFS flood fill of unassigned neighbours;
//   3. the most populous district hands its boundary vertices to neighbours;
//   4. districts split into several pieces hand off their smaller pieces;
//   5. repeat 3-4 until valid.

struct SeedOptions {
    int max_rounds = 500;
    // Called with the assignment after every step-4 pass (test instrumentation).
    std::function<void(std::span<const DistrictId>)> after_repair;
};

namespace detail {

class SeedBuilder {
public:
    SeedBuilder(const CityGraph& g, int n) : g_(g), n_(n), assign_(g.size(), -1), pop_(n, 0) {}

    void place_seeds(Rng& rng) {
        std::vector<VertexId> order(g_.size());
        std::iota(order.begin(), order.end(), 0);
        for (int d = 0; d < n_; ++d) {
            std::swap(order[d], order[d + uniform_index(rng, order.size() - d)]);
            give(order[d], d);
        }
    }

    void flood_fill() {
        std::queue<VertexId> frontier;
        for (VertexId v = 0; v < static_cast<VertexId>(g_.size()); ++v) {
            if (assign_[v] >= 0) frontier.push(v);
        }
        while (!frontier.empty()) {
            VertexId v = frontier.front();
            frontier.pop();
            for (VertexId w : g_.neighbors(v)) {
                if (assign_[w] < 0) {
                    give(w, assign_[v]);
                    frontier.push(w);
                }
            }
        }
    }

    void shrink_largest() {
        DistrictId largest = 0;
        for (DistrictId d = 1; d < n_; ++d) {
            if (pop_[d] > pop_[largest]) largest = d;
        }
        std::vector<VertexId> boundary;
        std::size_t members = 0;
        for (VertexId v = 0; v < static_cast<VertexId>(g_.size()); ++v) {
            if (assign_[v] != largest) continue;
            ++members;
            if (touches_other(v)) boundary.push_back(v);
        }
        for (VertexId v : boundary) {
            if (members <= 1) break;
            DistrictId to = smallest_neighbour_district(v);
            if (to < 0) continue;
            give(v, to);
            --members;
        }
    }

    // Every district keeps its largest piece; smaller pieces are peeled off
    // boundary-first until they are gone.
    void repair_contiguity() {
        for (std::size_t pass = 0; pass <= g_.size(); ++pass) {
            auto stray = stray_vertices();
            if (stray.empty()) return;
            for (VertexId v : stray) {
                if (!touches_other(v)) continue;
                DistrictId to = smallest_neighbour_district(v);
                if (to >= 0) give(v, to);
            }
        }
        throw SeedStuck("seed_from_scratch: contiguity repair did not terminate");
    }

    bool balanced(double epsilon) const {
        const auto bounds = balance_bounds(g_.total_pop(), n_, epsilon);
        return std::all_of(pop_.begin(), pop_.end(),
                           [&](Population p) { return bounds.contains(static_cast<double>(p)); });
    }

    std::span<const DistrictId> assignment() const { return assign_; }
    std::vector<DistrictId> take() { return std::move(assign_); }

private:
    void give(VertexId v, DistrictId d) {
        if (assign_[v] >= 0) pop_[assign_[v]] -= g_.pop(v);
        assign_[v] = d;
        pop_[d] += g_.pop(v);
    }

    bool touches_other(VertexId v) const {
        for (VertexId w : g_.neighbors(v)) {
            if (assign_[w] != assign_[v]) return true;
        }
        return false;
    }

    DistrictId smallest_neighbour_district(VertexId v) const {
        DistrictId best = -1;
        for (VertexId w : g_.neighbors(v)) {
            const DistrictId d = assign_[w];
            if (d == assign_[v]) continue;
            if (best < 0 || pop_[d] < pop_[best] || (pop_[d] == pop_[best] && d < best)) best = d;
        }
        return best;
    }

    // Vertices lying outside their district's principal piece (largest by
    // population, then by vertex count).
    std::vector<VertexId> stray_vertices() const {
        const auto n = g_.size();
        std::vector<int> piece(n, -1);
        std::vector<Population> piece_pop;
        std::vector<std::size_t> piece_size;
        std::vector<VertexId> stack;
        for (VertexId s = 0; s < static_cast<VertexId>(n); ++s) {
            if (piece[s] >= 0) continue;
            const int id = static_cast<int>(piece_pop.size());
            piece_pop.push_back(0);
            piece_size.push_back(0);
            piece[s] = id;
            stack.push_back(s);
            while (!stack.empty()) {
                VertexId v = stack.back();
                stack.pop_back();
                piece_pop[id] += g_.pop(v);
                ++piece_size[id];
                for (VertexId w : g_.neighbors(v)) {
                    if (piece[w] < 0 && assign_[w] == assign_[v]) {
                        piece[w] = id;
                        stack.push_back(w);
                    }
                }
            }
        }
        // Pieces are numbered in order of their first vertex, so the first
        // maximal piece encountered wins ties.
        std::vector<int> principal(static_cast<std::size_t>(n_), -1);
        std::vector<VertexId> first_vertex(piece_pop.size(), -1);
        for (VertexId v = 0; v < static_cast<VertexId>(n); ++v) {
            if (first_vertex[piece[v]] < 0) first_vertex[piece[v]] = v;
        }
        for (int p = 0; p < static_cast<int>(piece_pop.size()); ++p) {
            const DistrictId d = assign_[first_vertex[p]];
            const int cur = principal[d];
            if (cur < 0 || piece_pop[p] > piece_pop[cur] ||
                (piece_pop[p] == piece_pop[cur] && piece_size[p] > piece_size[cur])) {
                principal[d] = p;
            }
        }
        std::vector<VertexId> stray;
        for (VertexId v = 0; v < static_cast<VertexId>(n); ++v) {
            if (principal[assign_[v]] != piece[v]) stray.push_back(v);
        }
        return stray;
    }

    const CityGraph& g_;
    int n_;
    std::vector<DistrictId> assign_;
    std::vector<Population> pop_;
};

}  // namespace detail

inline DistrictPlan seed_from_scratch(const CityGraph& g, int n, double epsilon, std::uint64_t rng_seed,
                                      const SeedOptions& options = {}) {
    if (n < 1) throw InvalidArgument("seed_from_scratch: n must be >= 1");
    if (static_cast<std::size_t>(n) > g.size()) {
        throw InvalidArgument("seed_from_scratch: n = " + std::to_string(n) + " exceeds |V| = " +
                              std::to_string(g.size()));
    }
    Rng rng(rng_seed);
    detail::SeedBuilder builder(g, n);
    builder.place_seeds(rng);
    builder.flood_fill();
    builder.repair_contiguity();
    for (int round = 0; round <= options.max_rounds; ++round) {
        if (builder.balanced(epsilon)) return DistrictPlan(builder.take(), n);
        if (round == options.max_rounds) break;
        builder.shrink_largest();
        builder.repair_contiguity();
        if (options.after_repair) options.after_repair(builder.assignment());
    }
    throw SeedStuck("seed_from_scratch: no valid plan after " + std::to_string(options.max_rounds) +
                    " rounds of boundary donation");
}

// Retries seed_from_scratch with derived seeds when it gets stuck.
inline DistrictPlan seed_with_restarts(const CityGraph& g, int n, double epsilon, std::uint64_t rng_seed,
                                       int attempts = 20) {
    for (int i = 0;; ++i) {
        try {
            return seed_from_scratch(g, n, epsilon, derive_seed(rng_seed, static_cast<std::uint64_t>(i), 0x5eed));
        } catch (const SeedStuck&) {
            if (i + 1 >= attempts) throw;
        }
    }
}

// ---------------------------------------------------------------------------
// Fixed reference layouts for rows x cols grids (vertex id = r * cols + c).

inline DistrictPlan stripes_plan(int rows, int cols, int n) {
    if (n < 1 || n > rows) throw InvalidArgument("stripes_plan: need 1 <= n <= rows");
    std::vector<DistrictId> a(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) a[static_cast<std::size_t>(r) * cols + c] = r * n / rows;
    }
    return DistrictPlan(std::move(a), n);
}

// block_rows x block_cols rectangular tiling.
inline DistrictPlan blocks_plan(int rows, int cols, int block_rows, int block_cols) {
    if (block_rows < 1 || block_cols < 1 || block_rows > rows || block_cols > cols) {
        throw InvalidArgument("blocks_plan: bad block layout");
    }
    std::vector<DistrictId> a(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            a[static_cast<std::size_t>(r) * cols + c] = (r * block_rows / rows) * block_cols + c * block_cols / cols;
        }
    }
    return DistrictPlan(std::move(a), block_rows * block_cols);
}

// ---------------------------------------------------------------------------
// Assignment file: header `vertex_id,district`, one row per vertex.

inline void write_assignment(const CityGraph& g, const DistrictPlan& plan, std::ostream& out) {
    out << "vertex_id,district\n";
    for (VertexId v = 0; v < static_cast<VertexId>(plan.size()); ++v) {
        out << g.external_id(v) << ',' << plan[v] << '\n';
    }
}

inline void save_assignment(const CityGraph& g, const DistrictPlan& plan, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write assignment '" + path + "'");
    write_assignment(g, plan, out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

// District labels may be arbitrary integers; they are remapped to 0..n-1 in
// ascending label order.
inline DistrictPlan read_assignment(const CityGraph& g, std::istream& in, const std::string& origin) {
    std::unordered_map<long long, VertexId> index;
    index.reserve(g.size());
    for (VertexId v = 0; v < static_cast<VertexId>(g.size()); ++v) index.emplace(g.external_id(v), v);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(origin + ": empty assignment file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "vertex_id,district") throw ParseError(origin + ": expected header 'vertex_id,district'");

    std::vector<long long> label(g.size(), 0);
    std::vector<char> seen(g.size(), 0);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        long long vid = 0, district = 0;
        char comma = 0;
        std::istringstream row(line);
        if (!(row >> vid >> comma >> district) || comma != ',') {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": malformed row '" + line + "'");
        }
        auto it = index.find(vid);
        if (it == index.end()) {
            throw InvariantViolation(origin + ": unknown vertex id " + std::to_string(vid), vid);
        }
        if (seen[it->second]) {
            throw InvariantViolation(origin + ": vertex " + std::to_string(vid) + " assigned twice", vid);
        }
        seen[it->second] = 1;
        label[it->second] = district;
    }
    for (VertexId v = 0; v < static_cast<VertexId>(g.size()); ++v) {
        if (!seen[v]) {
            throw InvariantViolation(origin + ": vertex " + std::to_string(g.external_id(v)) + " unassigned",
                                     g.external_id(v));
        }
    }
    std::map<long long, DistrictId> dense;
    for (long long l : label) dense.emplace(l, 0);
    DistrictId next = 0;
    for (auto& [l, d] : dense) d = next++;
    std::vector<DistrictId> a(g.size());
    for (std::size_t v = 0; v < a.size(); ++v) a[v] = dense[label[v]];
    return DistrictPlan(std::move(a), next);
}

inline DistrictPlan load_assignment(const CityGraph& g, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open assignment '" + path + "'");
    return read_assignment(g, in, path);
}

// ---------------------------------------------------------------------------
// Ensemble manifest: CSV `plan_id,path`, paths relative to the manifest's directory.

struct ManifestEntry {
    std::string plan_id;
    std::string path;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest '" + manifest_path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "plan_id,path") {
        throw ParseError(manifest_path + ": expected header 'plan_id,path'");
    }
    const auto base = std::filesystem::path(manifest_path).parent_path();
    std::vector<ManifestEntry> entries;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError(manifest_path + ": malformed row '" + line + "'");
        entries.push_back({line.substr(0, comma), (base / line.substr(comma + 1)).string()});
    }
    return entries;
}

inline std::vector<DistrictPlan> load_ensemble(const CityGraph& g, const std::string& manifest_path) {
    std::vector<DistrictPlan> plans;
    for (const auto& entry : read_manifest(manifest_path)) plans.push_back(load_assignment(g, entry.path));
    return plans;
}

// Writes plans/<prefix><index>.csv plus manifest.csv under `dir`; returns the manifest path.
inline std::string save_ensemble(const CityGraph& g, std::span<const DistrictPlan> plans,
                                 const std::string& dir, const std::string& prefix = "plan_") {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "plans", ec);
    if (ec) throw IoError("cannot create '" + dir + "/plans': " + ec.message());
    const auto manifest = (fs::path(dir) / "manifest.csv").string();
    std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest '" + manifest + "'");
    out << "plan_id,path\n";
    const int width = static_cast<int>(std::to_string(plans.size()).size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        std::string idx = std::to_string(i);
        idx.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(idx.size()))), '0');
        const std::string id = prefix + idx;
        const std::string rel = "plans/" + id + ".csv";
        save_assignment(g, plans[i], (fs::path(dir) / rel).string());
        out << id << ',' << rel << '\n';
    }
    if (!out) throw IoError("write failed for '" + manifest + "'");
    return manifest;
}

}  // namespace segfair
