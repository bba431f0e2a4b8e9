#pragma once

// Ensemble spread check against a reference plan S0. For each reference
// district m_k a plan keeps its largest intersection M_k with one of its own
// districts; two plans are distant when M_k and M'_k are disjoint for every k.
// Every M_k holds at least ceil(|m_k| / n) blocks, so no more than n plans can
// be pairwise distant.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "segfair/errors.hpp"
#include "segfair/parallel.hpp"
#include "segfair/partition.hpp"

namespace segfair {

// Reference plan laid out for signature work: the member list of every
// reference district, each vertex's slot inside its district, and word
// offsets of per-district bitsets.
class ReferenceFrame {
public:
    explicit ReferenceFrame(const DistrictPlan& reference)
        : n_(reference.district_count()), members_(static_cast<std::size_t>(n_)), slot_(reference.size()) {
        for (VertexId v = 0; v < static_cast<VertexId>(reference.size()); ++v) {
            auto& m = members_[reference[v]];
            slot_[v] = static_cast<std::uint32_t>(m.size());
            m.push_back(v);
        }
        offsets_.reserve(members_.size() + 1);
        offsets_.push_back(0);
        for (const auto& m : members_) offsets_.push_back(offsets_.back() + (m.size() + 63) / 64);
        assignment_.assign(reference.assignment().begin(), reference.assignment().end());
        // FNV-1a over the assignment; identifies the reference in signatures.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&](std::uint64_t x) {
            for (int b = 0; b < 8; ++b) {
                h ^= (x >> (8 * b)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        };
        mix(static_cast<std::uint64_t>(n_));
        for (DistrictId d : assignment_) mix(static_cast<std::uint64_t>(d));
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << h;
        id_ = os.str();
    }

    const std::string& id() const noexcept { return id_; }
    int district_count() const noexcept { return n_; }
    std::size_t vertex_count() const noexcept { return slot_.size(); }
    std::span<const VertexId> members(int k) const noexcept { return members_[k]; }
    std::size_t words() const noexcept { return offsets_.back(); }
    std::size_t offset(int k) const noexcept { return offsets_[k]; }
    DistrictId district_of(VertexId v) const noexcept { return assignment_[v]; }
    std::uint32_t slot(VertexId v) const noexcept { return slot_[v]; }

private:
    int n_;
    std::vector<std::vector<VertexId>> members_;
    std::vector<std::uint32_t> slot_;
    std::vector<std::size_t> offsets_;
    std::vector<DistrictId> assignment_;
    std::string id_;
};

class PlanSignature {
public:
    const std::string& reference_id() const noexcept { return frame_->id(); }
    int district_count() const noexcept { return frame_->district_count(); }

    // Plan district whose intersection with reference district k is largest.
    DistrictId chosen(int k) const noexcept { return chosen_[k]; }
    std::size_t entry_size(int k) const noexcept { return sizes_[k]; }

    // M_k as a sorted vertex list.
    std::vector<VertexId> entry(int k) const {
        std::vector<VertexId> out;
        const auto members = frame_->members(k);
        const auto base = frame_->offset(k);
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (bits_[base + i / 64] >> (i % 64) & 1u) out.push_back(members[i]);
        }
        return out;
    }

    // True iff M_k and other.M_k are disjoint for every k (same reference assumed).
    bool disjoint_from(const PlanSignature& other) const noexcept {
        for (std::size_t w = 0; w < bits_.size(); ++w) {
            if (bits_[w] & other.bits_[w]) return false;
        }
        return true;
    }

private:
    friend PlanSignature signature(const DistrictPlan& plan, const std::shared_ptr<const ReferenceFrame>& frame);

    std::shared_ptr<const ReferenceFrame> frame_;
    std::vector<std::uint64_t> bits_;
    std::vector<DistrictId> chosen_;
    std::vector<std::size_t> sizes_;
};

// Ties between equally large intersections go to the lowest plan district.
inline PlanSignature signature(const DistrictPlan& plan, const std::shared_ptr<const ReferenceFrame>& frame) {
    const int n = frame->district_count();
    if (plan.size() != frame->vertex_count() || plan.district_count() != n) {
        throw InvalidArgument("signature: plan and reference differ in vertex universe or district count");
    }
    std::vector<std::size_t> overlap(static_cast<std::size_t>(n) * n, 0);
    for (VertexId v = 0; v < static_cast<VertexId>(plan.size()); ++v) {
        ++overlap[static_cast<std::size_t>(frame->district_of(v)) * n + plan[v]];
    }
    PlanSignature sig;
    sig.frame_ = frame;
    sig.chosen_.resize(n);
    sig.sizes_.resize(n);
    sig.bits_.assign(frame->words(), 0);
    for (int k = 0; k < n; ++k) {
        DistrictId best = 0;
        for (DistrictId d = 1; d < n; ++d) {
            if (overlap[static_cast<std::size_t>(k) * n + d] > overlap[static_cast<std::size_t>(k) * n + best]) best = d;
        }
        sig.chosen_[k] = best;
        sig.sizes_[k] = overlap[static_cast<std::size_t>(k) * n + best];
        const auto members = frame->members(k);
        const auto base = frame->offset(k);
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (plan[members[i]] == best) sig.bits_[base + i / 64] |= std::uint64_t{1} << (i % 64);
        }
    }
    return sig;
}

inline PlanSignature signature(const DistrictPlan& plan, const DistrictPlan& reference) {
    return signature(plan, std::make_shared<const ReferenceFrame>(reference));
}

inline bool are_distant(const PlanSignature& a, const PlanSignature& b) {
    if (a.reference_id() != b.reference_id() || a.district_count() != b.district_count()) {
        throw InvalidArgument("are_distant: signatures built against different references");
    }
    return a.disjoint_from(b);
}

enum class SearchMode { Greedy, Exact };

inline const char* to_string(SearchMode mode) { return mode == SearchMode::Greedy ? "greedy" : "exact"; }

struct DistantSet {
    std::vector<std::size_t> members;  // indices into the ensemble, ascending
    int upper_bound = 0;
    SearchMode mode = SearchMode::Greedy;
};

namespace detail {

// Dense bit matrix adjacency for the distantness graph.
class BitGraph {
public:
    explicit BitGraph(std::size_t n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}
    std::size_t size() const noexcept { return n_; }
    std::size_t words() const noexcept { return words_; }
    void connect(std::size_t a, std::size_t b) {
        bits_[a * words_ + b / 64] |= std::uint64_t{1} << (b % 64);
        bits_[b * words_ + a / 64] |= std::uint64_t{1} << (a % 64);
    }
    const std::uint64_t* row(std::size_t a) const noexcept { return bits_.data() + a * words_; }
    std::size_t degree(std::size_t a) const noexcept {
        std::size_t d = 0;
        for (std::size_t w = 0; w < words_; ++w) d += static_cast<std::size_t>(std::popcount(row(a)[w]));
        return d;
    }

private:
    std::size_t n_, words_;
    std::vector<std::uint64_t> bits_;
};

// Maximum clique by branch and bound with greedy-colouring bounds (MCQ style),
// stopping early once a clique of size `cap` is found.
class CliqueSearch {
public:
    CliqueSearch(const BitGraph& g, std::size_t cap, std::vector<std::size_t> incumbent)
        : g_(g), cap_(cap), best_(std::move(incumbent)) {}

    std::vector<std::size_t> run() {
        const std::size_t n = g_.size();
        if (n == 0 || best_.size() >= cap_) return best_;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::vector<std::size_t> deg(n);
        for (std::size_t v = 0; v < n; ++v) deg[v] = g_.degree(v);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return deg[a] > deg[b]; });
        std::vector<std::uint64_t> cand(g_.words(), 0);
        for (std::size_t v = 0; v < n; ++v) cand[v / 64] |= std::uint64_t{1} << (v % 64);
        order_ = std::move(order);
        rank_.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) rank_[order_[i]] = i;
        expand(cand);
        return best_;
    }

private:
    void expand(std::vector<std::uint64_t>& cand) {
        if (best_.size() >= cap_) return;
        // Greedy colouring of the candidates in degree order.
        std::vector<std::size_t> verts;
        for (std::size_t w = 0; w < cand.size(); ++w) {
            for (std::uint64_t bits = cand[w]; bits; bits &= bits - 1) verts.push_back(w * 64 + std::countr_zero(bits));
        }
        std::sort(verts.begin(), verts.end(), [&](std::size_t a, std::size_t b) { return rank_[a] < rank_[b]; });
        std::vector<std::size_t> colour(verts.size());
        std::vector<std::vector<std::uint64_t>> classes;
        for (std::size_t i = 0; i < verts.size(); ++i) {
            const auto v = verts[i];
            std::size_t c = 0;
            for (; c < classes.size(); ++c) {
                const auto* row = g_.row(v);
                bool clash = false;
                for (std::size_t w = 0; w < classes[c].size() && !clash; ++w) clash = (classes[c][w] & row[w]) != 0;
                if (!clash) break;
            }
            if (c == classes.size()) classes.emplace_back(g_.words(), 0);
            classes[c][v / 64] |= std::uint64_t{1} << (v % 64);
            colour[i] = c + 1;
        }
        std::vector<std::size_t> idx(verts.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return colour[a] < colour[b]; });
        // Branch from the highest colour downward.
        for (std::size_t j = idx.size(); j-- > 0;) {
            const std::size_t i = idx[j];
            if (current_.size() + colour[i] <= best_.size() || best_.size() >= cap_) return;
            const auto v = verts[i];
            current_.push_back(v);
            std::vector<std::uint64_t> next(cand.size());
            bool any = false;
            for (std::size_t w = 0; w < cand.size(); ++w) {
                next[w] = cand[w] & g_.row(v)[w];
                any = any || next[w];
            }
            if (any) {
                expand(next);
            } else if (current_.size() > best_.size()) {
                best_ = current_;
            }
            current_.pop_back();
            cand[v / 64] &= ~(std::uint64_t{1} << (v % 64));
        }
    }

    const BitGraph& g_;
    std::size_t cap_;
    std::vector<std::size_t> best_;
    std::vector<std::size_t> current_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> rank_;
};

}  // namespace detail

inline std::vector<PlanSignature> signatures(std::span<const DistrictPlan> ensemble, const DistrictPlan& reference,
                                             std::size_t workers = worker_count()) {
    auto frame = std::make_shared<const ReferenceFrame>(reference);
    std::vector<PlanSignature> sigs(ensemble.size());
    parallel_for(ensemble.size(), workers, [&](std::size_t i) { sigs[i] = signature(ensemble[i], frame); });
    return sigs;
}

// Greedy keeps plans in ensemble order when compatible with all kept so far;
// exact solves maximum clique on the distantness graph (seeded with the greedy
// set). Both stop at n members, the pigeonhole bound.
inline DistantSet max_distant_set(std::span<const PlanSignature> sigs, int n, SearchMode mode,
                                  std::size_t workers = worker_count()) {
    DistantSet out;
    out.upper_bound = n;
    out.mode = mode;
    const auto cap = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i < sigs.size() && out.members.size() < cap; ++i) {
        bool ok = true;
        for (std::size_t j : out.members) {
            if (!sigs[i].disjoint_from(sigs[j])) {
                ok = false;
                break;
            }
        }
        if (ok) out.members.push_back(i);
    }
    if (mode == SearchMode::Exact && out.members.size() < cap) {
        detail::BitGraph graph(sigs.size());
        // Rows are filled per worker; each pair is written once by its lower index.
        std::vector<std::vector<std::size_t>> partners(sigs.size());
        parallel_for(sigs.size(), workers, [&](std::size_t i) {
            for (std::size_t j = i + 1; j < sigs.size(); ++j) {
                if (sigs[i].disjoint_from(sigs[j])) partners[i].push_back(j);
            }
        });
        for (std::size_t i = 0; i < sigs.size(); ++i) {
            for (std::size_t j : partners[i]) graph.connect(i, j);
        }
        out.members = detail::CliqueSearch(graph, cap, out.members).run();
    }
    std::sort(out.members.begin(), out.members.end());
    return out;
}

inline DistantSet max_distant_set(std::span<const DistrictPlan> ensemble, const DistrictPlan& reference,
                                  SearchMode mode, std::size_t workers = worker_count()) {
    const auto sigs = signatures(ensemble, reference, workers);
    return max_distant_set(sigs, reference.district_count(), mode, workers);
}

struct CoverageReport {
    std::size_t set_size = 0;
    int upper_bound = 0;
    double ratio = 0.0;
    SearchMode mode = SearchMode::Greedy;
    std::vector<std::size_t> members;
};

inline CoverageReport coverage_report(std::span<const DistrictPlan> ensemble, const DistrictPlan& reference,
                                      SearchMode mode = SearchMode::Greedy, std::size_t workers = worker_count()) {
    auto set = max_distant_set(ensemble, reference, mode, workers);
    CoverageReport r;
    r.set_size = set.members.size();
    r.upper_bound = set.upper_bound;
    r.ratio = static_cast<double>(r.set_size) / r.upper_bound;
    r.mode = mode;
    r.members = std::move(set.members);
    return r;
}

}  // namespace segfair
