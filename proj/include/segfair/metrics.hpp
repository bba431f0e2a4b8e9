#pragma once

// Segregation and representation measures: dissimilarity index D, minority-
// majority district count, fairness F = (d_Q / n) / (Q / P) and its ensemble mean.

#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "segfair/city_graph.hpp"
#include "segfair/errors.hpp"
#include "segfair/partition.hpp"

namespace segfair {

// D = 1/2 * sum_i | Q_i / Q - (P-Q)_i / (P-Q) |
inline double dissimilarity(std::span<const Population> pop, std::span<const Population> q) {
    const Population total = std::accumulate(pop.begin(), pop.end(), Population{0});
    const Population total_q = std::accumulate(q.begin(), q.end(), Population{0});
    const Population total_rest = total - total_q;
    if (total_q <= 0 || total_rest <= 0) {
        throw UndefinedIndex("dissimilarity undefined: Q = " + std::to_string(total_q) +
                             ", P - Q = " + std::to_string(total_rest));
    }
    const double inv_q = 1.0 / static_cast<double>(total_q);
    const double inv_rest = 1.0 / static_cast<double>(total_rest);
    double sum = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        sum += std::abs(static_cast<double>(q[i]) * inv_q - static_cast<double>(pop[i] - q[i]) * inv_rest);
    }
    return std::min(1.0, 0.5 * sum);
}

inline double dissimilarity(const CityGraph& g) { return dissimilarity(g.pops(), g.qs()); }

// Strict majority: an exact 50/50 district is not counted.
inline bool is_minority_majority(const DistrictTally& t) noexcept { return 2 * t.q > t.pop; }

inline int minority_majority_count(const CityGraph& g, const DistrictPlan& plan) {
    int count = 0;
    for (const auto& t : district_populations(g, plan)) count += is_minority_majority(t) ? 1 : 0;
    return count;
}

inline double fairness_ratio(int dq, int n, Population q_total, Population total) {
    if (q_total <= 0 || total <= 0) throw UndefinedIndex("fairness undefined: Q = 0");
    return (static_cast<double>(dq) / n) / (static_cast<double>(q_total) / static_cast<double>(total));
}

inline double fairness(const CityGraph& g, const DistrictPlan& plan) {
    if (g.total_q() <= 0) throw UndefinedIndex("fairness undefined: Q = 0");
    return fairness_ratio(minority_majority_count(g, plan), plan.district_count(), g.total_q(), g.total_pop());
}

struct FairnessStats {
    std::vector<double> f_values;
    double f_bar = 0.0;
    std::map<int, std::size_t> dq_histogram;
    std::size_t n_plans = 0;
    int n_districts = 0;

    double mean_dq() const {
        double acc = 0.0;
        for (const auto& [dq, count] : dq_histogram) acc += static_cast<double>(dq) * count;
        return n_plans ? acc / static_cast<double>(n_plans) : 0.0;
    }
};

// Streaming accumulator so ensembles need not be held in memory.
class FairnessAccumulator {
public:
    FairnessAccumulator(const CityGraph& g, int n_districts) : g_(g), n_(n_districts) {
        if (g.total_q() <= 0) throw UndefinedIndex("fairness undefined: Q = 0");
    }

    void add(const DistrictPlan& plan) {
        if (plan.district_count() != n_) throw InvalidArgument("ensemble plans disagree on n");
        const int dq = minority_majority_count(g_, plan);
        stats_.f_values.push_back(fairness_ratio(dq, n_, g_.total_q(), g_.total_pop()));
        ++stats_.dq_histogram[dq];
        ++stats_.n_plans;
    }

    FairnessStats finish() const {
        if (stats_.n_plans == 0) throw InvalidArgument("ensemble_fairness: empty ensemble");
        FairnessStats out = stats_;
        out.n_districts = n_;
        double sum = 0.0;
        for (double f : out.f_values) sum += f;
        out.f_bar = sum / static_cast<double>(out.n_plans);
        return out;
    }

private:
    const CityGraph& g_;
    int n_;
    FairnessStats stats_;
};

inline FairnessStats ensemble_fairness(const CityGraph& g, std::span<const DistrictPlan> ensemble) {
    if (ensemble.empty()) throw InvalidArgument("ensemble_fairness: empty ensemble");
    FairnessAccumulator acc(g, ensemble.front().district_count());
    for (const auto& plan : ensemble) acc.add(plan);
    return acc.finish();
}

}  // namespace segfair
