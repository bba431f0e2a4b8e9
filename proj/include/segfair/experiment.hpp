#pragma once

// End-to-end experiment driver: sample generation targets, build each city's
// ensemble, and collect one (Q/P, D, F-bar) record per city. Also the
// results-CSV contract consumed by the plotting tool, OLS trend summaries and
// F-bar histogram binning.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "segfair/citygen.hpp"
#include "segfair/metrics.hpp"
#include "segfair/parallel.hpp"
#include "segfair/partition.hpp"
#include "segfair/recom.hpp"
#include "segfair/templates.hpp"

namespace segfair {

// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string format_double(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, end);
}

struct CityRecord {
    std::string city_id;
    std::string template_name;
    double q_frac = 0.0;
    double dissimilarity = 0.0;
    double f_bar = 0.0;
    double mean_dq = 0.0;
    std::size_t n_plans = 0;
};

inline constexpr const char* kResultsHeader = "city_id,template,q_frac,dissimilarity,f_bar,mean_dq,n_plans";

inline void write_records(std::ostream& out, std::span<const CityRecord> records) {
    out << kResultsHeader << '\n';
    for (const auto& r : records) {
        out << r.city_id << ',' << r.template_name << ',' << format_double(r.q_frac) << ','
            << format_double(r.dissimilarity) << ',' << format_double(r.f_bar) << ',' << format_double(r.mean_dq)
            << ',' << r.n_plans << '\n';
    }
}

inline void save_records(const std::string& path, std::span<const CityRecord> records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write results '" + path + "'");
    write_records(out, records);
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline double parse_double(const std::string& text, const std::string& context) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) throw ParseError(context + ": not a number '" + text + "'");
    return value;
}

inline std::vector<CityRecord> read_records(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(origin + ": empty results file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kResultsHeader) throw ParseError(origin + ": unexpected header '" + line + "'");
    std::vector<CityRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream row(line);
        for (std::string cell; std::getline(row, cell, ',');) cols.push_back(cell);
        const auto ctx = origin + ":" + std::to_string(line_no);
        if (cols.size() != 7) throw ParseError(ctx + ": expected 7 columns");
        CityRecord r;
        r.city_id = cols[0];
        r.template_name = cols[1];
        r.q_frac = parse_double(cols[2], ctx);
        r.dissimilarity = parse_double(cols[3], ctx);
        r.f_bar = parse_double(cols[4], ctx);
        r.mean_dq = parse_double(cols[5], ctx);
        r.n_plans = static_cast<std::size_t>(parse_double(cols[6], ctx));
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<CityRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open results '" + path + "'");
    return read_records(in, path);
}

// ---------------------------------------------------------------------------

enum class RecordField { QFrac, Dissimilarity, FBar, MeanDq };

inline RecordField parse_field(const std::string& name) {
    if (name == "q_frac") return RecordField::QFrac;
    if (name == "dissimilarity") return RecordField::Dissimilarity;
    if (name == "f_bar") return RecordField::FBar;
    if (name == "mean_dq") return RecordField::MeanDq;
    throw InvalidArgument("unknown record field '" + name + "'");
}

inline double field_value(const CityRecord& r, RecordField f) {
    switch (f) {
        case RecordField::QFrac: return r.q_frac;
        case RecordField::Dissimilarity: return r.dissimilarity;
        case RecordField::FBar: return r.f_bar;
        case RecordField::MeanDq: return r.mean_dq;
    }
    return 0.0;
}

struct RegressionSummary {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double pearson_r = 0.0;
    double mean_y = 0.0;
    std::size_t count = 0;
};

// Ordinary least squares y ~ slope * x + intercept.
inline RegressionSummary regression_summary(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("regression: x and y differ in length");
    if (x.size() < 2) throw InvalidArgument("regression: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw InvalidArgument("regression: x has zero variance");
    RegressionSummary s;
    s.count = x.size();
    s.slope = sxy / sxx;
    s.intercept = my - s.slope * mx;
    s.mean_y = my;
    if (syy > 0.0) {
        s.pearson_r = sxy / std::sqrt(sxx * syy);
        s.r_squared = s.pearson_r * s.pearson_r;
    }
    return s;
}

inline RegressionSummary regression_summary(std::span<const CityRecord> records, RecordField x, RecordField y) {
    std::vector<double> xs, ys;
    xs.reserve(records.size());
    ys.reserve(records.size());
    for (const auto& r : records) {
        xs.push_back(field_value(r, x));
        ys.push_back(field_value(r, y));
    }
    return regression_summary(xs, ys);
}

// Upper bin edges; the last edge may be +infinity. Bin i holds
// edges[i-1] <= f < edges[i]; anything at or past the last edge lands in the
// last bin.
inline const std::vector<double> kFairnessBinEdges{0.01, 0.2, 0.4, 0.6, 0.8,
                                                   std::numeric_limits<double>::infinity()};

struct FairnessBins {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::vector<std::vector<std::size_t>> members;  // record indices per bin
};

inline FairnessBins bin_by_fairness(std::span<const CityRecord> records,
                                    const std::vector<double>& edges = kFairnessBinEdges) {
    if (edges.empty()) throw InvalidArgument("bin_by_fairness: no bin edges");
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) throw InvalidArgument("bin_by_fairness: edges must ascend");
    }
    FairnessBins bins;
    bins.edges = edges;
    bins.counts.assign(edges.size(), 0);
    bins.members.resize(edges.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), records[i].f_bar);
        const auto b = std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()), edges.size() - 1);
        ++bins.counts[b];
        bins.members[b].push_back(i);
    }
    return bins;
}

// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::string template_spec = "grid";  // "grid" or a dual-graph file path
    int districts = 0;                   // 0: 10 for grid, registry value for known templates
    int city_count = 100;
    double q_frac_min = 0.0;             // grid only; modeled cities keep the template's Q
    double q_frac_max = 0.5;
    double d_min = 0.0;
    double d_max = 1.0;
    double d_tolerance = 0.01;
    int seeds_per_city = 2;
    long long steps_per_seed = 500;
    double epsilon = kDefaultEpsilon;
    std::uint64_t master_seed = 1;
    std::string output_dir = "results";
    bool retain_artifacts = false;

    void validate() const {
        auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!unit(q_frac_min) || !unit(q_frac_max) || q_frac_min > q_frac_max) {
            throw InvalidArgument("experiment: q_frac range must be an ordered interval in [0, 1]");
        }
        if (!unit(d_min) || !unit(d_max) || d_min > d_max) {
            throw InvalidArgument("experiment: target D range must be an ordered interval in [0, 1]");
        }
        if (city_count < 1 || seeds_per_city < 1 || steps_per_seed < 0) {
            throw InvalidArgument("experiment: counts must be positive");
        }
        if (districts < 0) throw InvalidArgument("experiment: districts must be >= 1");
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("experiment: epsilon must lie in (0, 1)");
    }
};

// desk: 100 cities, 2 seeds x 500 steps. paper: 3000 cities, 4 seeds x 5000
// steps (long-running).
inline void apply_profile(ExperimentConfig& cfg, const std::string& name) {
    if (name == "desk") {
        cfg.city_count = 100;
        cfg.seeds_per_city = 2;
        cfg.steps_per_seed = 500;
    } else if (name == "paper") {
        cfg.city_count = 3000;
        cfg.seeds_per_city = 4;
        cfg.steps_per_seed = 5000;
    } else {
        throw InvalidArgument("unknown profile '" + name + "' (desk, paper)");
    }
}

// `key = value` lines; `#` starts a comment. Later keys override a profile.
inline ExperimentConfig parse_experiment_config(std::istream& in, const std::string& origin) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const auto ctx = origin + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw ParseError(ctx + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        auto num = [&] { return parse_double(value, ctx); };
        auto integer = [&] {
            const double v = num();
            if (v != std::floor(v)) throw ParseError(ctx + ": '" + key + "' must be an integer");
            return static_cast<long long>(v);
        };
        if (key == "profile") apply_profile(cfg, value);
        else if (key == "template") cfg.template_spec = value;
        else if (key == "districts") cfg.districts = static_cast<int>(integer());
        else if (key == "cities") cfg.city_count = static_cast<int>(integer());
        else if (key == "q_frac_min") cfg.q_frac_min = num();
        else if (key == "q_frac_max") cfg.q_frac_max = num();
        else if (key == "d_min") cfg.d_min = num();
        else if (key == "d_max") cfg.d_max = num();
        else if (key == "d_tolerance") cfg.d_tolerance = num();
        else if (key == "seeds_per_city") cfg.seeds_per_city = static_cast<int>(integer());
        else if (key == "steps_per_seed") cfg.steps_per_seed = integer();
        else if (key == "epsilon") cfg.epsilon = num();
        else if (key == "master_seed") cfg.master_seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "retain_artifacts") cfg.retain_artifacts = (value == "true" || value == "1" || value == "yes");
        else throw ParseError(ctx + ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    return parse_experiment_config(in, path);
}

struct CityFailure {
    std::string city_id;
    std::string reason;
};

struct ExperimentResult {
    std::vector<CityRecord> records;
    std::vector<CityFailure> failures;
    std::string results_path;
    std::string manifest_path;
};

struct CityTargets {
    std::string city_id;
    std::uint64_t seed;
    double q_frac;
    double target_d;
};

// Targets for city i depend only on (master_seed, i).
inline CityTargets city_targets(const ExperimentConfig& cfg, int index) {
    CityTargets t;
    std::ostringstream id;
    id << (cfg.template_spec == "grid" ? "grid" : "city") << '-' << std::setw(4) << std::setfill('0') << index;
    t.city_id = id.str();
    t.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(index), 0xc17e);
    Rng rng(derive_seed(t.seed, 0, 0x7a6));
    t.q_frac = uniform_real(rng, cfg.q_frac_min, cfg.q_frac_max);
    t.target_d = uniform_real(rng, cfg.d_min, cfg.d_max);
    return t;
}

// Ensemble of `seeds` from-scratch seeds each followed by `steps` ReCom states,
// folded straight into fairness statistics. Optionally keeps the plans.
inline FairnessStats city_ensemble_fairness(const CityGraph& city, int districts, int seeds, long long steps,
                                            double epsilon, std::uint64_t seed, std::size_t workers,
                                            std::vector<DistrictPlan>* keep = nullptr) {
    std::vector<DistrictPlan> seed_plans(static_cast<std::size_t>(seeds));
    for (int s = 0; s < seeds; ++s) {
        seed_plans[s] = seed_with_restarts(city, districts, epsilon, derive_seed(seed, static_cast<std::uint64_t>(s), 0x5eed));
    }
    std::vector<std::vector<int>> dq(static_cast<std::size_t>(seeds));
    std::vector<std::vector<DistrictPlan>> kept(static_cast<std::size_t>(seeds));
    parallel_for(static_cast<std::size_t>(seeds), workers, [&](std::size_t s) {
        auto record = [&](const DistrictPlan& p) {
            dq[s].push_back(minority_majority_count(city, p));
            if (keep) kept[s].push_back(p);
        };
        record(seed_plans[s]);
        if (steps == 0) return;
        ChainConfig c;
        c.steps = steps;
        c.epsilon = epsilon;
        c.rng_seed = derive_seed(seed, s, 0xc4a1);
        walk_chain(city, seed_plans[s], c, record);
    });
    FairnessStats stats;
    double f_sum = 0.0;
    for (std::size_t s = 0; s < dq.size(); ++s) {
        for (int d : dq[s]) {
            const double f = fairness_ratio(d, districts, city.total_q(), city.total_pop());
            stats.f_values.push_back(f);
            f_sum += f;
            ++stats.dq_histogram[d];
            ++stats.n_plans;
        }
        if (keep) {
            for (auto& p : kept[s]) keep->push_back(std::move(p));
        }
    }
    stats.n_districts = districts;
    stats.f_bar = f_sum / static_cast<double>(stats.n_plans);
    return stats;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers = worker_count()) {
    namespace fs = std::filesystem;
    cfg.validate();
    const bool grid = cfg.template_spec == "grid";
    CityGraph tmpl;
    std::string template_name = "grid";
    int districts = cfg.districts;
    if (!grid) {
        tmpl = load_graph(cfg.template_spec);
        template_name = tmpl.name();
        if (districts == 0) {
            auto info = find_template(template_name);
            if (!info) throw InvalidArgument("experiment: districts not set and template '" + template_name + "' unknown");
            districts = info->districts;
        }
    } else if (districts == 0) {
        districts = kGridDistricts;
    }

    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create '" + cfg.output_dir + "': " + ec.message());

    const auto count = static_cast<std::size_t>(cfg.city_count);
    std::vector<std::optional<CityRecord>> records(count);
    std::vector<std::string> reasons(count);
    const std::size_t outer = std::min(workers, count);
    const std::size_t inner = std::max<std::size_t>(1, workers / std::max<std::size_t>(1, outer));

    parallel_for(count, outer, [&](std::size_t i) {
        const auto t = city_targets(cfg, static_cast<int>(i));
        try {
            GenSpec spec;
            spec.target_q_frac = t.q_frac;
            spec.target_d = t.target_d;
            spec.d_tolerance = cfg.d_tolerance;
            spec.rng_seed = derive_seed(t.seed, 1, 0x6e4);
            CityGraph city = grid ? generate_grid_city(spec) : generate_modeled_city(tmpl, spec);
            city = city.renamed(t.city_id);
            std::vector<DistrictPlan> plans;
            const auto stats = city_ensemble_fairness(city, districts, cfg.seeds_per_city, cfg.steps_per_seed,
                                                      cfg.epsilon, derive_seed(t.seed, 2, 0xe45), inner,
                                                      cfg.retain_artifacts ? &plans : nullptr);
            if (cfg.retain_artifacts) {
                const auto dir = fs::path(cfg.output_dir) / "cities" / t.city_id;
                fs::create_directories(dir);
                save_graph(city, (dir / "graph.json").string());
                save_ensemble(city, plans, (dir / "ensemble").string());
            }
            CityRecord r;
            r.city_id = t.city_id;
            r.template_name = template_name;
            r.q_frac = city.q_fraction();
            r.dissimilarity = dissimilarity(city);
            r.f_bar = stats.f_bar;
            r.mean_dq = stats.mean_dq();
            r.n_plans = stats.n_plans;
            records[i] = std::move(r);
        } catch (const std::exception& e) {
            reasons[i] = e.what();
        }
    });

    ExperimentResult result;
    result.results_path = (fs::path(cfg.output_dir) / "results.csv").string();
    result.manifest_path = (fs::path(cfg.output_dir) / "manifest.csv").string();
    std::ofstream manifest(result.manifest_path, std::ios::binary | std::ios::trunc);
    if (!manifest) throw IoError("cannot write '" + result.manifest_path + "'");
    manifest << "city_id,status,target_q_frac,target_d,reason\n";
    for (std::size_t i = 0; i < count; ++i) {
        const auto t = city_targets(cfg, static_cast<int>(i));
        std::string reason = reasons[i];
        std::replace(reason.begin(), reason.end(), ',', ';');
        std::replace(reason.begin(), reason.end(), '\n', ' ');
        manifest << t.city_id << ',' << (records[i] ? "ok" : "failed") << ',' << format_double(t.q_frac) << ','
                 << format_double(t.target_d) << ',' << reason << '\n';
        if (records[i]) {
            result.records.push_back(*records[i]);
        } else {
            result.failures.push_back({t.city_id, reasons[i]});
        }
    }
    save_records(result.results_path, result.records);
    return result;
}

// Per-bin CSV subsets (bin_<i>.csv) for bin-highlighted scatter plots.
inline std::vector<std::string> export_bins(const std::string& dir, std::span<const CityRecord> records,
                                            const FairnessBins& bins) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
    std::vector<std::string> paths;
    for (std::size_t b = 0; b < bins.members.size(); ++b) {
        std::vector<CityRecord> subset;
        for (auto i : bins.members[b]) subset.push_back(records[i]);
        const auto path = (fs::path(dir) / ("bin_" + std::to_string(b) + ".csv")).string();
        save_records(path, subset);
        paths.push_back(path);
    }
    return paths;
}

}  // namespace segfair
