#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "segfair/experiment.hpp"
#include "segfair/validation.hpp"

namespace fs = std::filesystem;
using namespace segfair;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNonConvergence = 3;

int districts_for(const CityGraph& g, int requested) {
    if (requested > 0) return requested;
    if (auto info = find_template(g.name())) return info->districts;
    if (g.name().rfind("grid", 0) == 0) return kGridDistricts;
    throw InvalidArgument("--districts is required for graph '" + g.name() + "'");
}

std::vector<double> parse_edges(const std::string& text) {
    std::vector<double> edges;
    std::stringstream ss(text);
    for (std::string cell; std::getline(ss, cell, ',');) {
        if (cell == "inf") edges.push_back(std::numeric_limits<double>::infinity());
        else edges.push_back(parse_double(cell, "--bins"));
    }
    return edges;
}

struct GenCityArgs {
    std::string tmpl = "grid";
    double q_frac = 0.3;
    double target_d = 0.5;
    double tol = 0.01;
    std::uint64_t seed = 1;
    std::string out;
};

int gen_city(const GenCityArgs& a) {
    GenSpec spec;
    spec.target_q_frac = a.q_frac;
    spec.target_d = a.target_d;
    spec.d_tolerance = a.tol;
    spec.rng_seed = a.seed;
    CityGraph city = a.tmpl == "grid" ? generate_grid_city(spec) : generate_modeled_city(load_graph(a.tmpl), spec);
    save_graph(city, a.out);
    std::cout << "vertices=" << city.size() << " P=" << city.total_pop() << " Q=" << city.total_q()
              << " q_frac=" << format_double(city.q_fraction()) << " D=" << format_double(dissimilarity(city)) << '\n';
    return 0;
}

struct TemplateArgs {
    std::string name = "all";
    std::uint64_t seed = 2010;
    std::string out_dir = "data/templates";
};

int make_templates(const TemplateArgs& a) {
    fs::create_directories(a.out_dir);
    int written = 0;
    for (std::size_t i = 0; i < kModeledCities.size(); ++i) {
        const auto& info = kModeledCities[i];
        if (a.name != "all" && a.name != info.name) continue;
        const auto g = build_stand_in_template(info, derive_seed(a.seed, i, 0x7e3));
        const auto path = (fs::path(a.out_dir) / (std::string(info.name) + ".json")).string();
        save_graph(g, path);
        std::cout << path << " vertices=" << g.size() << " P=" << g.total_pop() << " Q=" << g.total_q()
                  << " districts=" << info.districts << '\n';
        ++written;
    }
    if (written == 0) throw InvalidArgument("unknown template '" + a.name + "'");
    return 0;
}

struct ChainArgs {
    std::string graph;
    std::string seed_plan = "scratch";
    int districts = 0;
    long long steps = 100;
    double epsilon = kDefaultEpsilon;
    std::uint64_t rng = 1;
    long long record_every = 1;
    bool include_seed = false;
    std::string out_dir;
};

int run_chain_cmd(const ChainArgs& a) {
    const auto g = load_graph(a.graph);
    DistrictPlan seed;
    if (a.seed_plan == "scratch") {
        seed = seed_with_restarts(g, districts_for(g, a.districts), a.epsilon, derive_seed(a.rng, 0, 0x5eed));
    } else {
        seed = load_assignment(g, a.seed_plan);
    }
    ChainConfig cfg;
    cfg.steps = a.steps;
    cfg.epsilon = a.epsilon;
    cfg.rng_seed = a.rng;
    cfg.record_every = a.record_every;
    std::vector<DistrictPlan> plans;
    if (a.include_seed) plans.push_back(seed);
    walk_chain(g, seed, cfg, [&](DistrictPlan p) { plans.push_back(std::move(p)); });
    const auto manifest = save_ensemble(g, plans, a.out_dir);
    std::cout << "plans=" << plans.size() << " manifest=" << manifest << '\n';
    return 0;
}

struct MetricsArgs {
    std::string graph;
    std::string plan;
    std::string manifest;
};

int metrics_cmd(const MetricsArgs& a) {
    const auto g = load_graph(a.graph);
    std::cout << "D=" << format_double(dissimilarity(g)) << '\n';
    if (!a.plan.empty()) {
        const auto plan = load_assignment(g, a.plan);
        std::cout << "d_Q=" << minority_majority_count(g, plan) << '\n';
        std::cout << "F=" << format_double(fairness(g, plan)) << '\n';
    }
    if (!a.manifest.empty()) {
        const auto plans = load_ensemble(g, a.manifest);
        const auto stats = ensemble_fairness(g, plans);
        std::cout << "plans=" << stats.n_plans << '\n';
        std::cout << "F_bar=" << format_double(stats.f_bar) << '\n';
        std::cout << "mean_d_Q=" << format_double(stats.mean_dq()) << '\n';
        std::cout << "d_Q,count\n";
        for (const auto& [dq, count] : stats.dq_histogram) std::cout << dq << ',' << count << '\n';
    }
    return 0;
}

struct ReferenceArgs {
    std::string graph;
    std::string kind = "stripes";
    int rows = kGridSide;
    int cols = kGridSide;
    int districts = 0;
    int block_rows = 2;
    int block_cols = 5;
    double epsilon = kDefaultEpsilon;
    std::uint64_t seed = 1;
    std::string out;
};

int reference_cmd(const ReferenceArgs& a) {
    const auto g = load_graph(a.graph);
    const int n = districts_for(g, a.districts);
    DistrictPlan plan;
    if (a.kind == "stripes") plan = stripes_plan(a.rows, a.cols, n);
    else if (a.kind == "blocks") plan = blocks_plan(a.rows, a.cols, a.block_rows, a.block_cols);
    else plan = seed_with_restarts(g, n, a.epsilon, a.seed);
    if (plan.size() != g.size()) throw InvalidArgument("reference layout does not match the graph's vertex count");
    save_assignment(g, plan, a.out);
    return 0;
}

struct ValidateArgs {
    std::string graph;
    std::string reference;
    std::string manifest;
    bool exact = false;
};

int validate_cmd(const ValidateArgs& a) {
    const auto g = load_graph(a.graph);
    const auto reference = load_assignment(g, a.reference);
    const auto entries = read_manifest(a.manifest);
    std::vector<DistrictPlan> plans;
    plans.reserve(entries.size());
    for (const auto& e : entries) plans.push_back(load_assignment(g, e.path));
    const auto report = coverage_report(plans, reference, a.exact ? SearchMode::Exact : SearchMode::Greedy);
    std::cout << "mode=" << to_string(report.mode) << '\n';
    std::cout << "set_size=" << report.set_size << '\n';
    std::cout << "upper_bound=" << report.upper_bound << '\n';
    std::cout << "ratio=" << format_double(report.ratio) << '\n';
    std::cout << "members=";
    for (std::size_t i = 0; i < report.members.size(); ++i) {
        std::cout << (i ? "," : "") << entries[report.members[i]].plan_id;
    }
    std::cout << '\n';
    return 0;
}

struct ExperimentArgs {
    std::string config;
    std::string out_dir;
};

int experiment_cmd(const ExperimentArgs& a) {
    auto cfg = load_experiment_config(a.config);
    if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
    const auto result = run_experiment(cfg);
    std::cout << "records=" << result.records.size() << " failures=" << result.failures.size()
              << " results=" << result.results_path << " manifest=" << result.manifest_path << '\n';
    for (const auto& f : result.failures) std::cerr << f.city_id << ": " << f.reason << '\n';
    return 0;
}

struct SummarizeArgs {
    std::string in;
    std::string x = "dissimilarity";
    std::string y = "f_bar";
    std::string bins = "0.01,0.2,0.4,0.6,0.8,inf";
    std::string bins_dir;
};

int summarize_cmd(const SummarizeArgs& a) {
    const auto records = load_records(a.in);
    const auto s = regression_summary(records, parse_field(a.x), parse_field(a.y));
    std::cout << "n=" << s.count << '\n';
    std::cout << "slope=" << format_double(s.slope) << '\n';
    std::cout << "intercept=" << format_double(s.intercept) << '\n';
    std::cout << "r_squared=" << format_double(s.r_squared) << '\n';
    std::cout << "pearson_r=" << format_double(s.pearson_r) << '\n';
    std::cout << "mean_" << a.y << '=' << format_double(s.mean_y) << '\n';
    const auto bins = bin_by_fairness(records, parse_edges(a.bins));
    std::cout << "bin,upper_edge,count\n";
    for (std::size_t b = 0; b < bins.counts.size(); ++b) {
        std::cout << b << ',' << format_double(bins.edges[b]) << ',' << bins.counts[b] << '\n';
    }
    if (!a.bins_dir.empty()) export_bins(a.bins_dir, records, bins);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"segfair: segregation vs district-fairness ensemble experiments"};
    app.require_subcommand(1);

    GenCityArgs gen;
    auto* c_gen = app.add_subcommand("gen-city", "generate a city with target Q/P and dissimilarity D");
    c_gen->add_option("--template", gen.tmpl, "dual-graph file or 'grid'");
    c_gen->add_option("--q-frac", gen.q_frac, "target Q/P (grid only)");
    c_gen->add_option("--target-d", gen.target_d, "target dissimilarity");
    c_gen->add_option("--tol", gen.tol, "accepted |D - target|");
    c_gen->add_option("--seed", gen.seed);
    c_gen->add_option("--out", gen.out)->required();

    TemplateArgs tmpl;
    auto* c_tmpl = app.add_subcommand("make-templates", "write the modeled-city stand-in templates");
    c_tmpl->add_option("--name", tmpl.name, "albuquerque, charlotte, pittsburgh, minneapolis or all");
    c_tmpl->add_option("--seed", tmpl.seed);
    c_tmpl->add_option("--out-dir", tmpl.out_dir);

    ChainArgs chain;
    auto* c_chain = app.add_subcommand("run-chain", "run a ReCom chain and write one assignment per state");
    c_chain->add_option("--graph", chain.graph)->required();
    c_chain->add_option("--seed-plan", chain.seed_plan, "assignment file or 'scratch'");
    c_chain->add_option("--districts", chain.districts, "district count for a scratch seed");
    c_chain->add_option("--steps", chain.steps);
    c_chain->add_option("--epsilon", chain.epsilon);
    c_chain->add_option("--rng", chain.rng);
    c_chain->add_option("--record-every", chain.record_every);
    c_chain->add_flag("--include-seed", chain.include_seed, "also write the seed plan first");
    c_chain->add_option("--out-dir", chain.out_dir)->required();

    MetricsArgs metrics;
    auto* c_metrics = app.add_subcommand("metrics", "print D, and d_Q / F / F-bar for plans");
    c_metrics->add_option("--graph", metrics.graph)->required();
    c_metrics->add_option("--plan", metrics.plan);
    c_metrics->add_option("--ensemble-manifest", metrics.manifest);

    ReferenceArgs ref;
    auto* c_ref = app.add_subcommand("reference", "write a reference plan (stripes, blocks or random)");
    c_ref->add_option("--graph", ref.graph)->required();
    c_ref->add_option("--kind", ref.kind)->check(CLI::IsMember({"stripes", "blocks", "random"}));
    c_ref->add_option("--rows", ref.rows);
    c_ref->add_option("--cols", ref.cols);
    c_ref->add_option("--districts", ref.districts);
    c_ref->add_option("--block-rows", ref.block_rows);
    c_ref->add_option("--block-cols", ref.block_cols);
    c_ref->add_option("--epsilon", ref.epsilon);
    c_ref->add_option("--seed", ref.seed);
    c_ref->add_option("--out", ref.out)->required();

    ValidateArgs val;
    auto* c_val = app.add_subcommand("validate", "largest mutually distant plan set against a reference");
    c_val->add_option("--graph", val.graph)->required();
    c_val->add_option("--reference", val.reference)->required();
    c_val->add_option("--ensemble-manifest", val.manifest)->required();
    c_val->add_flag("--exact", val.exact, "exact maximum clique instead of greedy");

    ExperimentArgs exp;
    auto* c_exp = app.add_subcommand("experiment", "run a city sweep from a config file");
    c_exp->add_option("--config", exp.config)->required();
    c_exp->add_option("--out-dir", exp.out_dir, "overrides output_dir");

    SummarizeArgs sum;
    auto* c_sum = app.add_subcommand("summarize", "OLS trend and F-bar histogram of a results CSV");
    c_sum->add_option("--in", sum.in)->required();
    c_sum->add_option("--x", sum.x);
    c_sum->add_option("--y", sum.y);
    c_sum->add_option("--bins", sum.bins, "ascending upper edges, 'inf' allowed");
    c_sum->add_option("--bins-dir", sum.bins_dir, "write bin_<i>.csv subsets here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (c_gen->parsed()) return gen_city(gen);
        if (c_tmpl->parsed()) return make_templates(tmpl);
        if (c_chain->parsed()) return run_chain_cmd(chain);
        if (c_metrics->parsed()) return metrics_cmd(metrics);
        if (c_ref->parsed()) return reference_cmd(ref);
        if (c_val->parsed()) return validate_cmd(val);
        if (c_exp->parsed()) return experiment_cmd(exp);
        if (c_sum->parsed()) return summarize_cmd(sum);
    } catch (const NonConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNonConvergence;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
