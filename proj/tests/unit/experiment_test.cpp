#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "segfair/experiment.hpp"

using namespace segfair;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_config(const std::string& dir) {
    ExperimentConfig cfg;
    cfg.city_count = 10;
    cfg.seeds_per_city = 2;
    cfg.steps_per_seed = 100;
    cfg.q_frac_min = 0.2;
    cfg.q_frac_max = 0.45;
    cfg.master_seed = 2024;
    cfg.output_dir = dir;
    return cfg;
}

}  // namespace

TEST(Regression, CollinearPoints) {
    std::vector<double> x{0, 1}, y{0, 1};
    auto s = regression_summary(x, y);
    EXPECT_NEAR(s.slope, 1.0, 1e-12);
    EXPECT_NEAR(s.r_squared, 1.0, 1e-12);
}

TEST(Regression, ConstantY) {
    std::vector<double> x{0, 1, 2, 5}, y{3, 3, 3, 3};
    auto s = regression_summary(x, y);
    EXPECT_NEAR(s.slope, 0.0, 1e-12);
    EXPECT_NEAR(s.r_squared, 0.0, 1e-12);
    EXPECT_NEAR(s.mean_y, 3.0, 1e-12);
}

TEST(Regression, ThreePointHandOracle) {
    std::vector<double> x{0, 1, 2}, y{0, 1, 1};
    auto s = regression_summary(x, y);
    EXPECT_NEAR(s.slope, 0.5, 1e-12);
    EXPECT_NEAR(s.intercept, 1.0 / 6.0, 1e-12);
    EXPECT_NEAR(s.r_squared, 0.75, 1e-12);
}

TEST(Regression, DegenerateX) {
    std::vector<double> x{1, 1, 1}, y{0, 1, 2};
    EXPECT_THROW(regression_summary(x, y), InvalidArgument);
    std::vector<double> one{1};
    EXPECT_THROW(regression_summary(one, one), InvalidArgument);
}

TEST(Regression, AgreesWithNormalEquations) {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = static_cast<std::size_t>(uniform_int(rng, 3, 30));
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = uniform_real(rng, -5, 5);
            y[i] = 2 * x[i] + uniform_real(rng, -3, 3);
        }
        // Normal equations in raw sums, residual-based R^2.
        long double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += x[i];
            sy += y[i];
            sxx += x[i] * x[i];
            sxy += x[i] * y[i];
        }
        const long double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const long double icpt = (sy - slope * sx) / n;
        long double ss_res = 0, ss_tot = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ss_res += (y[i] - (slope * x[i] + icpt)) * (y[i] - (slope * x[i] + icpt));
            ss_tot += (y[i] - sy / n) * (y[i] - sy / n);
        }
        auto s = regression_summary(x, y);
        EXPECT_NEAR(s.slope, static_cast<double>(slope), 1e-9);
        EXPECT_NEAR(s.intercept, static_cast<double>(icpt), 1e-9);
        EXPECT_NEAR(s.r_squared, static_cast<double>(1 - ss_res / ss_tot), 1e-9);
    }
}

TEST(Bins, SixBinsAndZeroRecords) {
    std::vector<CityRecord> recs;
    for (double f : {0.0, 0.005, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.4, 3.0}) recs.push_back({"c", "grid", 0.3, 0.5, f, 0, 1});
    auto bins = bin_by_fairness(recs);
    ASSERT_EQ(bins.counts.size(), 6u);
    EXPECT_EQ(bins.counts, (std::vector<std::size_t>{2, 2, 1, 1, 1, 3}));
    std::size_t total = 0;
    for (auto c : bins.counts) total += c;
    EXPECT_EQ(total, recs.size());

    std::vector<CityRecord> zeros(5, CityRecord{"z", "grid", 0.3, 0.5, 0.0, 0, 1});
    EXPECT_EQ(bin_by_fairness(zeros).counts[0], 5u);
    EXPECT_THROW(bin_by_fairness(recs, {0.5, 0.2}), InvalidArgument);
}

TEST(RecordsCsv, RoundTripAndHeader) {
    std::vector<CityRecord> recs{{"grid-0000", "grid", 0.3, 0.123456789012345, 0.5, 1.5, 1002},
                                 {"grid-0001", "grid", 1.0 / 3.0, 0.9, 1e-17, 0, 4}};
    std::stringstream ss;
    write_records(ss, recs);
    const auto text = ss.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "city_id,template,q_frac,dissimilarity,f_bar,mean_dq,n_plans");
    auto back = read_records(ss, "mem");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].q_frac, 1.0 / 3.0);
    EXPECT_EQ(back[0].dissimilarity, 0.123456789012345);
    EXPECT_EQ(back[0].n_plans, 1002u);
}

TEST(Config, ParsesKeysAndProfiles) {
    std::istringstream in(
        "# sweep\nprofile = desk\ntemplate = grid\ncities = 12\nq_frac_min=0.24\nq_frac_max = 0.32\n"
        "d_min = 0.05\nd_max = 0.95\nmaster_seed = 7\nretain_artifacts = true\n");
    auto cfg = parse_experiment_config(in, "mem");
    EXPECT_EQ(cfg.city_count, 12);
    EXPECT_EQ(cfg.seeds_per_city, 2);
    EXPECT_EQ(cfg.steps_per_seed, 500);
    EXPECT_DOUBLE_EQ(cfg.q_frac_min, 0.24);
    EXPECT_EQ(cfg.master_seed, 7u);
    EXPECT_TRUE(cfg.retain_artifacts);

    std::istringstream paper("profile = paper\n");
    auto p = parse_experiment_config(paper, "mem");
    EXPECT_EQ(p.city_count, 3000);
    EXPECT_EQ(p.seeds_per_city, 4);
    EXPECT_EQ(p.steps_per_seed, 5000);

    std::istringstream bad_key("colour = blue\n");
    EXPECT_THROW(parse_experiment_config(bad_key, "mem"), ParseError);
    std::istringstream bad_range("d_min = 0.9\nd_max = 0.1\n");
    EXPECT_THROW(parse_experiment_config(bad_range, "mem"), InvalidArgument);
    std::istringstream bad_count("cities = 0\n");
    EXPECT_THROW(parse_experiment_config(bad_count, "mem"), InvalidArgument);
}

TEST(RunExperiment, SmokeSweepInvariants) {
    const auto dir = (fs::temp_directory_path() / "segfair_exp_smoke").string();
    fs::remove_all(dir);
    auto cfg = small_config(dir);
    cfg.retain_artifacts = true;
    auto result = run_experiment(cfg, 2);
    ASSERT_EQ(result.records.size(), 10u);
    EXPECT_TRUE(result.failures.empty());
    for (const auto& r : result.records) {
        EXPECT_GT(r.n_plans, 0u);
        EXPECT_EQ(r.n_plans, 202u);
        EXPECT_NEAR(r.f_bar, (r.mean_dq / kGridDistricts) / r.q_frac, 1e-9);
        EXPECT_GE(r.q_frac, 0.2 - 1.0 / 900);
        EXPECT_LE(r.q_frac, 0.45 + 1.0 / 900);

        // Recompute F-bar from the retained artifacts.
        const auto city_dir = fs::path(dir) / "cities" / r.city_id;
        auto city = load_graph((city_dir / "graph.json").string());
        auto plans = load_ensemble(city, (city_dir / "ensemble" / "manifest.csv").string());
        ASSERT_EQ(plans.size(), r.n_plans);
        for (const auto& p : plans) ASSERT_TRUE(is_valid(city, p, cfg.epsilon));
        EXPECT_NEAR(ensemble_fairness(city, plans).f_bar, r.f_bar, 1e-9);
        EXPECT_NEAR(dissimilarity(city), r.dissimilarity, 1e-12);
    }
    auto back = load_records(result.results_path);
    EXPECT_EQ(back.size(), 10u);
}

TEST(RunExperiment, DeterministicAcrossWorkerCounts) {
    const auto a = (fs::temp_directory_path() / "segfair_exp_a").string();
    const auto b = (fs::temp_directory_path() / "segfair_exp_b").string();
    fs::remove_all(a);
    fs::remove_all(b);
    auto ra = run_experiment(small_config(a), 1);
    auto rb = run_experiment(small_config(b), 3);
    EXPECT_EQ(slurp(ra.results_path), slurp(rb.results_path));
    EXPECT_EQ(slurp(ra.manifest_path), slurp(rb.manifest_path));
}

TEST(RunExperiment, FailuresRecordedAndRunContinues) {
    const auto dir = (fs::temp_directory_path() / "segfair_exp_fail").string();
    fs::remove_all(dir);
    auto cfg = small_config(dir);
    cfg.city_count = 3;
    cfg.q_frac_min = 0.0;
    cfg.q_frac_max = 0.0;  // one group empty: generation fails for every city
    auto result = run_experiment(cfg, 1);
    EXPECT_TRUE(result.records.empty());
    EXPECT_EQ(result.failures.size(), 3u);
    const auto manifest = slurp(result.manifest_path);
    EXPECT_NE(manifest.find("grid-0002,failed"), std::string::npos);
    EXPECT_EQ(load_records(result.results_path).size(), 0u);
}

TEST(RunExperiment, ModeledTemplateSweep) {
    const auto dir = fs::temp_directory_path() / "segfair_exp_modeled";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto info = *find_template("pittsburgh");
    save_graph(build_stand_in_template(info, 5), (dir / "pittsburgh.json").string());
    ExperimentConfig cfg;
    cfg.template_spec = (dir / "pittsburgh.json").string();
    cfg.city_count = 3;
    cfg.steps_per_seed = 50;
    cfg.output_dir = (dir / "out").string();
    auto result = run_experiment(cfg, 1);
    ASSERT_EQ(result.records.size(), 3u);
    for (const auto& r : result.records) {
        EXPECT_EQ(r.template_name, "pittsburgh");
        EXPECT_NEAR(r.q_frac, 84'819.0 / 305'704.0, 1e-12);
        EXPECT_NEAR(r.f_bar, (r.mean_dq / 9) / r.q_frac, 1e-9);
    }
}

TEST(ExportBins, SubsetsMatchCounts) {
    std::vector<CityRecord> recs;
    for (int i = 0; i < 20; ++i) recs.push_back({"c" + std::to_string(i), "grid", 0.3, 0.5, i * 0.07, 0, 1});
    auto bins = bin_by_fairness(recs);
    const auto dir = (fs::temp_directory_path() / "segfair_bins").string();
    fs::remove_all(dir);
    auto paths = export_bins(dir, recs, bins);
    ASSERT_EQ(paths.size(), 6u);
    for (std::size_t b = 0; b < 6; ++b) EXPECT_EQ(load_records(paths[b]).size(), bins.counts[b]);
}
