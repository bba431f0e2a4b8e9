#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(SEGFAIR_CLI) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("segfair_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(cli("").code, 1);
    EXPECT_EQ(cli("bogus-command").code, 1);
    EXPECT_EQ(cli("gen-city").code, 1);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, DataErrorsExitTwo) {
    auto dir = fresh("data");
    EXPECT_EQ(cli("metrics --graph " + (dir / "missing.json").string()).code, 2);
    std::ofstream(dir / "bad.json") << R"({"name":"b","nodes":[{"id":1,"pop":1,"q":0},{"id":2,"pop":1,"q":0}],"edges":[]})";
    EXPECT_EQ(cli("metrics --graph " + (dir / "bad.json").string()).code, 2);
    EXPECT_EQ(cli("gen-city --q-frac 0 --out " + (dir / "g.json").string()).code, 2);
}

TEST(Cli, NonConvergenceExitsThree) {
    // A two-block template cannot be moved to D = 0 within a tiny tolerance.
    auto dir = fresh("nonconv");
    std::ofstream(dir / "t.json") << R"({"name":"t","nodes":[{"id":1,"pop":3,"q":3},{"id":2,"pop":4,"q":0}],"edges":[[1,2]]})";
    EXPECT_EQ(cli("gen-city --template " + (dir / "t.json").string() + " --target-d 0 --tol 0.001 --out " +
                  (dir / "o.json").string())
                  .code,
              3);
}

TEST(Cli, EndToEndPipeline) {
    auto dir = fresh("e2e");
    const auto city = (dir / "city.json").string();
    auto gen = cli("gen-city --template grid --q-frac 0.3 --target-d 0.6 --tol 0.01 --seed 4 --out " + city);
    ASSERT_EQ(gen.code, 0);
    EXPECT_NE(gen.out.find("vertices=900"), std::string::npos);

    auto chain = cli("run-chain --graph " + city + " --seed-plan scratch --steps 20 --epsilon 0.2 --rng 3 --out-dir " +
                     (dir / "chain").string());
    ASSERT_EQ(chain.code, 0);
    EXPECT_NE(chain.out.find("plans=20"), std::string::npos);
    const auto manifest = (dir / "chain" / "manifest.csv").string();

    auto plan_metrics = cli("metrics --graph " + city + " --plan " + (dir / "chain" / "plans" / "plan_00.csv").string());
    ASSERT_EQ(plan_metrics.code, 0);
    EXPECT_NE(plan_metrics.out.find("d_Q="), std::string::npos);
    EXPECT_NE(plan_metrics.out.find("F="), std::string::npos);

    auto ens = cli("metrics --graph " + city + " --ensemble-manifest " + manifest);
    ASSERT_EQ(ens.code, 0);
    EXPECT_NE(ens.out.find("plans=20"), std::string::npos);
    EXPECT_NE(ens.out.find("F_bar="), std::string::npos);

    const auto ref = (dir / "stripes.csv").string();
    ASSERT_EQ(cli("reference --graph " + city + " --kind stripes --out " + ref).code, 0);
    auto val = cli("validate --graph " + city + " --reference " + ref + " --ensemble-manifest " + manifest + " --exact");
    ASSERT_EQ(val.code, 0);
    EXPECT_NE(val.out.find("upper_bound=10"), std::string::npos);
    EXPECT_NE(val.out.find("mode=exact"), std::string::npos);

    std::ofstream(dir / "exp.cfg") << "cities = 3\nsteps_per_seed = 20\nq_frac_min = 0.2\nq_frac_max = 0.4\n"
                                      "master_seed = 5\noutput_dir = " << (dir / "exp").string() << "\n";
    auto exp = cli("experiment --config " + (dir / "exp.cfg").string());
    ASSERT_EQ(exp.code, 0);
    EXPECT_NE(exp.out.find("records=3"), std::string::npos);

    auto sum = cli("summarize --in " + (dir / "exp" / "results.csv").string() + " --bins-dir " + (dir / "bins").string());
    ASSERT_EQ(sum.code, 0);
    EXPECT_NE(sum.out.find("slope="), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "bins" / "bin_5.csv"));
}

TEST(Cli, MakeTemplates) {
    auto dir = fresh("tmpl");
    auto r = cli("make-templates --out-dir " + dir.string());
    ASSERT_EQ(r.code, 0);
    for (const char* name : {"albuquerque", "charlotte", "pittsburgh", "minneapolis"}) {
        EXPECT_TRUE(fs::exists(dir / (std::string(name) + ".json")));
    }
    EXPECT_NE(r.out.find("P=545711 Q=254834"), std::string::npos);
    EXPECT_EQ(cli("make-templates --name gotham --out-dir " + dir.string()).code, 2);
}

TEST(Cli, RepeatedRunsByteIdentical) {
    auto a = fresh("det_a"), b = fresh("det_b");
    for (const auto& d : {a, b}) {
        ASSERT_EQ(cli("gen-city --q-frac 0.35 --target-d 0.4 --seed 8 --out " + (d / "c.json").string()).code, 0);
        ASSERT_EQ(cli("run-chain --graph " + (d / "c.json").string() + " --steps 15 --rng 2 --out-dir " +
                      (d / "chain").string())
                      .code,
                  0);
    }
    EXPECT_EQ(slurp(a / "c.json"), slurp(b / "c.json"));
    EXPECT_EQ(slurp(a / "chain" / "manifest.csv"), slurp(b / "chain" / "manifest.csv"));
    EXPECT_EQ(slurp(a / "chain" / "plans" / "plan_14.csv"), slurp(b / "chain" / "plans" / "plan_14.csv"));
}
