#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("bilinear_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(BILINEAR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream is(p);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        std::vector<std::string> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(cell);
        if (!line.empty() && line.back() == ',') r.push_back("");
        rows.push_back(r);
    }
    return rows;
}

std::string out(const std::string& name) { return (scratch() / name).string(); }

}  // namespace

TEST(Cli, SimulateConstantStaysConstant) {
    ASSERT_EQ(cli("simulate --K 16 --T 0.5 --u0 1 --out " + out("sim")), 0);
    const auto rows = csv(scratch() / "sim" / "trajectory.csv");
    ASSERT_FALSE(rows.empty());
    for (const auto& r : rows) {
        ASSERT_EQ(r.size(), 4u);
        const double re = std::stod(r[2]), im = std::stod(r[3]);
        EXPECT_NEAR(re, r[1] == "0" ? 1.0 : 0.0, 1e-14);
        EXPECT_EQ(im, 0.0);
    }
    const auto m = nlohmann::json::parse(slurp(scratch() / "sim" / "manifest.json"));
    EXPECT_EQ(m.at("status"), "pass");
    EXPECT_EQ(m.at("subcommand"), "simulate");
}

TEST(Cli, ConjugateLimitErrorsDecrease) {
    ASSERT_EQ(cli("conjugate-limit --K 32 --out " + out("con")), 0);
    const auto rows = csv(scratch() / "con" / "conjugate_limit.csv");
    ASSERT_EQ(rows.size(), 6u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i][4], "ok");
        if (i % 3) EXPECT_LT(std::stod(rows[i][2]), std::stod(rows[i - 1][2]));
    }
}

TEST(Cli, SaturationCheckCertifiesWitnesses) {
    ASSERT_EQ(cli("saturation-check --n-max 5 --out " + out("sat")), 0);
    const auto rows = csv(scratch() / "sat" / "derivation.csv");
    ASSERT_EQ(rows.size(), 16u);  // table up to n = 8, both modes
    for (const auto& r : rows) {
        EXPECT_EQ(r[4], "1") << r[0] << r[1];
        EXPECT_EQ(r[5], "1") << r[0] << r[1];
    }
}

TEST(Cli, DeclaredCheckFailureExitsFour) {
    // an error ratio below 1e-3 over a 4x delta range is out of reach
    ASSERT_EQ(cli("conjugate-limit --K 16 --model KS --deltas 1e-2,5e-3 --check-halving true --out " + out("chk")),
              4);
    const auto m = nlohmann::json::parse(slurp(scratch() / "chk" / "manifest.json"));
    EXPECT_EQ(m.at("status"), "check failed");
    EXPECT_FALSE(m.at("checks").at("KS.halving").at("pass").get<bool>());
}

TEST(Cli, ConfigErrorsExitTwo) {
    EXPECT_EQ(cli("simulate --no-such-flag 1"), 2);
    EXPECT_EQ(cli("simulate --u0 'sin(1.5x)' --out " + out("e1")), 2);
    EXPECT_EQ(cli("simulate --model XY --out " + out("e2")), 2);
    EXPECT_EQ(cli("conjugate-limit --deltas 1e-3,1e-2 --out " + out("e3")), 2);
    EXPECT_EQ(cli("steer --u0 1 --u1 -1 --out " + out("e4")), 2);
    std::ofstream(scratch() / "bad.ini") << "[simulate]\nunknown_key = 3\n";
    EXPECT_EQ(cli("simulate --config " + (scratch() / "bad.ini").string()), 2);
    EXPECT_EQ(cli(""), 2);
}

TEST(Cli, NumericFailureExitsThreeAndKeepsTheLog) {
    ASSERT_EQ(cli("local-exact --K 16 --u0 '1 + 10*cos(x)' --out " + out("nc")), 3);
    EXPECT_FALSE(csv(scratch() / "nc" / "iterations.csv").empty());
    const auto m = nlohmann::json::parse(slurp(scratch() / "nc" / "manifest.json"));
    EXPECT_EQ(m.at("status"), "numeric failure");
}

TEST(Cli, ConfigSectionsAndFlagOverride) {
    std::ofstream(scratch() / "sim.ini") << "[simulate]\nK = 8\nT = 0.25\nu0 = \"1 + 0.1*cos(x)\"\n";
    ASSERT_EQ(cli("simulate --config " + (scratch() / "sim.ini").string() + " --T 0.5 --out " + out("ovr")), 0);
    const auto m = nlohmann::json::parse(slurp(scratch() / "ovr" / "manifest.json"));
    EXPECT_EQ(m.at("options").at("T"), "0.5");
    EXPECT_EQ(m.at("options").at("K"), "8");
    const auto rows = csv(scratch() / "ovr" / "trajectory.csv");
    EXPECT_EQ(std::stod(rows.back()[0]), 0.5);
}

TEST(Cli, IdenticalConfigGivesIdenticalBytes) {
    const std::string args = "steer --K 32 --mode hold --u0 2 --u1 0.5 --eps 5e-2 --T 0.5 --out " + out("det");
    ASSERT_EQ(cli(args), 0);
    std::map<std::string, std::string> first;
    for (const auto& e : fs::directory_iterator(scratch() / "det")) first[e.path().filename()] = slurp(e.path());
    ASSERT_EQ(cli(args), 0);
    for (const auto& [name, bytes] : first) EXPECT_EQ(slurp(scratch() / "det" / name), bytes) << name;
}

TEST(Cli, ManifestReplaysTheRun) {
    ASSERT_EQ(cli("local-exact --K 16 --u0 '1 + 1e-3*sin(2x)' --out " + out("rep1")), 0);
    ASSERT_EQ(cli("local-exact --config " + (scratch() / "rep1" / "scenario.ini").string() + " --out " + out("rep2")),
              0);
    for (const char* f : {"iterations.csv", "schedule.json", "report.json", "terminal.csv"})
        EXPECT_EQ(slurp(scratch() / "rep1" / f), slurp(scratch() / "rep2" / f)) << f;
}

TEST(Cli, SweepOutputDoesNotDependOnThreads) {
    ASSERT_EQ(cli("conjugate-limit --K 16 --threads 1 --out " + out("t1")), 0);
    ASSERT_EQ(cli("conjugate-limit --K 16 --threads 4 --out " + out("t4")), 0);
    EXPECT_EQ(slurp(scratch() / "t1" / "conjugate_limit.csv"), slurp(scratch() / "t4" / "conjugate_limit.csv"));
}

TEST(Cli, MomentControlWritesSignals) {
    ASSERT_EQ(cli("moment-control --K 16 --T 0.5 --v0 'cos(x)' --samples 11 --out " + out("mom")), 0);
    std::ifstream is(scratch() / "mom" / "control_0.csv");
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "t,p4,p5");
    EXPECT_EQ(csv(scratch() / "mom" / "control_0.csv").size(), 11u);
    const auto s = nlohmann::json::parse(slurp(scratch() / "mom" / "summary.json"));
    EXPECT_LT(s.at("runs")[0].at("terminal_residual").get<double>(), 1e-3);
}

TEST(Cli, SynthesizeFromPhaseExpression) {
    ASSERT_EQ(cli("synthesize --K 32 --u0 1 --phase '0.2 + 0.1*cos(x)' --eps 1e-3 --out " + out("syn")), 0);
    const auto s = nlohmann::json::parse(slurp(scratch() / "syn" / "summary.json"));
    EXPECT_LT(s.at("achieved_error").get<double>(), 1e-3);
}

TEST(Cli, SampleConfigsParse) {
    // the quick samples run end to end; the rest are exercised by acceptance
    const fs::path dir = BILINEAR_SAMPLES_DIR;
    ASSERT_EQ(cli("simulate --config " + (dir / "simulate_constant.ini").string() + " --out " + out("s1")), 0);
    ASSERT_EQ(cli("saturation-check --config " + (dir / "saturation.ini").string() + " --out " + out("s2")), 0);
    ASSERT_EQ(cli("steer --config " + (dir / "steer_hold.ini").string() + " --out " + out("s3")), 0);
}
