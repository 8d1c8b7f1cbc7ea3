// SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "manifest.hpp"
#include "table.hpp"

namespace fs = std::filesystem;
using namespace tworay::cli;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(TWORAY_EXE) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tworay_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<CsvRow> table(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in);
}

}  // namespace

TEST(FormatDouble, RoundTrips) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int i = 0; i < 2000; ++i) {
        const double v = std::ldexp(u(rng), static_cast<int>(u(rng)));
        EXPECT_EQ(parse_double(format_double(v)), v);
    }
    for (double v : {0.0, -0.0, 1.0, 0.1, 1e-300, 5e-324, std::numeric_limits<double>::max()})
        EXPECT_EQ(parse_double(format_double(v)), v);
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
    EXPECT_THROW(parse_double(""), std::invalid_argument);
}

TEST(Csv, QuotingRoundTrip) {
    const std::vector<CsvRow> rows = {{"a", "b,c", "say \"hi\""}, {"", "line\nbreak", "x"}, {"1"}};
    std::ostringstream out;
    for (const auto& r : rows) write_csv_row(out, r);
    EXPECT_EQ(table(out.str()), rows);
    EXPECT_EQ(table("x,y\r\n1,2"), (std::vector<CsvRow>{{"x", "y"}, {"1", "2"}}));
    EXPECT_THROW(table("\"open"), std::invalid_argument);
}

TEST(FitRecords, RoundTrip) {
    FitRecord a;
    a.scenario = "indoor";
    a.config = "AB";
    a.pair_kind = "shared_rx";
    a.first = "r0c0a0p0";
    a.second = "r1c2a1p-1";
    a.model = "gtrv";
    a.status = "ok";
    a.k_db = 19.8;
    a.k_linear = std::pow(10.0, 1.98);
    a.delta = 0.45;
    a.kappa = 12.04;
    a.phi = -0.1;
    a.mse_vm = 0.0029;
    a.omega = 3.2e-7;
    a.mse = 1.0 / 3.0;
    a.rmse = std::sqrt(1.0 / 3.0);
    a.mae = 0.25;
    a.ks = 0.9;
    a.epsilon_n = 0.7;
    a.generations = 400;
    a.message = "phase, \"odd\"";
    FitRecord b;
    b.scenario = "anechoic";
    b.config = "C";
    b.model = "iftr";
    b.status = "failed";
    b.message = "nsga2: empty bound";
    const std::vector<FitRecord> recs{a, b};
    std::ostringstream out;
    write_fit_records(out, recs);
    std::istringstream in(out.str());
    EXPECT_EQ(read_fit_records(in), recs);

    std::istringstream bad("scenario,config\nx,y\n");
    EXPECT_THROW(read_fit_records(bad), std::invalid_argument);
}

TEST(Summaries, MedianAndCdf) {
    EXPECT_TRUE(std::isnan(median({})));
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    const auto cdf = empirical_cdf({2.0, std::nan(""), 1.0, 3.0, 4.0});
    ASSERT_EQ(cdf.size(), 4u);
    EXPECT_EQ(cdf.front(), (std::pair<double, double>{1.0, 0.25}));
    EXPECT_EQ(cdf.back(), (std::pair<double, double>{4.0, 1.0}));
}

TEST(Manifest, Sha256) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("synth --scenario nowhere -o " + scratch("bad").string()).code, 1);
    EXPECT_EQ(run("eval nosuchmodel").code, 1);
    EXPECT_EQ(run("eval iftr --delta 1.5").code, 1);
    EXPECT_EQ(run("eval iftr --min 2 --max 1").code, 1);
    EXPECT_EQ(run("report -i /nonexistent/results.csv").code, 1);
    EXPECT_EQ(run("--version").code, 0);
}

TEST(Cli, SynthIsDeterministic) {
    const auto a = scratch("synth_a"), b = scratch("synth_b"), c = scratch("synth_c");
    ASSERT_EQ(run("synth --scenario anechoic --seed 11 -o " + a.string()).code, 0);
    ASSERT_EQ(run("synth --scenario anechoic --seed 11 -o " + b.string()).code, 0);
    ASSERT_EQ(run("synth --scenario anechoic --seed 12 -o " + c.string()).code, 0);
    const auto bytes = slurp(a / "anechoic.twch");
    EXPECT_FALSE(bytes.empty());
    EXPECT_EQ(bytes, slurp(b / "anechoic.twch"));
    EXPECT_NE(bytes, slurp(c / "anechoic.twch"));

    const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
    EXPECT_EQ(m["command"], "synth");
    EXPECT_EQ(m["exit_code"], 0);
    EXPECT_EQ(m["channels"], 1089);
    EXPECT_EQ(m["config_digest"], nlohmann::json::parse(slurp(b / "manifest.json"))["config_digest"]);
    ASSERT_EQ(m["outputs"].size(), 1u);
    EXPECT_EQ(m["outputs"][0]["sha256"], sha256_file(a / "anechoic.twch"));
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(c);
}

TEST(Cli, EvalIftr) {
    // K = 0 dB, Delta = 0, m = 1: exponential specular power, so the envelope is Rayleigh
    const auto r = run("eval iftr --k-db 0 --delta 0 --m1 1 --m2 1 --min 0 --max 2 --points 3");
    ASSERT_EQ(r.code, 0);
    const auto t = table(r.out);
    ASSERT_EQ(t.size(), 4u);
    EXPECT_EQ(t[0], (CsvRow{"r", "quadrature", "closed_form"}));
    EXPECT_NEAR(parse_double(t[2][1]), 2.0 * std::exp(-1.0), 1e-7);
    EXPECT_NEAR(parse_double(t[2][2]), 2.0 * std::exp(-1.0), 1e-7);

    const auto q = table(run("eval iftr --k 8 --delta 0.4 --m1 2 --m2 3 --omega 1.3").out);
    ASSERT_EQ(q.size(), 62u);
    for (std::size_t i = 1; i < q.size(); ++i)
        EXPECT_NEAR(parse_double(q[i][1]), parse_double(q[i][2]), 1e-5) << q[i][0];

    const auto frac = table(run("eval iftr --k 8 --delta 0.4 --m1 2.5 --m2 3").out);
    EXPECT_EQ(frac[0], (CsvRow{"r", "quadrature"}));
}

TEST(Cli, EvalOtherModels) {
    const auto vm = table(run("eval vonmises --kappa 0 --points 5").out);
    ASSERT_EQ(vm.size(), 6u);
    EXPECT_EQ(vm[0], (CsvRow{"alpha", "density"}));
    for (std::size_t i = 1; i < vm.size(); ++i) EXPECT_NEAR(parse_double(vm[i][1]), 0.159155, 1e-6);

    const auto rice = table(run("eval rician --k-db 10 --points 11").out);
    const auto twdp = table(run("eval gtrv --k-db 10 --delta 0 --kappa 3 --points 11").out);
    ASSERT_EQ(rice.size(), 12u);
    ASSERT_EQ(twdp.size(), 12u);
    for (std::size_t i = 1; i < rice.size(); ++i)
        EXPECT_NEAR(parse_double(rice[i][1]), parse_double(twdp[i][1]), 1e-7);

    const auto dir = scratch("eval");
    ASSERT_EQ(run("eval rician --k 2 -o " + dir.string()).code, 0);
    EXPECT_TRUE(fs::exists(dir / "eval_rician.csv"));
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    fs::remove_all(dir);
}

TEST(Cli, MergeFitAndReport) {
    const auto a = scratch("mf_a"), b = scratch("mf_b");
    const std::string common = "merge-fit --scenario anechoic --configs 3 --population 12 --generations 4 --seed 5 ";
    ASSERT_EQ(run(common + "-o " + a.string()).code, 0);
    ASSERT_EQ(run(common + "-j 2 -o " + b.string()).code, 0);
    EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));

    std::ifstream in(a / "results.csv");
    const auto recs = read_fit_records(in);
    ASSERT_EQ(recs.size(), 3u);
    for (const auto& r : recs) {
        EXPECT_EQ(r.status, "ok");
        EXPECT_EQ(r.model, "iftr");
        ASSERT_TRUE(r.k_linear && r.k_db && r.m1 && r.m2);
        EXPECT_NEAR(*r.k_db, 10.0 * std::log10(*r.k_linear), 1e-12);
        EXPECT_FALSE(r.kappa.has_value());
        for (const char* f : {"pdf.csv", "phase.csv", "cir.csv"})
            EXPECT_TRUE(fs::exists(a / "configs" / "anechoic" / r.config / f)) << f;
    }
    EXPECT_TRUE(fs::exists(a / "summary" / "parameter_cdf.csv"));
    EXPECT_TRUE(fs::exists(a / "summary" / "rmse_cdf.csv"));

    const auto rep = scratch("report");
    ASSERT_EQ(run("report -i " + a.string() + " -o " + rep.string()).code, 0);
    std::ifstream rin(rep / "report.csv");
    const auto rows = read_csv(rin);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], "anechoic");
    EXPECT_EQ(rows[1][2], "3");
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(rep);
}

TEST(Cli, MergeFitGtrvColumns) {
    const auto dir = scratch("mf_gtrv");
    ASSERT_EQ(run("merge-fit --scenario indoor --only A --model gtrv --population 8 --generations 2 -o " +
                  dir.string()).code, 0);
    std::ifstream in(dir / "results.csv");
    const auto recs = read_fit_records(in);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].config, "A");
    EXPECT_TRUE(recs[0].kappa && recs[0].phi && recs[0].mse_vm);
    EXPECT_FALSE(recs[0].m1.has_value());
    fs::remove_all(dir);
}

TEST(Cli, PartialFailureExitCode) {
    const auto dir = scratch("mf_fail");
    EXPECT_EQ(run("merge-fit --scenario anechoic --configs 2 --population 8 --generations 2 "
                  "--k-min-db 20 --k-max-db 10 -o " + dir.string()).code, 3);
    std::ifstream in(dir / "results.csv");
    const auto recs = read_fit_records(in);
    ASSERT_EQ(recs.size(), 2u);
    for (const auto& r : recs) {
        EXPECT_EQ(r.status, "failed");
        EXPECT_FALSE(r.message.empty());
    }
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "manifest.json"))["exit_code"], 3);
    EXPECT_EQ(run("merge-fit --scenario anechoic --only ZZZ -o " + dir.string()).code, 1);
    fs::remove_all(dir);
}
