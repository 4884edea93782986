#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "jdsim/commands.hpp"

using namespace jdsim;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("jdsim_commands_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

/// Data rows (no header, no trailer) with the column at `drop` removed.
std::vector<std::string> data_rows(const std::string& csv, int drop) {
    std::vector<std::string> out;
    const auto all = lines(csv);
    for (std::size_t i = 1; i < all.size() && !all[i].starts_with("#"); ++i) {
        std::vector<std::string> cols;
        std::stringstream ss(all[i]);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (drop >= 0) cols.erase(cols.begin() + drop);
        std::string joined;
        for (const auto& c : cols) joined += c + ",";
        out.push_back(joined);
    }
    return out;
}

std::string trailer_config(const std::string& csv) {
    std::string text;
    for (const auto& l : lines(csv))
        if (l.starts_with("# ")) text += l.substr(2) + "\n";
    return text;
}

RunConfig small_convergence(const fs::path& dir) {
    RunConfig c;
    c.command = "convergence";
    c.model = "cubic-additive";
    c.schemes = {"tamed", "sine"};
    c.exponents = {3, 4, 5};
    c.reference_exponent = 7;
    c.paths = 100;
    c.seed = 11;
    c.output_dir = dir.string();
    return c;
}

}  // namespace

TEST(Commands, ConvergenceWritesFilesWithExactHeaders) {
    const auto dir = fresh_dir("conv");
    std::ostringstream out, err;
    ASSERT_EQ(run_command(small_convergence(dir), out, err), kExitOk);
    for (const char* f : {"errors_tamed_cubic-additive.csv", "errors_sine_cubic-additive.csv", "summary.json",
                          "plot_convergence.py"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto csv = lines(slurp(dir / "errors_tamed_cubic-additive.csv"));
    ASSERT_GE(csv.size(), 4u);
    EXPECT_EQ(csv[0], "h,rms_error,stderr,wall_seconds,overflow_count");
    EXPECT_EQ(csv[1].substr(0, csv[1].find(',')), "0.125");
    const auto summary = detail::json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(summary["command"], "convergence");
    EXPECT_TRUE(summary["results"]["tamed"]["fit"].contains("slope"));
    EXPECT_NE(out.str().find("tamed on cubic-additive: slope"), std::string::npos);
}

TEST(Commands, ProvenanceTrailerReproducesRun) {
    const auto dir = fresh_dir("prov_a");
    std::ostringstream out, err;
    ASSERT_EQ(run_command(small_convergence(dir), out, err), kExitOk);
    const std::string first = slurp(dir / "errors_sine_cubic-additive.csv");

    RunConfig again;
    std::istringstream cfg(trailer_config(first));
    apply_config_text(again, cfg);
    const auto dir2 = fresh_dir("prov_b");
    again.output_dir = dir2.string();
    ASSERT_EQ(run_command(again, out, err), kExitOk);
    const std::string second = slurp(dir2 / "errors_sine_cubic-additive.csv");
    const auto a = data_rows(first, 3), b = data_rows(second, 3);  // wall time differs
    ASSERT_EQ(a.size(), 3u);
    EXPECT_EQ(a, b);
}

TEST(Commands, MomentsCsvHeaderAndRows) {
    const auto dir = fresh_dir("moments");
    RunConfig c;
    c.command = "moments";
    c.model = "zero";
    c.model_params = {{"x0", 3.0}};
    c.exponents = {2};
    c.paths = 10;
    c.output_dir = dir.string();
    std::ostringstream out, err;
    ASSERT_EQ(run_command(c, out, err), kExitOk);
    const auto csv = lines(slurp(dir / "moments_tamed_zero_2.csv"));
    EXPECT_EQ(csv[0], "t,p,moment_estimate,overflow_count");
    EXPECT_EQ(csv[1], "0,2,9,0");
    EXPECT_EQ(csv[5], "1,2,9,0");
    EXPECT_TRUE(fs::exists(dir / "moments_summary.json"));
}

TEST(Commands, LocalOrderJson) {
    const auto dir = fresh_dir("local");
    RunConfig c;
    c.command = "local-order";
    c.model = "cubic-additive";
    c.exponents = {3, 4, 5};
    c.paths = 200;
    c.substeps = 8;
    c.output_dir = dir.string();
    std::ostringstream out, err;
    ASSERT_EQ(run_command(c, out, err), kExitOk);
    const auto j = detail::json::parse(slurp(dir / "local_order_tamed_cubic-additive.json"));
    EXPECT_EQ(j["scheme"], "tamed");
    EXPECT_EQ(j["result"]["rows"].size(), 3u);
    EXPECT_TRUE(j["result"].contains("p2_hat"));
}

TEST(Commands, CheckAssumptionsExitCodes) {
    const auto dir = fresh_dir("assume");
    RunConfig c;
    c.command = "check-assumptions";
    c.model = "merton-linear";
    c.points_per_dim = 21;
    c.random_points = 200;
    c.random_pairs = 200;
    c.output_dir = dir.string();
    std::ostringstream out, err;
    EXPECT_EQ(run_command(c, out, err), kExitOk);
    EXPECT_TRUE(fs::exists(dir / "assumptions_merton-linear.json"));
    EXPECT_TRUE(fs::exists(dir / "assumptions_merton-linear.txt"));
    c.constants["monotone"] = 0.01;  // true constant is 0.39
    EXPECT_EQ(run_command(c, out, err), kExitViolation);
    const auto j = detail::json::parse(slurp(dir / "assumptions_merton-linear.json"));
    EXPECT_EQ(j["violations"], true);
}

TEST(Commands, ListModelsIsStable) {
    std::ostringstream a, b, err;
    RunConfig c;
    c.command = "list-models";
    ASSERT_EQ(run_command(c, a, err), kExitOk);
    ASSERT_EQ(run_command(c, b, err), kExitOk);
    EXPECT_EQ(a.str(), b.str());
    for (const char* id : {"three-half-jump", "cubic-additive", "merton-linear"})
        EXPECT_NE(a.str().find(id), std::string::npos) << id;
}

TEST(Commands, BenchWritesRows) {
    const auto dir = fresh_dir("bench");
    RunConfig c;
    c.command = "bench";
    c.exponents = {3, 4};
    c.paths = 20;
    c.output_dir = dir.string();
    std::ostringstream out, err;
    ASSERT_EQ(run_command(c, out, err), kExitOk);
    const auto csv = lines(slurp(dir / "bench_three-half-jump.csv"));
    EXPECT_EQ(csv[0], "h,scheme,wall_seconds");
    EXPECT_TRUE(csv[1].starts_with("0.125,tamed,"));
    EXPECT_TRUE(csv[2].starts_with("0.125,sine,"));
}

TEST(Commands, InvalidConfigThrowsBeforeRunning) {
    RunConfig c;
    c.schemes = {"unknown"};
    std::ostringstream out, err;
    EXPECT_THROW(run_command(c, out, err), ConfigError);
}
