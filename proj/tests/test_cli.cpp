#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "bittide/cli.hpp"

using namespace bittide;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = BITTIDE_SCENARIO_DIR;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "bittide");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string out_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("bittide_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    return dir.string();
}

std::string scenario(const std::string& name) { return kScenarios + "/" + name + ".json"; }

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST(Cli, UsageErrorsAreValidationFailures)
{
    EXPECT_EQ(invoke({}).code, cli::kValidation);
    EXPECT_EQ(invoke({"simulate"}).code, cli::kValidation);
    EXPECT_EQ(invoke({"simulate", "--scenario", scenario("triangle_latency"), "--model", "spice"}).code, cli::kValidation);
    EXPECT_EQ(invoke({"analyze", "--scenario", scenario("mesh_close"), "--out", out_dir("noflag")}).code,
              cli::kValidation);
    EXPECT_EQ(invoke({"--help"}).code, cli::kOk);
}

TEST(Cli, InvalidScenarioNamesField)
{
    const auto r = invoke({"simulate", "--scenario", scenario("triangle_latency"), "--set", "afm.theta0=3", "--out",
                           out_dir("bad")});
    EXPECT_EQ(r.code, cli::kValidation);
    EXPECT_NE(r.err.find("afm.theta0[0]"), std::string::npos) << r.err;
}

TEST(Cli, MissingFileIsIoError)
{
    EXPECT_EQ(invoke({"simulate", "--scenario", scenario("nope"), "--out", out_dir("io")}).code, cli::kIo);
}

TEST(Cli, MissingHorizonForSimulation)
{
    const auto r = invoke({"simulate", "--model", "ode", "--scenario", scenario("mesh_close"), "--out", out_dir("h")});
    EXPECT_EQ(r.code, cli::kValidation);
    EXPECT_NE(r.err.find("run.t_end"), std::string::npos);
}

TEST(Cli, SimulateOdeConvergesToAverage)
{
    const auto dir = out_dir("ode");
    const auto r = invoke({"simulate", "--model", "ode", "--scenario", scenario("triangle_latency"), "--out", dir});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    EXPECT_NE(r.err.find("ignores afm.latency"), std::string::npos);
    const auto t = read_trace(dir + "/trace.csv");
    ASSERT_EQ(t.header.size(), 1u + 3u + 3u);
    const auto& last = t.rows.back();
    EXPECT_EQ(last[0], 300000.0);
    for (int i = 1; i <= 3; ++i)
        EXPECT_NEAR(last[static_cast<std::size_t>(i)], 1.0, 1e-5);
    EXPECT_TRUE(fs::exists(dir + "/summary.txt"));
    EXPECT_TRUE(fs::exists(dir + "/summary.json"));
}

TEST(Cli, SimulateAfmWritesTraceAndEvents)
{
    const auto dir = out_dir("afm");
    const auto r = invoke({"simulate", "--model", "afm", "--scenario", scenario("triangle_latency"), "--set", "run.t_end=50000",
                           "--out", dir});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    const auto t = read_trace(dir + "/trace.csv");
    EXPECT_EQ(t.header.size(), 1u + 3u + 6u);
    EXPECT_EQ(slurp(dir + "/events.csv").rfind("time,node,kind,value\n", 0), 0u);
    const auto summary = read_json_file(dir + "/summary.json");
    EXPECT_TRUE(summary["values"].contains("final_beta_link0"));
}

TEST(Cli, SimulateSymmetricIsConstant)
{
    const auto dir = out_dir("sym");
    ASSERT_EQ(invoke({"simulate", "--scenario", scenario("symmetric"), "--out", dir}).code, cli::kOk);
    const auto t = read_trace(dir + "/trace.csv");
    for (const auto& row : t.rows) {
        for (std::size_t c = 1; c <= 3; ++c)
            EXPECT_EQ(row[c], 1.0);
        for (std::size_t c = 4; c < row.size(); ++c)
            EXPECT_EQ(row[c], 64.0);
    }
}

TEST(Cli, OverflowExitsWithRuntimeCodeAndNamesEvent)
{
    const auto r = invoke({"simulate", "--scenario", scenario("triangle_latency"), "--set", "controller.k_p=1e-9", "--set",
                           "controller.k_i=1e-15", "--set", "afm.beta_max=8", "--set", "run.t_end=40000", "--out",
                           out_dir("overflow")});
    EXPECT_EQ(r.code, cli::kRuntime);
    EXPECT_TRUE(r.err.find("overflow") != std::string::npos || r.err.find("underflow") != std::string::npos) << r.err;
}

TEST(Cli, InadmissibleExitsWithRuntimeCode)
{
    const auto r = invoke({"simulate", "--scenario", scenario("triangle_latency"), "--set", "controller.k_p=5", "--set",
                           "run.t_end=40000", "--out", out_dir("inadmissible")});
    EXPECT_EQ(r.code, cli::kRuntime);
    EXPECT_NE(r.err.find("inadmissible"), std::string::npos);
}

TEST(Cli, CompareReferenceAndZeroLatency)
{
    const auto dir = out_dir("cmp");
    const auto r = invoke({"compare", "--scenario", scenario("triangle_latency"), "--out", dir});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    const auto rep = read_json_file(dir + "/comparison.json");
    const auto& c = rep["comparison"]["afm_vs_ode"];
    EXPECT_GT(c["max_occ_dev"].get<double>(), 0.0);
    EXPECT_GT(c["max_freq_dev"].get<double>(), 0.0);
    for (const char* f : {"afm_trace.csv", "afm_events.csv", "ode_trace.csv", "comparison.txt"})
        EXPECT_TRUE(fs::exists(dir + "/" + f)) << f;

    const auto dz = out_dir("cmp0");
    ASSERT_EQ(invoke({"compare", "--scenario", scenario("triangle_zero_latency"), "--out", dz}).code, cli::kOk);
    const auto z = read_json_file(dz + "/comparison.json")["comparison"]["afm_vs_ode"];
    EXPECT_LE(z["max_occ_dev"].get<double>(), 2.0);
    EXPECT_TRUE(z["pass"].get<bool>());

    const auto ds = out_dir("cmps");
    ASSERT_EQ(invoke({"compare", "--scenario", scenario("symmetric"), "--out", ds}).code, cli::kOk);
    const auto s = read_json_file(ds + "/comparison.json")["comparison"]["afm_vs_ode"];
    EXPECT_EQ(s["max_occ_dev"].get<double>(), 0.0);
    EXPECT_EQ(s["max_freq_dev"].get<double>(), 0.0);
}

TEST(Cli, AnalyzeResistanceTable)
{
    const auto dir = out_dir("res");
    ASSERT_EQ(invoke({"analyze", "--resistance", "--scenario", scenario("mesh_close"), "--out", dir}).code, cli::kOk);
    const auto t = read_trace(dir + "/resistance.csv");
    ASSERT_EQ(t.rows.size(), 24u);
    ASSERT_EQ(t.header.size(), 25u);
    bool close = false;
    bool far = false;
    for (const auto& row : t.rows)
        for (std::size_t c = 1; c < row.size(); ++c) {
            close |= std::abs(row[c] - 0.700) <= 0.007;
            far |= std::abs(row[c] - 2.262) <= 0.02262;
        }
    EXPECT_TRUE(close);
    EXPECT_TRUE(far);
}

TEST(Cli, AnalyzePerformanceWithSimulation)
{
    const auto dir = out_dir("perf");
    const auto r = invoke({"analyze", "--performance", "--simulate", "--scenario", scenario("ring_unit_gains"),
                           "--out", dir});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    const auto doc = read_json_file(dir + "/report.json");
    EXPECT_LT(std::abs(doc["empirical"]["scenario"]["freq_gap_percent"].get<double>()), 1.0);
    EXPECT_LT(std::abs(doc["empirical"]["scenario"]["occupancy_gap_percent"].get<double>()), 1.0);
    EXPECT_NE(r.out.find("% vs predicted"), std::string::npos);
}

TEST(Cli, AnalyzeClosePairPerformance)
{
    const auto dir = out_dir("close");
    const auto r = invoke({"analyze", "--performance", "--scenario", scenario("mesh_close"), "--out", dir});
    ASSERT_EQ(r.code, cli::kOk);
    EXPECT_NE(r.out.find("predicted |omega - omega_ss|^2 = 0.175"), std::string::npos) << r.out;
    const auto doc = read_json_file(dir + "/report.json");
    EXPECT_NEAR(doc["performance"]["scenario"]["freq_dev_norm_sq"].get<double>(), 0.175, 0.00175);
}

TEST(Cli, AnalyzeLyapunovAndWorstCase)
{
    const auto dir = out_dir("lyap");
    ASSERT_EQ(invoke({"analyze", "--lyapunov", "--worst-case", "--gamma", "2", "--scenario", scenario("triangle_latency"),
                      "--out", dir})
                  .code,
              cli::kOk);
    const auto doc = read_json_file(dir + "/report.json");
    const auto& c = doc["lyapunov"]["reduced"];
    EXPECT_LE(c["relative1"].get<double>(), 1e-9);
    EXPECT_LE(c["relative2"].get<double>(), 1e-9);
    EXPECT_LE(c["relative_sum"].get<double>(), 1e-9);
    EXPECT_EQ(doc["values"]["hurwitz"].get<double>(), 1.0);
    // K3 has a repeated second eigenvalue
    EXPECT_EQ(doc["values"]["worst_case_degenerate"].get<double>(), 1.0);
    EXPECT_NEAR(doc["values"]["worst_case_attained"].get<double>(), 4.0 / 3.0, 1e-12);
    EXPECT_EQ(read_trace(dir + "/worst_case.csv").rows.size(), 3u);
}

TEST(Cli, SweepProportionalGainHalvesFrequencyNorm)
{
    const auto dir = out_dir("sweep_a");
    const auto r = invoke({"sweep", "--scenario", scenario("mesh_close"), "--param", "controller.k_p", "--values",
                           "1e-8,2e-8,4e-8", "--out", dir});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    const auto runs = read_json_file(dir + "/sweep.json")["runs"];
    ASSERT_EQ(runs.size(), 3u);
    for (std::size_t k = 1; k < 3; ++k) {
        const double prev = runs[k - 1]["freq_dev_norm_sq"].get<double>();
        EXPECT_NEAR(runs[k]["freq_dev_norm_sq"].get<double>(), prev / 2, 1e-12 * prev);
    }
}

TEST(Cli, SweepIntegralGainLeavesFrequencyNorm)
{
    const auto dir = out_dir("sweep_b");
    ASSERT_EQ(invoke({"sweep", "--scenario", scenario("mesh_close"), "--param", "controller.k_i", "--values",
                      "1e-15,2e-15,5e-15", "--out", dir})
                  .code,
              cli::kOk);
    const auto runs = read_json_file(dir + "/sweep.json")["runs"];
    const double f0 = runs[0]["freq_dev_norm_sq"].get<double>();
    const double o0 = runs[0]["occupancy_norm_sq"].get<double>();
    const double b[] = {1e-15, 2e-15, 5e-15};
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(runs[k]["freq_dev_norm_sq"].get<double>(), f0);
        EXPECT_NEAR(runs[k]["occupancy_norm_sq"].get<double>() * b[k], o0 * b[0], 1e-12 * o0 * b[0]);
    }
}

TEST(Cli, ParallelSweepMatchesSerial)
{
    const std::vector<std::string> common{"sweep", "--scenario", scenario("ring_unit_gains"), "--param",
                                          "controller.k_p", "--values", "0.02,0.05,0.1,0.2,0.4", "--simulate"};
    const auto ds = out_dir("serial");
    const auto dp = out_dir("parallel");
    auto serial = common;
    serial.insert(serial.end(), {"--jobs", "1", "--out", ds});
    auto parallel = common;
    parallel.insert(parallel.end(), {"--jobs", "4", "--out", dp});
    const auto a = invoke(serial);
    const auto b = invoke(parallel);
    ASSERT_EQ(a.code, cli::kOk) << a.err;
    ASSERT_EQ(b.code, cli::kOk) << b.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(slurp(ds + "/sweep.csv"), slurp(dp + "/sweep.csv"));
    EXPECT_EQ(slurp(ds + "/sweep.json"), slurp(dp + "/sweep.json"));
}

TEST(Cli, SweepReportsPartialFailures)
{
    const auto dir = out_dir("sweep_fail");
    const auto r = invoke({"sweep", "--scenario", scenario("mesh_close"), "--param", "controller.k_p", "--values",
                           "1e-8,-1,2e-8", "--out", dir});
    EXPECT_EQ(r.code, cli::kRuntime);
    const auto runs = read_json_file(dir + "/sweep.json")["runs"];
    EXPECT_TRUE(runs[0]["ok"].get<bool>());
    EXPECT_FALSE(runs[1]["ok"].get<bool>());
    EXPECT_TRUE(runs[2]["ok"].get<bool>());
    EXPECT_NE(slurp(dir + "/sweep.csv").find("error: controller.k_p"), std::string::npos);
}

TEST(Cli, IdenticalInvocationsProduceIdenticalFiles)
{
    const auto d1 = out_dir("det1");
    const auto d2 = out_dir("det2");
    for (const auto& d : {d1, d2})
        ASSERT_EQ(invoke({"simulate", "--scenario", scenario("triangle_latency"), "--set", "run.t_end=30000", "--out", d}).code,
                  cli::kOk);
    for (const char* f : {"trace.csv", "events.csv", "summary.txt", "summary.json"})
        EXPECT_EQ(slurp(d1 + "/" + f), slurp(d2 + "/" + f)) << f;
}
