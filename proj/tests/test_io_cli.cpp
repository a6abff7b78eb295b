#include "labelshift/cli.hpp"
#include "labelshift/error.hpp"
#include "labelshift/estimand.hpp"
#include "labelshift/estimators.hpp"
#include "labelshift/io.hpp"
#include "labelshift/simulation.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <random>
#include <sstream>

using namespace labelshift;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("labelshift_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "labelshift");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string write_replicate(const fs::path& dir, std::uint64_t seed, Eigen::Index N = 200) {
    SimConfig c;
    c.N = N;
    const Replicate r = generate_replicate(c, seed);
    PooledDataset d = r.data;
    d.set_predictions(d.x() * c.alpha / (0.5 + c.alpha.squaredNorm()));
    const std::string path = (dir / "data.csv").string();
    write_file_atomic(path, dataset_to_csv(d));
    return path;
}

}  // namespace

TEST(LoadDataset, MinimalFile) {
    std::vector<std::string> warnings;
    const PooledDataset d = parse_dataset("r,y,x1\n1,0.5,1.0\n0,,2.0\n1,1.5,3.0\n0,,4.0\n", &warnings);
    EXPECT_EQ(d.n(), 2);
    EXPECT_EQ(d.N(), 4);
    EXPECT_EQ(d.dim(), 1);
    EXPECT_DOUBLE_EQ(d.pi(), 0.5);
    EXPECT_EQ(d.labeled(), (std::vector<Eigen::Index>{0, 2}));
    EXPECT_DOUBLE_EQ(d.x()(3, 0), 4.0);
    EXPECT_TRUE(warnings.empty());
    EXPECT_FALSE(d.has_predictions());
}

TEST(LoadDataset, UnlabeledYIgnoredWithWarning) {
    std::vector<std::string> warnings;
    const PooledDataset d = parse_dataset("r,y,x1,x2,y_pred\n1,0.5,1,2,0.4\n0,9.0,2,3,0.1\n", &warnings);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_EQ(warnings[0], "y values on unlabeled rows were ignored");
    EXPECT_TRUE(std::isnan(d.y()[1]));
    ASSERT_TRUE(d.has_predictions());
    EXPECT_DOUBLE_EQ(d.predictions()[1], 0.1);
}

TEST(LoadDataset, ValidationMessages) {
    auto message = [](const std::string& text) {
        try {
            parse_dataset(text);
        } catch (const UsageError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_EQ(message("r,y,x1\n1,0.5,1\n0,,2\n2,1,3\n"), "r must be 0 or 1, row 3");
    EXPECT_EQ(message("r,y,x1\n1,0.5,1\n1,,2\n0,,3\n"), "missing y on labeled row 2");
    EXPECT_NE(message("r,y,x1\n1,0.5,1\n0,,abc\n").find("line 3, column 'x1'"), std::string::npos);
    EXPECT_NE(message("r,y\n1,0.5\n").find("r,y,x1..xd"), std::string::npos);
    EXPECT_NE(message("r,y,x1\n1,0.5,1,7\n").find("cells"), std::string::npos);
    EXPECT_THROW(parse_dataset("r,y,x1\n1,0.5,1\n1,0.7,2\n"), UsageError);
    EXPECT_THROW(parse_dataset("r,y,x1\n0,,1\n0,,2\n"), UsageError);
}

TEST(FormatReal, RoundTrips) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int k = 0; k < 1000; ++k) {
        const double v = u(rng) / (k + 1);
        EXPECT_EQ(std::stod(format_real(v)), v);
    }
    EXPECT_EQ(format_real(std::nan("")), "nan");
}

TEST(LoadDataset, SimulatorRoundTripIsBitIdentical) {
    const SimConfig c;
    const Replicate r = generate_replicate(c, replicate_seed(c.seed, 0));
    const PooledDataset back = parse_dataset(dataset_to_csv(r.data));
    ASSERT_EQ(back.r(), r.data.r());
    EXPECT_EQ(back.x(), r.data.x());
    const EstimatorSettings& st = c.settings;
    auto estimate = [&](const PooledDataset& d) {
        const auto nw = testutil::nw_fit(d, st.bw.nw(d.n()));
        return efficient_theta(d, mean_estimand(), nw.table, working_rho_star(c, d), st).theta_hat[0];
    };
    EXPECT_EQ(estimate(back), estimate(r.data));
}

TEST(RunConfig, RejectsUnknownKeys) {
    EXPECT_THROW(parse_run_config(nlohmann::json::parse(R"({"bogus": 1})")), UsageError);
    EXPECT_THROW(parse_run_config(nlohmann::json::parse(R"({"simulation": {"N": 500, "nn": 1}})")), UsageError);
    EXPECT_THROW(parse_run_config(nlohmann::json::parse(R"({"schema_version": 2})")), UsageError);
    EXPECT_THROW(parse_run_config(nlohmann::json::parse(R"({"estimand": "median"})")), UsageError);
    const RunConfig c = parse_run_config(nlohmann::json::parse(R"({"simulation": {"N": 300}, "ridge": 0.01})"));
    EXPECT_EQ(c.sim.N, 300);
    EXPECT_DOUBLE_EQ(c.sim.settings.ridge, 0.01);
    EXPECT_DOUBLE_EQ(c.sim.settings.rho_ridge, kDefaultRhoRidge);
}

TEST(RunConfig, EchoIsAFixedPoint) {
    RunConfig c;
    c.sim.replicates = 17;
    c.sim.settings.bw.h_constant = 0.7;
    c.estimand = "variance";
    const nlohmann::json j = to_json(c);
    EXPECT_EQ(to_json(parse_run_config(j)), j);
    EXPECT_EQ(j.at("schema_version"), 1);
}

TEST(Cli, EstimateWritesReport) {
    const fs::path dir = scratch("estimate");
    const std::string data = write_replicate(dir, 5);
    const CliRun r = run({"estimate", "--data", data, "--estimand", "mean", "--out", (dir / "out").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const nlohmann::json j = nlohmann::json::parse(read_file((dir / "out" / "report.json").string()));
    EXPECT_EQ(j.at("schema_version"), 1);
    EXPECT_TRUE(j.at("theta_hat").is_number());
    EXPECT_GE(j.at("std_err").get<double>(), 0.0);
    EXPECT_LE(j.at("ci")[0].get<double>(), j.at("ci")[1].get<double>());
    EXPECT_TRUE(j.contains("density_ratio"));
    EXPECT_TRUE(j.contains("diagnostics"));
    EXPECT_TRUE(fs::exists(dir / "out" / "config.json"));
}

TEST(Cli, CompareAndDensityRatio) {
    const fs::path dir = scratch("compare");
    const std::string data = write_replicate(dir, 6);
    const CliRun r = run({"compare", "--data", data, "--estimators", "ppi,shift,efficient", "--out", (dir / "c").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    std::istringstream csv(read_file((dir / "c" / "compare.csv").string()));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], "estimator,estimate,std_err,ci_lo,ci_hi");
    EXPECT_EQ(lines[1].rfind("ppi,", 0), 0u);
    EXPECT_EQ(lines[3].rfind("efficient,", 0), 0u);

    const CliRun d = run({"density-ratio", "--data", data, "--out", (dir / "d").string()});
    ASSERT_EQ(d.code, kExitOk) << d.err;
    EXPECT_EQ(read_file((dir / "d" / "density_ratio.csv").string()).rfind("y,rho_star,rho_tilde,rho_hat\n", 0), 0u);
}

TEST(Cli, SimulateEchoReproduces) {
    const fs::path dir = scratch("simulate");
    const std::string cfg = (dir / "in.json").string();
    write_file_atomic(cfg, R"({"simulation": {"replicates": 3, "estimators": ["shift", "singly", "oracle"]}})");
    const CliRun a = run({"simulate", "--config", cfg, "--out", (dir / "a").string(), "--threads", "2"});
    ASSERT_EQ(a.code, kExitOk) << a.err;
    const CliRun b = run({"simulate", "--config", (dir / "a" / "config.json").string(), "--out", (dir / "b").string()});
    ASSERT_EQ(b.code, kExitOk) << b.err;
    for (const char* f : {"summary.csv", "raw_estimates.csv", "rho_curves.csv", "config.json"}) {
        EXPECT_EQ(read_file((dir / "a" / f).string()), read_file((dir / "b" / f).string())) << f;
    }
    const std::string summary = read_file((dir / "a" / "summary.csv").string());
    EXPECT_EQ(summary.rfind("estimand,estimator,mse100,bias10,se10,mean_se10,are,coverage,replicates,failures\n", 0),
              0u);
    EXPECT_EQ(read_file((dir / "a" / "raw_estimates.csv").string())
                  .rfind("replicate,estimand,estimator,estimate,sd,ci_lo,ci_hi,failed\n", 0),
              0u);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("exit");
    EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run({"estimate", "--out", dir.string()}).code, kExitUsage);
    const CliRun missing = run({"estimate", "--data", (dir / "none.csv").string(), "--out", dir.string()});
    EXPECT_EQ(missing.code, kExitUsage);

    const std::string bad = (dir / "bad.csv").string();
    write_file_atomic(bad, "r,y,x1\n1,0.5,1\n0,,2\n2,1,3\n");
    const CliRun usage = run({"estimate", "--data", bad, "--out", dir.string()});
    EXPECT_EQ(usage.code, kExitUsage);
    const nlohmann::json e = nlohmann::json::parse(usage.err);
    EXPECT_EQ(e.at("error"), "usage");
    EXPECT_EQ(e.at("message"), "r must be 0 or 1, row 3");

    // Unlabeled covariates far outside the labeled support leave no kernel mass.
    const std::string far = (dir / "far.csv").string();
    std::string text = "r,y,x1\n";
    for (int i = 0; i < 20; ++i) text += "1," + std::to_string(0.1 * i) + "," + std::to_string(0.1 * i) + "\n";
    for (int i = 0; i < 20; ++i) text += "0,," + std::to_string(1e6 + i) + "\n";
    write_file_atomic(far, text);
    const CliRun numerical = run({"estimate", "--data", far, "--out", dir.string()});
    EXPECT_EQ(numerical.code, kExitNumerical) << numerical.err;
    EXPECT_EQ(nlohmann::json::parse(numerical.err).at("error"), "numerical");
}
