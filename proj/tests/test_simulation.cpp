#include "labelshift/error.hpp"
#include "labelshift/simulation.hpp"
#include "labelshift/stats.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>

using namespace labelshift;

TEST(GenerateReplicate, Deterministic) {
    const SimConfig c;
    const Replicate a = generate_replicate(c, 123);
    const Replicate b = generate_replicate(c, 123);
    EXPECT_EQ(a.data.r(), b.data.r());
    EXPECT_EQ(a.data.x(), b.data.x());
    EXPECT_EQ(a.hidden_y, b.hidden_y);
    for (Eigen::Index i : a.data.labeled()) EXPECT_EQ(a.data.y()[i], b.data.y()[i]);
    for (Eigen::Index i : a.data.unlabeled()) EXPECT_TRUE(std::isnan(a.data.y()[i]));
    const Replicate other = generate_replicate(c, 124);
    EXPECT_NE(a.data.x(), other.data.x());
}

TEST(GenerateReplicate, LawOfLargeNumbers) {
    SimConfig c;
    c.N = 2000000;
    const Replicate r = generate_replicate(c, 7);
    std::vector<double> lab, unl;
    for (Eigen::Index i : r.data.labeled()) lab.push_back(r.data.y()[i]);
    for (Eigen::Index i : r.data.unlabeled()) unl.push_back(r.hidden_y[i]);
    ASSERT_GT(lab.size(), 900000u);
    ASSERT_GT(unl.size(), 900000u);
    EXPECT_NEAR(sample_sd(lab) * sample_sd(lab), 2.0, 0.01);
    EXPECT_NEAR(sample_mean(unl), 1.0, 0.01);
    EXPECT_NEAR(r.data.pi(), 0.5, 0.002);

    // Slope of x_k on y is alpha_k.
    const Eigen::VectorXd y = r.hidden_y;
    const double ym = y.mean();
    for (Eigen::Index k = 0; k < 3; ++k) {
        const Eigen::VectorXd xk = r.data.x().col(k);
        const double slope = ((y.array() - ym) * (xk.array() - xk.mean())).sum() / (y.array() - ym).square().sum();
        EXPECT_NEAR(slope, c.alpha[k], 0.005);
    }
}

TEST(GenerateReplicate, FixedLabeledCount) {
    SimConfig c;
    c.N = 101;
    c.fixed_labeled_count = true;
    c.pi = 0.3;
    const Replicate r = generate_replicate(c, 1);
    EXPECT_EQ(r.data.n(), 30);
}

TEST(WorkingRhoStar, SelfNormalized) {
    SimConfig c;
    const Replicate r = generate_replicate(c, replicate_seed(c.seed, 0));
    const DensityRatioModel rho = true_density_ratio(c);
    const DensityRatioModel star = working_rho_star(c, r.data);
    double acc = 0.0, raw = 0.0;
    for (Eigen::Index i : r.data.labeled()) {
        const double y = r.data.y()[i];
        acc += star(y);
        raw += rho(y) * std::exp(0.2 * y + 0.1 * y * y);
    }
    EXPECT_NEAR(acc / static_cast<double>(r.data.n()), 1.0, 1e-12);
    const double c_star = r.data.pi() / (raw / static_cast<double>(r.data.N()));
    EXPECT_NEAR(star(2.0) / rho(2.0), c_star * std::exp(0.8), 1e-12);
    EXPECT_NEAR(rho(0.5), testutil::normal_pdf(0.5, 1.0, 1.0) / testutil::normal_pdf(0.5, 0.0, 2.0), 1e-14);
}

TEST(WorkingRhoStar, ZeroDistortionRecoversTruth) {
    SimConfig c;
    c.N = 20000;
    c.distortion_linear = 0.0;
    c.distortion_quadratic = 0.0;
    const Replicate r = generate_replicate(c, 3);
    const DensityRatioModel rho = true_density_ratio(c);
    const DensityRatioModel star = working_rho_star(c, r.data);
    for (double y : {-1.0, 0.0, 1.0, 2.0}) EXPECT_NEAR(star(y) / rho(y), 1.0, 0.05);
}

TEST(SimConfig, Validation) {
    SimConfig c;
    c.N = 9;
    EXPECT_THROW(c.validate(), UsageError);
    c = SimConfig{};
    c.estimators = {"bogus"};
    EXPECT_THROW(c.validate(), UsageError);
    c = SimConfig{};
    c.source_var = 0.0;
    EXPECT_THROW(c.validate(), UsageError);
    c = SimConfig{};
    EXPECT_DOUBLE_EQ(c.true_theta("mean"), 1.0);
    EXPECT_DOUBLE_EQ(c.true_theta("variance"), 1.0);
    EXPECT_THROW(c.true_theta("median"), UsageError);
}

TEST(RunStudy, ThreadCountInvariant) {
    SimConfig c;
    c.replicates = 6;
    c.estimators = {"shift", "singly", "efficient_tilde", "oracle"};
    c.threads = 1;
    const StudyResult serial = run_study(c);
    c.threads = 3;
    const StudyResult parallel = run_study(c);
    ASSERT_EQ(serial.raw.size(), parallel.raw.size());
    for (std::size_t k = 0; k < serial.raw.size(); ++k) {
        EXPECT_EQ(serial.raw[k].replicate, parallel.raw[k].replicate);
        EXPECT_EQ(serial.raw[k].estimator, parallel.raw[k].estimator);
        EXPECT_EQ(serial.raw[k].estimate, parallel.raw[k].estimate);
        EXPECT_EQ(serial.raw[k].sd, parallel.raw[k].sd);
    }
    ASSERT_EQ(serial.summary.size(), parallel.summary.size());
    for (std::size_t k = 0; k < serial.summary.size(); ++k) {
        EXPECT_EQ(serial.summary[k].mse100, parallel.summary[k].mse100);
        EXPECT_EQ(serial.summary[k].coverage, parallel.summary[k].coverage);
        EXPECT_EQ(serial.summary[k].failures, 0);
    }
    EXPECT_EQ(serial.curves.size(), parallel.curves.size());
    EXPECT_TRUE(serial.errors.empty());
}

TEST(RunStudy, OracleAloneHasUnitEfficiency) {
    SimConfig c;
    c.replicates = 1;
    c.estimators = {"oracle"};
    c.keep_curves = false;
    const StudyResult r = run_study(c);
    ASSERT_EQ(r.summary.size(), 2u);
    for (const MetricsRow& m : r.summary) {
        EXPECT_EQ(m.are, 1.0);
        EXPECT_EQ(m.replicates, 1);
    }
    EXPECT_TRUE(r.curves.empty());
}

TEST(Summarize, MatchesHandComputedMetrics) {
    SimConfig c;
    c.estimands = {"mean"};
    c.estimators = {"shift", "oracle"};
    auto row = [](int rep, const char* name, double est, double sd, double lo, double hi, bool failed = false) {
        RawEstimate r;
        r.replicate = rep;
        r.estimand = "mean";
        r.estimator = name;
        r.estimate = est;
        r.sd = sd;
        r.ci_lo = lo;
        r.ci_hi = hi;
        r.failed = failed;
        return r;
    };
    const std::vector<RawEstimate> raw = {
        row(0, "shift", 1.2, 0.1, 1.05, 1.35),  row(1, "shift", 1.4, 0.3, 0.8, 2.0),
        row(2, "shift", 0.0, 0.0, 0.0, 0.0, true), row(0, "oracle", 0.9, 0.2, 0.5, 1.3),
        row(1, "oracle", 1.1, 0.2, 0.7, 1.5),
    };
    const std::vector<MetricsRow> m = summarize(c, raw);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m[0].estimator, "shift");
    EXPECT_NEAR(m[0].mse100, 100.0 * (0.04 + 0.16) / 2.0, 1e-12);
    EXPECT_NEAR(m[0].bias10, 10.0 * 0.3, 1e-12);
    EXPECT_NEAR(m[0].se10, 10.0 * std::sqrt(0.02), 1e-12);
    EXPECT_NEAR(m[0].mean_se10, 2.0, 1e-12);
    EXPECT_NEAR(m[0].coverage, 0.5, 1e-12);
    EXPECT_EQ(m[0].failures, 1);
    EXPECT_EQ(m[0].replicates, 2);
    EXPECT_NEAR(m[1].mse100, 1.0, 1e-12);
    EXPECT_NEAR(m[0].are, 10.0, 1e-12);
    EXPECT_EQ(m[1].are, 1.0);
}

TEST(Parallel, VisitsEveryIndexOnce) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(97, 4, [&](int i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_EQ(resolve_threads(3), std::min(3, resolve_threads(3)));
    setenv("LABELSHIFT_THREADS", "2", 1);
    EXPECT_EQ(resolve_threads(8), 2);
    EXPECT_EQ(resolve_threads(1), 1);
    unsetenv("LABELSHIFT_THREADS");
    EXPECT_EQ(resolve_threads(5), 5);
}

TEST(ReplicateSeed, DistinctAndStable) {
    EXPECT_EQ(replicate_seed(1, 2), replicate_seed(1, 2));
    EXPECT_NE(replicate_seed(1, 2), replicate_seed(1, 3));
    EXPECT_NE(replicate_seed(1, 2), replicate_seed(2, 2));
}
