#include "labelshift/baselines.hpp"
#include "labelshift/condexp.hpp"
#include "labelshift/density_ratio.hpp"
#include "labelshift/error.hpp"
#include "labelshift/estimators.hpp"
#include "labelshift/simulation.hpp"
#include "labelshift/stats.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace labelshift;

namespace {

testutil::NwFit nw_table(const PooledDataset& d, const BandwidthPolicy& bw = {}) {
    return testutil::nw_fit(d, bw.nw(d.n()));
}

double true_rho(double y) { return testutil::normal_pdf(y, 1.0, 1.0) / testutil::normal_pdf(y, 0.0, 2.0); }

}  // namespace

TEST(RhoGridPlan, DefaultKnotCount) {
    const RhoGridPlan plan;
    EXPECT_EQ(plan.resolved_points(81), 3);
    EXPECT_EQ(plan.resolved_points(100), 4);
    EXPECT_EQ(plan.resolved_points(256), 4);
    EXPECT_EQ(plan.resolved_points(257), 5);
    EXPECT_EQ(plan.resolved_points(5), 3);
    RhoGridPlan bad;
    bad.num_points = 2;
    EXPECT_THROW(bad.validate(), UsageError);
}

TEST(RhoGridPlan, QuantileKnotsSpanInnerRange) {
    const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(101, 0.0, 100.0);
    RhoGridPlan plan;
    plan.num_points = 5;
    const Eigen::VectorXd t = plan.knots(y);
    ASSERT_EQ(t.size(), 5);
    EXPECT_NEAR(t[0], 5.0, 1e-12);
    EXPECT_NEAR(t[2], 50.0, 1e-12);
    EXPECT_NEAR(t[4], 95.0, 1e-12);
    plan.placement = RhoGridPlan::Placement::Uniform;
    EXPECT_NEAR(plan.knots(y)[1], 27.5, 1e-12);
}

TEST(DensityRatioModel, GridClipsAndExtrapolatesFlat) {
    const auto m = DensityRatioModel::grid(Eigen::Vector3d(0.0, 1.0, 2.0), Eigen::Vector3d(-0.4, 2.0, 1.0), 1e-3);
    EXPECT_DOUBLE_EQ(m(0.0), 1e-3);
    EXPECT_DOUBLE_EQ(m(-5.0), 1e-3);
    EXPECT_DOUBLE_EQ(m(1.5), 1.5);
    EXPECT_DOUBLE_EQ(m(7.0), 1.0);
    for (double y = -3.0; y < 5.0; y += 0.01) EXPECT_GE(m(y), 1e-3);
}

TEST(EstimateDelta, MatchesDirectEvaluation) {
    std::mt19937_64 rng(41);
    testutil::GaussianShift g;
    g.target_mean = 0.5;
    const PooledDataset d = g.draw(40, 30, rng);
    const double b = 1.1;
    const auto model = fit_cond_exp_nonparametric(d.labeled_y(), d.labeled_x(), b);
    const CondExpTable table(*model, d.x());
    const auto rho = DensityRatioModel::closed_form([](double y) { return std::exp(0.4 * y - 0.1); });
    const KernelSpec l{KernelFamily::Gaussian, 2, 0.35};
    const KernelSpec h{KernelFamily::Gaussian, 2, 0.4};
    const double y0 = 0.3;
    const double ridge = 1e-3;

    const Eigen::VectorXd w = compute_weights(d, rho, table);
    const FredholmContext ctx(d, table, rho, w, l, 100);
    const double delta = estimate_delta(ctx, Eigen::VectorXd::Constant(1, y0), h, ridge).delta[0];

    const FredholmSystem sys = assemble_system(
        d, rho, table, w, [&](double y) { return Eigen::VectorXd::Constant(1, kernel_scaled(h, y - y0)); }, l, ridge);
    const NuisanceFunction a = solve(sys);
    const Eigen::VectorXd ly = d.labeled_y();
    const Eigen::MatrixXd lx = d.labeled_x();
    auto pred = [&](Eigen::Index i) {
        double num = 0.0, den = 0.0;
        for (Eigen::Index t = 0; t < d.n(); ++t) {
            const double k = std::exp(-0.5 * (d.x().row(i) - lx.row(t)).squaredNorm() / (b * b));
            num += k * a(ly[t]) * rho(ly[t]);
            den += k;
        }
        return w[i] * num / den;
    };
    double direct = 0.0, rect = 0.0;
    for (Eigen::Index i : d.unlabeled()) direct += pred(i);
    for (Eigen::Index i : d.labeled()) rect += rho(d.y()[i]) * (kernel_scaled(h, d.y()[i] - y0) - pred(i));
    EXPECT_NEAR(delta, direct / 30.0 + rect / 40.0, 1e-10);
}

TEST(EstimateDelta, NoShiftRecoversDensity) {
    // A narrow y-kernel keeps the smoothing bias far below the Monte Carlo error.
    BandwidthPolicy bw;
    bw.h_fixed = 0.1;
    std::mt19937_64 rng(42);
    testutil::GaussianShift g;
    std::vector<double> est;
    for (int rep = 0; rep < 40; ++rep) {
        const PooledDataset d = g.draw(300, 300, rng);
        const auto f = nw_table(d, bw);
        est.push_back(estimate_delta0(d, 0.0, DensityRatioModel::constant(1.0), f.table, bw, kDefaultRhoRidge));
    }
    const double se = sample_sd(est) / std::sqrt(static_cast<double>(est.size()));
    EXPECT_NEAR(sample_mean(est), testutil::normal_pdf(0.0, 0.0, 1.0), 3.0 * se);
}

TEST(EstimateDelta, TargetDensityAtModeUnderWorkingModel) {
    SimConfig c;
    c.N = 500;
    std::vector<double> est;
    for (int rep = 0; rep < 200; ++rep) {
        const Replicate r = generate_replicate(c, replicate_seed(99, rep));
        const auto f = nw_table(r.data);
        est.push_back(estimate_delta0(r.data, 1.0, working_rho_star(c, r.data), f.table, c.settings.bw,
                                      c.settings.rho_ridge));
    }
    EXPECT_NEAR(sample_mean(est), 0.3989, 0.05);
}

TEST(ConsistentRho, NoShiftStaysNearOne) {
    std::mt19937_64 rng(43);
    testutil::GaussianShift g;
    const BandwidthPolicy bw;
    const RhoGridPlan plan;
    double tilde_err = 0.0, hat_err = 0.0;
    const int reps = 100;
    for (int rep = 0; rep < reps; ++rep) {
        const PooledDataset d = g.draw(1000, 1000, rng);
        const auto f = nw_table(d, bw);
        const RhoFit tilde = fit_rho(d, plan, DensityRatioModel::constant(1.0), f.table, bw, kDefaultRhoRidge);
        const RhoFit hat = fit_rho(d, plan, tilde.model, f.table, bw, kDefaultRhoRidge);
        tilde_err += (tilde.model.values().array() - 1.0).abs().maxCoeff();
        hat_err += (hat.model.values().array() - 1.0).abs().maxCoeff();
    }
    EXPECT_LE(tilde_err / reps, 0.25);
    EXPECT_LE(hat_err / reps, 0.25);
}

TEST(ConsistentRho, ClipsAtFloorAndReportsRawDelta) {
    SimConfig c;
    const Replicate r = generate_replicate(c, replicate_seed(5, 0));
    const auto f = nw_table(r.data);
    RhoGridPlan plan;
    plan.clip_floor = 0.9;
    const RhoFit fit = fit_rho(r.data, plan, working_rho_star(c, r.data), f.table, c.settings.bw, c.settings.rho_ridge);
    int below = 0;
    for (Eigen::Index k = 0; k < fit.raw_delta.size(); ++k) {
        const double raw = fit.raw_delta[k] / fit.density[k];
        if (raw < 0.9) {
            ++below;
            EXPECT_DOUBLE_EQ(fit.model.values()[k], 0.9);
        } else {
            EXPECT_DOUBLE_EQ(fit.model.values()[k], raw);
        }
    }
    EXPECT_EQ(below, fit.clipped);
    EXPECT_GT(below, 0);
}

TEST(EfficientRho, KeepsPlanKnots) {
    SimConfig c;
    const Replicate r = generate_replicate(c, replicate_seed(6, 0));
    const auto f = nw_table(r.data);
    const RhoGridPlan plan;
    const auto tilde = consistent_rho(r.data, plan, working_rho_star(c, r.data), f.table, c.settings.bw,
                                      c.settings.rho_ridge);
    const auto hat = efficient_rho(r.data, plan, tilde, f.table, c.settings.bw, c.settings.rho_ridge);
    EXPECT_EQ(hat.knots(), plan.knots(r.data.labeled_y()));
    EXPECT_EQ(tilde.knots(), hat.knots());
}

TEST(ConsistentRho, ApproximatelyNormalized) {
    SimConfig c;
    c.N = 1000;
    for (int rep = 0; rep < 5; ++rep) {
        const Replicate r = generate_replicate(c, replicate_seed(7, rep));
        const auto f = nw_table(r.data);
        const KernelSpec h = c.settings.bw.h_kernel(r.data.n());
        const Eigen::VectorXd ly = r.data.labeled_y();
        const auto tilde = consistent_rho(r.data, c.settings.plan, working_rho_star(c, r.data), f.table,
                                          c.settings.bw, c.settings.rho_ridge);
        const auto hat = efficient_rho(r.data, c.settings.plan, tilde, f.table, c.settings.bw, c.settings.rho_ridge);
        for (const auto* m : {&tilde, &hat}) {
            const Eigen::VectorXd& t = m->knots();
            const int steps = 2000;
            const double dy = (t[t.size() - 1] - t[0]) / steps;
            double mass = 0.0;
            for (int k = 0; k < steps; ++k) {
                const double y = t[0] + (k + 0.5) * dy;
                mass += (*m)(y) * kde(ly, y, h) * dy;
            }
            EXPECT_GE(mass, 0.85);
            EXPECT_LE(mass, 1.15);
        }
    }
}

TEST(ConsistentRho, RobustToWrongConditionalModel) {
    SimConfig small;
    small.N = 400;
    SimConfig large;
    large.N = 1600;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(21, -0.5, 2.0);
    auto sup_error = [&](const SimConfig& c, bool parametric) {
        double acc = 0.0;
        const int reps = 12;
        for (int rep = 0; rep < reps; ++rep) {
            const Replicate r = generate_replicate(c, replicate_seed(8, rep));
            std::unique_ptr<CondExpModel> model;
            if (parametric) {
                model = std::make_unique<NormalCondExp>(
                    fit_working_model(r.data.labeled_y(), r.data.labeled_x(), wrongly_transformed_design()), 40, 3);
            } else {
                model = std::make_unique<NadarayaWatsonCondExp>(r.data.labeled_y(), r.data.labeled_x(),
                                                                c.settings.bw.nw(r.data.n()));
            }
            const CondExpTable table(*model, r.data.x());
            const auto tilde = consistent_rho(r.data, c.settings.plan, working_rho_star(c, r.data), table,
                                              c.settings.bw, c.settings.rho_ridge);
            double sup = 0.0;
            for (double y : grid) sup = std::max(sup, std::abs(tilde(y) - true_rho(y)));
            acc += sup;
        }
        return acc / reps;
    };
    for (bool parametric : {false, true}) {
        EXPECT_LT(sup_error(large, parametric), sup_error(small, parametric)) << "parametric " << parametric;
    }
}
