#include "labelshift/condexp.hpp"
#include "labelshift/error.hpp"
#include "labelshift/kernel.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace labelshift;

namespace {

KernelSpec gaussian(double h) { return {KernelFamily::Gaussian, 2, h}; }

double trapezoid(const std::function<double(double)>& f, double lo, double hi, int steps) {
    const double dx = (hi - lo) / steps;
    double acc = 0.5 * (f(lo) + f(hi));
    for (int k = 1; k < steps; ++k) acc += f(lo + k * dx);
    return acc * dx;
}

}  // namespace

TEST(KernelEval, GaussianValues) {
    EXPECT_NEAR(kernel_eval(gaussian(1.0), 0.0), 0.3989423, 1e-7);
    EXPECT_NEAR(kernel_eval(gaussian(1.0), 1.0), 0.2419707, 1e-7);
}

TEST(KernelEval, EpanechnikovCompactSupport) {
    const KernelSpec e{KernelFamily::Epanechnikov, 2, 1.0};
    EXPECT_EQ(kernel_eval(e, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(kernel_eval(e, 0.0), 0.75);
}

TEST(KernelEval, TinyValuesFlushToZero) {
    EXPECT_EQ(kernel_eval(gaussian(1.0), 40.0), 0.0);
}

TEST(KernelSpec, RejectsBadParameters) {
    EXPECT_THROW((KernelSpec{KernelFamily::Gaussian, 2, 0.0}.validate()), UsageError);
    EXPECT_THROW((KernelSpec{KernelFamily::HigherOrderGaussian, 3, 1.0}.validate()), UsageError);
    EXPECT_THROW((KernelSpec{KernelFamily::Gaussian, 4, 1.0}.validate()), UsageError);
}

TEST(KernelEval, IntegratesToOne) {
    for (auto spec : {gaussian(1.0), KernelSpec{KernelFamily::Epanechnikov, 2, 1.0},
                      KernelSpec{KernelFamily::HigherOrderGaussian, 4, 1.0},
                      KernelSpec{KernelFamily::HigherOrderGaussian, 6, 1.0}}) {
        EXPECT_NEAR(trapezoid([&](double u) { return kernel_eval(spec, u); }, -12.0, 12.0, 240000), 1.0, 1e-6);
    }
}

TEST(KernelEval, HigherOrderMomentsVanish) {
    for (int m : {4, 6}) {
        const KernelSpec spec{KernelFamily::HigherOrderGaussian, m, 1.0};
        for (int j = 1; j < m; ++j) {
            const double mom =
                trapezoid([&](double u) { return std::pow(u, j) * kernel_eval(spec, u); }, -14.0, 14.0, 280000);
            EXPECT_NEAR(mom, 0.0, 1e-4) << "order " << m << " moment " << j;
        }
        const double mth =
            trapezoid([&](double u) { return std::pow(u, m) * kernel_eval(spec, u); }, -14.0, 14.0, 280000);
        EXPECT_GT(std::abs(mth), 1e-2);
    }
}

TEST(Kde, AnalyticValues) {
    EXPECT_NEAR(kde(Eigen::VectorXd::Zero(1), 0.0, gaussian(1.0)), 0.3989423, 1e-7);
    EXPECT_NEAR(kde(Eigen::Vector2d(0.0, 2.0), 0.0, gaussian(1.0)), 0.2264666, 1e-7);
    EXPECT_THROW(kde(Eigen::VectorXd(0), 0.0, gaussian(1.0)), UsageError);
}

TEST(Kde, MonteCarloStandardNormal) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z;
    Eigen::VectorXd s(10000);
    for (auto& v : s) v = z(rng);
    EXPECT_NEAR(kde(s, 0.0, gaussian(0.3)), 0.39894, 0.02);
}

TEST(Kde, PermutationInvariantAndIntegratesToOne) {
    const Eigen::VectorXd s = (Eigen::VectorXd(5) << 0.3, -1.2, 2.2, 0.7, 0.1).finished();
    const Eigen::VectorXd rev = s.reverse();
    const KernelSpec spec = gaussian(0.4);
    EXPECT_DOUBLE_EQ(kde(s, 0.5, spec), kde(rev, 0.5, spec));
    EXPECT_NEAR(trapezoid([&](double y) { return kde(s, y, spec); }, -8.0, 10.0, 18000), 1.0, 1e-3);
}

TEST(NwRegress, ConstantValues) {
    const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(7, -1.0, 2.0);
    const Eigen::MatrixXd v = Eigen::MatrixXd::Constant(7, 1, 3.5);
    EXPECT_NEAR(nw_regress(y, v, 0.37, gaussian(0.5))[0], 3.5, 1e-14);
}

TEST(NwRegress, CompactSupportUsesNearbyAnchorsOnly) {
    const KernelSpec e{KernelFamily::Epanechnikov, 2, 1.0};
    EXPECT_DOUBLE_EQ(nw_regress(Eigen::Vector2d(0.0, 10.0), Eigen::Vector2d(1.0, 5.0), 0.0, e)[0], 1.0);
    EXPECT_THROW(nw_regress(Eigen::Vector2d(0.0, 10.0), Eigen::Vector2d(1.0, 5.0), 5.0, e), SupportError);
}

TEST(NwRegress, SmoothFunction) {
    Eigen::VectorXd y(101);
    Eigen::MatrixXd v(101, 1);
    for (int i = 0; i <= 100; ++i) {
        y[i] = i / 100.0;
        v(i, 0) = y[i] * y[i];
    }
    EXPECT_NEAR(nw_regress(y, v, 0.5, gaussian(0.05))[0], 0.25, 5e-3);
}

TEST(NwRegress, ConvexHull) {
    const Eigen::VectorXd y = (Eigen::VectorXd(4) << 0.0, 0.4, 1.1, 2.0).finished();
    const Eigen::MatrixXd v = (Eigen::MatrixXd(4, 1) << -2.0, 3.0, 0.5, 1.0).finished();
    for (double q = -1.0; q <= 3.0; q += 0.25) {
        const double r = nw_regress(y, v, q, gaussian(0.3))[0];
        EXPECT_GE(r, -2.0);
        EXPECT_LE(r, 3.0);
    }
}

TEST(NwSmoother, RowsSumToOne) {
    const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(9, -2.0, 2.0);
    const Eigen::MatrixXd S = nw_smoother(Eigen::Vector3d(-1.0, 0.2, 1.7), a, gaussian(0.3));
    for (Eigen::Index j = 0; j < S.rows(); ++j) EXPECT_NEAR(S.row(j).sum(), 1.0, 1e-14);
}

TEST(Bandwidth, DefaultPolicy) {
    const BandwidthPolicy bw;
    EXPECT_NEAR(bw.h(256), 0.5 * std::pow(256.0, -1.0 / 16.0), 1e-15);
    EXPECT_NEAR(bw.l(125), 1.5 / 5.0, 1e-14);
    EXPECT_NEAR(bw.nw(128), 3.0 * std::pow(128.0, -1.0 / 7.0), 1e-15);
    BandwidthPolicy fixed;
    fixed.h_fixed = 0.5;
    fixed.l_fixed = 0.5;
    EXPECT_DOUBLE_EQ(fixed.h(1000), 0.5);
    EXPECT_DOUBLE_EQ(fixed.l(3), 0.5);
    BandwidthPolicy bad;
    bad.h_exponent = -1.5;
    EXPECT_THROW(bad.validate(), UsageError);
}

TEST(CondExp, ConstantFunctionAndSingleAnchor) {
    const Eigen::VectorXd ly = (Eigen::VectorXd(3) << 0.1, 1.5, -0.7).finished();
    const Eigen::MatrixXd lx = (Eigen::MatrixXd(3, 2) << 0, 0, 1, 1, -1, 2).finished();
    const NadarayaWatsonCondExp model(ly, lx, 0.8);
    EXPECT_NEAR(model.expect([](double) { return 1.0; }, Eigen::Vector2d(0.3, -0.4)), 1.0, 1e-14);

    const NadarayaWatsonCondExp single(Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Constant(1, 2, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(single.expect([](double y) { return y; }, Eigen::Vector2d(0.5, 0.5)), 2.0);
    EXPECT_THROW(single.rule(Eigen::Vector3d::Zero()), UsageError);
}

TEST(CondExp, MatchesDirectRadialSum) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    Eigen::VectorXd ly(30);
    Eigen::MatrixXd lx(30, 3);
    for (int i = 0; i < 30; ++i) {
        ly[i] = z(rng);
        for (int k = 0; k < 3; ++k) lx(i, k) = z(rng);
    }
    const double b = 0.9;
    const NadarayaWatsonCondExp model(ly, lx, b);
    const Eigen::Vector3d q(0.2, -0.3, 0.5);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 30; ++i) {
        const double k = std::exp(-0.5 * (lx.row(i).transpose() - q).squaredNorm() / (b * b));
        num += k * std::sin(ly[i]);
        den += k;
    }
    EXPECT_NEAR(model.expect([](double y) { return std::sin(y); }, q), num / den, 1e-12);
}

TEST(CondExp, RecoversGaussianPosteriorMean) {
    std::mt19937_64 rng(17);
    testutil::GaussianShift g;
    const PooledDataset d = g.draw(5000, 1, rng);
    const BandwidthPolicy bw;
    const auto model = fit_cond_exp_nonparametric(d.labeled_y(), d.labeled_x(), bw.nw(d.n()));
    // Y ~ N(0,1), X | Y ~ N(alpha Y, I): E(Y | x) = alpha'x / (1 + |alpha|^2).
    const Eigen::Vector3d x0 = g.alpha * 0.0;
    const double truth = g.alpha.dot(x0) / (1.0 + g.alpha.squaredNorm());
    EXPECT_NEAR(model->expect([](double y) { return y; }, x0), truth, 0.1);
}

TEST(CondExp, TranslationEquivariant) {
    std::mt19937_64 rng(3);
    testutil::GaussianShift g;
    const PooledDataset d = g.draw(60, 40, rng);
    const auto m1 = fit_cond_exp_nonparametric(d.labeled_y(), d.labeled_x(), 0.7);
    const Eigen::MatrixXd shifted = d.labeled_x().array() + 5.0;
    const auto m2 = fit_cond_exp_nonparametric(d.labeled_y(), shifted, 0.7);
    const CondExpTable t1(*m1, d.x());
    const CondExpTable t2(*m2, Eigen::MatrixXd(d.x().array() + 5.0));
    EXPECT_LT((t1.weights() - t2.weights()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CondExpTable, SharedNodesAgreeWithRuleEvaluation) {
    std::mt19937_64 rng(4);
    testutil::GaussianShift g;
    const PooledDataset d = g.draw(40, 20, rng);
    const auto model = fit_cond_exp_nonparametric(d.labeled_y(), d.labeled_x(), 0.8);
    const CondExpTable table(*model, d.x());
    const auto f = [](double y) { return y * y + 1.0; };
    const Eigen::VectorXd fast = table.expect(f);
    for (Eigen::Index i = 0; i < d.N(); ++i) {
        EXPECT_NEAR(fast[i], model->expect(f, d.x().row(i).transpose()), 1e-12);
    }
}

TEST(GaussHermite, NormalMoments) {
    const QuadratureRule r = gauss_hermite(40);
    EXPECT_NEAR(r.weights.sum(), 1.0, 1e-12);
    const auto moment = [&](int k) {
        double acc = 0.0;
        for (Eigen::Index m = 0; m < r.nodes.size(); ++m) acc += r.weights[m] * std::pow(r.nodes[m], k);
        return acc;
    };
    EXPECT_NEAR(moment(1), 0.0, 1e-12);
    EXPECT_NEAR(moment(2), 1.0, 1e-10);
    EXPECT_NEAR(moment(4), 3.0, 1e-9);
    EXPECT_NEAR(moment(6), 15.0, 1e-8);
}
