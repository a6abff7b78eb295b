#include "labelshift/inference.hpp"

#include "labelshift/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

namespace labelshift {

Eigen::MatrixXd inverse_A_estimate(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& rho_labeled) {
    const Eigen::Index n = data.n();
    if (rho_labeled.size() != n) throw UsageError("rho values must cover the labeled rows");
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(estimand.dim, estimand.dim);
    const Eigen::VectorXd none;
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = data.labeled()[k];
        const Eigen::VectorXd x = estimand.uses_x ? Eigen::VectorXd(data.x().row(i).transpose()) : none;
        acc += rho_labeled[k] * estimand.score_jacobian(data.y()[i], x, theta);
    }
    return acc / static_cast<double>(n);
}

Eigen::MatrixXd estimate_A(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta,
                           const Eigen::VectorXd& rho_labeled) {
    const Eigen::MatrixXd Ainv = inverse_A_estimate(data, estimand, theta, rho_labeled);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Ainv);
    if (!lu.isInvertible()) throw NumericalError("A(theta) estimate is singular");
    return lu.inverse();
}

namespace {

EifEvaluation finish(const PooledDataset& data, Eigen::MatrixXd A, Eigen::MatrixXd psi) {
    // psi holds r/pi rho (U - b) + (1 - r)/(1 - pi) b row by row, before scaling by A.
    EifEvaluation out;
    out.A_hat = std::move(A);
    out.phi = psi * out.A_hat.transpose();
    const double N = static_cast<double>(data.N());
    out.variance = out.phi.transpose() * out.phi / (N * N);
    out.variance = 0.5 * (out.variance + out.variance.transpose());
    return out;
}

}  // namespace

EifEvaluation eif_from_b(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& rho_labeled, const Eigen::MatrixXd& b) {
    if (b.rows() != data.N() || b.cols() != estimand.dim) throw UsageError("eif: b has the wrong shape");
    const double pi = data.pi();
    Eigen::MatrixXd psi(data.N(), estimand.dim);
    const Eigen::VectorXd none;
    for (Eigen::Index k = 0; k < data.n(); ++k) {
        const Eigen::Index i = data.labeled()[k];
        const Eigen::VectorXd x = estimand.uses_x ? Eigen::VectorXd(data.x().row(i).transpose()) : none;
        psi.row(i) = (rho_labeled[k] / pi) * (estimand.score(data.y()[i], x, theta) - b.row(i).transpose()).transpose();
    }
    for (Eigen::Index i : data.unlabeled()) psi.row(i) = b.row(i) / (1.0 - pi);
    return finish(data, estimate_A(data, estimand, theta, rho_labeled), std::move(psi));
}

EifEvaluation eif_values(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta_hat,
                         const DensityRatioModel& rho, const CondExpTable& table, const NuisanceFunction& a_hat,
                         const Eigen::VectorXd& weights) {
    const Eigen::MatrixXd b = predict_b(data, estimand, theta_hat, rho, table, a_hat, weights);
    return eif_from_b(data, estimand, theta_hat, rho(data.labeled_y()), b);
}

EifEvaluation eif_moment(const FredholmContext& ctx, const MomentFit& fit) {
    const PooledDataset& data = ctx.data();
    const double pi = data.pi();
    const Eigen::VectorXd& rho_l = ctx.rho_labeled();
    Eigen::MatrixXd psi(data.N(), 1);
    for (Eigen::Index k = 0; k < data.n(); ++k) {
        const Eigen::Index i = data.labeled()[k];
        psi(i, 0) = rho_l[k] * (fit.s_labeled[k] - fit.prediction[i]) / pi;
    }
    for (Eigen::Index i : data.unlabeled()) psi(i, 0) = (fit.prediction[i] - fit.theta) / (1.0 - pi);
    const double m = rho_l.mean();
    if (!(m > 0.0)) throw NumericalError("A(theta) estimate is singular");
    return finish(data, Eigen::MatrixXd::Constant(1, 1, -1.0 / m), std::move(psi));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("normal quantile level must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

std::vector<Interval> confidence_interval(const EifEvaluation& eif, const Eigen::VectorXd& theta_hat, double level) {
    if (!(level > 0.0 && level < 1.0)) throw UsageError("confidence level must lie in (0, 1)");
    if (eif.variance.rows() != theta_hat.size()) throw UsageError("confidence interval: dimension mismatch");
    const double z = normal_quantile(0.5 * (1.0 + level));
    const Eigen::VectorXd se = eif.std_err();
    std::vector<Interval> out(theta_hat.size());
    for (Eigen::Index k = 0; k < theta_hat.size(); ++k) out[k] = {theta_hat[k] - z * se[k], theta_hat[k] + z * se[k]};
    return out;
}

double delta0_variance(const PooledDataset& data, double y0, const DensityRatioModel& rho, const CondExpTable& table,
                       const NuisanceFunction& a_hat, const Eigen::VectorXd& weights, const KernelSpec& h_kernel,
                       Eigen::Index column) {
    if (weights.size() != data.N() || table.rows() != data.N()) throw UsageError("delta variance: row count mismatch");
    Eigen::VectorXd pred(data.N());
    for (Eigen::Index i = 0; i < data.N(); ++i) {
        pred[i] = weights[i] * table.expect_row(i, [&](double y) { return rho(y) * a_hat(y, column); });
    }
    const Eigen::Index n = data.n();
    const Eigen::Index nu = data.N() - n;
    Eigen::VectorXd lab(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = data.labeled()[k];
        const double yi = data.y()[i];
        lab[k] = rho(yi) * (kernel_scaled(h_kernel, yi - y0) - pred[i]);
    }
    double direct = 0.0;
    for (Eigen::Index i : data.unlabeled()) direct += pred[i];
    direct /= static_cast<double>(nu);
    const double delta = direct + lab.mean();
    double unl = 0.0;
    for (Eigen::Index i : data.unlabeled()) unl += (pred[i] - delta) * (pred[i] - delta);
    return lab.squaredNorm() / (static_cast<double>(n) * n) + unl / (static_cast<double>(nu) * nu);
}

}  // namespace labelshift
