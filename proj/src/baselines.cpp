#include "labelshift/baselines.hpp"

#include "labelshift/error.hpp"
#include "labelshift/inference.hpp"

#include <cmath>

namespace labelshift {

double ppi_mean(const Eigen::VectorXd& labeled_y, const Eigen::VectorXd& labeled_pred,
                const Eigen::VectorXd& unlabeled_pred) {
    if (labeled_y.size() == 0 || unlabeled_pred.size() == 0) throw UsageError("ppi: empty input");
    if (labeled_y.size() != labeled_pred.size()) throw UsageError("ppi: labels and predictions differ in length");
    return unlabeled_pred.mean() + (labeled_y - labeled_pred).mean();
}

double shift_dependent(const PooledDataset& data, const std::function<double(double)>& V,
                       const DensityRatioModel& rho) {
    double acc = 0.0;
    for (Eigen::Index i : data.labeled()) {
        const double yi = data.y()[i];
        const double r = rho(yi);
        if (!(r > 0.0)) throw NumericalError("shift-dependent: density ratio must be positive at labeled y");
        acc += r * V(yi);
    }
    return acc / static_cast<double>(data.N()) / data.pi();
}

EstimateReport shift_dependent_report(const PooledDataset& data, const Estimand& estimand,
                                      const DensityRatioModel& rho, const RootSolverCfg& solver, double ci_level) {
    estimand.validate();
    const Eigen::Index n = data.n();
    const Eigen::VectorXd rho_l = rho(data.labeled_y());
    const Eigen::VectorXd none;
    auto xrow = [&](Eigen::Index i) {
        return estimand.uses_x ? Eigen::VectorXd(data.x().row(i).transpose()) : none;
    };

    EstimateReport rep;
    rep.estimator_name = "shift";
    rep.ci_level = ci_level;
    Eigen::MatrixXd variance;
    if (estimand.kind == Estimand::Kind::Moment) {
        Eigen::VectorXd v(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const Eigen::Index i = data.labeled()[k];
            v[k] = rho_l[k] * estimand.s(data.y()[i], xrow(i));
        }
        const double theta = v.mean();
        rep.theta_hat = Eigen::VectorXd::Constant(1, theta);
        variance = Eigen::MatrixXd::Constant(1, 1, (v.array() - theta).square().mean() / static_cast<double>(n));
    } else {
        rep.theta_hat = weighted_labeled_root(data, estimand, rho_l, solver);
        const Eigen::MatrixXd A = estimate_A(data, estimand, rep.theta_hat, rho_l);
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(estimand.dim, estimand.dim);
        for (Eigen::Index k = 0; k < n; ++k) {
            const Eigen::Index i = data.labeled()[k];
            const Eigen::VectorXd psi = rho_l[k] * estimand.score(data.y()[i], xrow(i), rep.theta_hat);
            meat += psi * psi.transpose();
        }
        variance = A * (meat / static_cast<double>(n)) * A.transpose() / static_cast<double>(n);
    }
    EifEvaluation eif;
    eif.variance = variance;
    rep.std_err = eif.std_err();
    rep.ci = confidence_interval(eif, rep.theta_hat, ci_level);
    return rep;
}

double WorkingRegressionModel::mean(const Eigen::VectorXd& x) const {
    if (!fitted) throw UsageError("working model is not fitted");
    return design(x).dot(beta);
}

WorkingRegressionModel fit_working_model(const Eigen::VectorXd& labeled_y, const Eigen::MatrixXd& labeled_x,
                                         DesignMap design) {
    if (!design) throw UsageError("working model: empty design map");
    const Eigen::Index n = labeled_y.size();
    if (n == 0 || labeled_x.rows() != n) throw UsageError("working model: y and x row counts differ");
    const Eigen::VectorXd first = design(labeled_x.row(0).transpose());
    Eigen::MatrixXd Phi(n, first.size());
    for (Eigen::Index i = 0; i < n; ++i) Phi.row(i) = design(labeled_x.row(i).transpose()).transpose();
    if (!Phi.allFinite()) throw NumericalError("working model: non-finite design entries");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Phi);
    if (qr.rank() < Phi.cols()) throw NumericalError("working model: singular design");
    WorkingRegressionModel m;
    m.design = std::move(design);
    m.beta = qr.solve(labeled_y);
    m.sigma2 = (labeled_y - Phi * m.beta).squaredNorm() / static_cast<double>(n);
    if (!(m.sigma2 > 0.0)) throw NumericalError("working model: zero residual variance");
    m.fitted = true;
    return m;
}

DesignMap wrongly_transformed_design() {
    return [](const Eigen::VectorXd& x) {
        if (x.size() < 3) throw UsageError("transformed design needs three covariates");
        Eigen::VectorXd f(4);
        f << 1.0, x[0], std::exp(x[1] / 2.0), x[2] / (1.0 + std::exp(x[1])) + 10.0;
        return f;
    };
}

DesignMap linear_design() {
    return [](const Eigen::VectorXd& x) {
        Eigen::VectorXd f(x.size() + 1);
        f << 1.0, x;
        return f;
    };
}

NormalCondExp::NormalCondExp(WorkingRegressionModel model, int quadrature_nodes, Eigen::Index covariate_dim)
    : model_(std::move(model)), standard_(gauss_hermite(quadrature_nodes)), dim_(covariate_dim) {
    if (!model_.fitted) throw UsageError("working model is not fitted");
}

QuadratureRule NormalCondExp::rule(const Eigen::VectorXd& x) const {
    const double mu = model_.mean(x);
    const double sd = std::sqrt(model_.sigma2);
    return {(mu + sd * standard_.nodes.array()).matrix(), standard_.weights};
}

EstimateReport doubly_flexible_report(const PooledDataset& data, const Estimand& estimand,
                                      const DensityRatioModel& rho_star, const WorkingRegressionModel& working,
                                      const EstimatorSettings& settings, int quadrature_nodes) {
    const NormalCondExp model(working, quadrature_nodes, data.dim());
    const CondExpTable table(model, data.x());
    return estimate_with_rho(data, estimand, rho_star, table, settings, "doubly");
}

double doubly_flexible(const PooledDataset& data, const Estimand& estimand, const DensityRatioModel& rho_star,
                       const WorkingRegressionModel& working, const BandwidthPolicy& bw, double ridge,
                       int quadrature_nodes, int grid_size) {
    EstimatorSettings settings;
    settings.bw = bw;
    settings.ridge = ridge;
    settings.grid_size = grid_size;
    const EstimateReport rep = doubly_flexible_report(data, estimand, rho_star, working, settings, quadrature_nodes);
    return rep.theta_hat[estimand.report_index];
}

EstimateReport oracle_efficient(const PooledDataset& data, const Estimand& estimand, const DensityRatioModel& true_rho,
                                const CondExpTable& table, const EstimatorSettings& settings) {
    return estimate_with_rho(data, estimand, true_rho, table, settings, "oracle");
}

}  // namespace labelshift
