#pragma once

#include "labelshift/condexp.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/estimand.hpp"
#include "labelshift/estimators.hpp"
#include "labelshift/fredholm.hpp"
#include "labelshift/kernel.hpp"
#include "labelshift/ratio_model.hpp"

#include <Eigen/Dense>
#include <vector>

namespace labelshift {

struct EifEvaluation {
    Eigen::MatrixXd phi;       // N x d, already multiplied by A_hat
    Eigen::MatrixXd A_hat;     // d x d
    Eigen::MatrixXd variance;  // d x d, variance of theta_hat

    Eigen::VectorXd mean() const { return phi.colwise().mean().transpose(); }
    Eigen::VectorXd std_err() const { return variance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

// Labeled mean of rho dU/dtheta^T, the estimate of A^{-1}.
Eigen::MatrixXd inverse_A_estimate(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& rho_labeled);

// A_hat = [labeled mean of rho dU/dtheta^T]^{-1}.
Eigen::MatrixXd estimate_A(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta,
                           const Eigen::VectorXd& rho_labeled);

// phi_i = A [r_i/pi rho(y_i)(U_i - b_i) + (1 - r_i)/(1 - pi) b_i].
EifEvaluation eif_from_b(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& rho_labeled, const Eigen::MatrixXd& b);

EifEvaluation eif_values(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta_hat,
                         const DensityRatioModel& rho, const CondExpTable& table, const NuisanceFunction& a_hat,
                         const Eigen::VectorXd& weights);

// Moment estimand with b = prediction - theta and A = -1 / (labeled mean of rho).
EifEvaluation eif_moment(const FredholmContext& ctx, const MomentFit& fit);

std::vector<Interval> confidence_interval(const EifEvaluation& eif, const Eigen::VectorXd& theta_hat, double level);

double normal_quantile(double p);

// Two-term plug-in variance of delta(y0): labeled term over n plus unlabeled term over N - n.
double delta0_variance(const PooledDataset& data, double y0, const DensityRatioModel& rho, const CondExpTable& table,
                       const NuisanceFunction& a_hat, const Eigen::VectorXd& weights, const KernelSpec& h_kernel,
                       Eigen::Index column = 0);

}  // namespace labelshift
