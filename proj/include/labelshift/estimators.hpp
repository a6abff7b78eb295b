#pragma once

#include "labelshift/condexp.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/density_ratio.hpp"
#include "labelshift/estimand.hpp"
#include "labelshift/fredholm.hpp"
#include "labelshift/kernel.hpp"
#include "labelshift/ratio_model.hpp"

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace labelshift {

struct RootSolverCfg {
    enum class Jacobian { Auto, Estimated, FiniteDifference };

    int max_iter = 100;
    double tol = 1e-10;
    int max_halvings = 20;
    // Auto starts from the A^{-1} estimate and falls back to finite differences
    // when step halving stalls or a step fails to halve the residual.
    Jacobian jacobian = Jacobian::Auto;
    double fd_step = 1e-6;

    void validate() const;
};

struct EstimatorSettings {
    BandwidthPolicy bw;
    RhoGridPlan plan;
    int grid_size = kDefaultGridSize;
    double ridge = kDefaultRidge;
    double rho_ridge = kDefaultRhoRidge;
    RootSolverCfg solver;
    double ci_level = 0.95;

    void validate() const;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct EstimateReport {
    std::string estimator_name;
    Eigen::VectorXd theta_hat;
    Eigen::VectorXd std_err;
    double ci_level = 0.95;
    std::vector<Interval> ci;
    std::map<std::string, double> diagnostics;
    std::vector<std::string> notes;

    double reported(Eigen::Index k) const { return theta_hat[k]; }
};

// w_i = 1 / E_p{rho^2(Y) + pi/(1-pi) rho(Y) | x_i}.
Eigen::VectorXd compute_weights(const PooledDataset& data, const DensityRatioModel& rho, const CondExpTable& table);

struct MomentFit {
    double theta = 0.0;
    double direct = 0.0;     // unlabeled mean of the prediction
    double rectifier = 0.0;  // labeled mean of rho * (s - prediction)
    NuisanceFunction a_hat;
    Eigen::VectorXd prediction;  // w_i E_p{a rho | x_i}, all rows
    Eigen::VectorXd s_labeled;
    double system_residual = 0.0;
};

MomentFit fit_moment(const FredholmContext& ctx, const Estimand& estimand, double ridge);

double algorithm_general(const PooledDataset& data, const Estimand& estimand, const DensityRatioModel& rho,
                         const CondExpTable& table, const BandwidthPolicy& bw, double ridge,
                         int grid_size = kDefaultGridSize);

// b_i = w_i E_p{U(Y, x_i, theta) rho^2(Y) + a(Y) rho(Y) | x_i}, N x d.
Eigen::MatrixXd predict_b(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta,
                          const DensityRatioModel& rho, const CondExpTable& table, const NuisanceFunction& a_hat,
                          const Eigen::VectorXd& weights);

struct GeneralFit {
    Eigen::VectorXd theta;
    Eigen::VectorXd residual;
    NuisanceFunction a_hat;
    Eigen::MatrixXd b;
    int iterations = 0;
    bool used_finite_difference = false;
};

// Unlabeled mean of b + labeled mean of rho (U - b), re-solving a(y) at theta.
Eigen::VectorXd estimating_function(const FredholmContext& ctx, const Estimand& estimand, const Eigen::VectorXd& theta,
                                    double ridge, NuisanceFunction* a_out = nullptr, Eigen::MatrixXd* b_out = nullptr);

GeneralFit fit_general(const FredholmContext& ctx, const Estimand& estimand, const Eigen::VectorXd& theta0,
                       double ridge, const RootSolverCfg& solver);

// Algorithm 1 / 2 with a fixed density-ratio model, including EIF standard errors.
EstimateReport estimate_with_rho(const PooledDataset& data, const Estimand& estimand, const DensityRatioModel& rho,
                                 const CondExpTable& table, const EstimatorSettings& settings,
                                 const std::string& name);

EstimateReport estimate_in_context(const FredholmContext& ctx, const Estimand& estimand,
                                   const EstimatorSettings& settings, const std::string& name);

struct EfficientResult {
    RhoFit rho_tilde;
    RhoFit rho_hat;
    std::vector<EstimateReport> tilde;
    std::vector<EstimateReport> hat;
};

// rho~ from rho_star, rho^ from rho~, and theta under each for every estimand.
// The operator built for rho_star also yields the Algorithm 1 estimates, returned through star_reports.
EfficientResult efficient_pipeline(const PooledDataset& data, const std::vector<Estimand>& estimands,
                                   const CondExpTable& table, const DensityRatioModel& rho_star,
                                   const EstimatorSettings& settings,
                                   std::vector<EstimateReport>* star_reports = nullptr);

enum class RhoStage { Tilde, Hat };

EstimateReport efficient_theta(const PooledDataset& data, const Estimand& estimand, const CondExpTable& table,
                               const DensityRatioModel& rho_star, const EstimatorSettings& settings,
                               RhoStage stage = RhoStage::Tilde);

// Starting value: the rho-weighted labeled root of U.
Eigen::VectorXd weighted_labeled_root(const PooledDataset& data, const Estimand& estimand,
                                      const Eigen::VectorXd& rho_labeled, const RootSolverCfg& solver);

}  // namespace labelshift
