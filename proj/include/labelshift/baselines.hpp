#pragma once

#include "labelshift/condexp.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/estimand.hpp"
#include "labelshift/estimators.hpp"
#include "labelshift/kernel.hpp"
#include "labelshift/ratio_model.hpp"

#include <Eigen/Dense>
#include <functional>
#include <memory>

namespace labelshift {

double ppi_mean(const Eigen::VectorXd& labeled_y, const Eigen::VectorXd& labeled_pred,
                const Eigen::VectorXd& unlabeled_pred);

// N^{-1} sum_i r_i rho(y_i) V(y_i) / pi.
double shift_dependent(const PooledDataset& data, const std::function<double(double)>& V,
                       const DensityRatioModel& rho);

// Root of the labeled rho-weighted estimating equation with a sandwich standard error.
EstimateReport shift_dependent_report(const PooledDataset& data, const Estimand& estimand,
                                      const DensityRatioModel& rho, const RootSolverCfg& solver, double ci_level);

using DesignMap = std::function<Eigen::VectorXd(const Eigen::VectorXd& x)>;

// Normal linear working model Y | x ~ N(beta' phi(x), sigma^2) fitted by maximum likelihood.
struct WorkingRegressionModel {
    DesignMap design;
    Eigen::VectorXd beta;
    double sigma2 = 0.0;
    bool fitted = false;

    double mean(const Eigen::VectorXd& x) const;
};

WorkingRegressionModel fit_working_model(const Eigen::VectorXd& labeled_y, const Eigen::MatrixXd& labeled_x,
                                         DesignMap design);

// (1, x1, exp(x2/2), x3/(1 + exp(x2)) + 10).
DesignMap wrongly_transformed_design();
DesignMap linear_design();

class NormalCondExp : public CondExpModel {
public:
    NormalCondExp(WorkingRegressionModel model, int quadrature_nodes, Eigen::Index covariate_dim);

    QuadratureRule rule(const Eigen::VectorXd& x) const override;
    Eigen::Index covariate_dim() const override { return dim_; }

private:
    WorkingRegressionModel model_;
    QuadratureRule standard_;
    Eigen::Index dim_;
};

inline constexpr int kDefaultQuadratureNodes = 40;

EstimateReport doubly_flexible_report(const PooledDataset& data, const Estimand& estimand,
                                      const DensityRatioModel& rho_star, const WorkingRegressionModel& working,
                                      const EstimatorSettings& settings, int quadrature_nodes = kDefaultQuadratureNodes);

double doubly_flexible(const PooledDataset& data, const Estimand& estimand, const DensityRatioModel& rho_star,
                       const WorkingRegressionModel& working, const BandwidthPolicy& bw, double ridge,
                       int quadrature_nodes = kDefaultQuadratureNodes, int grid_size = kDefaultGridSize);

EstimateReport oracle_efficient(const PooledDataset& data, const Estimand& estimand, const DensityRatioModel& true_rho,
                                const CondExpTable& table, const EstimatorSettings& settings);

}  // namespace labelshift
