#pragma once

#include "labelshift/condexp.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/fredholm.hpp"
#include "labelshift/kernel.hpp"
#include "labelshift/ratio_model.hpp"

#include <Eigen/Dense>

namespace labelshift {

struct RhoGridPlan {
    enum class Placement { Quantile, Uniform };

    int num_points = 0;  // 0 selects max(3, ceil(n^{1/4}))
    Placement placement = Placement::Quantile;
    double lower_quantile = 0.05;
    double upper_quantile = 0.95;
    double clip_floor = kDefaultClipFloor;

    void validate() const;
    int resolved_points(Eigen::Index n) const;
    Eigen::VectorXd knots(const Eigen::VectorXd& labeled_y) const;
};

struct DeltaEstimate {
    Eigen::VectorXd y0;
    Eigen::VectorXd delta;
    Eigen::VectorXd direct;
    Eigen::VectorXd rectifier;
    NuisanceFunction a_hat;  // one column per y0
};

// delta(y0) for every y0 sharing one operator solve.
DeltaEstimate estimate_delta(const FredholmContext& ctx, const Eigen::VectorXd& y0, const KernelSpec& h_kernel,
                             double ridge);

double estimate_delta0(const PooledDataset& data, double y0, const DensityRatioModel& rho, const CondExpTable& table,
                       const BandwidthPolicy& bw, double ridge, int grid_size = kDefaultGridSize);

struct RhoFit {
    DensityRatioModel model;
    Eigen::VectorXd raw_delta;
    Eigen::VectorXd density;  // p_Y estimate at the knots
    int clipped = 0;
};

// Knot values max(clip_floor, delta(t_k) / p_Y(t_k)) with delta computed under the context's rho.
RhoFit fit_rho(const FredholmContext& ctx, const RhoGridPlan& plan, const KernelSpec& h_kernel, double ridge);

RhoFit fit_rho(const PooledDataset& data, const RhoGridPlan& plan, const DensityRatioModel& rho_model,
               const CondExpTable& table, const BandwidthPolicy& bw, double ridge, int grid_size = kDefaultGridSize);

DensityRatioModel consistent_rho(const PooledDataset& data, const RhoGridPlan& plan, const DensityRatioModel& rho_star,
                                 const CondExpTable& table, const BandwidthPolicy& bw, double ridge,
                                 int grid_size = kDefaultGridSize);

DensityRatioModel efficient_rho(const PooledDataset& data, const RhoGridPlan& plan, const DensityRatioModel& rho_tilde,
                                const CondExpTable& table, const BandwidthPolicy& bw, double ridge,
                                int grid_size = kDefaultGridSize);

}  // namespace labelshift
