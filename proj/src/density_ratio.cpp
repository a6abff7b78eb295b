#include "labelshift/density_ratio.hpp"

#include "labelshift/error.hpp"
#include "labelshift/estimators.hpp"
#include "labelshift/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace labelshift {

void RhoGridPlan::validate() const {
    if (num_points != 0 && num_points < 3) throw UsageError("rho grid needs at least 3 knots");
    if (!(lower_quantile >= 0.0 && lower_quantile < upper_quantile && upper_quantile <= 1.0)) {
        throw UsageError("rho grid quantile range must satisfy 0 <= lower < upper <= 1");
    }
    if (!(clip_floor > 0.0)) throw UsageError("rho clip floor must be positive");
}

int RhoGridPlan::resolved_points(Eigen::Index n) const {
    if (num_points > 0) return num_points;
    const double root = std::pow(static_cast<double>(n), 0.25);
    return std::max(3, static_cast<int>(std::ceil(root - 1e-9)));
}

Eigen::VectorXd RhoGridPlan::knots(const Eigen::VectorXd& labeled_y) const {
    validate();
    Eigen::VectorXd sorted = labeled_y;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    const int M = resolved_points(labeled_y.size());
    Eigen::VectorXd t(M);
    if (placement == Placement::Quantile) {
        for (int k = 0; k < M; ++k) {
            t[k] = quantile_sorted(sorted, lower_quantile + (upper_quantile - lower_quantile) * k / (M - 1.0));
        }
    } else {
        const double lo = quantile_sorted(sorted, lower_quantile);
        const double hi = quantile_sorted(sorted, upper_quantile);
        for (int k = 0; k < M; ++k) t[k] = lo + (hi - lo) * k / (M - 1.0);
    }
    return unique_sorted(t);
}

DeltaEstimate estimate_delta(const FredholmContext& ctx, const Eigen::VectorXd& y0, const KernelSpec& h_kernel,
                             double ridge) {
    const PooledDataset& data = ctx.data();
    const Eigen::VectorXd& grid = ctx.eval_grid();
    const Eigen::Index K = y0.size();
    Eigen::MatrixXd rhs(grid.size(), K);
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
        for (Eigen::Index k = 0; k < K; ++k) rhs(j, k) = kernel_scaled(h_kernel, grid[j] - y0[k]);
    }
    DeltaEstimate out;
    out.y0 = y0;
    out.a_hat = ctx.solve(rhs, ridge);
    const Eigen::MatrixXd pred = ctx.predict(out.a_hat);
    out.direct = Eigen::VectorXd::Zero(K);
    out.rectifier = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i : data.unlabeled()) out.direct += pred.row(i).transpose();
    out.direct /= static_cast<double>(data.unlabeled().size());
    const Eigen::VectorXd& rho_l = ctx.rho_labeled();
    for (Eigen::Index t = 0; t < data.n(); ++t) {
        const Eigen::Index i = data.labeled()[t];
        for (Eigen::Index k = 0; k < K; ++k) {
            out.rectifier[k] += rho_l[t] * (kernel_scaled(h_kernel, data.y()[i] - y0[k]) - pred(i, k));
        }
    }
    out.rectifier /= static_cast<double>(data.n());
    out.delta = out.direct + out.rectifier;
    return out;
}

double estimate_delta0(const PooledDataset& data, double y0, const DensityRatioModel& rho, const CondExpTable& table,
                       const BandwidthPolicy& bw, double ridge, int grid_size) {
    bw.validate();
    const FredholmContext ctx(data, table, rho, compute_weights(data, rho, table), bw.l_kernel(data.n()), grid_size);
    return estimate_delta(ctx, Eigen::VectorXd::Constant(1, y0), bw.h_kernel(data.n()), ridge).delta[0];
}

RhoFit fit_rho(const FredholmContext& ctx, const RhoGridPlan& plan, const KernelSpec& h_kernel, double ridge) {
    const Eigen::VectorXd ly = ctx.data().labeled_y();
    if (ly.size() < 10) throw UsageError("density ratio estimation needs at least 10 labeled rows");
    const Eigen::VectorXd knots = plan.knots(ly);
    const DeltaEstimate d = estimate_delta(ctx, knots, h_kernel, ridge);
    RhoFit fit;
    fit.raw_delta = d.delta;
    fit.density.resize(knots.size());
    Eigen::VectorXd values(knots.size());
    for (Eigen::Index k = 0; k < knots.size(); ++k) {
        fit.density[k] = kde(ly, knots[k], h_kernel);
        if (fit.density[k] < 1e-10) {
            throw SupportError("density estimate vanishes at knot " + std::to_string(knots[k]));
        }
        values[k] = d.delta[k] / fit.density[k];
        if (values[k] < plan.clip_floor) ++fit.clipped;
    }
    fit.model = DensityRatioModel::grid(knots, values, plan.clip_floor);
    return fit;
}

RhoFit fit_rho(const PooledDataset& data, const RhoGridPlan& plan, const DensityRatioModel& rho_model,
               const CondExpTable& table, const BandwidthPolicy& bw, double ridge, int grid_size) {
    bw.validate();
    const FredholmContext ctx(data, table, rho_model, compute_weights(data, rho_model, table), bw.l_kernel(data.n()),
                              grid_size);
    return fit_rho(ctx, plan, bw.h_kernel(data.n()), ridge);
}

DensityRatioModel consistent_rho(const PooledDataset& data, const RhoGridPlan& plan, const DensityRatioModel& rho_star,
                                 const CondExpTable& table, const BandwidthPolicy& bw, double ridge, int grid_size) {
    return fit_rho(data, plan, rho_star, table, bw, ridge, grid_size).model;
}

DensityRatioModel efficient_rho(const PooledDataset& data, const RhoGridPlan& plan, const DensityRatioModel& rho_tilde,
                                const CondExpTable& table, const BandwidthPolicy& bw, double ridge, int grid_size) {
    return fit_rho(data, plan, rho_tilde, table, bw, ridge, grid_size).model;
}

}  // namespace labelshift
