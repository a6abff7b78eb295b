#include "labelshift/fredholm.hpp"

#include "labelshift/error.hpp"
#include "labelshift/stats.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace labelshift {

void FredholmSystem::validate() const {
    const Eigen::Index G = eval_grid.size();
    const Eigen::Index B = basis_points.size();
    if (operator_matrix.rows() != G || operator_matrix.cols() != B) {
        throw UsageError("Fredholm system: operator shape does not match the grids");
    }
    if (rhs.rows() != G) throw UsageError("Fredholm system: rhs rows do not match the evaluation grid");
    if (!(ridge_lambda >= 0.0)) throw UsageError("Fredholm system: ridge_lambda must be nonnegative");
    for (Eigen::Index j = 1; j < G; ++j) {
        if (!(eval_grid[j] > eval_grid[j - 1])) throw UsageError("Fredholm system: eval_grid must be strictly increasing");
    }
    if (!operator_matrix.allFinite() || !rhs.allFinite()) throw NumericalError("Fredholm system: non-finite entries");
}

NuisanceFunction::NuisanceFunction(Eigen::VectorXd basis_points, Eigen::MatrixXd values)
    : basis_(std::move(basis_points)), values_(std::move(values)) {
    if (basis_.size() == 0 || values_.rows() != basis_.size()) {
        throw UsageError("nuisance function: basis and values disagree");
    }
    if (!values_.allFinite()) throw NumericalError("nuisance function: non-finite values");
}

double NuisanceFunction::operator()(double y, Eigen::Index col) const {
    const InterpPosition p = locate(basis_, y);
    if (p.frac == 0.0) return values_(p.lo, col);
    return (1.0 - p.frac) * values_(p.lo, col) + p.frac * values_(p.lo + 1, col);
}

Eigen::VectorXd NuisanceFunction::row(double y) const {
    const InterpPosition p = locate(basis_, y);
    if (p.frac == 0.0) return values_.row(p.lo).transpose();
    return ((1.0 - p.frac) * values_.row(p.lo) + p.frac * values_.row(p.lo + 1)).transpose();
}

FredholmSolver::FredholmSolver(const Eigen::MatrixXd& op) : cols_(op.cols()) {
    if (op.size() == 0) throw UsageError("Fredholm solver: empty operator");
    if (!op.allFinite()) throw NumericalError("Fredholm solver: non-finite operator entries");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(op, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u_ = svd.matrixU();
    s_ = svd.singularValues();
    v_ = svd.matrixV();
}

double FredholmSolver::scaled_lambda(double ridge) const {
    if (!(ridge >= 0.0)) throw UsageError("ridge must be nonnegative");
    return ridge * s_.squaredNorm() / static_cast<double>(cols_);
}

bool FredholmSolver::full_column_rank() const {
    if (s_.size() < cols_) return false;
    const double tol = static_cast<double>(std::max(u_.rows(), cols_)) * std::numeric_limits<double>::epsilon() *
                       (s_.size() > 0 ? s_[0] : 0.0);
    return s_.size() > 0 && s_[s_.size() - 1] > tol;
}

Eigen::MatrixXd FredholmSolver::solve(const Eigen::MatrixXd& rhs, double lambda) const {
    if (rhs.rows() != u_.rows()) throw UsageError("Fredholm solver: rhs rows do not match the operator");
    if (!(lambda >= 0.0)) throw UsageError("Fredholm solver: lambda must be nonnegative");
    if (lambda == 0.0 && !full_column_rank()) {
        throw NumericalError("Fredholm solver: operator is numerically singular; use ridge_lambda > 0");
    }
    const Eigen::VectorXd f = s_.array() / (s_.array().square() + lambda);
    return v_ * (f.asDiagonal() * (u_.transpose() * rhs));
}

NuisanceFunction solve(const FredholmSystem& system) {
    system.validate();
    FredholmSolver solver(system.operator_matrix);
    return {system.basis_points, solver.solve(system.rhs, system.ridge_lambda)};
}

Eigen::VectorXd unique_sorted(const Eigen::VectorXd& v) {
    std::vector<double> tmp(v.data(), v.data() + v.size());
    std::sort(tmp.begin(), tmp.end());
    tmp.erase(std::unique(tmp.begin(), tmp.end()), tmp.end());
    return Eigen::Map<Eigen::VectorXd>(tmp.data(), static_cast<Eigen::Index>(tmp.size()));
}

Eigen::VectorXd default_eval_grid(const Eigen::VectorXd& labeled_y, int grid_size) {
    if (grid_size < 1) throw UsageError("evaluation grid size must be positive");
    const Eigen::VectorXd distinct = unique_sorted(labeled_y);
    if (distinct.size() <= grid_size) return distinct;
    Eigen::VectorXd sorted = labeled_y;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    Eigen::VectorXd q(grid_size);
    for (int k = 0; k < grid_size; ++k) q[k] = quantile_sorted(sorted, (k + 0.5) / grid_size);
    return unique_sorted(q);
}

FredholmContext::FredholmContext(const PooledDataset& data, const CondExpTable& table, const DensityRatioModel& rho,
                                 Eigen::VectorXd weights, const KernelSpec& l_kernel, int grid_size)
    : data_(&data), table_(&table), rho_(rho), weights_(std::move(weights)) {
    const Eigen::Index N = data.N();
    const Eigen::Index n = data.n();
    if (table.rows() != N) throw UsageError("Fredholm context: conditional expectation table has the wrong row count");
    if (weights_.size() != N) throw UsageError("Fredholm context: weights must have length N");

    const Eigen::VectorXd ly = data.labeled_y();
    rho_labeled_ = rho_(ly);
    if ((rho_labeled_.array() <= 0.0).any()) throw NumericalError("density ratio must be positive at labeled y");
    basis_ = unique_sorted(ly);
    grid_ = default_eval_grid(ly, grid_size);
    smoother_ = nw_smoother(grid_, ly, l_kernel);

    const Eigen::Index B = basis_.size();
    coupling_ = Eigen::MatrixXd::Zero(N, B);
    const Eigen::MatrixXd& W = table.weights();
    if (table.shared()) {
        const Eigen::VectorXd& nodes = table.shared_node_vector();
        const Eigen::Index q = nodes.size();
        std::vector<InterpPosition> pos(q);
        Eigen::VectorXd rho_nodes(q);
        for (Eigen::Index m = 0; m < q; ++m) {
            pos[m] = locate(basis_, nodes[m]);
            rho_nodes[m] = rho_(nodes[m]);
        }
        for (Eigen::Index m = 0; m < q; ++m) {
            const auto col = W.col(m) * rho_nodes[m];
            if (pos[m].frac == 0.0) {
                coupling_.col(pos[m].lo) += col;
            } else {
                coupling_.col(pos[m].lo) += (1.0 - pos[m].frac) * col;
                coupling_.col(pos[m].lo + 1) += pos[m].frac * col;
            }
        }
    } else {
        for (Eigen::Index i = 0; i < N; ++i) {
            for (Eigen::Index m = 0; m < table.width(); ++m) {
                const double w = W(i, m);
                if (w == 0.0) continue;
                const double y = table.node(i, m);
                const InterpPosition p = locate(basis_, y);
                const double c = w * rho_(y);
                coupling_(i, p.lo) += (1.0 - p.frac) * c;
                if (p.frac != 0.0) coupling_(i, p.lo + 1) += p.frac * c;
            }
        }
    }

    Eigen::MatrixXd weighted_labeled(n, B);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = data.labeled()[k];
        weighted_labeled.row(k) = weights_[i] * coupling_.row(i);
    }
    matrix_ = smoother_ * weighted_labeled;
    if (!matrix_.allFinite()) throw NumericalError("Fredholm context: non-finite operator entries");
    solver_ = FredholmSolver(matrix_);
}

NuisanceFunction FredholmContext::solve(const Eigen::MatrixXd& rhs, double ridge) const {
    return {basis_, solver_.solve(rhs, solver_.scaled_lambda(ridge))};
}

FredholmSystem FredholmContext::system(const Eigen::MatrixXd& rhs, double ridge) const {
    FredholmSystem s;
    s.eval_grid = grid_;
    s.basis_points = basis_;
    s.operator_matrix = matrix_;
    s.rhs = rhs;
    s.ridge_lambda = solver_.scaled_lambda(ridge);
    return s;
}

Eigen::MatrixXd FredholmContext::predict(const NuisanceFunction& a) const {
    if (a.basis_points().size() != basis_.size()) throw UsageError("nuisance function basis does not match the operator");
    return weights_.asDiagonal() * (coupling_ * a.values());
}

Eigen::MatrixXd FredholmContext::rhs_from(const std::function<double(double)>& f) const {
    Eigen::MatrixXd rhs(grid_.size(), 1);
    for (Eigen::Index j = 0; j < grid_.size(); ++j) rhs(j, 0) = f(grid_[j]);
    return rhs;
}

FredholmSystem assemble_system(const PooledDataset& data, const DensityRatioModel& rho, const CondExpTable& table,
                               const Eigen::VectorXd& weights, const std::function<Eigen::VectorXd(double)>& rhs_fn,
                               const KernelSpec& l_kernel, double ridge, int grid_size) {
    const FredholmContext ctx(data, table, rho, weights, l_kernel, grid_size);
    const Eigen::VectorXd& grid = ctx.eval_grid();
    Eigen::MatrixXd rhs;
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
        const Eigen::VectorXd v = rhs_fn(grid[j]);
        if (j == 0) rhs.resize(grid.size(), v.size());
        if (v.size() != rhs.cols()) throw UsageError("Fredholm rhs: inconsistent output dimension");
        rhs.row(j) = v.transpose();
    }
    if (!rhs.allFinite()) {
        for (Eigen::Index j = 0; j < grid.size(); ++j) {
            if (!rhs.row(j).allFinite()) {
                throw NumericalError("Fredholm rhs: non-finite value at grid point " + std::to_string(grid[j]));
            }
        }
    }
    FredholmSystem system = ctx.system(rhs, ridge);
    system.validate();
    return system;
}

}  // namespace labelshift
