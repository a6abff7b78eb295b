#pragma once

#include "labelshift/condexp.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/kernel.hpp"
#include "labelshift/ratio_model.hpp"

#include <Eigen/Dense>
#include <functional>

namespace labelshift {

inline constexpr int kDefaultGridSize = 100;
inline constexpr double kDefaultRidge = 6e-2;
inline constexpr double kDefaultRhoRidge = 3e-3;

struct FredholmSystem {
    Eigen::VectorXd eval_grid;
    Eigen::VectorXd basis_points;
    Eigen::MatrixXd operator_matrix;
    Eigen::MatrixXd rhs;
    double ridge_lambda = 0.0;

    void validate() const;
};

// a(y) stored at basis points, one column per output dimension.
class NuisanceFunction {
public:
    NuisanceFunction() = default;
    NuisanceFunction(Eigen::VectorXd basis_points, Eigen::MatrixXd values);

    Eigen::Index dim() const { return values_.cols(); }
    const Eigen::VectorXd& basis_points() const { return basis_; }
    const Eigen::MatrixXd& values() const { return values_; }

    double operator()(double y, Eigen::Index col = 0) const;
    Eigen::VectorXd row(double y) const;

private:
    Eigen::VectorXd basis_;
    Eigen::MatrixXd values_;
};

// SVD of an operator matrix, reusable across right-hand sides and ridge values.
class FredholmSolver {
public:
    FredholmSolver() = default;
    explicit FredholmSolver(const Eigen::MatrixXd& op);

    // argmin ||M a - rhs||^2 + lambda ||a||^2 with an absolute lambda.
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs, double lambda) const;
    // lambda = ridge * trace(M^T M) / cols.
    double scaled_lambda(double ridge) const;
    bool full_column_rank() const;
    const Eigen::VectorXd& singular_values() const { return s_; }

private:
    Eigen::MatrixXd u_;
    Eigen::VectorXd s_;
    Eigen::MatrixXd v_;
    Eigen::Index cols_ = 0;
};

NuisanceFunction solve(const FredholmSystem& system);

Eigen::VectorXd unique_sorted(const Eigen::VectorXd& v);

// Quantile grid at levels (k + 1/2)/G, or the distinct values when there are at most G.
Eigen::VectorXd default_eval_grid(const Eigen::VectorXd& labeled_y, int grid_size);

// The discretized operator for one density-ratio model.
// Row j of matrix is the coefficient vector of a(basis) in
// sum_i S[j,i] w_i E_p{a(Y) rho(Y) | x_i} over labeled i.
class FredholmContext {
public:
    FredholmContext(const PooledDataset& data, const CondExpTable& table, const DensityRatioModel& rho,
                    Eigen::VectorXd weights, const KernelSpec& l_kernel, int grid_size);

    const PooledDataset& data() const { return *data_; }
    const CondExpTable& table() const { return *table_; }
    const DensityRatioModel& rho() const { return rho_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    const Eigen::VectorXd& rho_labeled() const { return rho_labeled_; }
    const Eigen::VectorXd& eval_grid() const { return grid_; }
    const Eigen::VectorXd& basis_points() const { return basis_; }
    // G x n, columns follow data().labeled().
    const Eigen::MatrixXd& smoother() const { return smoother_; }
    // N x B, E_p{a(Y) rho(Y) | x_i} = coupling.row(i) * a.
    const Eigen::MatrixXd& coupling() const { return coupling_; }
    const Eigen::MatrixXd& matrix() const { return matrix_; }
    const FredholmSolver& solver() const { return solver_; }

    // Columns of rhs are on eval_grid; ridge is relative (see FredholmSolver::scaled_lambda).
    NuisanceFunction solve(const Eigen::MatrixXd& rhs, double ridge) const;
    FredholmSystem system(const Eigen::MatrixXd& rhs, double ridge) const;
    // w_i E_p{a(Y) rho(Y) | x_i} for every row, one column per output of a.
    Eigen::MatrixXd predict(const NuisanceFunction& a) const;
    Eigen::MatrixXd rhs_from(const std::function<double(double)>& f) const;

private:
    const PooledDataset* data_;
    const CondExpTable* table_;
    DensityRatioModel rho_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd rho_labeled_;
    Eigen::VectorXd grid_;
    Eigen::VectorXd basis_;
    Eigen::MatrixXd smoother_;
    Eigen::MatrixXd coupling_;
    Eigen::MatrixXd matrix_;
    FredholmSolver solver_;
};

FredholmSystem assemble_system(const PooledDataset& data, const DensityRatioModel& rho,
                               const CondExpTable& table, const Eigen::VectorXd& weights,
                               const std::function<Eigen::VectorXd(double)>& rhs_fn,
                               const KernelSpec& l_kernel, double ridge,
                               int grid_size = kDefaultGridSize);

}  // namespace labelshift
