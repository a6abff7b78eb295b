#pragma once

#include <Eigen/Dense>
#include <vector>

namespace labelshift {

// Labeled source rows (r=1, y, x) pooled with unlabeled target rows (r=0, x).
// y is NaN on unlabeled rows.
class PooledDataset {
public:
    PooledDataset() = default;
    PooledDataset(std::vector<int> r, Eigen::VectorXd y, Eigen::MatrixXd x);

    Eigen::Index N() const { return static_cast<Eigen::Index>(r_.size()); }
    Eigen::Index n() const { return static_cast<Eigen::Index>(labeled_.size()); }
    Eigen::Index dim() const { return x_.cols(); }
    double pi() const { return static_cast<double>(n()) / static_cast<double>(N()); }

    const std::vector<int>& r() const { return r_; }
    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::MatrixXd& x() const { return x_; }
    const std::vector<Eigen::Index>& labeled() const { return labeled_; }
    const std::vector<Eigen::Index>& unlabeled() const { return unlabeled_; }

    Eigen::VectorXd labeled_y() const;
    Eigen::MatrixXd labeled_x() const;

    bool has_predictions() const { return y_pred_.size() == N(); }
    const Eigen::VectorXd& predictions() const { return y_pred_; }
    void set_predictions(Eigen::VectorXd y_pred);

    // Same rows in a new order; row k of the result is row perm[k] of this.
    PooledDataset permuted(const std::vector<Eigen::Index>& perm) const;

private:
    std::vector<int> r_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_pred_;
    std::vector<Eigen::Index> labeled_;
    std::vector<Eigen::Index> unlabeled_;
};

}  // namespace labelshift
