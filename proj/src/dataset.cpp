#include "labelshift/dataset.hpp"

#include "labelshift/error.hpp"

#include <cmath>
#include <string>

namespace labelshift {

PooledDataset::PooledDataset(std::vector<int> r, Eigen::VectorXd y, Eigen::MatrixXd x)
    : r_(std::move(r)), y_(std::move(y)), x_(std::move(x)) {
    const auto N = static_cast<Eigen::Index>(r_.size());
    if (y_.size() != N || x_.rows() != N) {
        throw UsageError("dataset: r, y and x must have the same number of rows");
    }
    for (Eigen::Index i = 0; i < N; ++i) {
        if (r_[i] == 1) {
            if (!std::isfinite(y_[i])) {
                throw UsageError("dataset: labeled row " + std::to_string(i) + " has no finite y");
            }
            labeled_.push_back(i);
        } else if (r_[i] == 0) {
            y_[i] = std::nan("");
            unlabeled_.push_back(i);
        } else {
            throw UsageError("r must be 0 or 1, row " + std::to_string(i));
        }
    }
    if (!x_.allFinite()) throw UsageError("dataset: covariates must be finite");
    if (labeled_.empty()) throw UsageError("dataset: no labeled rows");
    if (unlabeled_.empty()) throw UsageError("dataset: no unlabeled rows");
}

Eigen::VectorXd PooledDataset::labeled_y() const {
    Eigen::VectorXd out(n());
    for (Eigen::Index k = 0; k < n(); ++k) out[k] = y_[labeled_[k]];
    return out;
}

Eigen::MatrixXd PooledDataset::labeled_x() const {
    Eigen::MatrixXd out(n(), dim());
    for (Eigen::Index k = 0; k < n(); ++k) out.row(k) = x_.row(labeled_[k]);
    return out;
}

void PooledDataset::set_predictions(Eigen::VectorXd y_pred) {
    if (y_pred.size() != N()) throw UsageError("dataset: prediction column has the wrong length");
    y_pred_ = std::move(y_pred);
}

PooledDataset PooledDataset::permuted(const std::vector<Eigen::Index>& perm) const {
    if (static_cast<Eigen::Index>(perm.size()) != N()) throw UsageError("permutation has the wrong length");
    std::vector<int> r(perm.size());
    Eigen::VectorXd y(N());
    Eigen::MatrixXd x(N(), dim());
    for (Eigen::Index k = 0; k < N(); ++k) {
        r[k] = r_[perm[k]];
        y[k] = y_[perm[k]];
        x.row(k) = x_.row(perm[k]);
    }
    PooledDataset out(std::move(r), std::move(y), std::move(x));
    if (has_predictions()) {
        Eigen::VectorXd p(N());
        for (Eigen::Index k = 0; k < N(); ++k) p[k] = y_pred_[perm[k]];
        out.set_predictions(std::move(p));
    }
    return out;
}

}  // namespace labelshift
