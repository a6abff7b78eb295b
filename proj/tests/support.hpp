#pragma once

#include "labelshift/condexp.hpp"
#include "labelshift/dataset.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

namespace labelshift::testutil {

inline double normal_pdf(double y, double mean, double var) {
    return std::exp(-0.5 * (y - mean) * (y - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Rows 0..n-1 labeled, the rest unlabeled.
inline PooledDataset split_dataset(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, Eigen::Index n) {
    std::vector<int> r(static_cast<std::size_t>(y.size()), 0);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = 1;
    return PooledDataset(r, y, x);
}

struct NwFit {
    std::shared_ptr<NadarayaWatsonCondExp> model;
    CondExpTable table;
};

inline NwFit nw_fit(const PooledDataset& d, double bandwidth) {
    NwFit f;
    f.model = fit_cond_exp_nonparametric(d.labeled_y(), d.labeled_x(), bandwidth);
    f.table = CondExpTable(*f.model, d.x());
    return f;
}

// Gaussian location model with X | Y ~ N(alpha Y, I).
struct GaussianShift {
    double source_mean = 0.0;
    double source_var = 1.0;
    double target_mean = 0.0;
    double target_var = 1.0;
    Eigen::VectorXd alpha = (Eigen::VectorXd(3) << -0.5, 0.5, 1.0).finished();

    PooledDataset draw(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng, Eigen::VectorXd* hidden = nullptr) const {
        std::normal_distribution<double> z(0.0, 1.0);
        const Eigen::Index N = n + m;
        Eigen::VectorXd y(N);
        Eigen::MatrixXd x(N, alpha.size());
        for (Eigen::Index i = 0; i < N; ++i) {
            y[i] = i < n ? source_mean + std::sqrt(source_var) * z(rng) : target_mean + std::sqrt(target_var) * z(rng);
            for (Eigen::Index k = 0; k < alpha.size(); ++k) x(i, k) = alpha[k] * y[i] + z(rng);
        }
        if (hidden) *hidden = y;
        return split_dataset(y, x, n);
    }
};

}  // namespace labelshift::testutil
