#pragma once

#include "labelshift/condexp.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/ratio_model.hpp"

#include <Eigen/Dense>
#include <vector>

namespace labelshift {

struct DiscreteRatio {
    std::vector<int> classes;  // ascending
    Eigen::VectorXd values;
    double clip_floor = kDefaultClipFloor;

    void validate() const;
    double operator()(int label) const;
    Eigen::Index index_of(int label) const;
    // Knot model through (class, value) pairs; exact at every class label.
    DensityRatioModel as_model() const;
};

// Distinct labels among labeled rows. Labels must be integers.
std::vector<int> labeled_classes(const PooledDataset& data);

struct DiscreteClassFit {
    double prob = 0.0;
    double direct = 0.0;
    double rectifier = 0.0;
    Eigen::VectorXd a;  // one value per class
};

// Pr_q(Y = k0) through the K x K indicator-kernel system; ridge is relative to trace(M^T M)/K.
DiscreteClassFit discrete_class_fit(const PooledDataset& data, int k0, const DiscreteRatio& rho,
                                    const CondExpTable& table, double ridge);

double discrete_class_prob(const PooledDataset& data, int k0, const DiscreteRatio& rho, const CondExpTable& table,
                           double ridge);

// C[k,l] = P(pred = k | y = l), q* = C^{-1} q_X, rho*(k) = q*(k) / p(k).
DiscreteRatio confusion_matrix_ratio(const std::vector<int>& labeled_y, const std::vector<int>& labeled_pred,
                                     const std::vector<int>& unlabeled_pred, double clip_floor = kDefaultClipFloor);

// Stage rho~ from rho_star, then rho^ from rho~. The intermediate stage is returned through tilde_out.
DiscreteRatio discrete_ratio_estimate(const PooledDataset& data, const CondExpTable& table,
                                      const DiscreteRatio& rho_star, double ridge, DiscreteRatio* tilde_out = nullptr);

}  // namespace labelshift
