#pragma once

#include <Eigen/Dense>
#include <vector>

namespace labelshift {

// Linear-interpolation sample quantile (Hyndman-Fan type 7).
double quantile_sorted(const Eigen::VectorXd& sorted, double p);
double quantile(Eigen::VectorXd values, double p);
double quantile(std::vector<double> values, double p);

double sample_mean(const std::vector<double>& v);
// Divisor n - 1.
double sample_sd(const std::vector<double>& v);

}  // namespace labelshift
