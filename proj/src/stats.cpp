#include "labelshift/stats.hpp"

#include "labelshift/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace labelshift {

double quantile_sorted(const Eigen::VectorXd& sorted, double p) {
    const Eigen::Index n = sorted.size();
    if (n == 0) throw UsageError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("quantile level must lie in [0, 1]");
    const double h = (static_cast<double>(n) - 1.0) * p;
    const auto lo = static_cast<Eigen::Index>(std::floor(h));
    if (lo >= n - 1) return sorted[n - 1];
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double quantile(Eigen::VectorXd values, double p) {
    std::sort(values.data(), values.data() + values.size());
    return quantile_sorted(values, p);
}

double quantile(std::vector<double> values, double p) {
    return quantile(Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())), p);
}

double sample_mean(const std::vector<double>& v) {
    if (v.empty()) throw UsageError("mean of an empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = sample_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace labelshift
