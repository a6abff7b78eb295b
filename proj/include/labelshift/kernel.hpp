#pragma once

#include <Eigen/Dense>

namespace labelshift {

enum class KernelFamily { Gaussian, Epanechnikov, HigherOrderGaussian };

struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    int order = 2;
    double bandwidth = 1.0;

    void validate() const;
};

// Bandwidths of the form c * n^e for the y-kernel K_h, the y-smoother K~_l
// and the covariate smoother of the nonparametric conditional expectation.
struct BandwidthPolicy {
    double h_constant = 0.5;
    double h_exponent = -1.0 / 16.0;
    double l_constant = 1.5;
    double l_exponent = -1.0 / 3.0;
    double nw_constant = 3.0;
    double nw_exponent = -1.0 / 7.0;

    KernelFamily y_family = KernelFamily::Gaussian;
    int y_order = 2;

    // Fixed bandwidths, ignored when <= 0. Used for discrete labels where
    // any h, l below one reduce the y-kernels to class indicators.
    double h_fixed = 0.0;
    double l_fixed = 0.0;

    void validate() const;
    double h(Eigen::Index n) const;
    double l(Eigen::Index n) const;
    double nw(Eigen::Index n) const;
    KernelSpec h_kernel(Eigen::Index n) const;
    KernelSpec l_kernel(Eigen::Index n) const;
};

// K(u) for the unscaled kernel.
double kernel_eval(const KernelSpec& spec, double u);

// K_h(u) = K(u/h)/h.
double kernel_scaled(const KernelSpec& spec, double u);

double kde(const Eigen::VectorXd& samples, double y0, const KernelSpec& spec);

// Nadaraya-Watson average of anchor rows at a scalar query.
Eigen::VectorXd nw_regress(const Eigen::VectorXd& anchor_y, const Eigen::MatrixXd& values,
                           double query, const KernelSpec& spec);

// Row-normalized smoother matrix S[j,i] = K~_l(q_j - y_i) / sum_t K~_l(q_j - y_t).
Eigen::MatrixXd nw_smoother(const Eigen::VectorXd& queries, const Eigen::VectorXd& anchors,
                            const KernelSpec& spec);

}  // namespace labelshift
