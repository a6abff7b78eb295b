#include "labelshift/kernel.hpp"

#include "labelshift/error.hpp"

#include <cmath>
#include <numbers>

namespace labelshift {

namespace {

constexpr double kTiny = 1e-300;

double std_normal_pdf(double u) {
    return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

// Probabilists' Hermite polynomial He_k(u).
double hermite_he(int k, double u) {
    if (k == 0) return 1.0;
    double prev = 1.0;
    double cur = u;
    for (int j = 1; j < k; ++j) {
        const double next = u * cur - j * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

}  // namespace

void KernelSpec::validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw UsageError("kernel bandwidth must be positive");
    if (order < 2 || order % 2 != 0) throw UsageError("kernel order must be even and at least 2");
    if (family != KernelFamily::HigherOrderGaussian && order != 2) {
        throw UsageError("only the higher-order Gaussian family supports order > 2");
    }
}

void BandwidthPolicy::validate() const {
    for (double c : {h_constant, l_constant, nw_constant}) {
        if (!(c > 0.0)) throw UsageError("bandwidth constants must be positive");
    }
    for (double e : {h_exponent, l_exponent, nw_exponent}) {
        if (!(e > -1.0 && e < 0.0)) throw UsageError("bandwidth exponents must lie in (-1, 0)");
    }
    KernelSpec{y_family, y_order, 1.0}.validate();
}

double BandwidthPolicy::h(Eigen::Index n) const {
    return h_fixed > 0.0 ? h_fixed : h_constant * std::pow(static_cast<double>(n), h_exponent);
}

double BandwidthPolicy::l(Eigen::Index n) const {
    return l_fixed > 0.0 ? l_fixed : l_constant * std::pow(static_cast<double>(n), l_exponent);
}

double BandwidthPolicy::nw(Eigen::Index n) const {
    return nw_constant * std::pow(static_cast<double>(n), nw_exponent);
}

KernelSpec BandwidthPolicy::h_kernel(Eigen::Index n) const { return {y_family, y_order, h(n)}; }

KernelSpec BandwidthPolicy::l_kernel(Eigen::Index n) const {
    // The smoother K~_l only needs to be a nonnegative weighting.
    const KernelFamily f = y_family == KernelFamily::HigherOrderGaussian ? KernelFamily::Gaussian : y_family;
    return {f, 2, l(n)};
}

double kernel_eval(const KernelSpec& spec, double u) {
    double v = 0.0;
    switch (spec.family) {
        case KernelFamily::Gaussian:
            v = std_normal_pdf(u);
            break;
        case KernelFamily::Epanechnikov:
            v = std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
            break;
        case KernelFamily::HigherOrderGaussian: {
            double poly = 0.0;
            double scale = 1.0;  // (-1)^k / (2^k k!)
            for (int k = 0; k < spec.order / 2; ++k) {
                poly += scale * hermite_he(2 * k, u);
                scale *= -1.0 / (2.0 * (k + 1));
            }
            v = poly * std_normal_pdf(u);
            break;
        }
    }
    return std::abs(v) < kTiny ? 0.0 : v;
}

double kernel_scaled(const KernelSpec& spec, double u) {
    return kernel_eval(spec, u / spec.bandwidth) / spec.bandwidth;
}

double kde(const Eigen::VectorXd& samples, double y0, const KernelSpec& spec) {
    spec.validate();
    if (samples.size() == 0) throw UsageError("kde: empty sample");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < samples.size(); ++i) acc += kernel_scaled(spec, samples[i] - y0);
    return acc / static_cast<double>(samples.size());
}

Eigen::VectorXd nw_regress(const Eigen::VectorXd& anchor_y, const Eigen::MatrixXd& values, double query,
                           const KernelSpec& spec) {
    spec.validate();
    if (anchor_y.size() == 0 || values.rows() != anchor_y.size()) {
        throw UsageError("nw_regress: anchors and values disagree in length");
    }
    Eigen::VectorXd num = Eigen::VectorXd::Zero(values.cols());
    double den = 0.0;
    for (Eigen::Index i = 0; i < anchor_y.size(); ++i) {
        const double k = kernel_eval(spec, (query - anchor_y[i]) / spec.bandwidth);
        if (k == 0.0) continue;
        num += k * values.row(i).transpose();
        den += k;
    }
    if (den < 1e-12) throw SupportError("query outside data support");
    return num / den;
}

Eigen::MatrixXd nw_smoother(const Eigen::VectorXd& queries, const Eigen::VectorXd& anchors, const KernelSpec& spec) {
    spec.validate();
    Eigen::MatrixXd S(queries.size(), anchors.size());
    for (Eigen::Index j = 0; j < queries.size(); ++j) {
        double den = 0.0;
        for (Eigen::Index i = 0; i < anchors.size(); ++i) {
            const double k = kernel_eval(spec, (queries[j] - anchors[i]) / spec.bandwidth);
            S(j, i) = k;
            den += k;
        }
        if (den < 1e-12) {
            throw SupportError("query outside data support at y = " + std::to_string(queries[j]));
        }
        S.row(j) /= den;
    }
    return S;
}

}  // namespace labelshift
