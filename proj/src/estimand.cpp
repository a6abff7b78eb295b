#include "labelshift/estimand.hpp"

#include "labelshift/error.hpp"

#include <algorithm>
#include <cmath>

namespace labelshift {

void Estimand::validate() const {
    if (dim < 1) throw UsageError("estimand dimension must be at least 1");
    if (report_index < 0 || report_index >= dim) throw UsageError("estimand report index out of range");
    if (kind == Kind::Moment) {
        if (dim != 1 || !s) throw UsageError("moment estimand needs a scalar s(y, x)");
    } else if (!U) {
        throw UsageError("general estimand needs U(y, x, theta)");
    }
}

Eigen::VectorXd Estimand::score(double y, const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const {
    if (kind == Kind::Moment) return Eigen::VectorXd::Constant(1, s(y, x) - theta[0]);
    return U(y, x, theta);
}

Eigen::MatrixXd Estimand::score_jacobian(double y, const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const {
    if (kind == Kind::Moment) return Eigen::MatrixXd::Constant(1, 1, -1.0);
    if (dU) return dU(y, x, theta);
    const Eigen::VectorXd u0 = U(y, x, theta);
    Eigen::MatrixXd J(u0.size(), theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        Eigen::VectorXd t = theta;
        const double step = 1e-6 * std::max(1.0, std::abs(theta[k]));
        t[k] += step;
        J.col(k) = (U(y, x, t) - u0) / step;
    }
    return J;
}

Estimand mean_estimand() {
    return moment_estimand("mean", [](double y, const Eigen::VectorXd&) { return y; }, false);
}

Estimand moment_estimand(std::string name, Estimand::MomentFn s, bool uses_x) {
    Estimand e;
    e.name = std::move(name);
    e.kind = Estimand::Kind::Moment;
    e.dim = 1;
    e.uses_x = uses_x;
    e.s = std::move(s);
    return e;
}

Estimand variance_estimand() {
    Estimand e;
    e.name = "variance";
    e.kind = Estimand::Kind::General;
    e.dim = 2;
    e.report_index = 1;
    e.U = [](double y, const Eigen::VectorXd&, const Eigen::VectorXd& t) {
        Eigen::VectorXd u(2);
        u << y - t[0], y * y - t[0] * t[0] - t[1];
        return u;
    };
    e.dU = [](double, const Eigen::VectorXd&, const Eigen::VectorXd& t) {
        Eigen::MatrixXd j(2, 2);
        j << -1.0, 0.0, -2.0 * t[0], -1.0;
        return j;
    };
    return e;
}

Estimand mean_score_estimand() {
    Estimand e;
    e.name = "mean";
    e.kind = Estimand::Kind::General;
    e.dim = 1;
    e.U = [](double y, const Eigen::VectorXd&, const Eigen::VectorXd& t) {
        return Eigen::VectorXd::Constant(1, y - t[0]);
    };
    e.dU = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, -1.0); };
    return e;
}

}  // namespace labelshift
