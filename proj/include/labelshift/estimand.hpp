#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace labelshift {

// theta = E_q{s(Y, X)} (moment) or the root of E_q{U(Y, X, theta)} = 0 (general).
struct Estimand {
    enum class Kind { Moment, General };

    using MomentFn = std::function<double(double y, const Eigen::VectorXd& x)>;
    using ScoreFn = std::function<Eigen::VectorXd(double y, const Eigen::VectorXd& x, const Eigen::VectorXd& theta)>;
    using JacobianFn = std::function<Eigen::MatrixXd(double y, const Eigen::VectorXd& x, const Eigen::VectorXd& theta)>;

    std::string name;
    Kind kind = Kind::Moment;
    Eigen::Index dim = 1;
    // Component of theta reported in summaries.
    Eigen::Index report_index = 0;
    // False when s or U ignores x, which lets integrals over y be shared across rows.
    bool uses_x = false;

    MomentFn s;
    ScoreFn U;
    JacobianFn dU;

    void validate() const;
    Eigen::VectorXd score(double y, const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const;
    Eigen::MatrixXd score_jacobian(double y, const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const;
};

Estimand mean_estimand();
Estimand moment_estimand(std::string name, Estimand::MomentFn s, bool uses_x);
// U = (y - t1, y^2 - t1^2 - t2); reports t2 = var_q(Y).
Estimand variance_estimand();
// U = y - t solved as a general estimating equation.
Estimand mean_score_estimand();

}  // namespace labelshift
