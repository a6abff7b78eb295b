#pragma once

#include <Eigen/Dense>
#include <functional>

namespace labelshift {

inline constexpr double kDefaultClipFloor = 1e-3;

// A positive function of y: either a closed form or a piecewise-linear
// interpolant through knot values, flat beyond the outer knots.
class DensityRatioModel {
public:
    enum class Kind { ClosedForm, Grid };

    DensityRatioModel();  // rho == 1
    static DensityRatioModel closed_form(std::function<double(double)> f);
    static DensityRatioModel constant(double c);
    static DensityRatioModel grid(Eigen::VectorXd knots, Eigen::VectorXd values,
                                  double clip_floor = kDefaultClipFloor);

    Kind kind() const { return kind_; }
    double operator()(double y) const;
    Eigen::VectorXd operator()(const Eigen::VectorXd& y) const;

    const Eigen::VectorXd& knots() const { return knots_; }
    const Eigen::VectorXd& values() const { return values_; }
    double clip_floor() const { return clip_floor_; }

private:
    Kind kind_ = Kind::ClosedForm;
    std::function<double(double)> f_;
    Eigen::VectorXd knots_;
    Eigen::VectorXd values_;
    double clip_floor_ = kDefaultClipFloor;
};

// Linear interpolation position of y inside an ascending grid.
// value = (1 - frac) * v[lo] + frac * v[lo + 1]; frac is 0 outside the grid.
struct InterpPosition {
    Eigen::Index lo = 0;
    double frac = 0.0;
};

InterpPosition locate(const Eigen::VectorXd& grid, double y);

double interpolate(const Eigen::VectorXd& grid, const Eigen::VectorXd& values, double y);

}  // namespace labelshift
