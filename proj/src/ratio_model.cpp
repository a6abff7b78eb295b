#include "labelshift/ratio_model.hpp"

#include "labelshift/error.hpp"

#include <algorithm>
#include <cmath>

namespace labelshift {

DensityRatioModel::DensityRatioModel() : f_([](double) { return 1.0; }) {}

DensityRatioModel DensityRatioModel::closed_form(std::function<double(double)> f) {
    if (!f) throw UsageError("density ratio: empty closed form");
    DensityRatioModel m;
    m.kind_ = Kind::ClosedForm;
    m.f_ = std::move(f);
    return m;
}

DensityRatioModel DensityRatioModel::constant(double c) {
    if (!(c > 0.0)) throw UsageError("density ratio: constant must be positive");
    return closed_form([c](double) { return c; });
}

DensityRatioModel DensityRatioModel::grid(Eigen::VectorXd knots, Eigen::VectorXd values, double clip_floor) {
    if (knots.size() == 0 || knots.size() != values.size()) {
        throw UsageError("density ratio: knots and values must be nonempty and equal in length");
    }
    if (!(clip_floor > 0.0)) throw UsageError("density ratio: clip floor must be positive");
    for (Eigen::Index k = 1; k < knots.size(); ++k) {
        if (!(knots[k] > knots[k - 1])) throw UsageError("density ratio: knots must be strictly increasing");
    }
    if (!values.allFinite()) throw NumericalError("density ratio: non-finite knot value");
    DensityRatioModel m;
    m.kind_ = Kind::Grid;
    m.f_ = nullptr;
    m.knots_ = std::move(knots);
    m.values_ = values.cwiseMax(clip_floor);
    m.clip_floor_ = clip_floor;
    return m;
}

double DensityRatioModel::operator()(double y) const {
    if (kind_ == Kind::Grid) return interpolate(knots_, values_, y);
    return f_(y);
}

Eigen::VectorXd DensityRatioModel::operator()(const Eigen::VectorXd& y) const {
    Eigen::VectorXd out(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = (*this)(y[i]);
    return out;
}

InterpPosition locate(const Eigen::VectorXd& grid, double y) {
    const Eigen::Index B = grid.size();
    if (B == 1 || y <= grid[0]) return {0, 0.0};
    if (y >= grid[B - 1]) return {B - 1, 0.0};
    const double* begin = grid.data();
    const double* it = std::upper_bound(begin, begin + B, y);
    const Eigen::Index lo = static_cast<Eigen::Index>(it - begin) - 1;
    const double frac = (y - grid[lo]) / (grid[lo + 1] - grid[lo]);
    return {lo, frac};
}

double interpolate(const Eigen::VectorXd& grid, const Eigen::VectorXd& values, double y) {
    const InterpPosition p = locate(grid, y);
    if (p.frac == 0.0) return values[p.lo];
    return (1.0 - p.frac) * values[p.lo] + p.frac * values[p.lo + 1];
}

}  // namespace labelshift
