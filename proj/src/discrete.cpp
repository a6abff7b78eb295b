#include "labelshift/discrete.hpp"

#include "labelshift/error.hpp"
#include "labelshift/fredholm.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace labelshift {

namespace {

int as_label(double y, const char* what) {
    const double r = std::round(y);
    if (!std::isfinite(y) || std::abs(y - r) > 1e-9) {
        throw UsageError(std::string(what) + ": labels must be integers");
    }
    return static_cast<int>(r);
}

}  // namespace

void DiscreteRatio::validate() const {
    if (classes.size() < 2) throw UsageError("discrete ratio needs at least two classes");
    if (static_cast<Eigen::Index>(classes.size()) != values.size()) throw UsageError("discrete ratio: size mismatch");
    for (std::size_t k = 1; k < classes.size(); ++k) {
        if (classes[k] <= classes[k - 1]) throw UsageError("discrete ratio: classes must be strictly increasing");
    }
    if ((values.array() < clip_floor).any()) throw UsageError("discrete ratio: values below the clip floor");
}

Eigen::Index DiscreteRatio::index_of(int label) const {
    const auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label) throw UsageError("class " + std::to_string(label) + " is not modelled");
    return static_cast<Eigen::Index>(it - classes.begin());
}

double DiscreteRatio::operator()(int label) const { return values[index_of(label)]; }

DensityRatioModel DiscreteRatio::as_model() const {
    validate();
    Eigen::VectorXd knots(values.size());
    for (Eigen::Index k = 0; k < knots.size(); ++k) knots[k] = classes[k];
    return DensityRatioModel::grid(knots, values, clip_floor);
}

std::vector<int> labeled_classes(const PooledDataset& data) {
    std::vector<int> out;
    for (Eigen::Index i : data.labeled()) out.push_back(as_label(data.y()[i], "discrete mode"));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

DiscreteClassFit discrete_class_fit(const PooledDataset& data, int k0, const DiscreteRatio& rho,
                                    const CondExpTable& table, double ridge) {
    rho.validate();
    if (table.rows() != data.N()) throw UsageError("conditional expectation table has the wrong row count");
    const std::vector<int> classes = labeled_classes(data);
    if (!std::binary_search(classes.begin(), classes.end(), k0)) {
        throw UsageError("class " + std::to_string(k0) + " is absent from the labeled data");
    }
    const auto K = static_cast<Eigen::Index>(classes.size());
    auto class_index = [&](int label) {
        const auto it = std::lower_bound(classes.begin(), classes.end(), label);
        if (it == classes.end() || *it != label) {
            throw UsageError("conditional expectation node " + std::to_string(label) + " is not a labeled class");
        }
        return static_cast<Eigen::Index>(it - classes.begin());
    };
    Eigen::VectorXd rk(K);
    for (Eigen::Index k = 0; k < K; ++k) rk[k] = rho(classes[k]);

    // Posterior class masses W[i,k] = sum of conditional-expectation weight on class k.
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(data.N(), K);
    if (table.shared()) {
        const Eigen::VectorXd& nodes = table.shared_node_vector();
        Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(nodes.size(), K);
        for (Eigen::Index m = 0; m < nodes.size(); ++m) {
            onehot(m, class_index(as_label(nodes[m], "conditional expectation"))) = 1.0;
        }
        W = table.weights() * onehot;
    }
    for (Eigen::Index i = 0; i < data.N() && !table.shared(); ++i) {
        for (Eigen::Index m = 0; m < table.width(); ++m) {
            const double w = table.weights()(i, m);
            if (w != 0.0) W(i, class_index(as_label(table.node(i, m), "conditional expectation"))) += w;
        }
    }
    const double c = data.pi() / (1.0 - data.pi());
    const Eigen::VectorXd inner = W * (rk.array().square() + c * rk.array()).matrix();
    if ((inner.array() <= 0.0).any()) throw NumericalError("weights: nonpositive conditional expectation");
    const Eigen::VectorXd w = inner.cwiseInverse();

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(K, K);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i : data.labeled()) {
        const Eigen::Index j = class_index(as_label(data.y()[i], "discrete mode"));
        M.row(j) += w[i] * W.row(i).cwiseProduct(rk.transpose());
        counts[j] += 1.0;
    }
    M = counts.cwiseInverse().asDiagonal() * M;

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(K, 1);
    rhs(class_index(k0), 0) = 1.0;
    const FredholmSolver solver(M);
    if (ridge == 0.0 && !solver.full_column_rank()) {
        throw NumericalError("discrete system is singular; use ridge > 0");
    }
    DiscreteClassFit fit;
    fit.a = solver.solve(rhs, solver.scaled_lambda(ridge)).col(0);

    const Eigen::VectorXd pred = w.cwiseProduct(W * rk.cwiseProduct(fit.a));
    double direct = 0.0;
    for (Eigen::Index i : data.unlabeled()) direct += pred[i];
    fit.direct = direct / static_cast<double>(data.unlabeled().size());
    double rect = 0.0;
    for (Eigen::Index i : data.labeled()) {
        const int yi = as_label(data.y()[i], "discrete mode");
        rect += rk[class_index(yi)] * ((yi == k0 ? 1.0 : 0.0) - pred[i]);
    }
    fit.rectifier = rect / static_cast<double>(data.n());
    fit.prob = fit.direct + fit.rectifier;
    return fit;
}

double discrete_class_prob(const PooledDataset& data, int k0, const DiscreteRatio& rho, const CondExpTable& table,
                           double ridge) {
    return discrete_class_fit(data, k0, rho, table, ridge).prob;
}

DiscreteRatio confusion_matrix_ratio(const std::vector<int>& labeled_y, const std::vector<int>& labeled_pred,
                                     const std::vector<int>& unlabeled_pred, double clip_floor) {
    if (labeled_y.empty() || unlabeled_pred.empty()) throw UsageError("confusion matrix: empty input");
    if (labeled_y.size() != labeled_pred.size()) throw UsageError("confusion matrix: labels and predictions differ in length");
    std::vector<int> classes = labeled_y;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const auto K = static_cast<Eigen::Index>(classes.size());
    if (K < 2) throw UsageError("confusion matrix: at least two classes are needed");
    auto index = [&](int label) {
        const auto it = std::lower_bound(classes.begin(), classes.end(), label);
        if (it == classes.end() || *it != label) {
            throw UsageError("confusion matrix: prediction " + std::to_string(label) + " is not a labeled class");
        }
        return static_cast<Eigen::Index>(it - classes.begin());
    };
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(K, K);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(K);
    for (std::size_t i = 0; i < labeled_y.size(); ++i) {
        const Eigen::Index l = index(labeled_y[i]);
        C(index(labeled_pred[i]), l) += 1.0;
        p[l] += 1.0;
    }
    C = C * p.cwiseInverse().asDiagonal();
    p /= static_cast<double>(labeled_y.size());
    Eigen::VectorXd qx = Eigen::VectorXd::Zero(K);
    for (int k : unlabeled_pred) qx[index(k)] += 1.0;
    qx /= static_cast<double>(unlabeled_pred.size());

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    const Eigen::VectorXd s = svd.singularValues();
    if (!(s[K - 1] > 0.0) || s[0] / s[K - 1] > 1e8) throw NumericalError("confusion matrix not invertible");
    const Eigen::VectorXd q = C.partialPivLu().solve(qx);

    DiscreteRatio out;
    out.classes = classes;
    out.clip_floor = clip_floor;
    out.values = q.cwiseQuotient(p).cwiseMax(clip_floor);
    return out;
}

DiscreteRatio discrete_ratio_estimate(const PooledDataset& data, const CondExpTable& table,
                                      const DiscreteRatio& rho_star, double ridge, DiscreteRatio* tilde_out) {
    const std::vector<int> classes = labeled_classes(data);
    if (classes != rho_star.classes) throw UsageError("rho_star classes must match the labeled classes");
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes.size()));
    for (Eigen::Index i : data.labeled()) freq[rho_star.index_of(as_label(data.y()[i], "discrete mode"))] += 1.0;
    freq /= static_cast<double>(data.n());

    auto stage = [&](const DiscreteRatio& model) {
        DiscreteRatio out;
        out.classes = classes;
        out.clip_floor = rho_star.clip_floor;
        out.values.resize(freq.size());
        for (Eigen::Index k = 0; k < freq.size(); ++k) {
            const double q = discrete_class_prob(data, classes[k], model, table, ridge);
            out.values[k] = std::max(rho_star.clip_floor, q / freq[k]);
        }
        return out;
    };
    const DiscreteRatio tilde = stage(rho_star);
    if (tilde_out) *tilde_out = tilde;
    return stage(tilde);
}

}  // namespace labelshift
