#include "labelshift/condexp.hpp"

#include "labelshift/error.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace labelshift {

double CondExpModel::expect(const std::function<double(double)>& f, const Eigen::VectorXd& x) const {
    const QuadratureRule q = rule(x);
    double acc = 0.0;
    for (Eigen::Index m = 0; m < q.nodes.size(); ++m) acc += q.weights[m] * f(q.nodes[m]);
    return acc;
}

NadarayaWatsonCondExp::NadarayaWatsonCondExp(Eigen::VectorXd labeled_y, Eigen::MatrixXd labeled_x, double bandwidth)
    : y_(std::move(labeled_y)), x_(std::move(labeled_x)), bandwidth_(bandwidth) {
    if (y_.size() == 0) throw UsageError("conditional expectation: no labeled rows");
    if (x_.rows() != y_.size()) throw UsageError("conditional expectation: y and x row counts differ");
    if (!(bandwidth_ > 0.0)) throw UsageError("conditional expectation: bandwidth must be positive");
}

Eigen::MatrixXd NadarayaWatsonCondExp::weight_matrix(const Eigen::MatrixXd& queries) const {
    if (queries.cols() != x_.cols()) throw UsageError("conditional expectation: covariate dimension mismatch");
    const Eigen::Index n = x_.rows();
    const Eigen::Index d = x_.cols();
    const double scale = -0.5 / (bandwidth_ * bandwidth_);
    Eigen::MatrixXd W(queries.rows(), n);
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        double den = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double d2 = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) {
                const double diff = queries(q, k) - x_(i, k);
                d2 += diff * diff;
            }
            double k = std::exp(scale * d2);
            if (k < 1e-300) k = 0.0;
            W(q, i) = k;
            den += k;
        }
        if (den < 1e-12) throw SupportError("query outside data support at covariate row " + std::to_string(q));
        W.row(q) /= den;
    }
    return W;
}

QuadratureRule NadarayaWatsonCondExp::rule(const Eigen::VectorXd& x) const {
    return {y_, weight_matrix(x.transpose()).row(0).transpose()};
}

std::shared_ptr<NadarayaWatsonCondExp> fit_cond_exp_nonparametric(const Eigen::VectorXd& labeled_y,
                                                                  const Eigen::MatrixXd& labeled_x,
                                                                  double bandwidth) {
    return std::make_shared<NadarayaWatsonCondExp>(labeled_y, labeled_x, bandwidth);
}

CondExpTable::CondExpTable(const CondExpModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.covariate_dim()) throw UsageError("conditional expectation: covariate dimension mismatch");
    if (const auto* nw = dynamic_cast<const NadarayaWatsonCondExp*>(&model)) {
        shared_ = true;
        shared_nodes_ = nw->nodes();
        weights_ = nw->weight_matrix(x);
        return;
    }
    shared_ = model.shared_nodes();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const QuadratureRule q = model.rule(x.row(i).transpose());
        if (i == 0) {
            weights_.resize(x.rows(), q.nodes.size());
            if (shared_) {
                shared_nodes_ = q.nodes;
            } else {
                row_nodes_.resize(x.rows(), q.nodes.size());
            }
        }
        if (q.nodes.size() != weights_.cols()) throw UsageError("conditional expectation: varying quadrature width");
        weights_.row(i) = q.weights.transpose();
        if (!shared_) row_nodes_.row(i) = q.nodes.transpose();
    }
}

Eigen::VectorXd CondExpTable::expect(const std::function<double(double)>& f) const {
    if (shared_) {
        Eigen::VectorXd fv(shared_nodes_.size());
        for (Eigen::Index m = 0; m < fv.size(); ++m) fv[m] = f(shared_nodes_[m]);
        return weights_ * fv;
    }
    Eigen::VectorXd out(rows());
    for (Eigen::Index i = 0; i < rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index m = 0; m < width(); ++m) acc += weights_(i, m) * f(row_nodes_(i, m));
        out[i] = acc;
    }
    return out;
}

Eigen::VectorXd CondExpTable::expect_rows(const std::function<double(Eigen::Index, double)>& f) const {
    Eigen::VectorXd out(rows());
    for (Eigen::Index i = 0; i < rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index m = 0; m < width(); ++m) {
            const double w = weights_(i, m);
            if (w != 0.0) acc += w * f(i, node(i, m));
        }
        out[i] = acc;
    }
    return out;
}

double CondExpTable::expect_row(Eigen::Index i, const std::function<double(double)>& f) const {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < width(); ++m) {
        const double w = weights_(i, m);
        if (w != 0.0) acc += w * f(node(i, m));
    }
    return acc;
}

CondExpTable CondExpTable::subset(const std::vector<Eigen::Index>& rows) const {
    CondExpTable out;
    out.shared_ = shared_;
    out.shared_nodes_ = shared_nodes_;
    out.weights_.resize(static_cast<Eigen::Index>(rows.size()), width());
    if (!shared_) out.row_nodes_.resize(static_cast<Eigen::Index>(rows.size()), width());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.weights_.row(k) = weights_.row(rows[k]);
        if (!shared_) out.row_nodes_.row(k) = row_nodes_.row(rows[k]);
    }
    return out;
}

QuadratureRule gauss_hermite(int num_nodes) {
    if (num_nodes < 1) throw UsageError("Gauss-Hermite rule needs at least one node");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite recurrence.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
    for (int k = 1; k < num_nodes; ++k) {
        J(k, k - 1) = std::sqrt(static_cast<double>(k));
        J(k - 1, k) = J(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    QuadratureRule q;
    q.nodes = es.eigenvalues();
    q.weights = es.eigenvectors().row(0).transpose().array().square();
    q.weights /= q.weights.sum();
    return q;
}

}  // namespace labelshift
