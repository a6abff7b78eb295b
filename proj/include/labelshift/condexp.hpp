#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>

namespace labelshift {

// E_p{f(Y) | x} ~= sum_m weights[m] * f(nodes[m]).
struct QuadratureRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

class CondExpModel {
public:
    virtual ~CondExpModel() = default;
    virtual QuadratureRule rule(const Eigen::VectorXd& x) const = 0;
    // True when every query shares the same node set (nodes of rule() are constant).
    virtual bool shared_nodes() const { return false; }
    virtual Eigen::Index covariate_dim() const = 0;

    double expect(const std::function<double(double)>& f, const Eigen::VectorXd& x) const;
};

// Radial Gaussian Nadaraya-Watson regression on the labeled covariates.
class NadarayaWatsonCondExp : public CondExpModel {
public:
    NadarayaWatsonCondExp(Eigen::VectorXd labeled_y, Eigen::MatrixXd labeled_x, double bandwidth);

    QuadratureRule rule(const Eigen::VectorXd& x) const override;
    bool shared_nodes() const override { return true; }
    Eigen::Index covariate_dim() const override { return x_.cols(); }

    const Eigen::VectorXd& nodes() const { return y_; }
    double bandwidth() const { return bandwidth_; }
    // Weight rows for many queries at once.
    Eigen::MatrixXd weight_matrix(const Eigen::MatrixXd& queries) const;

private:
    Eigen::VectorXd y_;
    Eigen::MatrixXd x_;
    Eigen::VectorXd x_sqnorm_;
    double bandwidth_;
};

std::shared_ptr<NadarayaWatsonCondExp> fit_cond_exp_nonparametric(const Eigen::VectorXd& labeled_y,
                                                                  const Eigen::MatrixXd& labeled_x,
                                                                  double bandwidth);

// A CondExpModel evaluated at every row of a covariate matrix.
class CondExpTable {
public:
    CondExpTable() = default;
    CondExpTable(const CondExpModel& model, const Eigen::MatrixXd& x);

    Eigen::Index rows() const { return weights_.rows(); }
    Eigen::Index width() const { return weights_.cols(); }
    bool shared() const { return shared_; }
    double node(Eigen::Index i, Eigen::Index m) const {
        return shared_ ? shared_nodes_[m] : row_nodes_(i, m);
    }
    const Eigen::VectorXd& shared_node_vector() const { return shared_nodes_; }
    const Eigen::MatrixXd& weights() const { return weights_; }

    // sum_m W[i,m] f(node_im) for every row.
    Eigen::VectorXd expect(const std::function<double(double)>& f) const;
    // Same with a row-dependent integrand f(i, y).
    Eigen::VectorXd expect_rows(const std::function<double(Eigen::Index, double)>& f) const;
    double expect_row(Eigen::Index i, const std::function<double(double)>& f) const;

    // Restrict to a subset of rows.
    CondExpTable subset(const std::vector<Eigen::Index>& rows) const;

private:
    bool shared_ = false;
    Eigen::VectorXd shared_nodes_;
    Eigen::MatrixXd row_nodes_;
    Eigen::MatrixXd weights_;
};

}  // namespace labelshift

namespace labelshift {

// Probabilists' Gauss-Hermite rule normalized so that the weights sum to one:
// E f(Z) ~= sum_m w_m f(z_m) for Z ~ N(0, 1).
QuadratureRule gauss_hermite(int num_nodes);

}  // namespace labelshift
