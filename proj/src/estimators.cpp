#include "labelshift/estimators.hpp"

#include "labelshift/error.hpp"
#include "labelshift/inference.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace labelshift {

namespace {

const Eigen::VectorXd kNoX;

// Row i of the covariates when the estimand reads them, an empty vector otherwise.
Eigen::VectorXd covariates(const PooledDataset& data, const Estimand& e, Eigen::Index i) {
    return e.uses_x ? Eigen::VectorXd(data.x().row(i).transpose()) : kNoX;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

void RootSolverCfg::validate() const {
    if (max_iter < 1) throw UsageError("solver max_iter must be positive");
    if (!(tol > 0.0)) throw UsageError("solver tolerance must be positive");
    if (max_halvings < 0) throw UsageError("solver max_halvings must be nonnegative");
    if (!(fd_step > 0.0)) throw UsageError("solver fd_step must be positive");
}

void EstimatorSettings::validate() const {
    bw.validate();
    plan.validate();
    solver.validate();
    if (grid_size < 2) throw UsageError("grid_size must be at least 2");
    if (!(ridge >= 0.0) || !(rho_ridge >= 0.0)) throw UsageError("ridge values must be nonnegative");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw UsageError("ci_level must lie in (0, 1)");
}

Eigen::VectorXd compute_weights(const PooledDataset& data, const DensityRatioModel& rho, const CondExpTable& table) {
    if (table.rows() != data.N()) throw UsageError("conditional expectation table has the wrong row count");
    const double c = data.pi() / (1.0 - data.pi());
    const Eigen::VectorXd inner = table.expect([&](double y) {
        const double r = rho(y);
        return r * r + c * r;
    });
    for (Eigen::Index i = 0; i < inner.size(); ++i) {
        if (!(inner[i] > 0.0)) {
            throw NumericalError("weights: nonpositive conditional expectation at row " + std::to_string(i));
        }
    }
    return inner.cwiseInverse();
}

MomentFit fit_moment(const FredholmContext& ctx, const Estimand& estimand, double ridge) {
    estimand.validate();
    if (estimand.kind != Estimand::Kind::Moment) throw UsageError("fit_moment needs a moment estimand");
    const PooledDataset& data = ctx.data();
    const Eigen::VectorXd& grid = ctx.eval_grid();
    const Eigen::Index n = data.n();

    Eigen::MatrixXd rhs(grid.size(), 1);
    if (!estimand.uses_x) {
        for (Eigen::Index j = 0; j < grid.size(); ++j) rhs(j, 0) = estimand.s(grid[j], kNoX);
    } else {
        const Eigen::MatrixXd& S = ctx.smoother();
        for (Eigen::Index j = 0; j < grid.size(); ++j) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < n; ++k) {
                const Eigen::Index i = data.labeled()[k];
                if (S(j, k) != 0.0) acc += S(j, k) * estimand.s(grid[j], data.x().row(i).transpose());
            }
            rhs(j, 0) = acc;
        }
    }

    MomentFit fit;
    fit.a_hat = ctx.solve(rhs, ridge);
    fit.prediction = ctx.predict(fit.a_hat).col(0);
    fit.system_residual = max_abs((ctx.matrix() * fit.a_hat.values() - rhs).col(0));
    fit.s_labeled.resize(n);
    double direct = 0.0;
    for (Eigen::Index i : data.unlabeled()) direct += fit.prediction[i];
    fit.direct = direct / static_cast<double>(data.unlabeled().size());
    double rect = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = data.labeled()[k];
        fit.s_labeled[k] = estimand.s(data.y()[i], covariates(data, estimand, i));
        rect += ctx.rho_labeled()[k] * (fit.s_labeled[k] - fit.prediction[i]);
    }
    fit.rectifier = rect / static_cast<double>(n);
    fit.theta = fit.direct + fit.rectifier;
    return fit;
}

double algorithm_general(const PooledDataset& data, const Estimand& estimand, const DensityRatioModel& rho,
                         const CondExpTable& table, const BandwidthPolicy& bw, double ridge, int grid_size) {
    bw.validate();
    const FredholmContext ctx(data, table, rho, compute_weights(data, rho, table), bw.l_kernel(data.n()), grid_size);
    return fit_moment(ctx, estimand, ridge).theta;
}

namespace {

// w_i E_p{U(Y, x_i, theta) rho^2(Y) | x_i}, N x d.
Eigen::MatrixXd score_term(const PooledDataset& data, const Estimand& e, const Eigen::VectorXd& theta,
                           const DensityRatioModel& rho, const CondExpTable& table, const Eigen::VectorXd& weights) {
    const Eigen::Index N = data.N();
    const Eigen::Index d = e.dim;
    Eigen::MatrixXd out(N, d);
    if (!e.uses_x && table.shared()) {
        const Eigen::VectorXd& nodes = table.shared_node_vector();
        Eigen::MatrixXd Z(nodes.size(), d);
        for (Eigen::Index m = 0; m < nodes.size(); ++m) {
            const double r = rho(nodes[m]);
            Z.row(m) = (r * r) * e.score(nodes[m], kNoX, theta).transpose();
        }
        out = table.weights() * Z;
    } else {
        for (Eigen::Index i = 0; i < N; ++i) {
            const Eigen::VectorXd x = covariates(data, e, i);
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
            for (Eigen::Index m = 0; m < table.width(); ++m) {
                const double w = table.weights()(i, m);
                if (w == 0.0) continue;
                const double y = table.node(i, m);
                const double r = rho(y);
                acc += (w * r * r) * e.score(y, x, theta);
            }
            out.row(i) = acc.transpose();
        }
    }
    return weights.asDiagonal() * out;
}

}  // namespace

Eigen::MatrixXd predict_b(const PooledDataset& data, const Estimand& estimand, const Eigen::VectorXd& theta,
                          const DensityRatioModel& rho, const CondExpTable& table, const NuisanceFunction& a_hat,
                          const Eigen::VectorXd& weights) {
    estimand.validate();
    if (a_hat.dim() != estimand.dim) throw UsageError("predict_b: nuisance dimension does not match the estimand");
    if (weights.size() != data.N() || table.rows() != data.N()) throw UsageError("predict_b: row count mismatch");
    Eigen::MatrixXd b = score_term(data, estimand, theta, rho, table, Eigen::VectorXd::Ones(data.N()));
    for (Eigen::Index i = 0; i < data.N(); ++i) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(estimand.dim);
        for (Eigen::Index m = 0; m < table.width(); ++m) {
            const double w = table.weights()(i, m);
            if (w == 0.0) continue;
            const double y = table.node(i, m);
            acc += (w * rho(y)) * a_hat.row(y);
        }
        b.row(i) = weights[i] * (b.row(i) + acc.transpose());
    }
    return b;
}

Eigen::VectorXd estimating_function(const FredholmContext& ctx, const Estimand& estimand, const Eigen::VectorXd& theta,
                                    double ridge, NuisanceFunction* a_out, Eigen::MatrixXd* b_out) {
    const PooledDataset& data = ctx.data();
    const Eigen::Index d = estimand.dim;
    const Eigen::Index n = data.n();
    const Eigen::VectorXd& grid = ctx.eval_grid();
    const Eigen::MatrixXd& S = ctx.smoother();

    const Eigen::MatrixXd EU = score_term(data, estimand, theta, ctx.rho(), ctx.table(), ctx.weights());
    Eigen::MatrixXd EU_l(n, d);
    for (Eigen::Index k = 0; k < n; ++k) EU_l.row(k) = EU.row(data.labeled()[k]);

    Eigen::MatrixXd rhs(grid.size(), d);
    if (!estimand.uses_x) {
        for (Eigen::Index j = 0; j < grid.size(); ++j) rhs.row(j) = estimand.score(grid[j], kNoX, theta).transpose();
        rhs -= S * EU_l;
    } else {
        for (Eigen::Index j = 0; j < grid.size(); ++j) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
            for (Eigen::Index k = 0; k < n; ++k) {
                if (S(j, k) == 0.0) continue;
                const Eigen::Index i = data.labeled()[k];
                acc += S(j, k) * (estimand.score(grid[j], data.x().row(i).transpose(), theta) - EU_l.row(k).transpose());
            }
            rhs.row(j) = acc.transpose();
        }
    }

    NuisanceFunction a = ctx.solve(rhs, ridge);
    Eigen::MatrixXd b = EU + ctx.predict(a);

    Eigen::VectorXd psi = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i : data.unlabeled()) psi += b.row(i).transpose();
    psi /= static_cast<double>(data.unlabeled().size());
    Eigen::VectorXd rect = Eigen::VectorXd::Zero(d);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = data.labeled()[k];
        rect += ctx.rho_labeled()[k] * (estimand.score(data.y()[i], covariates(data, estimand, i), theta) -
                                        b.row(i).transpose());
    }
    psi += rect / static_cast<double>(n);
    if (a_out) *a_out = std::move(a);
    if (b_out) *b_out = std::move(b);
    return psi;
}

namespace {

Eigen::MatrixXd finite_difference_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& theta, const Eigen::VectorXd& f0, double rel_step) {
    Eigen::MatrixXd J(f0.size(), theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        Eigen::VectorXd t = theta;
        const double step = rel_step * std::max(1.0, std::abs(theta[k]));
        t[k] += step;
        J.col(k) = (f(t) - f0) / step;
    }
    return J;
}

// Damped Newton iteration shared by the efficient and the weighted-labeled solvers.
struct NewtonOutcome {
    Eigen::VectorXd theta;
    Eigen::VectorXd residual;
    int iterations = 0;
    bool used_fd = false;
};

NewtonOutcome damped_newton(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
                            Eigen::VectorXd theta, const RootSolverCfg& cfg) {
    cfg.validate();
    bool fd = cfg.jacobian == RootSolverCfg::Jacobian::FiniteDifference || !jacobian;
    Eigen::VectorXd fx = f(theta);
    NewtonOutcome out;
    for (int it = 0; it < cfg.max_iter; ++it) {
        if (!fx.allFinite()) break;
        if (max_abs(fx) <= cfg.tol) {
            out.theta = theta;
            out.residual = fx;
            out.iterations = it;
            out.used_fd = fd;
            return out;
        }
        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            const Eigen::MatrixXd J = fd ? finite_difference_jacobian(f, theta, fx, cfg.fd_step) : jacobian(theta);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
            if (lu.isInvertible()) {
                const Eigen::VectorXd step = -lu.solve(fx);
                double t = 1.0;
                for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
                    const Eigen::VectorXd cand = theta + t * step;
                    const Eigen::VectorXd fc = f(cand);
                    if (fc.allFinite() && fc.norm() < fx.norm()) {
                        // An inexact Jacobian converges only linearly.
                        if (!fd && cfg.jacobian == RootSolverCfg::Jacobian::Auto && fc.norm() > 0.5 * fx.norm()) {
                            fd = true;
                        }
                        theta = cand;
                        fx = fc;
                        accepted = true;
                        break;
                    }
                }
            }
            if (!accepted) {
                if (fd || cfg.jacobian != RootSolverCfg::Jacobian::Auto) break;
                fd = true;
            }
        }
        if (!accepted) break;
    }
    if (fx.allFinite() && max_abs(fx) <= cfg.tol) {
        out.theta = theta;
        out.residual = fx;
        out.iterations = cfg.max_iter;
        out.used_fd = fd;
        return out;
    }
    std::ostringstream msg;
    msg << "Newton solver did not converge; last iterate (" << theta.transpose() << "), residual norm " << fx.norm();
    throw NumericalError(msg.str());
}

}  // namespace

GeneralFit fit_general(const FredholmContext& ctx, const Estimand& estimand, const Eigen::VectorXd& theta0,
                       double ridge, const RootSolverCfg& solver) {
    estimand.validate();
    if (theta0.size() != estimand.dim) throw UsageError("fit_general: starting value has the wrong dimension");
    const PooledDataset& data = ctx.data();
    auto f = [&](const Eigen::VectorXd& t) { return estimating_function(ctx, estimand, t, ridge); };
    auto jac = [&](const Eigen::VectorXd& t) { return inverse_A_estimate(data, estimand, t, ctx.rho_labeled()); };
    const NewtonOutcome r = damped_newton(f, jac, theta0, solver);
    GeneralFit fit;
    fit.theta = r.theta;
    fit.iterations = r.iterations;
    fit.used_finite_difference = r.used_fd;
    fit.residual = estimating_function(ctx, estimand, fit.theta, ridge, &fit.a_hat, &fit.b);
    return fit;
}

Eigen::VectorXd weighted_labeled_root(const PooledDataset& data, const Estimand& estimand,
                                      const Eigen::VectorXd& rho_labeled, const RootSolverCfg& solver) {
    estimand.validate();
    const Eigen::Index n = data.n();
    if (estimand.kind == Estimand::Kind::Moment) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const Eigen::Index i = data.labeled()[k];
            acc += rho_labeled[k] * estimand.s(data.y()[i], covariates(data, estimand, i));
        }
        return Eigen::VectorXd::Constant(1, acc / static_cast<double>(rho_labeled.sum()));
    }
    auto f = [&](const Eigen::VectorXd& t) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(estimand.dim);
        for (Eigen::Index k = 0; k < n; ++k) {
            const Eigen::Index i = data.labeled()[k];
            acc += rho_labeled[k] * estimand.score(data.y()[i], covariates(data, estimand, i), t);
        }
        return Eigen::VectorXd(acc / static_cast<double>(n));
    };
    auto jac = [&](const Eigen::VectorXd& t) { return inverse_A_estimate(data, estimand, t, rho_labeled); };
    RootSolverCfg cfg = solver;
    cfg.tol = std::max(cfg.tol, 1e-13);
    return damped_newton(f, jac, Eigen::VectorXd::Zero(estimand.dim), cfg).theta;
}

EstimateReport estimate_in_context(const FredholmContext& ctx, const Estimand& estimand,
                                   const EstimatorSettings& settings, const std::string& name) {
    estimand.validate();
    EstimateReport rep;
    rep.estimator_name = name;
    rep.ci_level = settings.ci_level;
    EifEvaluation eif;
    if (estimand.kind == Estimand::Kind::Moment) {
        const MomentFit fit = fit_moment(ctx, estimand, settings.ridge);
        rep.theta_hat = Eigen::VectorXd::Constant(1, fit.theta);
        eif = eif_moment(ctx, fit);
        rep.diagnostics["direct_term"] = fit.direct;
        rep.diagnostics["rectifier_term"] = fit.rectifier;
        rep.diagnostics["fredholm_residual"] = fit.system_residual;
        rep.diagnostics["estimating_equation_residual"] = 0.0;
    } else {
        const Eigen::VectorXd theta0 = weighted_labeled_root(ctx.data(), estimand, ctx.rho_labeled(), settings.solver);
        const GeneralFit fit = fit_general(ctx, estimand, theta0, settings.ridge, settings.solver);
        rep.theta_hat = fit.theta;
        eif = eif_from_b(ctx.data(), estimand, fit.theta, ctx.rho_labeled(), fit.b);
        rep.diagnostics["newton_iterations"] = fit.iterations;
        rep.diagnostics["finite_difference_jacobian"] = fit.used_finite_difference ? 1.0 : 0.0;
        rep.diagnostics["estimating_equation_residual"] = max_abs(fit.residual);
        for (Eigen::Index k = 0; k < theta0.size(); ++k) {
            rep.diagnostics["newton_start_" + std::to_string(k)] = theta0[k];
        }
    }
    rep.std_err = eif.std_err();
    rep.ci = confidence_interval(eif, rep.theta_hat, settings.ci_level);
    rep.diagnostics["eif_mean_max_abs"] = max_abs(eif.mean());
    return rep;
}

EstimateReport estimate_with_rho(const PooledDataset& data, const Estimand& estimand, const DensityRatioModel& rho,
                                 const CondExpTable& table, const EstimatorSettings& settings,
                                 const std::string& name) {
    settings.validate();
    const FredholmContext ctx(data, table, rho, compute_weights(data, rho, table),
                              settings.bw.l_kernel(data.n()), settings.grid_size);
    return estimate_in_context(ctx, estimand, settings, name);
}

namespace {

void annotate_rho(EstimateReport& rep, const RhoFit& fit, const std::string& prefix) {
    rep.diagnostics[prefix + "_clipped_knots"] = fit.clipped;
    for (Eigen::Index k = 0; k < fit.raw_delta.size(); ++k) {
        rep.diagnostics[prefix + "_raw_delta_" + std::to_string(k)] = fit.raw_delta[k];
    }
    if (fit.clipped > 0) rep.notes.push_back(prefix + ": some knot ratios were clipped at the floor");
}

}  // namespace

EfficientResult efficient_pipeline(const PooledDataset& data, const std::vector<Estimand>& estimands,
                                   const CondExpTable& table, const DensityRatioModel& rho_star,
                                   const EstimatorSettings& settings, std::vector<EstimateReport>* star_reports) {
    settings.validate();
    const Eigen::Index n = data.n();
    const KernelSpec l_kernel = settings.bw.l_kernel(n);
    const KernelSpec h_kernel = settings.bw.h_kernel(n);

    EfficientResult out;
    {
        const FredholmContext star(data, table, rho_star, compute_weights(data, rho_star, table), l_kernel,
                                   settings.grid_size);
        out.rho_tilde = fit_rho(star, settings.plan, h_kernel, settings.rho_ridge);
        if (star_reports) {
            star_reports->clear();
            for (const Estimand& e : estimands) star_reports->push_back(estimate_in_context(star, e, settings, "singly"));
        }
    }
    {
        const DensityRatioModel& rt = out.rho_tilde.model;
        const FredholmContext tilde(data, table, rt, compute_weights(data, rt, table), l_kernel, settings.grid_size);
        out.rho_hat = fit_rho(tilde, settings.plan, h_kernel, settings.rho_ridge);
        for (const Estimand& e : estimands) {
            out.tilde.push_back(estimate_in_context(tilde, e, settings, "efficient_tilde"));
            annotate_rho(out.tilde.back(), out.rho_tilde, "rho_tilde");
        }
    }
    {
        const DensityRatioModel& rh = out.rho_hat.model;
        const FredholmContext hat(data, table, rh, compute_weights(data, rh, table), l_kernel, settings.grid_size);
        for (const Estimand& e : estimands) {
            out.hat.push_back(estimate_in_context(hat, e, settings, "efficient_hat"));
            annotate_rho(out.hat.back(), out.rho_hat, "rho_hat");
        }
    }
    return out;
}

EstimateReport efficient_theta(const PooledDataset& data, const Estimand& estimand, const CondExpTable& table,
                               const DensityRatioModel& rho_star, const EstimatorSettings& settings, RhoStage stage) {
    EfficientResult r = efficient_pipeline(data, {estimand}, table, rho_star, settings);
    return stage == RhoStage::Tilde ? r.tilde.front() : r.hat.front();
}

}  // namespace labelshift
