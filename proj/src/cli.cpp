#include "labelshift/cli.hpp"

#include "labelshift/baselines.hpp"
#include "labelshift/discrete.hpp"
#include "labelshift/error.hpp"
#include "labelshift/inference.hpp"
#include "labelshift/io.hpp"
#include "labelshift/simulation.hpp"
#include "labelshift/stats.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <ostream>
#include <sstream>

namespace labelshift {

namespace {

struct CliOptions {
    std::string config_path;
    std::string data_path;
    std::string out_dir;
    std::string estimand;
    std::string moment;
    std::string estimators = "ppi,shift,efficient";
    bool discrete = false;
    int replicates = 0;
    int threads = 0;
    long long seed = -1;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

RunConfig resolve_config(const CliOptions& o) {
    RunConfig c = o.config_path.empty() ? parse_run_config(nlohmann::json::object()) : load_run_config(o.config_path);
    if (!o.estimand.empty()) c.estimand = o.estimand;
    if (!o.moment.empty()) c.custom_moment = o.moment;
    if (o.discrete) c.discrete = true;
    if (o.replicates > 0) c.sim.replicates = o.replicates;
    if (o.threads > 0) c.sim.threads = o.threads;
    if (o.seed >= 0) c.sim.seed = static_cast<std::uint64_t>(o.seed);
    if (c.estimand != "mean" && c.estimand != "variance" && c.estimand != "custom") {
        throw UsageError("estimand must be mean, variance or custom");
    }
    if (c.discrete) {
        c.sim.settings.bw.y_family = KernelFamily::Epanechnikov;
        c.sim.settings.bw.y_order = 2;
        c.sim.settings.bw.h_fixed = 0.5;
        c.sim.settings.bw.l_fixed = 0.5;
    }
    c.sim.validate();
    return c;
}

// "y^k" with integer k >= 1.
Estimand custom_estimand(const std::string& spec) {
    if (spec.size() < 3 || spec.compare(0, 2, "y^") != 0) {
        throw UsageError("custom moment must have the form y^k, got '" + spec + "'");
    }
    int k = 0;
    try {
        std::size_t used = 0;
        k = std::stoi(spec.substr(2), &used);
        if (used != spec.size() - 2) k = 0;
    } catch (const std::exception&) {
        k = 0;
    }
    if (k < 1) throw UsageError("custom moment exponent must be a positive integer");
    return moment_estimand(spec, [k](double y, const Eigen::VectorXd&) { return std::pow(y, k); }, false);
}

Estimand resolve_estimand(const RunConfig& c) {
    if (c.estimand == "mean") return mean_estimand();
    if (c.estimand == "variance") return variance_estimand();
    if (c.custom_moment.empty()) throw UsageError("--estimand custom requires --moment y^k");
    return custom_estimand(c.custom_moment);
}

std::string out_path(const CliOptions& o, const std::string& file) {
    return (std::filesystem::path(o.out_dir) / file).string();
}

void echo_config(const CliOptions& o, const RunConfig& c) {
    write_file_atomic(out_path(o, "config.json"), to_json(c).dump(2) + "\n");
}

PooledDataset require_data(const CliOptions& o, std::ostream& err) {
    if (o.data_path.empty()) throw UsageError("--data is required");
    std::vector<std::string> warnings;
    PooledDataset data = load_dataset(o.data_path, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    return data;
}

struct Fitted {
    std::shared_ptr<CondExpModel> model;
    std::unique_ptr<CondExpTable> table;
};

Fitted fit_table(const PooledDataset& data, const EstimatorSettings& s) {
    Fitted f;
    f.model = fit_cond_exp_nonparametric(data.labeled_y(), data.labeled_x(), s.bw.nw(data.n()));
    f.table = std::make_unique<CondExpTable>(*f.model, data.x());
    return f;
}

DiscreteRatio unit_discrete(const PooledDataset& data, const EstimatorSettings& s) {
    DiscreteRatio r;
    r.classes = labeled_classes(data);
    r.values = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(r.classes.size()));
    r.clip_floor = s.plan.clip_floor;
    return r;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json report_json(const EstimateReport& r, const Estimand& e) {
    const Eigen::Index k = e.report_index;
    nlohmann::json j;
    j["estimator"] = r.estimator_name;
    j["estimand"] = e.name;
    j["theta_hat"] = r.theta_hat[k];
    j["std_err"] = r.std_err[k];
    j["ci_level"] = r.ci_level;
    j["ci"] = {r.ci[k].lo, r.ci[k].hi};
    j["theta_full"] = vector_json(r.theta_hat);
    j["std_err_full"] = vector_json(r.std_err);
    j["diagnostics"] = r.diagnostics;
    j["notes"] = r.notes;
    return j;
}

struct RatioTriple {
    DensityRatioModel star;
    DensityRatioModel tilde;
    DensityRatioModel hat;
    std::vector<double> points;  // classes in discrete mode
};

RatioTriple fit_ratios(const PooledDataset& data, const CondExpTable& table, const EstimatorSettings& s,
                       bool discrete, int points) {
    RatioTriple t;
    t.star = DensityRatioModel::constant(1.0);
    if (discrete) {
        DiscreteRatio tilde;
        const DiscreteRatio hat = discrete_ratio_estimate(data, table, unit_discrete(data, s), s.rho_ridge, &tilde);
        t.tilde = tilde.as_model();
        t.hat = hat.as_model();
        for (int c : hat.classes) t.points.push_back(c);
        return t;
    }
    t.tilde = consistent_rho(data, s.plan, t.star, table, s.bw, s.rho_ridge, s.grid_size);
    t.hat = efficient_rho(data, s.plan, t.tilde, table, s.bw, s.rho_ridge, s.grid_size);
    const Eigen::VectorXd ly = data.labeled_y();
    const double lo = ly.minCoeff();
    const double hi = ly.maxCoeff();
    for (int k = 0; k < points; ++k) t.points.push_back(lo + (hi - lo) * k / (points - 1.0));
    return t;
}

int run_simulate(const CliOptions& o, std::ostream& out, std::ostream& err) {
    const RunConfig c = resolve_config(o);
    echo_config(o, c);
    const StudyResult res = run_study(c.sim);
    write_file_atomic(out_path(o, "summary.csv"), summary_csv(res.summary));
    write_file_atomic(out_path(o, "raw_estimates.csv"), raw_estimates_csv(res.raw));
    if (c.sim.keep_curves) write_file_atomic(out_path(o, "rho_curves.csv"), rho_curves_csv(res.curves));
    for (const auto& e : res.errors) err << "warning: " << e << '\n';
    out << summary_csv(res.summary);
    return kExitOk;
}

int run_estimate(const CliOptions& o, std::ostream& out, std::ostream& err) {
    const RunConfig c = resolve_config(o);
    const PooledDataset data = require_data(o, err);
    echo_config(o, c);
    const EstimatorSettings& s = c.sim.settings;
    const Estimand e = resolve_estimand(c);
    const Fitted f = fit_table(data, s);
    EstimateReport report;
    nlohmann::json ratio;
    if (c.discrete) {
        const RatioTriple t = fit_ratios(data, *f.table, s, true, c.sim.curve_points);
        report = estimate_with_rho(data, e, t.hat, *f.table, s, "efficient_discrete");
        for (double k : t.points) ratio.push_back({{"class", k}, {"rho_tilde", t.tilde(k)}, {"rho_hat", t.hat(k)}});
    } else {
        const std::vector<Estimand> es = {e};
        const EfficientResult r = efficient_pipeline(data, es, *f.table, DensityRatioModel::constant(1.0), s);
        report = r.hat.front();
        ratio["knots"] = vector_json(r.rho_hat.model.knots());
        ratio["rho_hat"] = vector_json(r.rho_hat.model.values());
        ratio["rho_tilde"] = vector_json(r.rho_tilde.model.values());
    }
    nlohmann::json j = report_json(report, e);
    j["schema_version"] = 1;
    j["n"] = data.n();
    j["N"] = data.N();
    j["density_ratio"] = ratio;
    write_file_atomic(out_path(o, "report.json"), j.dump(2) + "\n");
    out << "theta_hat " << format_real(report.theta_hat[e.report_index]) << " std_err "
        << format_real(report.std_err[e.report_index]) << '\n';
    return kExitOk;
}

int run_density_ratio(const CliOptions& o, std::ostream& out, std::ostream& err) {
    const RunConfig c = resolve_config(o);
    const PooledDataset data = require_data(o, err);
    echo_config(o, c);
    const Fitted f = fit_table(data, c.sim.settings);
    const RatioTriple t = fit_ratios(data, *f.table, c.sim.settings, c.discrete, c.sim.curve_points);
    std::ostringstream csv;
    csv << "y,rho_star,rho_tilde,rho_hat\n";
    for (double y : t.points) {
        csv << format_real(y) << ',' << format_real(t.star(y)) << ',' << format_real(t.tilde(y)) << ','
            << format_real(t.hat(y)) << '\n';
    }
    write_file_atomic(out_path(o, "density_ratio.csv"), csv.str());
    out << csv.str();
    return kExitOk;
}

int run_compare(const CliOptions& o, std::ostream& out, std::ostream& err) {
    const RunConfig c = resolve_config(o);
    const PooledDataset data = require_data(o, err);
    const std::vector<std::string> names = split_list(o.estimators);
    if (names.empty()) throw UsageError("--estimators must list at least one estimator");
    for (const auto& n : names) {
        static const std::vector<std::string> known = {"ppi", "shift", "singly", "efficient_tilde", "efficient"};
        if (std::find(known.begin(), known.end(), n) == known.end()) {
            throw UsageError("unknown estimator '" + n + "' (known: ppi, shift, singly, efficient_tilde, efficient)");
        }
    }
    echo_config(o, c);
    const EstimatorSettings& s = c.sim.settings;
    const Estimand e = resolve_estimand(c);
    const Fitted f = fit_table(data, s);
    const RatioTriple t = fit_ratios(data, *f.table, s, c.discrete, c.sim.curve_points);
    const double z = normal_quantile(0.5 + s.ci_level / 2.0);

    std::ostringstream csv;
    csv << "estimator,estimate,std_err,ci_lo,ci_hi\n";
    auto emit = [&](const std::string& name, double est, double se) {
        csv << name << ',' << format_real(est) << ',' << format_real(se) << ',' << format_real(est - z * se) << ','
            << format_real(est + z * se) << '\n';
    };
    auto emit_report = [&](const std::string& name, const EstimateReport& r) {
        emit(name, r.theta_hat[e.report_index], r.std_err[e.report_index]);
    };
    for (const auto& name : names) {
        if (name == "ppi") {
            if (c.estimand != "mean") throw UsageError("ppi supports only the mean estimand");
            if (!data.has_predictions()) throw UsageError("ppi requires a y_pred column");
            std::vector<double> resid, pu;
            Eigen::VectorXd ly(data.n()), lp(data.n()), up(data.N() - data.n());
            Eigen::Index a = 0, b = 0;
            for (Eigen::Index i : data.labeled()) {
                ly[a] = data.y()[i];
                lp[a] = data.predictions()[i];
                resid.push_back(ly[a] - lp[a]);
                ++a;
            }
            for (Eigen::Index i : data.unlabeled()) {
                up[b++] = data.predictions()[i];
                pu.push_back(data.predictions()[i]);
            }
            const double est = ppi_mean(ly, lp, up);
            const double sd_r = sample_sd(resid);
            const double sd_u = sample_sd(pu);
            const double se = std::sqrt(sd_r * sd_r / static_cast<double>(resid.size()) +
                                        sd_u * sd_u / static_cast<double>(pu.size()));
            emit(name, est, se);
        } else if (name == "shift") {
            emit_report(name, shift_dependent_report(data, e, t.hat, s.solver, s.ci_level));
        } else if (name == "singly") {
            emit_report(name, estimate_with_rho(data, e, t.star, *f.table, s, name));
        } else if (name == "efficient_tilde") {
            emit_report(name, estimate_with_rho(data, e, t.tilde, *f.table, s, name));
        } else {
            emit_report(name, estimate_with_rho(data, e, t.hat, *f.table, s, name));
        }
    }
    write_file_atomic(out_path(o, "compare.csv"), csv.str());
    out << csv.str();
    return kExitOk;
}

void structured_error(std::ostream& err, const char* kind, const std::string& message) {
    err << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Label-shift estimation with nonparametric density-ratio refinement", "labelshift"};
    app.require_subcommand(1);
    CliOptions o;

    auto common = [&](CLI::App* sub, bool needs_data) {
        sub->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out_dir, "Output directory")->required();
        if (needs_data) sub->add_option("--data", o.data_path, "Dataset CSV (r,y,x1..xd[,y_pred])")->required();
    };
    auto estimand_flags = [&](CLI::App* sub) {
        sub->add_option("--estimand", o.estimand, "mean, variance or custom")
            ->check(CLI::IsMember({"mean", "variance", "custom"}));
        sub->add_option("--moment", o.moment, "Moment y^k for --estimand custom");
        sub->add_flag("--discrete", o.discrete, "Treat y as class labels");
    };

    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study");
    common(sim, false);
    sim->add_option("--replicates", o.replicates, "Override the replicate count")->check(CLI::PositiveNumber);
    sim->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    sim->add_option("--seed", o.seed, "Override the master seed")->check(CLI::NonNegativeNumber);

    CLI::App* est = app.add_subcommand("estimate", "Efficient estimate on a dataset");
    common(est, true);
    estimand_flags(est);

    CLI::App* dr = app.add_subcommand("density-ratio", "Density-ratio estimates");
    common(dr, true);
    dr->add_flag("--discrete", o.discrete, "Treat y as class labels");

    CLI::App* cmp = app.add_subcommand("compare", "Compare estimators on a dataset");
    common(cmp, true);
    estimand_flags(cmp);
    cmp->add_option("--estimators", o.estimators, "Comma list of ppi, shift, singly, efficient_tilde, efficient");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        structured_error(err, "usage", e.what());
        return kExitUsage;
    }

    try {
        if (sim->parsed()) return run_simulate(o, out, err);
        if (est->parsed()) return run_estimate(o, out, err);
        if (dr->parsed()) return run_density_ratio(o, out, err);
        return run_compare(o, out, err);
    } catch (const UsageError& e) {
        structured_error(err, "usage", e.what());
        return kExitUsage;
    } catch (const NumericalError& e) {
        structured_error(err, "numerical", e.what());
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        structured_error(err, "usage", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        structured_error(err, "numerical", e.what());
        return kExitNumerical;
    }
}

}  // namespace labelshift
