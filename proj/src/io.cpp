#include "labelshift/io.hpp"

#include "labelshift/error.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <sstream>

namespace labelshift {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string cell_address(std::size_t line, const std::string& column) {
    return "line " + std::to_string(line) + ", column '" + column + "'";
}

double parse_real(const std::string& cell, std::size_t line, const std::string& column) {
    if (cell.empty()) throw UsageError("empty cell at " + cell_address(line, column));
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || errno == ERANGE) {
        throw UsageError("non-numeric cell '" + cell + "' at " + cell_address(line, column));
    }
    return v;
}

const char* family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::Gaussian: return "gaussian";
        case KernelFamily::Epanechnikov: return "epanechnikov";
        case KernelFamily::HigherOrderGaussian: return "higher_order_gaussian";
    }
    return "gaussian";
}

KernelFamily family_from(const std::string& s) {
    if (s == "gaussian") return KernelFamily::Gaussian;
    if (s == "epanechnikov") return KernelFamily::Epanechnikov;
    if (s == "higher_order_gaussian") return KernelFamily::HigherOrderGaussian;
    throw UsageError("unknown kernel family '" + s + "'");
}

const char* jacobian_name(RootSolverCfg::Jacobian j) {
    switch (j) {
        case RootSolverCfg::Jacobian::Auto: return "auto";
        case RootSolverCfg::Jacobian::Estimated: return "estimated";
        case RootSolverCfg::Jacobian::FiniteDifference: return "finite_difference";
    }
    return "auto";
}

RootSolverCfg::Jacobian jacobian_from(const std::string& s) {
    if (s == "auto") return RootSolverCfg::Jacobian::Auto;
    if (s == "estimated") return RootSolverCfg::Jacobian::Estimated;
    if (s == "finite_difference") return RootSolverCfg::Jacobian::FiniteDifference;
    throw UsageError("unknown jacobian mode '" + s + "'");
}

// Visits each key of an object, rejecting keys without a handler.
template <typename Handlers>
void visit_object(const nlohmann::json& j, const std::string& where, const Handlers& handlers) {
    if (!j.is_object()) throw UsageError("config section '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        const auto it = handlers.find(key);
        if (it == handlers.end()) throw UsageError("unknown config key '" + where + "." + key + "'");
        try {
            it->second(value);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("bad value for config key '" + where + "." + key + "': " + e.what());
        }
    }
}

using Handler = std::function<void(const nlohmann::json&)>;
using HandlerMap = std::map<std::string, Handler>;

template <typename T>
Handler assign(T& target) {
    return [&target](const nlohmann::json& v) { target = v.get<T>(); };
}

}  // namespace

PooledDataset parse_dataset(const std::string& text, std::vector<std::string>* warnings) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) header = split_line(line);
    }
    if (header.empty()) throw UsageError("dataset is empty; expected header r,y,x1..xd[,y_pred]");
    int col_r = -1, col_y = -1, col_pred = -1;
    std::vector<int> col_x;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& h = header[c];
        if (h == "r") col_r = static_cast<int>(c);
        else if (h == "y") col_y = static_cast<int>(c);
        else if (h == "y_pred") col_pred = static_cast<int>(c);
        else if (h.size() > 1 && h[0] == 'x') col_x.push_back(static_cast<int>(c));
        else throw UsageError("unexpected column '" + h + "'; expected header r,y,x1..xd[,y_pred]");
    }
    if (col_r < 0 || col_y < 0 || col_x.empty()) {
        throw UsageError("missing columns; expected header r,y,x1..xd[,y_pred]");
    }
    std::vector<int> r;
    std::vector<double> y, pred;
    std::vector<std::vector<double>> x;
    bool ignored_y = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw UsageError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(header.size()));
        }
        const double rv = parse_real(cells[col_r], line_no, "r");
        if (rv != 0.0 && rv != 1.0) {
            throw UsageError("r must be 0 or 1, row " + std::to_string(r.size() + 1));
        }
        const int ri = static_cast<int>(rv);
        r.push_back(ri);
        if (ri == 1) {
            if (cells[col_y].empty()) throw UsageError("missing y on labeled row " + std::to_string(r.size()));
            y.push_back(parse_real(cells[col_y], line_no, "y"));
        } else {
            if (!cells[col_y].empty()) {
                parse_real(cells[col_y], line_no, "y");
                ignored_y = true;
            }
            y.push_back(std::nan(""));
        }
        std::vector<double> row;
        for (int c : col_x) row.push_back(parse_real(cells[c], line_no, header[c]));
        x.push_back(std::move(row));
        if (col_pred >= 0) pred.push_back(parse_real(cells[col_pred], line_no, "y_pred"));
    }
    if (ignored_y && warnings) warnings->push_back("y values on unlabeled rows were ignored");
    const auto N = static_cast<Eigen::Index>(r.size());
    Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), N);
    Eigen::MatrixXd xm(N, static_cast<Eigen::Index>(col_x.size()));
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index k = 0; k < xm.cols(); ++k) xm(i, k) = x[i][k];
    }
    PooledDataset data(std::move(r), std::move(yv), std::move(xm));
    if (col_pred >= 0) data.set_predictions(Eigen::Map<Eigen::VectorXd>(pred.data(), N));
    return data;
}

PooledDataset load_dataset(const std::string& path, std::vector<std::string>* warnings) {
    return parse_dataset(read_file(path), warnings);
}

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string dataset_to_csv(const PooledDataset& data) {
    std::ostringstream out;
    out << "r,y";
    for (Eigen::Index k = 0; k < data.dim(); ++k) out << ",x" << k + 1;
    if (data.has_predictions()) out << ",y_pred";
    out << '\n';
    for (Eigen::Index i = 0; i < data.N(); ++i) {
        out << data.r()[i] << ',';
        if (data.r()[i] == 1) out << format_real(data.y()[i]);
        for (Eigen::Index k = 0; k < data.dim(); ++k) out << ',' << format_real(data.x()(i, k));
        if (data.has_predictions()) out << ',' << format_real(data.predictions()[i]);
        out << '\n';
    }
    return out.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw UsageError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw UsageError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw UsageError("cannot rename onto '" + path + "': " + ec.message());
}

std::string summary_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "estimand,estimator,mse100,bias10,se10,mean_se10,are,coverage,replicates,failures\n";
    for (const auto& m : rows) {
        out << m.estimand << ',' << m.estimator << ',' << format_real(m.mse100) << ',' << format_real(m.bias10) << ','
            << format_real(m.se10) << ',' << format_real(m.mean_se10) << ',' << format_real(m.are) << ','
            << format_real(m.coverage) << ',' << m.replicates << ',' << m.failures << '\n';
    }
    return out.str();
}

std::string raw_estimates_csv(const std::vector<RawEstimate>& rows) {
    std::ostringstream out;
    out << "replicate,estimand,estimator,estimate,sd,ci_lo,ci_hi,failed\n";
    for (const auto& r : rows) {
        out << r.replicate << ',' << r.estimand << ',' << r.estimator << ',' << format_real(r.estimate) << ','
            << format_real(r.sd) << ',' << format_real(r.ci_lo) << ',' << format_real(r.ci_hi) << ','
            << (r.failed ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string rho_curves_csv(const std::vector<RhoCurvePoint>& rows) {
    std::ostringstream out;
    out << "replicate,y,rho_star,rho_tilde,rho_hat,rho_true\n";
    for (const auto& p : rows) {
        out << p.replicate << ',' << format_real(p.y) << ',' << format_real(p.rho_star) << ','
            << format_real(p.rho_tilde) << ',' << format_real(p.rho_hat) << ',' << format_real(p.rho_true) << '\n';
    }
    return out.str();
}

RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig c;
    SimConfig& s = c.sim;
    EstimatorSettings& e = s.settings;
    BandwidthPolicy& bw = e.bw;
    RhoGridPlan& plan = e.plan;
    RootSolverCfg& solver = e.solver;

    const HandlerMap sim_keys = {
        {"N", [&](const nlohmann::json& v) { s.N = v.get<Eigen::Index>(); }},
        {"pi", assign(s.pi)},
        {"fixed_labeled_count", assign(s.fixed_labeled_count)},
        {"source_mean", assign(s.source_mean)},
        {"source_var", assign(s.source_var)},
        {"target_mean", assign(s.target_mean)},
        {"target_var", assign(s.target_var)},
        {"alpha",
         [&](const nlohmann::json& v) {
             const auto a = v.get<std::vector<double>>();
             s.alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
         }},
        {"replicates", assign(s.replicates)},
        {"seed", assign(s.seed)},
        {"distortion_linear", assign(s.distortion_linear)},
        {"distortion_quadratic", assign(s.distortion_quadratic)},
        {"estimators", assign(s.estimators)},
        {"estimands", assign(s.estimands)},
        {"quadrature_nodes", assign(s.quadrature_nodes)},
        {"threads", assign(s.threads)},
        {"curve_lo", assign(s.curve_lo)},
        {"curve_hi", assign(s.curve_hi)},
        {"curve_points", assign(s.curve_points)},
        {"keep_curves", assign(s.keep_curves)},
    };
    const HandlerMap bw_keys = {
        {"h_constant", assign(bw.h_constant)},
        {"h_exponent", assign(bw.h_exponent)},
        {"l_constant", assign(bw.l_constant)},
        {"l_exponent", assign(bw.l_exponent)},
        {"nw_constant", assign(bw.nw_constant)},
        {"nw_exponent", assign(bw.nw_exponent)},
        {"y_family", [&](const nlohmann::json& v) { bw.y_family = family_from(v.get<std::string>()); }},
        {"y_order", assign(bw.y_order)},
        {"h_fixed", assign(bw.h_fixed)},
        {"l_fixed", assign(bw.l_fixed)},
    };
    const HandlerMap plan_keys = {
        {"num_points", assign(plan.num_points)},
        {"placement",
         [&](const nlohmann::json& v) {
             const auto p = v.get<std::string>();
             if (p == "quantile") plan.placement = RhoGridPlan::Placement::Quantile;
             else if (p == "uniform") plan.placement = RhoGridPlan::Placement::Uniform;
             else throw UsageError("unknown knot placement '" + p + "'");
         }},
        {"lower_quantile", assign(plan.lower_quantile)},
        {"upper_quantile", assign(plan.upper_quantile)},
        {"clip_floor", assign(plan.clip_floor)},
    };
    const HandlerMap solver_keys = {
        {"max_iter", assign(solver.max_iter)},
        {"tol", assign(solver.tol)},
        {"max_halvings", assign(solver.max_halvings)},
        {"jacobian", [&](const nlohmann::json& v) { solver.jacobian = jacobian_from(v.get<std::string>()); }},
        {"fd_step", assign(solver.fd_step)},
    };
    const HandlerMap top = {
        {"schema_version",
         [&](const nlohmann::json& v) {
             if (v.get<int>() != 1) throw UsageError("unsupported config schema_version");
         }},
        {"simulation", [&](const nlohmann::json& v) { visit_object(v, "simulation", sim_keys); }},
        {"bandwidth", [&](const nlohmann::json& v) { visit_object(v, "bandwidth", bw_keys); }},
        {"rho_grid", [&](const nlohmann::json& v) { visit_object(v, "rho_grid", plan_keys); }},
        {"solver", [&](const nlohmann::json& v) { visit_object(v, "solver", solver_keys); }},
        {"grid_size", assign(e.grid_size)},
        {"ridge", assign(e.ridge)},
        {"rho_ridge", assign(e.rho_ridge)},
        {"ci_level", assign(e.ci_level)},
        {"estimand", assign(c.estimand)},
        {"custom_moment", assign(c.custom_moment)},
        {"discrete", assign(c.discrete)},
    };
    visit_object(j, "config", top);
    if (c.estimand != "mean" && c.estimand != "variance" && c.estimand != "custom") {
        throw UsageError("estimand must be mean, variance or custom");
    }
    s.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

nlohmann::json to_json(const RunConfig& c) {
    const SimConfig& s = c.sim;
    const EstimatorSettings& e = s.settings;
    nlohmann::json j;
    j["schema_version"] = 1;
    j["simulation"] = {
        {"N", s.N},
        {"pi", s.pi},
        {"fixed_labeled_count", s.fixed_labeled_count},
        {"source_mean", s.source_mean},
        {"source_var", s.source_var},
        {"target_mean", s.target_mean},
        {"target_var", s.target_var},
        {"alpha", std::vector<double>(s.alpha.data(), s.alpha.data() + s.alpha.size())},
        {"replicates", s.replicates},
        {"seed", s.seed},
        {"distortion_linear", s.distortion_linear},
        {"distortion_quadratic", s.distortion_quadratic},
        {"estimators", s.estimators},
        {"estimands", s.estimands},
        {"quadrature_nodes", s.quadrature_nodes},
        {"threads", s.threads},
        {"curve_lo", s.curve_lo},
        {"curve_hi", s.curve_hi},
        {"curve_points", s.curve_points},
        {"keep_curves", s.keep_curves},
    };
    j["bandwidth"] = {
        {"h_constant", e.bw.h_constant},   {"h_exponent", e.bw.h_exponent},
        {"l_constant", e.bw.l_constant},   {"l_exponent", e.bw.l_exponent},
        {"nw_constant", e.bw.nw_constant}, {"nw_exponent", e.bw.nw_exponent},
        {"y_family", family_name(e.bw.y_family)},
        {"y_order", e.bw.y_order},         {"h_fixed", e.bw.h_fixed},
        {"l_fixed", e.bw.l_fixed},
    };
    j["rho_grid"] = {
        {"num_points", e.plan.num_points},
        {"placement", e.plan.placement == RhoGridPlan::Placement::Quantile ? "quantile" : "uniform"},
        {"lower_quantile", e.plan.lower_quantile},
        {"upper_quantile", e.plan.upper_quantile},
        {"clip_floor", e.plan.clip_floor},
    };
    j["solver"] = {
        {"max_iter", e.solver.max_iter},
        {"tol", e.solver.tol},
        {"max_halvings", e.solver.max_halvings},
        {"jacobian", jacobian_name(e.solver.jacobian)},
        {"fd_step", e.solver.fd_step},
    };
    j["grid_size"] = e.grid_size;
    j["ridge"] = e.ridge;
    j["rho_ridge"] = e.rho_ridge;
    j["ci_level"] = e.ci_level;
    j["estimand"] = c.estimand;
    j["custom_moment"] = c.custom_moment;
    j["discrete"] = c.discrete;
    return j;
}

}  // namespace labelshift
