#include "labelshift/simulation.hpp"

#include "labelshift/baselines.hpp"
#include "labelshift/condexp.hpp"
#include "labelshift/error.hpp"
#include "labelshift/estimand.hpp"
#include "labelshift/stats.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <thread>

namespace labelshift {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double normal_pdf(double y, double mean, double var) {
    const double z = (y - mean) * (y - mean) / var;
    return std::exp(-0.5 * z) / std::sqrt(2.0 * std::numbers::pi * var);
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

Estimand make_estimand(const std::string& name) {
    if (name == "mean") return mean_estimand();
    if (name == "variance") return variance_estimand();
    throw UsageError("unknown simulation estimand '" + name + "'");
}

// The shift-dependent variance is N^{-1} sum r_i rho(y_i) (y_i - theta_1)^2 / pi at the known target mean.
Estimand shift_estimand(const SimConfig& config, const std::string& name) {
    if (name != "variance") return make_estimand(name);
    const double mu = config.target_mean;
    return moment_estimand("variance", [mu](double y, const Eigen::VectorXd&) { return (y - mu) * (y - mu); }, false);
}

RawEstimate to_raw(int replicate, const std::string& estimand, const Estimand& e, const EstimateReport& rep) {
    RawEstimate r;
    r.replicate = replicate;
    r.estimand = estimand;
    r.estimator = rep.estimator_name;
    const Eigen::Index k = e.report_index;
    r.estimate = rep.theta_hat[k];
    r.sd = rep.std_err[k];
    r.ci_lo = rep.ci[k].lo;
    r.ci_hi = rep.ci[k].hi;
    return r;
}

RawEstimate failed_raw(int replicate, const std::string& estimand, const std::string& estimator) {
    RawEstimate r;
    r.replicate = replicate;
    r.estimand = estimand;
    r.estimator = estimator;
    r.estimate = r.sd = r.ci_lo = r.ci_hi = std::nan("");
    r.failed = true;
    return r;
}

}  // namespace

std::vector<std::string> known_estimators() {
    return {"shift", "doubly", "singly", "efficient_tilde", "efficient_hat", "oracle"};
}

void SimConfig::validate() const {
    if (N < 10) throw UsageError("simulation N must be at least 10");
    if (!(pi > 0.0 && pi < 1.0)) throw UsageError("simulation pi must lie in (0, 1)");
    if (!(source_var > 0.0) || !(target_var > 0.0)) throw UsageError("simulation variances must be positive");
    if (alpha.size() < 1) throw UsageError("simulation alpha must be nonempty");
    if (replicates < 1) throw UsageError("replicates must be at least 1");
    if (curve_points < 2 || !(curve_hi > curve_lo)) throw UsageError("rho curve grid is empty");
    for (const auto& e : estimators) {
        if (!contains(known_estimators(), e)) throw UsageError("unknown estimator '" + e + "'");
    }
    for (const auto& e : estimands) make_estimand(e);
    if (quadrature_nodes < 1) throw UsageError("quadrature_nodes must be positive");
    settings.validate();
}

double SimConfig::true_theta(const std::string& estimand) const {
    if (estimand == "mean") return target_mean;
    if (estimand == "variance") return target_var;
    throw UsageError("unknown simulation estimand '" + estimand + "'");
}

std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

DensityRatioModel true_density_ratio(const SimConfig& c) {
    const double mp = c.source_mean, vp = c.source_var, mq = c.target_mean, vq = c.target_var;
    return DensityRatioModel::closed_form(
        [=](double y) { return normal_pdf(y, mq, vq) / normal_pdf(y, mp, vp); });
}

Replicate generate_replicate(const SimConfig& config, std::uint64_t seed) {
    const Eigen::Index N = config.N;
    const Eigen::Index d = config.alpha.size();
    for (int attempt = 0;; ++attempt) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt));
        std::bernoulli_distribution coin(config.pi);
        std::normal_distribution<double> z(0.0, 1.0);
        const auto fixed_n = static_cast<Eigen::Index>(std::llround(config.pi * static_cast<double>(N)));
        std::vector<int> r(N);
        Eigen::VectorXd y(N);
        Eigen::MatrixXd x(N, d);
        Eigen::Index n = 0;
        for (Eigen::Index i = 0; i < N; ++i) {
            r[i] = config.fixed_labeled_count ? (i < fixed_n ? 1 : 0) : (coin(rng) ? 1 : 0);
            y[i] = r[i] == 1 ? config.source_mean + std::sqrt(config.source_var) * z(rng)
                             : config.target_mean + std::sqrt(config.target_var) * z(rng);
            for (Eigen::Index k = 0; k < d; ++k) x(i, k) = config.alpha[k] * y[i] + z(rng);
            n += r[i];
        }
        if (n == 0 || n == N) continue;
        Replicate rep;
        rep.hidden_y = y;
        rep.data = PooledDataset(std::move(r), std::move(y), std::move(x));
        rep.true_rho = true_density_ratio(config);
        rep.regenerations = attempt;
        return rep;
    }
}

DensityRatioModel working_rho_star(const SimConfig& config, const PooledDataset& data) {
    const DensityRatioModel truth = true_density_ratio(config);
    const double a = config.distortion_linear;
    const double b = config.distortion_quadratic;
    double acc = 0.0;
    for (Eigen::Index i : data.labeled()) {
        const double y = data.y()[i];
        acc += truth(y) * std::exp(a * y + b * y * y);
    }
    const double c_star = data.pi() / (acc / static_cast<double>(data.N()));
    return DensityRatioModel::closed_form(
        [truth, a, b, c_star](double y) { return c_star * truth(y) * std::exp(a * y + b * y * y); });
}

ReplicateOutput run_replicate(const SimConfig& config, int index) {
    ReplicateOutput out;
    const Replicate rep = generate_replicate(config, replicate_seed(config.seed, static_cast<std::uint64_t>(index)));
    const PooledDataset& data = rep.data;
    const EstimatorSettings& settings = config.settings;
    const auto nw = fit_cond_exp_nonparametric(data.labeled_y(), data.labeled_x(), settings.bw.nw(data.n()));
    const CondExpTable table(*nw, data.x());
    const DensityRatioModel rho_star = working_rho_star(config, data);

    std::vector<Estimand> estimands;
    for (const auto& name : config.estimands) estimands.push_back(make_estimand(name));
    const auto want = [&](const std::string& e) { return contains(config.estimators, e); };

    std::map<std::string, std::vector<EstimateReport>> reports;
    std::map<std::string, std::string> failures;
    auto guard = [&](const std::string& name, const std::function<std::vector<EstimateReport>()>& fn) {
        try {
            reports[name] = fn();
        } catch (const Error& e) {
            failures[name] = e.what();
        }
    };

    std::optional<EfficientResult> eff;
    const bool need_eff = want("efficient_tilde") || want("efficient_hat");
    if (need_eff) {
        std::vector<EstimateReport> star;
        try {
            eff = efficient_pipeline(data, estimands, table, rho_star, settings, want("singly") ? &star : nullptr);
            reports["efficient_tilde"] = eff->tilde;
            reports["efficient_hat"] = eff->hat;
            if (want("singly")) reports["singly"] = star;
        } catch (const Error& e) {
            failures["efficient_tilde"] = failures["efficient_hat"] = e.what();
            if (want("singly")) failures["singly"] = e.what();
        }
    } else if (want("singly")) {
        guard("singly", [&] {
            std::vector<EstimateReport> v;
            for (const auto& e : estimands) v.push_back(estimate_with_rho(data, e, rho_star, table, settings, "singly"));
            return v;
        });
    }
    std::vector<Estimand> shift_estimands;
    for (const auto& name : config.estimands) shift_estimands.push_back(shift_estimand(config, name));
    if (want("shift")) {
        guard("shift", [&] {
            std::vector<EstimateReport> v;
            for (const auto& e : shift_estimands) {
                v.push_back(shift_dependent_report(data, e, rho_star, settings.solver, settings.ci_level));
            }
            return v;
        });
    }
    if (want("oracle")) {
        guard("oracle", [&] {
            std::vector<EstimateReport> v;
            for (const auto& e : estimands) v.push_back(oracle_efficient(data, e, rep.true_rho, table, settings));
            return v;
        });
    }
    if (want("doubly")) {
        guard("doubly", [&] {
            const WorkingRegressionModel wm =
                fit_working_model(data.labeled_y(), data.labeled_x(), wrongly_transformed_design());
            std::vector<EstimateReport> v;
            for (const auto& e : estimands) {
                v.push_back(doubly_flexible_report(data, e, rho_star, wm, settings, config.quadrature_nodes));
            }
            return v;
        });
    }

    for (std::size_t k = 0; k < estimands.size(); ++k) {
        for (const auto& name : config.estimators) {
            const auto it = reports.find(name);
            if (it != reports.end()) {
                const Estimand& used = name == "shift" ? shift_estimands[k] : estimands[k];
                out.raw.push_back(to_raw(index, config.estimands[k], used, it->second[k]));
                out.raw.back().estimator = name;
            } else {
                out.raw.push_back(failed_raw(index, config.estimands[k], name));
            }
        }
    }
    for (const auto& [name, msg] : failures) {
        out.errors.push_back("replicate " + std::to_string(index) + " " + name + ": " + msg);
    }

    if (config.keep_curves && eff) {
        for (int j = 0; j < config.curve_points; ++j) {
            const double y = config.curve_lo + (config.curve_hi - config.curve_lo) * j / (config.curve_points - 1.0);
            out.curves.push_back({index, y, rho_star(y), eff->rho_tilde.model(y), eff->rho_hat.model(y), rep.true_rho(y)});
        }
    }
    return out;
}

int resolve_threads(int requested) {
    int t = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("LABELSHIFT_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap > 0) t = std::min<int>(t, static_cast<int>(cap));
    }
    return std::max(1, t);
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

StudyResult run_study(const SimConfig& config) {
    config.validate();
    std::vector<ReplicateOutput> per(static_cast<std::size_t>(config.replicates));
    parallel_for(config.replicates, resolve_threads(config.threads), [&](int i) { per[i] = run_replicate(config, i); });
    StudyResult out;
    for (auto& r : per) {
        out.raw.insert(out.raw.end(), r.raw.begin(), r.raw.end());
        out.curves.insert(out.curves.end(), r.curves.begin(), r.curves.end());
        out.errors.insert(out.errors.end(), r.errors.begin(), r.errors.end());
    }
    out.summary = summarize(config, out.raw);
    return out;
}

std::vector<MetricsRow> summarize(const SimConfig& config, const std::vector<RawEstimate>& raw) {
    std::vector<MetricsRow> rows;
    for (const auto& estimand : config.estimands) {
        const double truth = config.true_theta(estimand);
        std::map<std::string, MetricsRow> by_name;
        for (const auto& name : config.estimators) {
            std::vector<double> est, sd;
            int covered = 0;
            int failed = 0;
            for (const auto& r : raw) {
                if (r.estimand != estimand || r.estimator != name) continue;
                if (r.failed) {
                    ++failed;
                    continue;
                }
                est.push_back(r.estimate);
                sd.push_back(r.sd);
                if (r.ci_lo <= truth && truth <= r.ci_hi) ++covered;
            }
            MetricsRow m;
            m.estimand = estimand;
            m.estimator = name;
            m.failures = failed;
            m.replicates = static_cast<int>(est.size());
            if (!est.empty()) {
                double sq = 0.0;
                for (double e : est) sq += (e - truth) * (e - truth);
                m.mse100 = 100.0 * sq / static_cast<double>(est.size());
                m.bias10 = 10.0 * (sample_mean(est) - truth);
                m.se10 = 10.0 * sample_sd(est);
                m.mean_se10 = 10.0 * sample_mean(sd);
                m.coverage = static_cast<double>(covered) / static_cast<double>(est.size());
            } else {
                m.mse100 = m.bias10 = m.se10 = m.mean_se10 = m.coverage = std::nan("");
            }
            by_name[name] = m;
        }
        const auto oracle = by_name.find("oracle");
        for (const auto& name : config.estimators) {
            MetricsRow m = by_name[name];
            m.are = oracle != by_name.end() && oracle->second.mse100 > 0.0 ? m.mse100 / oracle->second.mse100
                                                                            : std::nan("");
            rows.push_back(m);
        }
    }
    return rows;
}

}  // namespace labelshift
