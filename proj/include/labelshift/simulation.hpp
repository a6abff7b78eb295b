#pragma once

#include "labelshift/dataset.hpp"
#include "labelshift/estimators.hpp"
#include "labelshift/ratio_model.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace labelshift {

struct SimConfig {
    Eigen::Index N = 500;
    double pi = 0.5;
    // Draw n exactly as round(pi N) instead of R ~ Bernoulli(pi) per row.
    bool fixed_labeled_count = false;
    double source_mean = 0.0;
    double source_var = 2.0;
    double target_mean = 1.0;
    double target_var = 1.0;
    Eigen::VectorXd alpha = (Eigen::VectorXd(3) << -0.5, 0.5, 1.0).finished();
    int replicates = 1000;
    std::uint64_t seed = 20240601;
    double distortion_linear = 0.2;
    double distortion_quadratic = 0.1;
    std::vector<std::string> estimators = {"shift", "doubly", "singly", "efficient_tilde", "efficient_hat", "oracle"};
    std::vector<std::string> estimands = {"mean", "variance"};
    EstimatorSettings settings;
    int quadrature_nodes = 40;
    int threads = 0;  // 0: LABELSHIFT_THREADS or hardware concurrency
    double curve_lo = -1.0;
    double curve_hi = 3.0;
    int curve_points = 41;
    bool keep_curves = true;

    void validate() const;
    double true_theta(const std::string& estimand) const;
};

std::vector<std::string> known_estimators();

struct Replicate {
    PooledDataset data;
    DensityRatioModel true_rho;
    Eigen::VectorXd hidden_y;  // labels drawn for unlabeled rows, validation only
    int regenerations = 0;
};

std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t index);

DensityRatioModel true_density_ratio(const SimConfig& config);

Replicate generate_replicate(const SimConfig& config, std::uint64_t seed);

// rho*(y) = c* rho(y) exp(a y + b y^2) with c* normalizing the labeled mean of rho* to one.
DensityRatioModel working_rho_star(const SimConfig& config, const PooledDataset& data);

struct MetricsRow {
    std::string estimand;
    std::string estimator;
    double mse100 = 0.0;
    double bias10 = 0.0;
    double se10 = 0.0;       // Monte Carlo standard deviation of the estimates
    double mean_se10 = 0.0;  // average plug-in standard error
    double are = 0.0;
    double coverage = 0.0;
    int replicates = 0;
    int failures = 0;
};

struct RawEstimate {
    int replicate = 0;
    std::string estimand;
    std::string estimator;
    double estimate = 0.0;
    double sd = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool failed = false;
};

struct RhoCurvePoint {
    int replicate = 0;
    double y = 0.0;
    double rho_star = 0.0;
    double rho_tilde = 0.0;
    double rho_hat = 0.0;
    double rho_true = 0.0;
};

struct ReplicateOutput {
    std::vector<RawEstimate> raw;
    std::vector<RhoCurvePoint> curves;
    std::vector<std::string> errors;
};

ReplicateOutput run_replicate(const SimConfig& config, int index);

struct StudyResult {
    std::vector<MetricsRow> summary;
    std::vector<RawEstimate> raw;
    std::vector<RhoCurvePoint> curves;
    std::vector<std::string> errors;
};

StudyResult run_study(const SimConfig& config);

std::vector<MetricsRow> summarize(const SimConfig& config, const std::vector<RawEstimate>& raw);

int resolve_threads(int requested);

// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace labelshift
