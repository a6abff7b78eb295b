#pragma once

#include "labelshift/dataset.hpp"
#include "labelshift/simulation.hpp"

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace labelshift {

// CSV with header r,y,x1..xd and an optional y_pred column.
PooledDataset load_dataset(const std::string& path, std::vector<std::string>* warnings = nullptr);
PooledDataset parse_dataset(const std::string& text, std::vector<std::string>* warnings = nullptr);
std::string dataset_to_csv(const PooledDataset& data);

std::string format_real(double v);

// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

std::string summary_csv(const std::vector<MetricsRow>& rows);
std::string raw_estimates_csv(const std::vector<RawEstimate>& rows);
std::string rho_curves_csv(const std::vector<RhoCurvePoint>& rows);

struct RunConfig {
    SimConfig sim;
    std::string estimand = "mean";
    std::string custom_moment;  // "y^k" for --estimand custom
    bool discrete = false;
};

// Unknown keys are rejected; absent keys keep their defaults.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

}  // namespace labelshift
