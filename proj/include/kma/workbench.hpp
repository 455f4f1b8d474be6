#ifndef KMA_WORKBENCH_HPP
#define KMA_WORKBENCH_HPP

#include <filesystem>
#include <optional>
#include <string>

#include "kma/config.hpp"
#include "kma/io.hpp"

namespace kma::workbench {

namespace fs = std::filesystem;

// Command bodies shared by the CLI and the test suites. Each writes its
// artifacts under `out` and echoes the config file for provenance. Errors
// are reported by the exception types in errors.hpp; main() maps them to
// exit codes.

// dataset.csv + dataset_meta.json
void cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out);

// base_model.json, member_XX.json, weighted_model.json, weights.json,
// train_report.csv. Requires gen-data artifacts in `out`.
void cmd_run(const ExperimentConfig& cfg, const fs::path& out);

// edmd_baseline.json (monomials up to degree 2) and normal_nn.json, both
// trained on the entire dataset and stored in the standard model schema.
void cmd_baselines(const ExperimentConfig& cfg, const fs::path& out);

struct PredictArgs {
    fs::path model_path;
    Vector x0;
    std::optional<fs::path> input_file;  // CSV with u columns
    Vector u_const;                      // used when no input file is given
    int steps = 50;
};

struct PredictMetrics {
    std::vector<double> rmse_per_step;
    double total_rmse = 0.0;
    bool defined = false;
};

// prediction.csv (true and predicted states side by side) +
// prediction_metrics.json; prints the total RMSE.
PredictMetrics cmd_predict(const ExperimentConfig& cfg, const fs::path& out,
                           const PredictArgs& args);

// closed_loop_<task>.csv + metrics_<task>.json against the true plant.
void cmd_control(const ExperimentConfig& cfg, const fs::path& out,
                 const fs::path& model_path, const std::string& task);

// Aggregates the artifacts found in `out` into summary.json and prints a
// short table.
void cmd_report(const fs::path& out);

}  // namespace kma::workbench

#endif
