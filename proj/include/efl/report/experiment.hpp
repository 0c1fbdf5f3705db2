#pragma once

#include "efl/data/synthetic.hpp"
#include "efl/fl/engine.hpp"

#include <optional>
#include <string>
#include <vector>

namespace efl::report {

/// Full experiment description; parsed from a flat key=value file, overridable
/// per key from the command line. Unknown keys are rejected.
struct ExperimentConfig {
    std::string dataset = "synthetic";  // nsl-kdd | unsw-nb15 | iotid20 | synthetic | generic
    std::string train_path;
    std::string test_path;
    std::string mode = "binary";  // binary | multi
    int clients = 10;
    double delta = 0.9;
    std::vector<std::string> strategies = {"efpkd"};
    Index top_k = 0;  // 0 -> profile default, capped at the feature count
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "out";
    bool desk_scale = false;
    long max_train_rows = 0;  // 0 = no cap; desk_scale sets 10000/2000
    long max_test_rows = 0;

    // generic-profile declarations
    std::string label_column = "label";
    std::string normal_label = "normal";
    std::vector<std::string> drop_columns;
    bool dedup = false;
    bool drop_infinite = false;

    // synthetic-profile knobs
    Index synth_train = 10000;
    Index synth_test = 2000;
    Index synth_features = 16;
    int synth_classes = 2;
    double synth_overlap = 0.3;
    std::uint64_t synth_seed = 1;

    fl::RoundConfig round;  // psi/gamma/zeta/epochs/batch/rounds/lrs/availability/widths
};

/// Apply one key=value setting; throws on unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

ExperimentConfig parse_config_file(const std::string& path);

struct RunRecord {
    std::string strategy;
    std::uint64_t seed = 0;
    std::optional<double> accuracy, precision, recall, f1, far;
    long odc = 0;
    long test_size = 0;
    bool has_global_model = false;
    std::vector<fl::RoundReport> rounds;
};

struct ExperimentOutput {
    std::vector<RunRecord> runs;
    std::string out_dir;
    double wall_seconds = 0.0;
};

/// Execute the full pipeline (feature selection, partitioning, training per
/// strategy and seed, final application-stage evaluation) and write report.txt,
/// metrics.csv, rounds.csv, blocklog.csv, model.bin (+ sidecar) to out_dir.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

/// Write the table files for completed runs (also called by run_experiment).
void emit_report(const ExperimentOutput& out, const ExperimentConfig& cfg);

}  // namespace efl::report
