#pragma once

#include "efl/data/encode.hpp"
#include "efl/metrics/metrics.hpp"
#include "efl/nn/network.hpp"

#include <optional>
#include <string>
#include <vector>

namespace efl::intervention {

enum class Verdict { Malicious, Benign };
enum class Action { Blocked, Passed };

struct DetectionEvent {
    Index record_index = 0;
    int predicted_class = 0;
    Verdict verdict = Verdict::Benign;
    long timestamp_slot = 0;
};

/// The if/then rule: malicious traffic is blocked, benign traffic passes.
Action apply_rule(const DetectionEvent& event);

struct BlockLog {
    struct Entry {
        Index record_index;
        int predicted_class;
        Verdict verdict;
        Action action;
    };
    std::vector<Entry> entries;  // one per evaluated record, input order
    long blocked = 0;
    long passed = 0;
};

void write_blocklog_csv(const BlockLog& log, const std::string& path);

struct StageMetrics {
    metrics::ConfusionMatrix cm;
    metrics::BinaryMetrics binary;
    long odc = 0;
    double accuracy = 0.0;
};

struct ApplicationResult {
    BlockLog log;
    std::vector<int> predictions;
    std::optional<StageMetrics> metrics;  // absent without ground truth
};

/// Score an already-encoded (and feature-selected) dataset with the global
/// model and run the rule over each verdict. Metrics are computed only when
/// the dataset carries ground truth.
ApplicationResult run_application_stage(const nn::NetworkSpec& spec,
                                        const nn::ModelParams& params,
                                        const data::EncodedDataset& ds, bool has_ground_truth);

/// Full future-application loop over a new CSV: replay the stored encoding
/// stats and feature selection, infer, apply the rule. A file without the
/// profile's label column yields a BlockLog with the metrics marked absent.
ApplicationResult run_application_stage(const nn::NetworkSpec& spec,
                                        const nn::ModelParams& params,
                                        const data::NormalizationStats& stats,
                                        const std::vector<Index>& selected,
                                        const std::string& new_data_path,
                                        const data::DatasetProfile& profile);

/// In-memory CSV variant (used by tests).
ApplicationResult run_application_stage_text(const nn::NetworkSpec& spec,
                                             const nn::ModelParams& params,
                                             const data::NormalizationStats& stats,
                                             const std::vector<Index>& selected,
                                             const std::string& csv_text,
                                             const data::DatasetProfile& profile);

}  // namespace efl::intervention
