#pragma once

#include "efl/types.hpp"

#include <optional>
#include <vector>

namespace efl::metrics {

enum class TaskMode { Binary, Multi };

/// Anomaly (attack) traffic is the positive class throughout. In binary mode
/// every label other than `normal_class` (== 1 in this codebase's encoding)
/// is an anomaly; in multi mode all attack classes pool into one anomaly
/// verdict for the binary collapse.
struct ConfusionMatrix {
    long tp = 0, tn = 0, fp = 0, fn = 0;  // binary collapse
    MatT<long> table;                     // K x K counts, multi mode only
    TaskMode mode = TaskMode::Binary;

    long total() const { return tp + tn + fp + fn; }
};

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          TaskMode mode, int normal_class = 1, int n_classes = 2);

/// Zero-denominator metrics are reported absent rather than NaN or 0.
struct BinaryMetrics {
    std::optional<double> accuracy, precision, recall, f1, far;
};

BinaryMetrics binary_metrics(const ConfusionMatrix& cm);

/// Simple means over participating clients (alpha == 1); absent per-client
/// entries are skipped and tallied.
struct AveragedMetrics {
    std::optional<double> aa, ap, ar, afs;
    int participants = 0;
    int skipped_absent = 0;
};

AveragedMetrics averaged_metrics(const std::vector<BinaryMetrics>& per_client,
                                 const std::vector<int>& alphas);

double multiclass_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

/// Overall detection correctness: correctly-classified count after pooling
/// anomaly classes (equals TP + TN of the same confusion matrix).
long odc(const std::vector<int>& pred, const std::vector<int>& truth, TaskMode mode,
         int normal_class = 1);

enum class DistanceMetric { L1, L2 };

/// Mean pairwise distance between the two embedding sets (rows are samples).
double boundary_distance(const Mat& malicious, const Mat& benign,
                         DistanceMetric metric = DistanceMetric::L2);

struct CostModelInput {
    long n_malicious = 1;  // |X̂_s|
    long n_benign = 1;     // |X̃_s|
    long eps_dist = 1;     // operations per distance evaluation
    long n_servers = 1;    // |S|
};

struct CostComparison {
    long long cost_pairwise = 0;
    long long cost_prototype = 0;
    bool prototype_cheaper = false;
};

CostComparison cost_comparison(const CostModelInput& inp);

}  // namespace efl::metrics
