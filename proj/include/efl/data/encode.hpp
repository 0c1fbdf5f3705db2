#pragma once

#include "efl/data/csv.hpp"
#include "efl/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace efl::data {

enum class LabelScheme { Binary, Multi };

/// Per-feature encoding state fitted on the training split and replayed on
/// every later split (test data, application-stage data).
struct NormalizationStats {
    struct Column {
        ColumnKind kind = ColumnKind::Numeric;
        double min = 0.0;
        double max = 0.0;
        std::map<std::string, int> vocab;  // categorical value -> sorted index
    };
    std::vector<Column> columns;  // one per feature column
    std::vector<std::string> class_names;
    int normal_class = 0;
    LabelScheme scheme = LabelScheme::Binary;
};

struct EncodedDataset {
    Mat features;             // [N, d], every column in [0,1] on the fit split
    std::vector<int> labels;  // in [0, K)
    LabelScheme scheme = LabelScheme::Binary;
    std::vector<std::string> class_names;
    int normal_class = 0;  // anomaly classes are all others
    NormalizationStats stats;
    long unseen_category_count = 0;  // test-time values absent from the vocab

    Index n() const { return features.rows(); }
    Index d() const { return features.cols(); }
    int n_classes() const { return static_cast<int>(class_names.size()); }
};

/// Fit encoding + min-max stats on `table` and encode it. Binary scheme maps
/// the profile's normal label to class 1 and everything else to class 0
/// (anomaly is class 0 throughout).
EncodedDataset encode_and_normalize(const RawTable& table, const DatasetProfile& profile,
                                    LabelScheme scheme);

/// Encode a later split with previously fitted stats: numeric values are
/// clamped to [0,1], unseen categories map to index 0 and are tallied.
EncodedDataset encode_and_normalize(const RawTable& table, const DatasetProfile& profile,
                                    const NormalizationStats& stats);

/// Restrict a dataset to the given (sorted) feature columns.
EncodedDataset apply_selection(const EncodedDataset& ds, const std::vector<Index>& selected);

void save_stats(const NormalizationStats& stats, const std::vector<Index>& selected,
                const std::string& path);
void load_stats(const std::string& path, NormalizationStats& stats, std::vector<Index>& selected);

}  // namespace efl::data
