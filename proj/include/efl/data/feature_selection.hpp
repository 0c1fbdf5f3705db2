#pragma once

#include "efl/types.hpp"

#include <optional>
#include <vector>

namespace efl::data {

/// Pearson correlation; nullopt when either vector has zero variance.
std::optional<double> pcc(const Vec& x, const Vec& y);

struct FeatureSelection {
    std::vector<Index> selected_indices;  // sorted ascending, size == top_k
    std::vector<int> qualifying_counts;   // per original feature column
    double band_lo = 0.1;
    double band_hi = 1.0;
    Index top_k = 0;
};

/// For each feature, count how many pairwise |PCC| values against the other
/// features fall inside [band_lo, band_hi]; keep the top_k features by count,
/// ties broken by lower column index. Undefined correlations never qualify.
FeatureSelection select_features(const Mat& features, Index top_k, double band_lo = 0.1,
                                 double band_hi = 1.0);

}  // namespace efl::data
