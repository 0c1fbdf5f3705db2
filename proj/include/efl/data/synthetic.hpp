#pragma once

#include "efl/data/encode.hpp"

#include <cstdint>

namespace efl::data {

struct SyntheticConfig {
    Index n_train = 10000;
    Index n_test = 2000;
    Index n_features = 16;
    int n_classes = 2;
    double overlap = 0.3;  // cluster stddev relative to inter-mean spacing
    std::uint64_t seed = 1;
};

/// Gaussian class clusters with controllable overlap; class 0 is the anomaly
/// class. Test features are normalized with the training split's stats.
struct SyntheticData {
    EncodedDataset train;
    EncodedDataset test;
};

SyntheticData make_synthetic(const SyntheticConfig& cfg);

}  // namespace efl::data
