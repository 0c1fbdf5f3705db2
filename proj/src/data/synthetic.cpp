#include "efl/data/synthetic.hpp"

#include <random>
#include <stdexcept>

namespace efl::data {

namespace {

EncodedDataset encode_synthetic(const Mat& raw, std::vector<int> labels,
                                const NormalizationStats& stats) {
    EncodedDataset ds;
    ds.scheme = stats.scheme;
    ds.class_names = stats.class_names;
    ds.normal_class = stats.normal_class;
    ds.stats = stats;
    ds.labels = std::move(labels);
    ds.features.resize(raw.rows(), raw.cols());
    for (Index j = 0; j < raw.cols(); ++j) {
        const auto& col = stats.columns[static_cast<std::size_t>(j)];
        const double span = col.max - col.min;
        for (Index i = 0; i < raw.rows(); ++i) {
            double v = span <= 0.0 ? 0.0 : (raw(i, j) - col.min) / span;
            ds.features(i, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return ds;
}

}  // namespace

SyntheticData make_synthetic(const SyntheticConfig& cfg) {
    if (cfg.n_classes < 2) throw std::invalid_argument("make_synthetic: need >= 2 classes");
    if (cfg.overlap <= 0.0) throw std::invalid_argument("make_synthetic: overlap must be > 0");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, cfg.overlap);

    Mat means(cfg.n_classes, cfg.n_features);
    for (Index k = 0; k < cfg.n_classes; ++k)
        for (Index j = 0; j < cfg.n_features; ++j) means(k, j) = unif(rng);

    auto draw = [&](Index n, Mat& raw, std::vector<int>& labels) {
        raw.resize(n, cfg.n_features);
        labels.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const int k = static_cast<int>(i % cfg.n_classes);
            labels[static_cast<std::size_t>(i)] = k;
            for (Index j = 0; j < cfg.n_features; ++j)
                raw(i, j) = means(k, j) + noise(rng);
        }
    };

    Mat raw_train, raw_test;
    std::vector<int> y_train, y_test;
    draw(cfg.n_train, raw_train, y_train);
    draw(cfg.n_test, raw_test, y_test);

    NormalizationStats stats;
    if (cfg.n_classes == 2) {
        stats.scheme = LabelScheme::Binary;
        stats.class_names = {"anomaly", "normal"};
        stats.normal_class = 1;
    } else {
        stats.scheme = LabelScheme::Multi;
        for (int k = 0; k + 1 < cfg.n_classes; ++k)
            stats.class_names.push_back("attack" + std::to_string(k + 1));
        stats.class_names.push_back("normal");
        stats.normal_class = cfg.n_classes - 1;
    }
    for (Index j = 0; j < cfg.n_features; ++j) {
        NormalizationStats::Column col;
        col.kind = ColumnKind::Numeric;
        col.min = raw_train.col(j).minCoeff();
        col.max = raw_train.col(j).maxCoeff();
        stats.columns.push_back(col);
    }

    SyntheticData out;
    out.train = encode_synthetic(raw_train, std::move(y_train), stats);
    out.test = encode_synthetic(raw_test, std::move(y_test), stats);
    return out;
}

}  // namespace efl::data
