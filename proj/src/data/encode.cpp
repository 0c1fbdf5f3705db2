#include "efl/data/encode.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <stdexcept>

namespace efl::data {

namespace {

double to_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{}) throw std::runtime_error("encode: non-numeric cell '" + s + "'");
    return v;
}

double scale01(double v, double lo, double hi) {
    if (hi <= lo) return 0.0;  // constant column
    return (v - lo) / (hi - lo);
}

std::vector<std::size_t> feature_columns(const RawTable& table) {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < table.columns.size(); ++j)
        if (j != table.label_index) cols.push_back(j);
    return cols;
}

std::vector<int> encode_labels(const RawTable& table, const DatasetProfile& profile,
                               const NormalizationStats& stats) {
    std::vector<int> labels;
    labels.reserve(table.n_rows());
    for (const auto& row : table.rows) {
        const std::string& value = row[table.label_index];
        if (stats.scheme == LabelScheme::Binary) {
            labels.push_back(value == profile.normal_label ? 1 : 0);
        } else {
            auto it = std::find(stats.class_names.begin(), stats.class_names.end(), value);
            if (it == stats.class_names.end())
                throw std::runtime_error("encode: unknown label value '" + value + "'");
            labels.push_back(static_cast<int>(it - stats.class_names.begin()));
        }
    }
    return labels;
}

EncodedDataset encode_with(const RawTable& table, const DatasetProfile& profile,
                           const NormalizationStats& stats, bool fit_split) {
    const auto cols = feature_columns(table);
    if (cols.size() != stats.columns.size())
        throw std::runtime_error("encode: feature count mismatch with fitted stats");

    EncodedDataset ds;
    ds.scheme = stats.scheme;
    ds.class_names = stats.class_names;
    ds.normal_class = stats.normal_class;
    ds.stats = stats;
    ds.labels = encode_labels(table, profile, stats);

    const Index N = static_cast<Index>(table.n_rows());
    const Index d = static_cast<Index>(cols.size());
    ds.features.resize(N, d);
    for (Index i = 0; i < N; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        for (Index j = 0; j < d; ++j) {
            const auto& st = stats.columns[static_cast<std::size_t>(j)];
            const std::string& cell = row[cols[static_cast<std::size_t>(j)]];
            double raw;
            if (st.kind == ColumnKind::Numeric) {
                raw = to_double(cell);
            } else {
                auto it = st.vocab.find(cell);
                if (it != st.vocab.end()) {
                    raw = it->second;
                } else {
                    raw = 0.0;
                    ++ds.unseen_category_count;
                }
            }
            double v = scale01(raw, st.min, st.max);
            if (!fit_split) v = std::clamp(v, 0.0, 1.0);
            ds.features(i, j) = v;
        }
    }
    return ds;
}

}  // namespace

EncodedDataset encode_and_normalize(const RawTable& table, const DatasetProfile& profile,
                                    LabelScheme scheme) {
    NormalizationStats stats;
    stats.scheme = scheme;
    if (scheme == LabelScheme::Binary) {
        stats.class_names = {"anomaly", "normal"};
        stats.normal_class = 1;
    } else {
        std::set<std::string> vocab;
        for (const auto& row : table.rows) vocab.insert(row[table.label_index]);
        stats.class_names.assign(vocab.begin(), vocab.end());
        auto it = std::find(stats.class_names.begin(), stats.class_names.end(),
                            profile.normal_label);
        stats.normal_class =
            it == stats.class_names.end() ? -1 : static_cast<int>(it - stats.class_names.begin());
    }

    for (std::size_t j : feature_columns(table)) {
        NormalizationStats::Column col;
        col.kind = table.kinds[j];
        if (col.kind == ColumnKind::Categorical) {
            std::set<std::string> vocab;
            for (const auto& row : table.rows) vocab.insert(row[j]);
            int idx = 0;
            for (const auto& v : vocab) col.vocab[v] = idx++;
            col.min = 0.0;
            col.max = static_cast<double>(col.vocab.size()) - 1.0;
        } else {
            bool first = true;
            for (const auto& row : table.rows) {
                double v = to_double(row[j]);
                if (first || v < col.min) col.min = v;
                if (first || v > col.max) col.max = v;
                first = false;
            }
        }
        stats.columns.push_back(std::move(col));
    }
    return encode_with(table, profile, stats, /*fit_split=*/true);
}

EncodedDataset encode_and_normalize(const RawTable& table, const DatasetProfile& profile,
                                    const NormalizationStats& stats) {
    return encode_with(table, profile, stats, /*fit_split=*/false);
}

EncodedDataset apply_selection(const EncodedDataset& ds, const std::vector<Index>& selected) {
    EncodedDataset out = ds;
    out.features.resize(ds.features.rows(), static_cast<Index>(selected.size()));
    for (std::size_t j = 0; j < selected.size(); ++j) {
        if (selected[j] < 0 || selected[j] >= ds.features.cols())
            throw std::out_of_range("apply_selection: column index out of range");
        out.features.col(static_cast<Index>(j)) = ds.features.col(selected[j]);
    }
    return out;
}

void save_stats(const NormalizationStats& stats, const std::vector<Index>& selected,
                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_stats: cannot open " + path);
    out << "scheme " << (stats.scheme == LabelScheme::Binary ? "binary" : "multi") << "\n";
    out << "normal_class " << stats.normal_class << "\n";
    out << "classes " << stats.class_names.size();
    for (const auto& c : stats.class_names) out << " " << c;
    out << "\n";
    out << "selected " << selected.size();
    for (Index i : selected) out << " " << i;
    out << "\n";
    out << "columns " << stats.columns.size() << "\n";
    out.precision(17);
    for (const auto& col : stats.columns) {
        out << (col.kind == ColumnKind::Numeric ? "numeric " : "categorical ") << col.min << " "
            << col.max << " " << col.vocab.size();
        for (const auto& [value, idx] : col.vocab) out << " " << value << " " << idx;
        out << "\n";
    }
}

void load_stats(const std::string& path, NormalizationStats& stats,
                std::vector<Index>& selected) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_stats: cannot open " + path);
    std::string key, value;
    in >> key >> value;
    if (key != "scheme") throw std::runtime_error("load_stats: bad format");
    stats.scheme = value == "binary" ? LabelScheme::Binary : LabelScheme::Multi;
    std::size_t n;
    in >> key >> stats.normal_class;
    in >> key >> n;
    stats.class_names.resize(n);
    for (auto& c : stats.class_names) in >> c;
    in >> key >> n;
    selected.resize(n);
    for (auto& i : selected) in >> i;
    in >> key >> n;
    stats.columns.assign(n, {});
    for (auto& col : stats.columns) {
        std::string kind;
        std::size_t vsize;
        in >> kind >> col.min >> col.max >> vsize;
        col.kind = kind == "numeric" ? ColumnKind::Numeric : ColumnKind::Categorical;
        for (std::size_t i = 0; i < vsize; ++i) {
            std::string v;
            int idx;
            in >> v >> idx;
            col.vocab[v] = idx;
        }
    }
    if (!in) throw std::runtime_error("load_stats: truncated file " + path);
}

}  // namespace efl::data
