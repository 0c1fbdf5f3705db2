#pragma once

#include <string>
#include <vector>

namespace efl::data {

enum class ColumnKind { Numeric, Categorical };

/// Named preset describing how to ingest one dataset family.
struct DatasetProfile {
    std::string name = "generic";
    std::string label_column = "label";
    std::string normal_label = "normal";  // label value meaning benign traffic
    std::vector<std::string> drop_columns;
    bool deduplicate = false;
    bool drop_infinite_rows = false;
    int default_top_k = 0;  // 0 = keep all features

    static DatasetProfile preset(const std::string& name);
};

/// Rectangular text table with per-column kind inference.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<ColumnKind> kinds;
    std::vector<std::vector<std::string>> rows;  // rows[i][j] pairs with columns[j]
    std::size_t label_index = 0;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_features() const { return columns.empty() ? 0 : columns.size() - 1; }
};

/// Read a header-row CSV, drop the profile's columns, optionally remove
/// duplicate and infinite-value rows, and locate the label column.
RawTable ingest(const std::string& path, const DatasetProfile& profile);

/// Same as ingest but over in-memory CSV text (used by tests).
RawTable ingest_text(const std::string& csv_text, const DatasetProfile& profile);

}  // namespace efl::data
