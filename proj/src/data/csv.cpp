#include "efl/data/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace efl::data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
    if (b == e) return false;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc{} && ptr == e;
}

bool is_infinite_cell(const std::string& s) {
    double v;
    if (parse_double(s, v)) return !std::isfinite(v);
    std::string low;
    for (char ch : s)
        if (!std::isspace(static_cast<unsigned char>(ch)))
            low += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return low == "inf" || low == "infinity" || low == "-inf" || low == "-infinity" ||
           low == "nan";
}

RawTable build_table(std::istream& in, const DatasetProfile& profile) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("ingest: empty input");
    auto header = split_csv_line(line);

    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < header.size(); ++j) {
        bool dropped = std::find(profile.drop_columns.begin(), profile.drop_columns.end(),
                                 header[j]) != profile.drop_columns.end();
        if (!dropped) keep.push_back(j);
    }

    RawTable table;
    for (std::size_t j : keep) table.columns.push_back(header[j]);

    auto it = std::find(table.columns.begin(), table.columns.end(), profile.label_column);
    if (it == table.columns.end())
        throw std::runtime_error("ingest: label column '" + profile.label_column +
                                 "' not found");
    table.label_index = static_cast<std::size_t>(it - table.columns.begin());

    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("ingest: ragged row " + std::to_string(row_no) +
                                     " (expected " + std::to_string(header.size()) + " cells, got " +
                                     std::to_string(cells.size()) + ")");
        std::vector<std::string> row;
        row.reserve(keep.size());
        for (std::size_t j : keep) row.push_back(std::move(cells[j]));
        if (profile.drop_infinite_rows &&
            std::any_of(row.begin(), row.end(), is_infinite_cell))
            continue;
        table.rows.push_back(std::move(row));
    }

    if (profile.deduplicate) {
        std::set<std::vector<std::string>> seen;
        std::vector<std::vector<std::string>> unique;
        for (auto& r : table.rows)
            if (seen.insert(r).second) unique.push_back(std::move(r));
        table.rows = std::move(unique);
    }

    // a column is numeric iff every cell parses as a finite double
    table.kinds.assign(table.columns.size(), ColumnKind::Numeric);
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
        for (const auto& r : table.rows) {
            double v;
            if (!parse_double(r[j], v)) {
                table.kinds[j] = ColumnKind::Categorical;
                break;
            }
        }
    }
    return table;
}

}  // namespace

DatasetProfile DatasetProfile::preset(const std::string& name) {
    DatasetProfile p;
    p.name = name;
    if (name == "nsl-kdd") {
        p.label_column = "label";
        p.normal_label = "normal";
        p.drop_columns = {"difficulty"};
        p.default_top_k = 22;
    } else if (name == "unsw-nb15") {
        p.label_column = "attack_cat";
        p.normal_label = "Normal";
        p.drop_columns = {"id", "label"};
        p.default_top_k = 27;
    } else if (name == "iotid20") {
        p.label_column = "Label";
        p.normal_label = "Normal";
        p.drop_columns = {"Flow_ID", "Src_IP", "Dst_IP", "Timestamp"};
        p.deduplicate = true;
        p.drop_infinite_rows = true;
        p.default_top_k = 40;
    } else if (name == "generic" || name == "synthetic") {
        // defaults above
    } else {
        throw std::invalid_argument("unknown dataset profile: " + name);
    }
    return p;
}

RawTable ingest(const std::string& path, const DatasetProfile& profile) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ingest: cannot open " + path);
    return build_table(in, profile);
}

RawTable ingest_text(const std::string& csv_text, const DatasetProfile& profile) {
    std::istringstream in(csv_text);
    return build_table(in, profile);
}

}  // namespace efl::data
