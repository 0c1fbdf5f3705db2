#include "efl/intervention/intervention.hpp"

#include "efl/fl/client.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace efl::intervention {

Action apply_rule(const DetectionEvent& event) {
    return event.verdict == Verdict::Malicious ? Action::Blocked : Action::Passed;
}

void write_blocklog_csv(const BlockLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_blocklog_csv: cannot open " + path);
    out << "record_index,predicted_class,verdict,action\n";
    for (const auto& e : log.entries)
        out << e.record_index << "," << e.predicted_class << ","
            << (e.verdict == Verdict::Malicious ? "malicious" : "benign") << ","
            << (e.action == Action::Blocked ? "blocked" : "passed") << "\n";
}

ApplicationResult run_application_stage(const nn::NetworkSpec& spec,
                                        const nn::ModelParams& params,
                                        const data::EncodedDataset& ds, bool has_ground_truth) {
    if (static_cast<int>(ds.d()) != spec.input_features)
        throw std::runtime_error("application stage: dataset has " + std::to_string(ds.d()) +
                                 " features but the model expects " +
                                 std::to_string(spec.input_features));

    ApplicationResult result;
    result.predictions = fl::predict_labels(spec, params, ds.features);
    for (std::size_t i = 0; i < result.predictions.size(); ++i) {
        DetectionEvent event;
        event.record_index = static_cast<Index>(i);
        event.predicted_class = result.predictions[i];
        event.verdict = result.predictions[i] != ds.normal_class ? Verdict::Malicious
                                                                 : Verdict::Benign;
        event.timestamp_slot = static_cast<long>(i);
        const Action action = apply_rule(event);
        result.log.entries.push_back(
            {event.record_index, event.predicted_class, event.verdict, action});
        if (action == Action::Blocked)
            ++result.log.blocked;
        else
            ++result.log.passed;
    }

    if (has_ground_truth) {
        StageMetrics m;
        const auto mode = ds.scheme == data::LabelScheme::Binary ? metrics::TaskMode::Binary
                                                                 : metrics::TaskMode::Multi;
        m.cm = metrics::confusion(result.predictions, ds.labels, mode, ds.normal_class,
                                  ds.n_classes());
        m.binary = metrics::binary_metrics(m.cm);
        m.odc = metrics::odc(result.predictions, ds.labels, mode, ds.normal_class);
        m.accuracy = metrics::multiclass_accuracy(result.predictions, ds.labels);
        result.metrics = std::move(m);
    }
    return result;
}

namespace {

ApplicationResult stage_from_table(const nn::NetworkSpec& spec, const nn::ModelParams& params,
                                   const data::NormalizationStats& stats,
                                   const std::vector<Index>& selected, std::string csv_text,
                                   const data::DatasetProfile& profile) {
    // ground truth is present iff the header carries the label column
    std::istringstream peek(csv_text);
    std::string header;
    std::getline(peek, header);
    bool has_truth = false;
    {
        std::istringstream cells(header);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            if (cell == profile.label_column) has_truth = true;
        }
    }
    if (!has_truth) {
        // pad a synthetic all-normal label column so the shared ingest path applies
        std::istringstream in(csv_text);
        std::ostringstream padded;
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            padded << line << ',' << (first ? profile.label_column : profile.normal_label)
                   << '\n';
            first = false;
        }
        csv_text = padded.str();
    }

    auto table = data::ingest_text(csv_text, profile);
    auto encoded = data::encode_and_normalize(table, profile, stats);
    auto ds = data::apply_selection(encoded, selected);
    return run_application_stage(spec, params, ds, has_truth);
}

}  // namespace

ApplicationResult run_application_stage(const nn::NetworkSpec& spec,
                                        const nn::ModelParams& params,
                                        const data::NormalizationStats& stats,
                                        const std::vector<Index>& selected,
                                        const std::string& new_data_path,
                                        const data::DatasetProfile& profile) {
    std::ifstream in(new_data_path);
    if (!in) throw std::runtime_error("application stage: cannot open " + new_data_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return stage_from_table(spec, params, stats, selected, buf.str(), profile);
}

ApplicationResult run_application_stage_text(const nn::NetworkSpec& spec,
                                             const nn::ModelParams& params,
                                             const data::NormalizationStats& stats,
                                             const std::vector<Index>& selected,
                                             const std::string& csv_text,
                                             const data::DatasetProfile& profile) {
    return stage_from_table(spec, params, stats, selected, csv_text, profile);
}

}  // namespace efl::intervention
