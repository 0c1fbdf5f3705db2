#include "efl/report/experiment.hpp"

#include "efl/data/feature_selection.hpp"
#include "efl/intervention/intervention.hpp"
#include "efl/metrics/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace efl::report {

namespace {

constexpr std::uint64_t kSubsampleSeed = 424242;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("bad boolean value: " + v);
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    for (const auto& tok : split_list(v)) out.push_back(std::stoi(tok));
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "absent"; }

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out;
}

/// Deterministically subsample a dataset down to `cap` rows (0 = no cap).
data::EncodedDataset subsample(const data::EncodedDataset& ds, long cap) {
    if (cap <= 0 || ds.n() <= cap) return ds;
    std::vector<Index> order(static_cast<std::size_t>(ds.n()));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(kSubsampleSeed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(static_cast<std::size_t>(cap));
    std::sort(order.begin(), order.end());

    data::EncodedDataset out = ds;
    out.features.resize(cap, ds.d());
    out.labels.resize(static_cast<std::size_t>(cap));
    for (long i = 0; i < cap; ++i) {
        out.features.row(i) = ds.features.row(order[static_cast<std::size_t>(i)]);
        out.labels[static_cast<std::size_t>(i)] =
            ds.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    }
    return out;
}

struct PreparedData {
    data::EncodedDataset train;
    data::EncodedDataset test;
    std::vector<Index> selected;
};

PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData out;
    if (cfg.dataset == "synthetic") {
        data::SyntheticConfig sc;
        sc.n_train = cfg.synth_train;
        sc.n_test = cfg.synth_test;
        sc.n_features = cfg.synth_features;
        sc.n_classes = cfg.mode == "multi" ? std::max(3, cfg.synth_classes) : 2;
        sc.overlap = cfg.synth_overlap;
        sc.seed = cfg.synth_seed;
        auto data = data::make_synthetic(sc);
        out.train = std::move(data.train);
        out.test = std::move(data.test);
    } else {
        auto profile = data::DatasetProfile::preset(cfg.dataset);
        if (cfg.dataset == "generic") {
            profile.label_column = cfg.label_column;
            profile.normal_label = cfg.normal_label;
            profile.drop_columns = cfg.drop_columns;
            profile.deduplicate = cfg.dedup;
            profile.drop_infinite_rows = cfg.drop_infinite;
        }
        if (cfg.train_path.empty() || cfg.test_path.empty())
            throw std::runtime_error("ingestion: train_path/test_path required for dataset " +
                                     cfg.dataset);
        const auto scheme = cfg.mode == "multi" ? data::LabelScheme::Multi
                                                : data::LabelScheme::Binary;
        auto train_table = data::ingest(cfg.train_path, profile);
        auto test_table = data::ingest(cfg.test_path, profile);
        out.train = data::encode_and_normalize(train_table, profile, scheme);
        out.test = data::encode_and_normalize(test_table, profile, out.train.stats);

        Index top_k = cfg.top_k > 0 ? cfg.top_k : static_cast<Index>(profile.default_top_k);
        if (top_k <= 0 || top_k > out.train.d()) top_k = out.train.d();
        auto sel = data::select_features(out.train.features, top_k);
        out.selected = sel.selected_indices;
        out.train = data::apply_selection(out.train, out.selected);
        out.test = data::apply_selection(out.test, out.selected);
    }
    if (out.selected.empty()) {
        out.selected.resize(static_cast<std::size_t>(out.train.d()));
        std::iota(out.selected.begin(), out.selected.end(), Index{0});
    }
    out.train = subsample(out.train, cfg.max_train_rows);
    out.test = subsample(out.test, cfg.max_test_rows);
    return out;
}

void echo_config(std::ostream& os, const ExperimentConfig& cfg) {
    std::vector<std::string> seeds;
    for (auto s : cfg.seeds) seeds.push_back(std::to_string(s));
    std::vector<std::string> tconv, sconv;
    for (int c : cfg.round.teacher_conv) tconv.push_back(std::to_string(c));
    for (int c : cfg.round.student_conv) sconv.push_back(std::to_string(c));
    os << "dataset = " << cfg.dataset << "\n"
       << "train_path = " << cfg.train_path << "\n"
       << "test_path = " << cfg.test_path << "\n"
       << "mode = " << cfg.mode << "\n"
       << "clients = " << cfg.clients << "\n"
       << "delta = " << fmt(cfg.delta) << "\n"
       << "strategies = " << join(cfg.strategies) << "\n"
       << "top_k = " << cfg.top_k << "\n"
       << "seeds = " << join(seeds) << "\n"
       << "out_dir = " << cfg.out_dir << "\n"
       << "desk_scale = " << (cfg.desk_scale ? "true" : "false") << "\n"
       << "max_train_rows = " << cfg.max_train_rows << "\n"
       << "max_test_rows = " << cfg.max_test_rows << "\n"
       << "label_column = " << cfg.label_column << "\n"
       << "normal_label = " << cfg.normal_label << "\n"
       << "drop_columns = " << join(cfg.drop_columns) << "\n"
       << "dedup = " << (cfg.dedup ? "true" : "false") << "\n"
       << "drop_infinite = " << (cfg.drop_infinite ? "true" : "false") << "\n"
       << "synth_train = " << cfg.synth_train << "\n"
       << "synth_test = " << cfg.synth_test << "\n"
       << "synth_features = " << cfg.synth_features << "\n"
       << "synth_classes = " << cfg.synth_classes << "\n"
       << "synth_overlap = " << fmt(cfg.synth_overlap) << "\n"
       << "synth_seed = " << cfg.synth_seed << "\n"
       << "psi = " << fmt(cfg.round.psi) << "\n"
       << "gamma = " << fmt(cfg.round.gamma) << "\n"
       << "zeta = " << fmt(cfg.round.zeta) << "\n"
       << "local_epochs = " << cfg.round.local_epochs << "\n"
       << "batch_size = " << cfg.round.batch_size << "\n"
       << "rounds = " << cfg.round.rounds << "\n"
       << "student_lr = " << fmt(cfg.round.student_lr) << "\n"
       << "teacher_lr = " << fmt(cfg.round.teacher_lr) << "\n"
       << "teacher_epochs = " << cfg.round.teacher_epochs << "\n"
       << "avail_p = " << fmt(cfg.round.availability_probability) << "\n"
       << "fedprox_mu = " << fmt(cfg.round.fedprox_mu) << "\n"
       << "mean_normalized_prototypes = "
       << (cfg.round.mean_normalized_prototypes ? "true" : "false") << "\n"
       << "teacher_conv = " << join(tconv) << "\n"
       << "teacher_fc = " << cfg.round.teacher_fc << "\n"
       << "student_conv = " << join(sconv) << "\n"
       << "student_fc = " << cfg.round.student_fc << "\n";
}

}  // namespace

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dataset") cfg.dataset = value;
    else if (key == "train_path") cfg.train_path = value;
    else if (key == "test_path") cfg.test_path = value;
    else if (key == "mode") {
        if (value != "binary" && value != "multi")
            throw std::invalid_argument("mode must be binary or multi");
        cfg.mode = value;
    } else if (key == "clients") cfg.clients = std::stoi(value);
    else if (key == "delta") cfg.delta = std::stod(value);
    else if (key == "strategies") {
        cfg.strategies = split_list(value);
        for (const auto& s : cfg.strategies) fl::strategy_from_string(s);  // validate
    } else if (key == "top_k") cfg.top_k = std::stol(value);
    else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& tok : split_list(value)) cfg.seeds.push_back(std::stoull(tok));
        if (cfg.seeds.empty()) throw std::invalid_argument("seeds: empty list");
    } else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "desk_scale") cfg.desk_scale = parse_bool(value);
    else if (key == "max_train_rows") cfg.max_train_rows = std::stol(value);
    else if (key == "max_test_rows") cfg.max_test_rows = std::stol(value);
    else if (key == "label_column") cfg.label_column = value;
    else if (key == "normal_label") cfg.normal_label = value;
    else if (key == "drop_columns") cfg.drop_columns = split_list(value);
    else if (key == "dedup") cfg.dedup = parse_bool(value);
    else if (key == "drop_infinite") cfg.drop_infinite = parse_bool(value);
    else if (key == "synth_train") cfg.synth_train = std::stol(value);
    else if (key == "synth_test") cfg.synth_test = std::stol(value);
    else if (key == "synth_features") cfg.synth_features = std::stol(value);
    else if (key == "synth_classes") cfg.synth_classes = std::stoi(value);
    else if (key == "synth_overlap") cfg.synth_overlap = std::stod(value);
    else if (key == "synth_seed") cfg.synth_seed = std::stoull(value);
    else if (key == "psi") cfg.round.psi = std::stod(value);
    else if (key == "gamma") cfg.round.gamma = std::stod(value);
    else if (key == "zeta") cfg.round.zeta = std::stod(value);
    else if (key == "local_epochs") cfg.round.local_epochs = std::stoi(value);
    else if (key == "batch_size") cfg.round.batch_size = std::stol(value);
    else if (key == "rounds") cfg.round.rounds = std::stoi(value);
    else if (key == "student_lr") cfg.round.student_lr = std::stod(value);
    else if (key == "teacher_lr") cfg.round.teacher_lr = std::stod(value);
    else if (key == "teacher_epochs") cfg.round.teacher_epochs = std::stoi(value);
    else if (key == "avail_p") cfg.round.availability_probability = std::stod(value);
    else if (key == "fedprox_mu") cfg.round.fedprox_mu = std::stod(value);
    else if (key == "mean_normalized_prototypes")
        cfg.round.mean_normalized_prototypes = parse_bool(value);
    else if (key == "teacher_conv") cfg.round.teacher_conv = parse_int_list(value);
    else if (key == "teacher_fc") cfg.round.teacher_fc = std::stoi(value);
    else if (key == "student_conv") cfg.round.student_conv = parse_int_list(value);
    else if (key == "student_fc") cfg.round.student_fc = std::stoi(value);
    else throw std::invalid_argument("unknown config key: " + key);
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    ExperimentConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        // trim
        auto is_space = [](unsigned char c) { return std::isspace(c); };
        while (!line.empty() && is_space(line.back())) line.pop_back();
        std::size_t b = 0;
        while (b < line.size() && is_space(line[b])) ++b;
        if (b == line.size()) continue;
        const auto eq = line.find('=', b);
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(line_no) +
                                     " is not key=value");
        std::string key = line.substr(b, eq - b);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && is_space(key.back())) key.pop_back();
        std::size_t vb = 0;
        while (vb < value.size() && is_space(value[vb])) ++vb;
        value = value.substr(vb);
        apply_setting(cfg, key, value);
    }
    return cfg;
}

ExperimentOutput run_experiment(const ExperimentConfig& user_cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = user_cfg;
    if (cfg.desk_scale) {
        if (cfg.max_train_rows == 0) cfg.max_train_rows = 10000;
        if (cfg.max_test_rows == 0) cfg.max_test_rows = 2000;
        if (cfg.round.teacher_conv == std::vector<int>{512, 1024, 2048}) {
            cfg.round.teacher_conv = {32, 64, 128};
            if (cfg.round.teacher_fc == 512) cfg.round.teacher_fc = 128;
        }
    }
    for (const auto& s : cfg.strategies) fl::strategy_from_string(s);
    if (cfg.seeds.empty()) throw std::invalid_argument("run_experiment: no seeds");

    auto data = prepare_data(cfg);
    const auto task_mode = data.train.scheme == data::LabelScheme::Binary
                               ? metrics::TaskMode::Binary
                               : metrics::TaskMode::Multi;

    std::filesystem::create_directories(cfg.out_dir);
    ExperimentOutput out;
    out.out_dir = cfg.out_dir;
    bool artifacts_written = false;

    for (const auto& strategy_name : cfg.strategies) {
        for (std::uint64_t seed : cfg.seeds) {
            auto plan = data::dirichlet_partition(data.train.labels, cfg.clients, cfg.delta, seed);
            auto rc = cfg.round;
            rc.strategy = fl::strategy_from_string(strategy_name);
            rc.seed = seed;
            auto result = fl::run_training(data.train, plan, rc, &data.test);

            RunRecord rec;
            rec.strategy = strategy_name;
            rec.seed = seed;
            rec.rounds = result.rounds;
            rec.has_global_model = result.state.global_model.has_value();

            // personalized evaluation: the test split is dealt out with the
            // same concentration and seed as the training split, so each
            // client's test shard mirrors its local class mix; every client
            // scores its own shard and the predictions pool into one pass
            // over the full test set (the global model is still saved and
            // drives the application stage)
            auto test_plan =
                data::dirichlet_partition(data.test.labels, cfg.clients, cfg.delta, seed);
            std::vector<int> pred(static_cast<std::size_t>(data.test.n()), 0);
            const std::vector<int>& truth = data.test.labels;
            for (const auto& c : result.state.clients) {
                const auto& shard = test_plan.client_shards[static_cast<std::size_t>(c.id)];
                Mat local(static_cast<Index>(shard.size()), data.test.d());
                for (std::size_t i = 0; i < shard.size(); ++i)
                    local.row(static_cast<Index>(i)) = data.test.features.row(shard[i]);
                auto p = fl::predict_labels(c.student_spec, c.student, local);
                for (std::size_t i = 0; i < shard.size(); ++i)
                    pred[static_cast<std::size_t>(shard[i])] = p[i];
            }
            auto cm = metrics::confusion(pred, truth, task_mode, data.test.normal_class,
                                         data.test.n_classes());
            auto bm = metrics::binary_metrics(cm);
            rec.precision = bm.precision;
            rec.recall = bm.recall;
            rec.f1 = bm.f1;
            rec.far = bm.far;
            rec.accuracy = task_mode == metrics::TaskMode::Binary
                               ? bm.accuracy
                               : std::optional<double>(metrics::multiclass_accuracy(pred, truth));
            rec.odc = metrics::odc(pred, truth, task_mode, data.test.normal_class);
            rec.test_size = static_cast<long>(pred.size());

            if (!artifacts_written && rec.has_global_model) {
                auto stage = intervention::run_application_stage(
                    result.student_spec, *result.state.global_model, data.test, true);
                intervention::write_blocklog_csv(stage.log, cfg.out_dir + "/blocklog.csv");
                nn::save_params(result.student_spec, *result.state.global_model,
                                cfg.out_dir + "/model.bin");
                data::save_stats(data.train.stats, data.selected,
                                 cfg.out_dir + "/model.stats.txt");
                artifacts_written = true;
            }
            out.runs.push_back(std::move(rec));
        }
    }

    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    emit_report(out, cfg);
    return out;
}

void emit_report(const ExperimentOutput& out, const ExperimentConfig& cfg) {
    if (out.runs.empty()) throw std::invalid_argument("emit_report: no completed runs");
    std::filesystem::create_directories(cfg.out_dir);

    {
        std::ofstream m(cfg.out_dir + "/metrics.csv");
        m << "strategy,seed,accuracy,precision,recall,f1,far,odc,test_size\n";
        for (const auto& r : out.runs)
            m << r.strategy << "," << r.seed << "," << fmt(r.accuracy) << ","
              << fmt(r.precision) << "," << fmt(r.recall) << "," << fmt(r.f1) << ","
              << fmt(r.far) << "," << r.odc << "," << r.test_size << "\n";

        // per-strategy mean / sample standard deviation over seeds
        for (const auto& name : cfg.strategies) {
            std::vector<double> accs, odcs;
            for (const auto& r : out.runs)
                if (r.strategy == name) {
                    if (r.accuracy) accs.push_back(*r.accuracy);
                    odcs.push_back(static_cast<double>(r.odc));
                }
            auto mean = [](const std::vector<double>& v) -> std::optional<double> {
                if (v.empty()) return std::nullopt;
                return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            };
            auto stddev = [&](const std::vector<double>& v) -> std::optional<double> {
                if (v.size() < 2) return std::nullopt;
                const double mu = *mean(v);
                double sq = 0;
                for (double x : v) sq += (x - mu) * (x - mu);
                return std::sqrt(sq / static_cast<double>(v.size() - 1));
            };
            m << name << ",mean," << fmt(mean(accs)) << ",,,,," << fmt(mean(odcs)) << ",\n";
            m << name << ",std," << fmt(stddev(accs)) << ",,,,," << fmt(stddev(odcs)) << ",\n";
        }
    }

    {
        std::ofstream r(cfg.out_dir + "/rounds.csv");
        r << "strategy,seed,round,eval_mean_accuracy,global_objective,prototype_bytes,"
             "model_bytes\n";
        for (const auto& run : out.runs)
            for (const auto& round : run.rounds)
                r << run.strategy << "," << run.seed << "," << round.round << ","
                  << fmt(round.eval_mean_accuracy) << "," << fmt(round.global_objective) << ","
                  << round.prototype_bytes << "," << round.model_bytes << "\n";
    }

    {
        std::ofstream rep(cfg.out_dir + "/report.txt");
        rep << "== experiment configuration ==\n";
        echo_config(rep, cfg);
        rep << "\n== runs ==\n";
        for (const auto& r : out.runs) {
            rep << r.strategy << " seed=" << r.seed << ": accuracy=" << fmt(r.accuracy)
                << " precision=" << fmt(r.precision) << " recall=" << fmt(r.recall)
                << " f1=" << fmt(r.f1) << " far=" << fmt(r.far) << " odc=" << r.odc << "/"
                << r.test_size << (r.has_global_model ? " (global model)" : " (personal models)")
                << "\n";
        }
        rep << "\nwall_clock_seconds = " << fmt(out.wall_seconds) << "\n";
    }
}

}  // namespace efl::report
