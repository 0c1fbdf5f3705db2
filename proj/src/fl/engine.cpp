#include "efl/fl/engine.hpp"

#include "efl/metrics/metrics.hpp"
#include "efl/nn/losses.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace efl::fl {

namespace {

constexpr std::uint64_t kGlobalInit = 201;
constexpr std::uint64_t kTeacherInit = 202;
constexpr std::uint64_t kAvailability = 203;

bool strategy_uses_kd(Strategy s) {
    return s == Strategy::Efpkd || s == Strategy::FedKd || s == Strategy::IndependentKd;
}
bool strategy_uses_prototypes(Strategy s) {
    return s == Strategy::Efpkd || s == Strategy::FedProto;
}
bool strategy_aggregates_models_each_round(Strategy s) {
    return s == Strategy::FedAvg || s == Strategy::FedProx || s == Strategy::FedKd;
}

double shard_supervised_loss(const ClientState& client, const data::EncodedDataset& ds) {
    std::vector<int> labels;
    labels.reserve(client.shard.size());
    for (Index i : client.shard) labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
    Mat logits = infer_logits(client.student_spec, client.student, ds, client.shard);
    const auto mode = ds.scheme == data::LabelScheme::Binary ? nn::LabelMode::Binary
                                                             : nn::LabelMode::Multi;
    return nn::loss_supervised(logits, labels, mode).value;
}

}  // namespace

Strategy strategy_from_string(const std::string& name) {
    if (name == "efpkd") return Strategy::Efpkd;
    if (name == "fedavg") return Strategy::FedAvg;
    if (name == "fedprox") return Strategy::FedProx;
    if (name == "fedproto") return Strategy::FedProto;
    if (name == "fedkd") return Strategy::FedKd;
    if (name == "independent-cnn") return Strategy::IndependentCnn;
    if (name == "independent-kd") return Strategy::IndependentKd;
    throw std::invalid_argument("unknown strategy: " + name);
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Efpkd: return "efpkd";
        case Strategy::FedAvg: return "fedavg";
        case Strategy::FedProx: return "fedprox";
        case Strategy::FedProto: return "fedproto";
        case Strategy::FedKd: return "fedkd";
        case Strategy::IndependentCnn: return "independent-cnn";
        case Strategy::IndependentKd: return "independent-kd";
    }
    throw std::logic_error("to_string: bad strategy");
}

std::vector<int> sample_availability(int n_clients, double probability, std::uint64_t seed) {
    if (probability <= 0.0 || probability > 1.0)
        throw std::invalid_argument("sample_availability: probability must be in (0,1]");
    std::vector<int> flags(static_cast<std::size_t>(n_clients), 1);
    if (probability == 1.0) return flags;
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(probability);
    while (true) {
        int total = 0;
        for (auto& f : flags) {
            f = coin(rng) ? 1 : 0;
            total += f;
        }
        if (total > 0) return flags;
    }
}

double global_objective_value(const std::vector<ClientState>& clients,
                              const std::vector<PrototypeSet>& client_prototypes,
                              const data::EncodedDataset& ds,
                              const PrototypeSet& global_prototypes, double gamma) {
    if (clients.size() != client_prototypes.size())
        throw std::invalid_argument("global_objective_value: length mismatch");
    double U = 0.0;
    for (const auto& c : clients) U += c.alpha * static_cast<double>(c.shard.size());
    if (U == 0.0) return 0.0;

    double total = 0.0;
    for (const auto& c : clients) {
        if (c.alpha == 0) continue;
        total += (static_cast<double>(c.shard.size()) / U) * shard_supervised_loss(c, ds);
    }

    for (const auto& [k, gentry] : global_prototypes.classes) {
        double Uk = 0.0;
        for (std::size_t s = 0; s < clients.size(); ++s) {
            if (clients[s].alpha == 0) continue;
            auto it = client_prototypes[s].classes.find(k);
            if (it != client_prototypes[s].classes.end())
                Uk += static_cast<double>(it->second.count);
        }
        if (Uk == 0.0) continue;
        for (std::size_t s = 0; s < clients.size(); ++s) {
            if (clients[s].alpha == 0) continue;
            auto it = client_prototypes[s].classes.find(k);
            if (it == client_prototypes[s].classes.end()) continue;
            total += gamma * (static_cast<double>(it->second.count) / Uk) *
                     (gentry.vector - it->second.vector).squaredNorm();
        }
    }
    return total;
}

TrainingResult run_training(const data::EncodedDataset& train, const data::PartitionPlan& plan,
                            const RoundConfig& cfg, const data::EncodedDataset* eval) {
    if (cfg.psi < 0.0 || cfg.psi > 1.0) throw std::invalid_argument("run_training: psi");
    if (cfg.gamma < 0.0) throw std::invalid_argument("run_training: gamma");
    if (cfg.zeta <= 0.0) throw std::invalid_argument("run_training: zeta");
    if (cfg.rounds < 1) throw std::invalid_argument("run_training: rounds");

    const int d = static_cast<int>(train.d());
    const int K = train.n_classes();
    TrainingResult result;
    result.teacher_spec = nn::NetworkSpec::teacher(d, K, cfg.teacher_conv, cfg.teacher_fc);
    result.student_spec = nn::NetworkSpec::student(d, K, cfg.student_conv, cfg.student_fc);

    const bool use_kd = strategy_uses_kd(cfg.strategy) && cfg.psi < 1.0;
    const bool use_reg = strategy_uses_prototypes(cfg.strategy) && cfg.gamma > 0.0;
    const bool proto_agg = strategy_uses_prototypes(cfg.strategy);
    const bool model_every_round = strategy_aggregates_models_each_round(cfg.strategy) ||
                                   cfg.force_model_aggregation_every_round;
    const bool model_final = cfg.strategy == Strategy::Efpkd;

    // all clients start from one shared student initialization
    const auto shared_init =
        nn::init_params(result.student_spec, derive_seed(cfg.seed, 0, 0, kGlobalInit));

    auto& clients = result.state.clients;
    for (std::size_t s = 0; s < plan.client_shards.size(); ++s) {
        ClientState c;
        c.id = static_cast<int>(s);
        c.shard = plan.client_shards[s];
        if (c.shard.empty()) throw std::invalid_argument("run_training: empty shard");
        c.teacher_spec = result.teacher_spec;
        c.student_spec = result.student_spec;
        c.student = shared_init;
        if (use_kd) {
            c.teacher = nn::init_params(
                result.teacher_spec,
                derive_seed(cfg.seed, static_cast<std::uint64_t>(s) + 1, 0, kTeacherInit));
            pretrain_teacher(c, train, cfg.teacher_epochs, cfg.teacher_lr, cfg.batch_size,
                             cfg.seed);
            // the teacher is frozen from here on, so its shard logits are constant
            c.teacher_logits = infer_logits(c.teacher_spec, c.teacher, train, c.shard);
        }
        clients.push_back(std::move(c));
    }
    const int n_clients = static_cast<int>(clients.size());

    nn::ModelParams current_global = shared_init;

    for (int q = 1; q <= cfg.rounds; ++q) {
        auto alphas = sample_availability(
            n_clients, cfg.availability_probability,
            derive_seed(cfg.seed, 0, static_cast<std::uint64_t>(q), kAvailability));

        RoundReport report;
        report.round = q;
        report.alphas = alphas;
        report.client_losses.assign(static_cast<std::size_t>(n_clients), std::nullopt);

        const bool want_model = model_every_round || (model_final && q == cfg.rounds);

        ClientUpdateOptions base;
        base.psi = cfg.psi;
        base.gamma = cfg.gamma;
        base.zeta = cfg.zeta;
        base.local_epochs = cfg.local_epochs;
        base.batch_size = cfg.batch_size;
        base.round_index = q;
        base.base_lr = cfg.student_lr;
        base.use_kd = use_kd;
        base.use_reg = use_reg;
        base.use_prox = cfg.strategy == Strategy::FedProx;
        base.prox_mu = cfg.fedprox_mu;
        base.return_model = want_model;
        base.seed = cfg.seed;

        std::vector<PrototypeSet> round_prototypes(static_cast<std::size_t>(n_clients));
        std::vector<nn::ModelParams> round_models(static_cast<std::size_t>(n_clients));
        std::vector<long> sizes(static_cast<std::size_t>(n_clients), 0);

        for (int s = 0; s < n_clients; ++s) {
            auto& c = clients[static_cast<std::size_t>(s)];
            c.alpha = alphas[static_cast<std::size_t>(s)];
            if (c.alpha == 0) continue;
            if (model_every_round) c.student = current_global;  // server push

            auto opt = base;
            opt.prox_reference = base.use_prox ? &current_global : nullptr;
            auto res = client_update(c, train, result.state.global_prototypes, opt);

            sizes[static_cast<std::size_t>(s)] = res.n_samples;
            round_prototypes[static_cast<std::size_t>(s)] = std::move(res.prototypes);
            if (!res.epoch_losses.empty())
                report.client_losses[static_cast<std::size_t>(s)] = res.epoch_losses.back();
            if (res.model) {
                report.model_bytes += static_cast<long>(res.model->total_count()) * 8;
                round_models[static_cast<std::size_t>(s)] = std::move(*res.model);
            }
            if (proto_agg)
                report.prototype_bytes +=
                    round_prototypes[static_cast<std::size_t>(s)].byte_size();
        }

        if (proto_agg)
            result.state.global_prototypes = aggregate_prototypes(
                round_prototypes, alphas, cfg.mean_normalized_prototypes);

        if (want_model && cfg.strategy != Strategy::IndependentCnn &&
            cfg.strategy != Strategy::IndependentKd) {
            current_global = aggregate_models(round_models, sizes, alphas);
            if (model_every_round || q == cfg.rounds)
                result.state.global_model = current_global;
        }

        report.global_objective = global_objective_value(
            clients, round_prototypes, train, result.state.global_prototypes, cfg.gamma);

        if (eval) {
            double acc_sum = 0.0;
            int n = 0;
            for (const auto& c : clients) {
                if (c.alpha == 0) continue;
                auto pred = predict_labels(c.student_spec, c.student, eval->features);
                acc_sum += metrics::multiclass_accuracy(pred, eval->labels);
                ++n;
            }
            if (n > 0) report.eval_mean_accuracy = acc_sum / n;
        }

        result.state.round = q;
        result.rounds.push_back(std::move(report));
    }
    return result;
}

}  // namespace efl::fl
