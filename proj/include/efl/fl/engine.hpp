#pragma once

#include "efl/data/partition.hpp"
#include "efl/fl/client.hpp"

#include <optional>
#include <string>
#include <vector>

namespace efl::fl {

enum class Strategy { Efpkd, FedAvg, FedProx, FedProto, FedKd, IndependentCnn, IndependentKd };

Strategy strategy_from_string(const std::string& name);
std::string to_string(Strategy s);

struct RoundConfig {
    Strategy strategy = Strategy::Efpkd;
    double psi = 0.1;
    double gamma = 1.0;
    double zeta = 0.5;
    int local_epochs = 5;
    Index batch_size = 32;
    int rounds = 10;  // Q
    double student_lr = 0.0001;
    double teacher_lr = 0.001;
    int teacher_epochs = 5;
    double availability_probability = 0.9;
    double fedprox_mu = 0.01;
    bool mean_normalized_prototypes = false;
    /// Test hook: aggregate + redistribute the student model every round even
    /// under the prototype-based strategies (strategy-degeneration checks).
    bool force_model_aggregation_every_round = false;
    std::vector<int> teacher_conv = {512, 1024, 2048};
    int teacher_fc = 512;
    std::vector<int> student_conv = {64, 128};
    int student_fc = 64;
    std::uint64_t seed = 1;
};

/// Bernoulli availability flags; an all-zero draw is redrawn so at least one
/// client always participates.
std::vector<int> sample_availability(int n_clients, double probability, std::uint64_t seed);

struct RoundReport {
    int round = 0;
    std::vector<int> alphas;
    std::vector<std::optional<double>> client_losses;  // absent for non-participants
    long prototype_bytes = 0;  // client->server prototype traffic this round
    long model_bytes = 0;      // client->server model-parameter traffic this round
    double global_objective = 0.0;
    std::optional<double> eval_mean_accuracy;  // when an eval split is supplied
};

struct GlobalState {
    PrototypeSet global_prototypes;
    std::optional<nn::ModelParams> global_model;  // absent until the final round (efpkd)
    int round = 0;
    std::vector<ClientState> clients;
};

struct TrainingResult {
    GlobalState state;
    std::vector<RoundReport> rounds;
    nn::NetworkSpec teacher_spec;
    nn::NetworkSpec student_spec;
};

TrainingResult run_training(const data::EncodedDataset& train, const data::PartitionPlan& plan,
                            const RoundConfig& cfg, const data::EncodedDataset* eval = nullptr);

/// Evaluation-only global objective: availability- and size-weighted
/// supervised losses plus gamma-weighted prototype dispersion.
double global_objective_value(const std::vector<ClientState>& clients,
                              const std::vector<PrototypeSet>& client_prototypes,
                              const data::EncodedDataset& ds,
                              const PrototypeSet& global_prototypes, double gamma);

}  // namespace efl::fl
