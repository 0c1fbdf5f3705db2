#pragma once

#include "efl/fl/prototypes.hpp"
#include "efl/nn/losses.hpp"
#include "efl/nn/optimizer.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace efl::fl {

struct ClientState {
    int id = 0;
    std::vector<Index> shard;
    int alpha = 1;
    nn::NetworkSpec teacher_spec;
    nn::NetworkSpec student_spec;
    nn::ModelParams teacher;  // frozen after pretraining
    nn::ModelParams student;
    /// Teacher logits per shard sample (rows follow the sorted shard order).
    /// The teacher is frozen, so this may be filled once after pretraining;
    /// empty means compute on the fly.
    Mat teacher_logits;
};

/// Logits over arbitrary dataset rows in inference mode, chunked.
Mat infer_logits(const nn::NetworkSpec& spec, const nn::ModelParams& params,
                 const data::EncodedDataset& ds, const std::vector<Index>& indices);

/// Assemble a [B, 1, d] input tensor from dataset rows.
Tensor make_batch(const data::EncodedDataset& ds, const std::vector<Index>& indices);

/// Argmax predictions over the whole feature matrix, evaluated in chunks.
std::vector<int> predict_labels(const nn::NetworkSpec& spec, const nn::ModelParams& params,
                                const Mat& features);

/// Supervised training of the teacher (Adam); params are frozen afterwards.
void pretrain_teacher(ClientState& client, const data::EncodedDataset& ds, int epochs, double lr,
                      Index batch_size, std::uint64_t seed);

/// One client's local work for one round. Every strategy runs through this
/// routine; loss terms with zero weight are skipped outright so degenerate
/// configurations are arithmetically identical across strategies.
struct ClientUpdateOptions {
    double psi = 0.1;    // supervised weight; ignored (treated as 1) when !use_kd
    double gamma = 1.0;  // prototype-regularization weight
    double zeta = 0.5;   // distillation temperature
    int local_epochs = 5;
    Index batch_size = 32;
    int round_index = 1;  // q, drives the SGD learning-rate decay
    double base_lr = 0.0001;
    bool use_kd = false;
    bool use_reg = false;
    bool use_prox = false;
    double prox_mu = 0.01;
    const nn::ModelParams* prox_reference = nullptr;  // global model for the proximal term
    bool return_model = false;                        // final round / per-round strategies
    std::uint64_t seed = 0;                           // master seed; streams derived per purpose
};

/// psi * entropy + (1 - psi) * kd + gamma * reg.
double local_loss(double entropy, double kd, double reg, double psi, double gamma);

struct ClientUpdateResult {
    PrototypeSet prototypes;
    std::optional<nn::ModelParams> model;
    std::vector<double> epoch_losses;  // full-shard objective after each epoch
    long n_samples = 0;
};

ClientUpdateResult client_update(ClientState& client, const data::EncodedDataset& ds,
                                 const PrototypeSet& global_prototypes,
                                 const ClientUpdateOptions& opt);

}  // namespace efl::fl
