#pragma once

#include "efl/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace efl::nn {

enum class LayerKind { Conv1D, BatchNorm1D, ReLU, Flatten, Dense };

struct LayerSpec {
    LayerKind kind;
    // Conv1D
    int in_channels = 0;
    int out_channels = 0;
    int kernel_size = 3;  // stride 1, same padding
    // BatchNorm1D
    int channels = 0;
    // Dense
    int in_units = 0;
    int out_units = 0;

    bool operator==(const LayerSpec&) const = default;
};

enum class ModelRole { Teacher, Student };

/// Architecture description: an ordered layer stack over [B, 1, d] inputs.
struct NetworkSpec {
    std::vector<LayerSpec> layers;
    ModelRole role = ModelRole::Student;
    int input_features = 0;  // d

    int num_classes() const;
    /// Index of the final Dense layer (the classifier); its input is the embedding.
    std::size_t classifier_index() const;
    int embedding_dim() const;
    void validate() const;

    /// Conv stack with BatchNorm+ReLU per conv, then Dense(d*last_ch -> fc_hidden),
    /// ReLU, Dense(fc_hidden -> classes).
    static NetworkSpec teacher(int input_features, int n_classes,
                               const std::vector<int>& conv_out_channels = {512, 1024, 2048},
                               int fc_hidden = 512);
    /// Conv stack with ReLU per conv (no batch norm), same FC head shape.
    static NetworkSpec student(int input_features, int n_classes,
                               const std::vector<int>& conv_out_channels = {64, 128},
                               int fc_hidden = 64);

    bool operator==(const NetworkSpec&) const = default;
};

struct ParamBlock {
    std::string name;
    std::vector<Index> shape;
    Vec values;
};

struct LayerParams {
    std::vector<ParamBlock> weights;  // trainable
    std::vector<ParamBlock> buffers;  // batch-norm running stats
};

/// Flat parameter storage for one network. `version` increments on every
/// mutation so forward caches can detect staleness.
struct ModelParams {
    std::vector<LayerParams> layers;
    std::uint64_t version = 0;

    Index total_count() const;
    void bump() { ++version; }
};

/// Per-layer, per-block gradients; same shapes as the trainable blocks.
using Gradients = std::vector<std::vector<Vec>>;

Gradients zero_gradients(const ModelParams& params);
bool gradients_finite(const Gradients& grads);

ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed);

enum class RunMode { Train, Infer };

struct BatchNormCache {
    Mat xhat;
    Vec inv_std;
};

struct ForwardCache {
    const NetworkSpec* spec = nullptr;
    const ModelParams* params = nullptr;
    std::uint64_t params_version = 0;
    RunMode mode = RunMode::Infer;
    Index batch_size = 0;
    std::vector<Mat> inputs;              // input activation of each layer
    std::vector<BatchNormCache> bn;       // indexed per layer (empty for non-BN)
    std::size_t embedding_layer = 0;
};

struct ForwardResult {
    Mat logits;     // [B, K]
    Mat embedding;  // [B, embedding_dim], input to the classifier Dense layer
    ForwardCache cache;
};

/// Train mode updates batch-norm running statistics in `params`.
ForwardResult forward(const NetworkSpec& spec, ModelParams& params, const Tensor& batch,
                      RunMode mode);

/// Pure inference: identical inputs give bit-identical outputs.
struct InferenceResult {
    Mat logits;
    Mat embedding;
};
InferenceResult forward_infer(const NetworkSpec& spec, const ModelParams& params,
                              const Tensor& batch);

/// Backpropagate grad wrt logits (and optionally an extra gradient injected at
/// the embedding) through a train-mode cache.
Gradients backward(const ForwardCache& cache, const Mat& grad_logits,
                   const Mat* grad_embedding = nullptr);

void save_params(const NetworkSpec& spec, const ModelParams& params, std::ostream& out);
void save_params(const NetworkSpec& spec, const ModelParams& params, const std::string& path);
ModelParams load_params(const NetworkSpec& spec, std::istream& in);
ModelParams load_params(const NetworkSpec& spec, const std::string& path);

}  // namespace efl::nn
