#include "efl/nn/network.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace efl::nn {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;
constexpr char kMagic[4] = {'E', 'F', 'L', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

// Activations are stored as [B x (C*L)] row-major, channel-major per sample:
// channel c of sample b occupies row b, columns [c*L, (c+1)*L).

struct LayerShape {
    int channels;
    int length;
    bool flat;  // after Flatten
    int units() const { return flat ? channels : channels * length; }
};

LayerShape trace_input_shape(const NetworkSpec& spec, std::size_t layer_index) {
    LayerShape cur{1, spec.input_features, false};
    for (std::size_t i = 0; i < layer_index; ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::Conv1D:
                cur.channels = l.out_channels;
                break;
            case LayerKind::Flatten:
                cur = {cur.channels * cur.length, 1, true};
                break;
            case LayerKind::Dense:
                cur = {l.out_units, 1, true};
                break;
            default:
                break;
        }
    }
    return cur;
}

void check_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) throw std::runtime_error(std::string("non-finite values in ") + what);
}

}  // namespace

int NetworkSpec::num_classes() const {
    if (layers.empty() || layers.back().kind != LayerKind::Dense)
        throw std::invalid_argument("NetworkSpec: last layer must be Dense");
    return layers.back().out_units;
}

std::size_t NetworkSpec::classifier_index() const {
    return layers.size() - 1;
}

int NetworkSpec::embedding_dim() const {
    return layers.back().in_units;
}

void NetworkSpec::validate() const {
    if (input_features <= 0) throw std::invalid_argument("NetworkSpec: input_features must be > 0");
    if (layers.empty()) throw std::invalid_argument("NetworkSpec: empty layer list");
    if (layers.back().kind != LayerKind::Dense)
        throw std::invalid_argument("NetworkSpec: last layer must be Dense");
    int flatten_count = 0;
    LayerShape cur{1, input_features, false};
    for (const LayerSpec& l : layers) {
        switch (l.kind) {
            case LayerKind::Conv1D:
                if (cur.flat) throw std::invalid_argument("NetworkSpec: Conv1D after Flatten");
                if (l.in_channels != cur.channels)
                    throw std::invalid_argument("NetworkSpec: Conv1D in_channels mismatch");
                if (l.kernel_size <= 0 || l.kernel_size % 2 == 0)
                    throw std::invalid_argument("NetworkSpec: kernel_size must be odd positive");
                cur.channels = l.out_channels;
                break;
            case LayerKind::BatchNorm1D:
                if (cur.flat || l.channels != cur.channels)
                    throw std::invalid_argument("NetworkSpec: BatchNorm1D channels mismatch");
                break;
            case LayerKind::ReLU:
                break;
            case LayerKind::Flatten:
                ++flatten_count;
                cur = {cur.channels * cur.length, 1, true};
                break;
            case LayerKind::Dense:
                if (!cur.flat) throw std::invalid_argument("NetworkSpec: Dense before Flatten");
                if (l.in_units != cur.channels)
                    throw std::invalid_argument("NetworkSpec: Dense in_units mismatch");
                cur = {l.out_units, 1, true};
                break;
        }
    }
    if (flatten_count != 1)
        throw std::invalid_argument("NetworkSpec: exactly one Flatten layer required");
}

NetworkSpec NetworkSpec::teacher(int input_features, int n_classes,
                                 const std::vector<int>& conv_out_channels, int fc_hidden) {
    NetworkSpec spec;
    spec.role = ModelRole::Teacher;
    spec.input_features = input_features;
    int in_ch = 1;
    for (int out_ch : conv_out_channels) {
        spec.layers.push_back({.kind = LayerKind::Conv1D,
                               .in_channels = in_ch,
                               .out_channels = out_ch,
                               .kernel_size = 3});
        spec.layers.push_back({.kind = LayerKind::BatchNorm1D, .channels = out_ch});
        spec.layers.push_back({.kind = LayerKind::ReLU});
        in_ch = out_ch;
    }
    spec.layers.push_back({.kind = LayerKind::Flatten});
    spec.layers.push_back(
        {.kind = LayerKind::Dense, .in_units = in_ch * input_features, .out_units = fc_hidden});
    spec.layers.push_back({.kind = LayerKind::ReLU});
    spec.layers.push_back({.kind = LayerKind::Dense, .in_units = fc_hidden, .out_units = n_classes});
    spec.validate();
    return spec;
}

NetworkSpec NetworkSpec::student(int input_features, int n_classes,
                                 const std::vector<int>& conv_out_channels, int fc_hidden) {
    NetworkSpec spec;
    spec.role = ModelRole::Student;
    spec.input_features = input_features;
    int in_ch = 1;
    for (int out_ch : conv_out_channels) {
        spec.layers.push_back({.kind = LayerKind::Conv1D,
                               .in_channels = in_ch,
                               .out_channels = out_ch,
                               .kernel_size = 3});
        spec.layers.push_back({.kind = LayerKind::ReLU});
        in_ch = out_ch;
    }
    spec.layers.push_back({.kind = LayerKind::Flatten});
    spec.layers.push_back(
        {.kind = LayerKind::Dense, .in_units = in_ch * input_features, .out_units = fc_hidden});
    spec.layers.push_back({.kind = LayerKind::ReLU});
    spec.layers.push_back({.kind = LayerKind::Dense, .in_units = fc_hidden, .out_units = n_classes});
    spec.validate();
    return spec;
}

Index ModelParams::total_count() const {
    Index n = 0;
    for (const LayerParams& lp : layers)
        for (const ParamBlock& b : lp.weights) n += b.values.size();
    return n;
}

Gradients zero_gradients(const ModelParams& params) {
    Gradients g(params.layers.size());
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        g[i].reserve(params.layers[i].weights.size());
        for (const ParamBlock& b : params.layers[i].weights)
            g[i].push_back(Vec::Zero(b.values.size()));
    }
    return g;
}

bool gradients_finite(const Gradients& grads) {
    for (const auto& layer : grads)
        for (const Vec& v : layer)
            if (!v.allFinite()) return false;
    return true;
}

ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    ModelParams params;
    params.layers.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        LayerParams& lp = params.layers[i];
        switch (l.kind) {
            case LayerKind::Conv1D: {
                int fan_in = l.in_channels * l.kernel_size;
                double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                std::uniform_real_distribution<double> dist(-bound, bound);
                Vec w(static_cast<Index>(l.out_channels) * l.in_channels * l.kernel_size);
                for (Index j = 0; j < w.size(); ++j) w[j] = dist(rng);
                lp.weights.push_back({"weight",
                                      {l.out_channels, l.in_channels, l.kernel_size},
                                      std::move(w)});
                lp.weights.push_back({"bias", {l.out_channels}, Vec::Zero(l.out_channels)});
                break;
            }
            case LayerKind::BatchNorm1D:
                lp.weights.push_back({"scale", {l.channels}, Vec::Ones(l.channels)});
                lp.weights.push_back({"shift", {l.channels}, Vec::Zero(l.channels)});
                lp.buffers.push_back({"running_mean", {l.channels}, Vec::Zero(l.channels)});
                lp.buffers.push_back({"running_var", {l.channels}, Vec::Ones(l.channels)});
                break;
            case LayerKind::Dense: {
                double bound = 1.0 / std::sqrt(static_cast<double>(l.in_units));
                std::uniform_real_distribution<double> dist(-bound, bound);
                Vec w(static_cast<Index>(l.out_units) * l.in_units);
                for (Index j = 0; j < w.size(); ++j) w[j] = dist(rng);
                lp.weights.push_back({"weight", {l.out_units, l.in_units}, std::move(w)});
                lp.weights.push_back({"bias", {l.out_units}, Vec::Zero(l.out_units)});
                break;
            }
            default:
                break;
        }
    }
    return params;
}

namespace {

Mat conv1d_forward(const LayerSpec& l, const LayerParams& lp, const Mat& in, int length) {
    const Index B = in.rows();
    const int pad = (l.kernel_size - 1) / 2;
    const Vec& w = lp.weights[0].values;
    const Vec& bias = lp.weights[1].values;
    Mat out = Mat::Zero(B, static_cast<Index>(l.out_channels) * length);
    for (Index b = 0; b < B; ++b) {
        for (int oc = 0; oc < l.out_channels; ++oc) {
            double* dst = out.row(b).data() + static_cast<Index>(oc) * length;
            for (int pos = 0; pos < length; ++pos) dst[pos] = bias[oc];
            for (int ic = 0; ic < l.in_channels; ++ic) {
                const double* src = in.row(b).data() + static_cast<Index>(ic) * length;
                const double* kw =
                    w.data() + (static_cast<Index>(oc) * l.in_channels + ic) * l.kernel_size;
                for (int t = 0; t < l.kernel_size; ++t) {
                    const double wk = kw[t];
                    if (wk == 0.0) continue;
                    const int shift = t - pad;
                    const int lo = std::max(0, -shift);
                    const int hi = std::min(length, length - shift);
                    for (int pos = lo; pos < hi; ++pos) dst[pos] += wk * src[pos + shift];
                }
            }
        }
    }
    return out;
}

void conv1d_backward(const LayerSpec& l, const LayerParams& lp, const Mat& in, const Mat& gout,
                     int length, Mat& gin, std::vector<Vec>& gw) {
    const Index B = in.rows();
    const int pad = (l.kernel_size - 1) / 2;
    const Vec& w = lp.weights[0].values;
    gin = Mat::Zero(B, in.cols());
    gw[0].setZero();
    gw[1].setZero();
    for (Index b = 0; b < B; ++b) {
        for (int oc = 0; oc < l.out_channels; ++oc) {
            const double* go = gout.row(b).data() + static_cast<Index>(oc) * length;
            for (int pos = 0; pos < length; ++pos) gw[1][oc] += go[pos];
            for (int ic = 0; ic < l.in_channels; ++ic) {
                const double* src = in.row(b).data() + static_cast<Index>(ic) * length;
                double* gi = gin.row(b).data() + static_cast<Index>(ic) * length;
                const Index kbase =
                    (static_cast<Index>(oc) * l.in_channels + ic) * l.kernel_size;
                for (int t = 0; t < l.kernel_size; ++t) {
                    const int shift = t - pad;
                    const int lo = std::max(0, -shift);
                    const int hi = std::min(length, length - shift);
                    double acc = 0.0;
                    const double wk = w[kbase + t];
                    for (int pos = lo; pos < hi; ++pos) {
                        acc += go[pos] * src[pos + shift];
                        gi[pos + shift] += wk * go[pos];
                    }
                    gw[0][kbase + t] += acc;
                }
            }
        }
    }
}

}  // namespace

ForwardResult forward(const NetworkSpec& spec, ModelParams& params, const Tensor& batch,
                      RunMode mode) {
    spec.validate();
    if (batch.shape.size() != 3 || batch.shape[1] != 1 ||
        batch.shape[2] != spec.input_features)
        throw std::invalid_argument("forward: batch shape must be [B, 1, d]");
    if (!batch.all_finite()) throw std::invalid_argument("forward: non-finite input");
    if (params.layers.size() != spec.layers.size())
        throw std::invalid_argument("forward: params do not match spec");

    const Index B = batch.shape[0];
    ForwardResult res;
    ForwardCache& cache = res.cache;
    cache.spec = &spec;
    cache.params = &params;
    cache.mode = mode;
    cache.batch_size = B;
    cache.inputs.resize(spec.layers.size());
    cache.bn.resize(spec.layers.size());
    cache.embedding_layer = spec.classifier_index();

    Mat act = batch.as_matrix();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        LayerParams& lp = params.layers[i];
        cache.inputs[i] = act;
        if (i == cache.embedding_layer) res.embedding = act;
        switch (l.kind) {
            case LayerKind::Conv1D:
                act = conv1d_forward(l, lp, act, spec.input_features);
                break;
            case LayerKind::BatchNorm1D: {
                const int C = l.channels;
                const int L = spec.input_features;
                const Vec& scale = lp.weights[0].values;
                const Vec& shift = lp.weights[1].values;
                Vec& rmean = lp.buffers[0].values;
                Vec& rvar = lp.buffers[1].values;
                Mat out(B, act.cols());
                BatchNormCache& bnc = cache.bn[i];
                bnc.inv_std.resize(C);
                if (mode == RunMode::Train) bnc.xhat.resize(B, act.cols());
                const double n = static_cast<double>(B) * L;
                for (int c = 0; c < C; ++c) {
                    auto xc = act.middleCols(static_cast<Index>(c) * L, L);
                    auto oc = out.middleCols(static_cast<Index>(c) * L, L);
                    double mean, var;
                    if (mode == RunMode::Train) {
                        mean = xc.sum() / n;
                        var = (xc.array() - mean).square().sum() / n;
                        rmean[c] = (1.0 - kBnMomentum) * rmean[c] + kBnMomentum * mean;
                        rvar[c] = (1.0 - kBnMomentum) * rvar[c] + kBnMomentum * var;
                    } else {
                        mean = rmean[c];
                        var = rvar[c];
                    }
                    const double inv_std = 1.0 / std::sqrt(var + kBnEps);
                    bnc.inv_std[c] = inv_std;
                    if (mode == RunMode::Train) {
                        auto hc = bnc.xhat.middleCols(static_cast<Index>(c) * L, L);
                        hc = ((xc.array() - mean) * inv_std).matrix();
                        oc = (hc.array() * scale[c] + shift[c]).matrix();
                    } else {
                        oc = (((xc.array() - mean) * inv_std) * scale[c] + shift[c]).matrix();
                    }
                }
                act = std::move(out);
                break;
            }
            case LayerKind::ReLU:
                act = act.cwiseMax(0.0);
                break;
            case LayerKind::Flatten:
                break;  // layout is already flat per sample
            case LayerKind::Dense: {
                Eigen::Map<const Mat> W(lp.weights[0].values.data(), l.out_units, l.in_units);
                const Vec& bias = lp.weights[1].values;
                act = (act * W.transpose()).rowwise() + bias.transpose();
                break;
            }
        }
    }
    if (mode == RunMode::Train) params.bump();
    cache.params_version = params.version;
    res.logits = std::move(act);
    check_finite(res.logits, "logits");
    return res;
}

InferenceResult forward_infer(const NetworkSpec& spec, const ModelParams& params,
                              const Tensor& batch) {
    // Infer mode never mutates params; the const_cast is confined here.
    ForwardResult r =
        forward(spec, const_cast<ModelParams&>(params), batch, RunMode::Infer);
    return {std::move(r.logits), std::move(r.embedding)};
}

Gradients backward(const ForwardCache& cache, const Mat& grad_logits,
                   const Mat* grad_embedding) {
    if (cache.spec == nullptr || cache.params == nullptr)
        throw std::invalid_argument("backward: empty cache");
    if (cache.mode != RunMode::Train)
        throw std::invalid_argument("backward: cache must come from a train-mode forward");
    if (cache.params->version != cache.params_version)
        throw std::runtime_error("backward: stale cache, parameters were mutated after forward");
    const NetworkSpec& spec = *cache.spec;
    const ModelParams& params = *cache.params;
    if (grad_logits.rows() != cache.batch_size ||
        grad_logits.cols() != spec.num_classes())
        throw std::invalid_argument("backward: upstream gradient shape mismatch");

    Gradients grads = zero_gradients(params);
    Mat g = grad_logits;
    for (std::size_t ri = spec.layers.size(); ri-- > 0;) {
        const LayerSpec& l = spec.layers[ri];
        const LayerParams& lp = params.layers[ri];
        const Mat& in = cache.inputs[ri];
        switch (l.kind) {
            case LayerKind::Dense: {
                Eigen::Map<const Mat> W(lp.weights[0].values.data(), l.out_units, l.in_units);
                Eigen::Map<Mat> gW(grads[ri][0].data(), l.out_units, l.in_units);
                gW = g.transpose() * in;
                grads[ri][1] = g.colwise().sum().transpose();
                g = g * W;
                break;
            }
            case LayerKind::Flatten:
                break;
            case LayerKind::ReLU:
                g = ((in.array() > 0.0).cast<double>() * g.array()).matrix();
                break;
            case LayerKind::BatchNorm1D: {
                const int C = l.channels;
                const int L = spec.input_features;
                const Vec& scale = lp.weights[0].values;
                const BatchNormCache& bnc = cache.bn[ri];
                const double n = static_cast<double>(cache.batch_size) * L;
                Mat gin(g.rows(), g.cols());
                for (int c = 0; c < C; ++c) {
                    auto gy = g.middleCols(static_cast<Index>(c) * L, L);
                    auto xhat = bnc.xhat.middleCols(static_cast<Index>(c) * L, L);
                    const double sum_gy = gy.sum();
                    const double sum_gy_xhat = (gy.array() * xhat.array()).sum();
                    grads[ri][0][c] = sum_gy_xhat;
                    grads[ri][1][c] = sum_gy;
                    auto gx = gin.middleCols(static_cast<Index>(c) * L, L);
                    gx = ((scale[c] * bnc.inv_std[c]) *
                          (gy.array() - sum_gy / n - xhat.array() * (sum_gy_xhat / n)))
                             .matrix();
                }
                g = std::move(gin);
                break;
            }
            case LayerKind::Conv1D: {
                Mat gin;
                conv1d_backward(l, lp, in, g, spec.input_features, gin, grads[ri]);
                g = std::move(gin);
                break;
            }
        }
        if (ri == cache.embedding_layer && grad_embedding != nullptr) {
            if (grad_embedding->rows() != g.rows() || grad_embedding->cols() != g.cols())
                throw std::invalid_argument("backward: embedding gradient shape mismatch");
            g += *grad_embedding;
        }
    }
    return grads;
}

namespace {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("model file: unexpected end of stream");
}

void write_block(std::ostream& out, const ParamBlock& b) {
    write_pod(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    write_pod(out, static_cast<std::uint32_t>(b.shape.size()));
    for (Index d : b.shape) write_pod(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(b.values.data()),
              static_cast<std::streamsize>(b.values.size() * sizeof(double)));
}

ParamBlock read_block(std::istream& in) {
    ParamBlock b;
    std::uint32_t name_len = 0;
    read_pod(in, name_len);
    b.name.resize(name_len);
    in.read(b.name.data(), name_len);
    std::uint32_t rank = 0;
    read_pod(in, rank);
    Index total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint64_t d = 0;
        read_pod(in, d);
        b.shape.push_back(static_cast<Index>(d));
        total *= static_cast<Index>(d);
    }
    b.values.resize(total);
    in.read(reinterpret_cast<char*>(b.values.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw std::runtime_error("model file: truncated parameter block");
    return b;
}

}  // namespace

void save_params(const NetworkSpec& spec, const ModelParams& params, std::ostream& out) {
    out.write(kMagic, 4);
    write_pod(out, kFormatVersion);
    write_pod(out, static_cast<std::uint32_t>(params.layers.size()));
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        (void)spec;
        const LayerParams& lp = params.layers[i];
        write_pod(out, static_cast<std::uint32_t>(lp.weights.size()));
        for (const ParamBlock& b : lp.weights) write_block(out, b);
        write_pod(out, static_cast<std::uint32_t>(lp.buffers.size()));
        for (const ParamBlock& b : lp.buffers) write_block(out, b);
    }
    if (!out) throw std::runtime_error("model file: write failed");
}

void save_params(const NetworkSpec& spec, const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    save_params(spec, params, out);
}

ModelParams load_params(const NetworkSpec& spec, std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("model file: bad magic");
    std::uint32_t version = 0;
    read_pod(in, version);
    if (version != kFormatVersion) throw std::runtime_error("model file: unsupported version");
    std::uint32_t n_layers = 0;
    read_pod(in, n_layers);
    if (n_layers != spec.layers.size())
        throw std::runtime_error("model file: layer count does not match spec");
    ModelParams params;
    params.layers.resize(n_layers);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        std::uint32_t nw = 0;
        read_pod(in, nw);
        for (std::uint32_t j = 0; j < nw; ++j) params.layers[i].weights.push_back(read_block(in));
        std::uint32_t nb = 0;
        read_pod(in, nb);
        for (std::uint32_t j = 0; j < nb; ++j) params.layers[i].buffers.push_back(read_block(in));
    }
    return params;
}

ModelParams load_params(const NetworkSpec& spec, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    return load_params(spec, in);
}

}  // namespace efl::nn
