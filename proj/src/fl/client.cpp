#include "efl/fl/client.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace efl::fl {

namespace {

constexpr std::uint64_t kTeacherShuffle = 101;
constexpr std::uint64_t kStudentShuffle = 102;

nn::LabelMode label_mode(const data::EncodedDataset& ds) {
    return ds.scheme == data::LabelScheme::Binary ? nn::LabelMode::Binary
                                                  : nn::LabelMode::Multi;
}

std::vector<int> gather_labels(const data::EncodedDataset& ds,
                               const std::vector<Index>& indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (Index i : indices) out.push_back(ds.labels[static_cast<std::size_t>(i)]);
    return out;
}

/// Teacher logits for a subset of the client's shard, served from the frozen
/// cache when present (shard is sorted, so rows are found by binary search).
Mat teacher_logits_for(const ClientState& client, const data::EncodedDataset& ds,
                       const std::vector<Index>& indices) {
    if (client.teacher_logits.rows() == static_cast<Index>(client.shard.size())) {
        Mat out(static_cast<Index>(indices.size()), client.teacher_logits.cols());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            auto it = std::lower_bound(client.shard.begin(), client.shard.end(), indices[i]);
            if (it == client.shard.end() || *it != indices[i])
                throw std::logic_error("teacher_logits_for: index outside the shard");
            out.row(static_cast<Index>(i)) =
                client.teacher_logits.row(static_cast<Index>(it - client.shard.begin()));
        }
        return out;
    }
    return infer_logits(client.teacher_spec, client.teacher, ds, indices);
}

}  // namespace

Mat infer_logits(const nn::NetworkSpec& spec, const nn::ModelParams& params,
                 const data::EncodedDataset& ds, const std::vector<Index>& indices) {
    Mat logits(static_cast<Index>(indices.size()), spec.num_classes());
    const std::size_t chunk = 512;
    for (std::size_t start = 0; start < indices.size(); start += chunk) {
        std::vector<Index> part(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                indices.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                      indices.size(), start + chunk)));
        auto res = forward_infer(spec, params, make_batch(ds, part));
        logits.middleRows(static_cast<Index>(start), res.logits.rows()) = res.logits;
    }
    return logits;
}

namespace {

double prox_penalty(const nn::ModelParams& w, const nn::ModelParams& ref, double mu) {
    double sq = 0.0;
    for (std::size_t i = 0; i < w.layers.size(); ++i)
        for (std::size_t j = 0; j < w.layers[i].weights.size(); ++j)
            sq += (w.layers[i].weights[j].values - ref.layers[i].weights[j].values)
                      .squaredNorm();
    return 0.5 * mu * sq;
}

/// Full-shard value of the client objective with the current parameters.
double shard_objective(const ClientState& client, const data::EncodedDataset& ds,
                       const PrototypeSet& global_prototypes, const ClientUpdateOptions& opt) {
    const auto labels = gather_labels(ds, client.shard);
    Mat logits = infer_logits(client.student_spec, client.student, ds, client.shard);
    const double psi_eff = opt.use_kd ? opt.psi : 1.0;
    double value = psi_eff * nn::loss_supervised(logits, labels, label_mode(ds)).value;
    if (opt.use_kd) {
        Mat t_logits = teacher_logits_for(client, ds, client.shard);
        value += (1.0 - opt.psi) *
                 nn::loss_kd(t_logits, logits, opt.zeta, 1, logits.rows()).value;
    }
    if (opt.use_reg && opt.gamma > 0.0 && !global_prototypes.empty()) {
        auto local = compute_prototypes(client.student_spec, client.student, ds, client.shard, 1);
        value += opt.gamma * regularization_term(local, global_prototypes);
    }
    if (opt.use_prox && opt.prox_reference)
        value += prox_penalty(client.student, *opt.prox_reference, opt.prox_mu);
    return value;
}

}  // namespace

Tensor make_batch(const data::EncodedDataset& ds, const std::vector<Index>& indices) {
    const Index B = static_cast<Index>(indices.size());
    const Index d = ds.d();
    Tensor t = Tensor::zeros({B, 1, d});
    for (Index b = 0; b < B; ++b)
        t.data.segment(b * d, d) = ds.features.row(indices[static_cast<std::size_t>(b)]);
    return t;
}

std::vector<int> predict_labels(const nn::NetworkSpec& spec, const nn::ModelParams& params,
                                const Mat& features) {
    std::vector<int> pred;
    pred.reserve(static_cast<std::size_t>(features.rows()));
    const Index chunk = 512;
    for (Index start = 0; start < features.rows(); start += chunk) {
        const Index n = std::min(chunk, features.rows() - start);
        Tensor batch = Tensor::zeros({n, 1, features.cols()});
        for (Index b = 0; b < n; ++b)
            batch.data.segment(b * features.cols(), features.cols()) =
                features.row(start + b);
        auto res = forward_infer(spec, params, batch);
        for (Index b = 0; b < n; ++b) {
            Index arg;
            res.logits.row(b).maxCoeff(&arg);
            pred.push_back(static_cast<int>(arg));
        }
    }
    return pred;
}

void pretrain_teacher(ClientState& client, const data::EncodedDataset& ds, int epochs, double lr,
                      Index batch_size, std::uint64_t seed) {
    if (client.shard.empty()) throw std::invalid_argument("pretrain_teacher: empty shard");
    auto opt = nn::OptimizerState::adam(lr);
    auto indices = client.shard;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(client.id),
                                        static_cast<std::uint64_t>(epoch), kTeacherShuffle));
        std::shuffle(indices.begin(), indices.end(), rng);
        for (std::size_t start = 0; start < indices.size();
             start += static_cast<std::size_t>(batch_size)) {
            std::vector<Index> bidx(
                indices.begin() + static_cast<std::ptrdiff_t>(start),
                indices.begin() + static_cast<std::ptrdiff_t>(std::min(
                                      indices.size(), start + static_cast<std::size_t>(batch_size))));
            auto fr = forward(client.teacher_spec, client.teacher, make_batch(ds, bidx),
                              nn::RunMode::Train);
            auto sup = nn::loss_supervised(fr.logits, gather_labels(ds, bidx), label_mode(ds));
            if (!std::isfinite(sup.value))
                throw std::runtime_error("pretrain_teacher: divergence at client " +
                                         std::to_string(client.id));
            auto grads = nn::backward(fr.cache, sup.grad_logits);
            nn::optimizer_step(client.teacher, grads, opt);
        }
    }
}

double local_loss(double entropy, double kd, double reg, double psi, double gamma) {
    if (psi < 0.0 || psi > 1.0) throw std::invalid_argument("local_loss: psi out of [0,1]");
    if (gamma < 0.0) throw std::invalid_argument("local_loss: negative gamma");
    return psi * entropy + (1.0 - psi) * kd + gamma * reg;
}

ClientUpdateResult client_update(ClientState& client, const data::EncodedDataset& ds,
                                 const PrototypeSet& global_prototypes,
                                 const ClientUpdateOptions& opt) {
    if (client.alpha != 1) throw std::invalid_argument("client_update: client not available");

    ClientUpdateResult result;
    result.n_samples = static_cast<long>(client.shard.size());
    const auto mode = label_mode(ds);
    auto sgd = nn::OptimizerState::sgd(opt.base_lr, opt.round_index);
    auto indices = client.shard;

    for (int epoch = 0; epoch < opt.local_epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(
            opt.seed, static_cast<std::uint64_t>(client.id),
            static_cast<std::uint64_t>(opt.round_index) * 1000 + static_cast<std::uint64_t>(epoch),
            kStudentShuffle));
        std::shuffle(indices.begin(), indices.end(), rng);

        for (std::size_t start = 0; start < indices.size();
             start += static_cast<std::size_t>(opt.batch_size)) {
            std::vector<Index> bidx(
                indices.begin() + static_cast<std::ptrdiff_t>(start),
                indices.begin() + static_cast<std::ptrdiff_t>(
                                      std::min(indices.size(),
                                               start + static_cast<std::size_t>(opt.batch_size))));
            const auto blabels = gather_labels(ds, bidx);
            auto batch = make_batch(ds, bidx);
            auto fr = forward(client.student_spec, client.student, batch, nn::RunMode::Train);

            auto sup = nn::loss_supervised(fr.logits, blabels, mode);
            const double psi_eff = opt.use_kd ? opt.psi : 1.0;
            Mat grad_logits = psi_eff * sup.grad_logits;
            double value = psi_eff * sup.value;

            if (opt.use_kd) {
                Mat t_logits = teacher_logits_for(client, ds, bidx);
                auto kd = nn::loss_kd(t_logits, fr.logits, opt.zeta, 1, fr.logits.rows());
                grad_logits += (1.0 - opt.psi) * kd.grad_logits;
                value += (1.0 - opt.psi) * kd.value;
            }

            Mat grad_emb;
            bool inject = false;
            if (opt.use_reg && opt.gamma > 0.0 && !global_prototypes.empty()) {
                // batch-level prototypes; each sample of class k gets
                // gamma * 2 (N_k - N̄_k) / |class k in batch|
                std::map<int, std::vector<Index>> rows_of;
                for (std::size_t i = 0; i < bidx.size(); ++i)
                    rows_of[blabels[i]].push_back(static_cast<Index>(i));
                for (const auto& [k, rows] : rows_of) {
                    auto git = global_prototypes.classes.find(k);
                    if (git == global_prototypes.classes.end()) continue;
                    Vec proto = Vec::Zero(fr.embedding.cols());
                    for (Index r : rows) proto += fr.embedding.row(r).transpose();
                    proto /= static_cast<double>(rows.size());
                    const Vec diff = proto - git->second.vector;
                    value += opt.gamma * diff.squaredNorm();
                    if (!inject) {
                        grad_emb = Mat::Zero(fr.embedding.rows(), fr.embedding.cols());
                        inject = true;
                    }
                    const Vec g = (2.0 * opt.gamma / static_cast<double>(rows.size())) * diff;
                    for (Index r : rows) grad_emb.row(r) += g.transpose();
                }
            }

            auto grads = nn::backward(fr.cache, grad_logits, inject ? &grad_emb : nullptr);

            if (opt.use_prox && opt.prox_reference) {
                value += prox_penalty(client.student, *opt.prox_reference, opt.prox_mu);
                for (std::size_t i = 0; i < grads.size(); ++i)
                    for (std::size_t j = 0; j < grads[i].size(); ++j)
                        grads[i][j] += opt.prox_mu *
                                       (client.student.layers[i].weights[j].values -
                                        opt.prox_reference->layers[i].weights[j].values);
            }

            if (!std::isfinite(value))
                throw std::runtime_error("client_update: non-finite loss at client " +
                                         std::to_string(client.id) + ", round " +
                                         std::to_string(opt.round_index));
            nn::optimizer_step(client.student, grads, sgd);
        }
        result.epoch_losses.push_back(shard_objective(client, ds, global_prototypes, opt));
    }

    result.prototypes =
        compute_prototypes(client.student_spec, client.student, ds, client.shard, client.alpha);
    if (opt.return_model) result.model = client.student;
    return result;
}

}  // namespace efl::fl
