#include "efl/fl/prototypes.hpp"

#include "efl/fl/client.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace efl::fl {

long PrototypeSet::byte_size() const {
    long bytes = 0;
    for (const auto& [cls, entry] : classes)
        bytes += static_cast<long>(entry.vector.size()) * 8;
    return bytes;
}

PrototypeSet compute_prototypes(const nn::NetworkSpec& spec, const nn::ModelParams& params,
                                const data::EncodedDataset& ds, const std::vector<Index>& shard,
                                int alpha) {
    PrototypeSet out;
    if (alpha == 0) return out;
    const int emb_dim = spec.embedding_dim();
    std::map<int, std::pair<Vec, long>> sums;

    const Index chunk = 256;
    for (std::size_t start = 0; start < shard.size(); start += chunk) {
        std::vector<Index> part(shard.begin() + static_cast<std::ptrdiff_t>(start),
                                shard.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                    shard.size(), start + chunk)));
        auto batch = make_batch(ds, part);
        auto res = forward_infer(spec, params, batch);
        for (std::size_t i = 0; i < part.size(); ++i) {
            const int k = ds.labels[static_cast<std::size_t>(part[i])];
            auto [it, fresh] = sums.try_emplace(k, Vec::Zero(emb_dim), 0L);
            it->second.first += res.embedding.row(static_cast<Index>(i)).transpose();
            ++it->second.second;
        }
    }
    for (auto& [k, acc] : sums)
        out.classes[k] = {acc.first / static_cast<double>(acc.second), acc.second};
    return out;
}

double regularization_term(const PrototypeSet& local, const PrototypeSet& global) {
    double total = 0.0;
    for (const auto& [k, entry] : local.classes) {
        auto it = global.classes.find(k);
        if (it == global.classes.end()) continue;
        total += (entry.vector - it->second.vector).squaredNorm();
    }
    return total;
}

PrototypeSet aggregate_prototypes(const std::vector<PrototypeSet>& client_sets,
                                  const std::vector<int>& alphas, bool mean_normalized) {
    if (client_sets.size() != alphas.size())
        throw std::invalid_argument("aggregate_prototypes: length mismatch");

    // class -> list of (vector, count) from contributing clients
    std::map<int, std::vector<std::pair<const Vec*, long>>> by_class;
    for (std::size_t s = 0; s < client_sets.size(); ++s) {
        if (alphas[s] == 0) continue;
        for (const auto& [k, entry] : client_sets[s].classes)
            by_class[k].emplace_back(&entry.vector, entry.count);
    }

    // canonical contribution order makes the floating-point sum independent
    // of the client order handed in
    auto vec_less = [](const Vec* a, const Vec* b) {
        return std::lexicographical_compare(a->data(), a->data() + a->size(), b->data(),
                                            b->data() + b->size());
    };

    PrototypeSet out;
    for (auto& [k, contribs] : by_class) {
        std::sort(contribs.begin(), contribs.end(), [&](const auto& x, const auto& y) {
            if (x.second != y.second) return x.second < y.second;
            return vec_less(x.first, y.first);
        });
        double total_count = 0;
        for (const auto& [vec, count] : contribs) total_count += static_cast<double>(count);
        Vec acc = Vec::Zero(contribs.front().first->size());
        for (const auto& [vec, count] : contribs)
            acc += (static_cast<double>(count) / total_count) * *vec;
        if (!mean_normalized) acc /= static_cast<double>(contribs.size());
        out.classes[k] = {std::move(acc), static_cast<long>(total_count)};
    }
    return out;
}

nn::ModelParams aggregate_models(const std::vector<nn::ModelParams>& params,
                                 const std::vector<long>& data_sizes,
                                 const std::vector<int>& alphas) {
    if (params.size() != data_sizes.size() || params.size() != alphas.size())
        throw std::invalid_argument("aggregate_models: length mismatch");

    double total = 0.0;  // Ĥ = Σ α_s |D_s|
    std::size_t first = params.size();
    for (std::size_t s = 0; s < params.size(); ++s) {
        if (alphas[s] == 0) continue;
        if (data_sizes[s] <= 0) throw std::invalid_argument("aggregate_models: empty shard");
        total += static_cast<double>(data_sizes[s]);
        if (first == params.size()) first = s;
    }
    if (first == params.size())
        throw std::invalid_argument("aggregate_models: no participating clients");

    // shape compatibility against the first participant
    auto same_shape = [](const nn::ModelParams& a, const nn::ModelParams& b) {
        if (a.layers.size() != b.layers.size()) return false;
        for (std::size_t i = 0; i < a.layers.size(); ++i) {
            if (a.layers[i].weights.size() != b.layers[i].weights.size() ||
                a.layers[i].buffers.size() != b.layers[i].buffers.size())
                return false;
            for (std::size_t j = 0; j < a.layers[i].weights.size(); ++j)
                if (a.layers[i].weights[j].shape != b.layers[i].weights[j].shape) return false;
            for (std::size_t j = 0; j < a.layers[i].buffers.size(); ++j)
                if (a.layers[i].buffers[j].shape != b.layers[i].buffers[j].shape) return false;
        }
        return true;
    };

    nn::ModelParams out = params[first];
    for (auto& layer : out.layers) {
        for (auto& blk : layer.weights) blk.values.setZero();
        for (auto& blk : layer.buffers) blk.values.setZero();
    }
    for (std::size_t s = 0; s < params.size(); ++s)
        if (alphas[s] != 0 && !same_shape(params[first], params[s]))
            throw std::invalid_argument("aggregate_models: model structure mismatch");

    // canonical participant order (size, then parameter values) so the sum is
    // independent of the client order handed in
    auto params_less = [](const nn::ModelParams& a, const nn::ModelParams& b) {
        for (std::size_t i = 0; i < a.layers.size(); ++i)
            for (std::size_t j = 0; j < a.layers[i].weights.size(); ++j) {
                const Vec& x = a.layers[i].weights[j].values;
                const Vec& y = b.layers[i].weights[j].values;
                for (Index t = 0; t < x.size(); ++t) {
                    if (x[t] < y[t]) return true;
                    if (y[t] < x[t]) return false;
                }
            }
        return false;
    };
    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < params.size(); ++s)
        if (alphas[s] != 0) order.push_back(s);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (data_sizes[a] != data_sizes[b]) return data_sizes[a] < data_sizes[b];
        return params_less(params[a], params[b]);
    });

    for (std::size_t s : order) {
        if (!same_shape(out, params[s]))
            throw std::invalid_argument("aggregate_models: model structure mismatch");
        const double w = static_cast<double>(data_sizes[s]) / total;
        for (std::size_t i = 0; i < out.layers.size(); ++i) {
            for (std::size_t j = 0; j < out.layers[i].weights.size(); ++j)
                out.layers[i].weights[j].values += w * params[s].layers[i].weights[j].values;
            for (std::size_t j = 0; j < out.layers[i].buffers.size(); ++j)
                out.layers[i].buffers[j].values += w * params[s].layers[i].buffers[j].values;
        }
    }
    out.bump();
    return out;
}

}  // namespace efl::fl
