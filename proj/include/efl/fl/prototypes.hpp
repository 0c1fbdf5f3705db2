#pragma once

#include "efl/data/encode.hpp"
#include "efl/nn/network.hpp"

#include <map>
#include <vector>

namespace efl::fl {

/// Per-class mean embedding vectors with the owning sample counts. Classes a
/// holder has never seen are simply absent.
struct PrototypeSet {
    struct Entry {
        Vec vector;
        long count = 0;
    };
    std::map<int, Entry> classes;

    bool empty() const { return classes.empty(); }
    /// Serialized size: one 64-bit float per embedding component.
    long byte_size() const;
};

/// Class-wise mean of student embeddings over the shard (inference mode);
/// alpha == 0 contributes nothing and yields an empty set.
PrototypeSet compute_prototypes(const nn::NetworkSpec& spec, const nn::ModelParams& params,
                                const data::EncodedDataset& ds, const std::vector<Index>& shard,
                                int alpha);

/// Sum of squared-L2 distances between local and global prototypes over the
/// classes present in both sets; 0 when nothing is shared.
double regularization_term(const PrototypeSet& local, const PrototypeSet& global);

/// Weighted per-class aggregation. The verbatim rule divides the normalized
/// weighted sum by the contributor count again; `mean_normalized` drops that
/// extra division (ablation variant, off by default).
PrototypeSet aggregate_prototypes(const std::vector<PrototypeSet>& client_sets,
                                  const std::vector<int>& alphas, bool mean_normalized = false);

/// Data-size-weighted model averaging over participating clients; effective
/// weights sum to 1.
nn::ModelParams aggregate_models(const std::vector<nn::ModelParams>& params,
                                 const std::vector<long>& data_sizes,
                                 const std::vector<int>& alphas);

}  // namespace efl::fl
