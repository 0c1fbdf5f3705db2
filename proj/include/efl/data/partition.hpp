#pragma once

#include "efl/types.hpp"

#include <cstdint>
#include <vector>

namespace efl::data {

struct PartitionPlan {
    std::vector<std::vector<Index>> client_shards;  // disjoint, cover all indices
    double delta = 0.0;
    std::uint64_t seed = 0;
};

/// Non-IID split: per class, draw client proportions from Dirichlet(delta)
/// and deal that class's indices out by those proportions. Plans with an
/// empty shard are redrawn up to 100 times before failing.
PartitionPlan dirichlet_partition(const std::vector<int>& labels, int n_clients, double delta,
                                  std::uint64_t seed);

}  // namespace efl::data
