#include "efl/data/partition.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>

namespace efl::data {

PartitionPlan dirichlet_partition(const std::vector<int>& labels, int n_clients, double delta,
                                  std::uint64_t seed) {
    if (n_clients < 1) throw std::invalid_argument("dirichlet_partition: n_clients < 1");
    if (delta <= 0.0) throw std::invalid_argument("dirichlet_partition: delta <= 0");
    if (labels.empty()) throw std::invalid_argument("dirichlet_partition: no samples");

    std::map<int, std::vector<Index>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i]].push_back(static_cast<Index>(i));

    // separate streams: proportion draws must not depend on how many samples
    // get shuffled, so two datasets dealt with one seed (and the same classes
    // and client count) receive identical per-client class proportions
    std::mt19937_64 wrng(seed);
    std::mt19937_64 srng(derive_seed(seed, 0, 0, 301));
    std::gamma_distribution<double> gamma(delta, 1.0);

    const int max_attempts = 100;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        PartitionPlan plan;
        plan.delta = delta;
        plan.seed = seed;
        plan.client_shards.assign(static_cast<std::size_t>(n_clients), {});

        for (auto& [cls, indices] : by_class) {
            std::shuffle(indices.begin(), indices.end(), srng);
            // Dirichlet draw as normalized gamma variates
            std::vector<double> w(static_cast<std::size_t>(n_clients));
            double total = 0.0;
            for (auto& v : w) {
                v = gamma(wrng);
                total += v;
            }
            if (total <= 0.0) {
                std::fill(w.begin(), w.end(), 1.0);
                total = static_cast<double>(n_clients);
            }
            // deal indices by cumulative proportion
            const std::size_t n = indices.size();
            double cum = 0.0;
            std::size_t start = 0;
            for (int c = 0; c < n_clients; ++c) {
                cum += w[static_cast<std::size_t>(c)] / total;
                std::size_t end = c == n_clients - 1
                                      ? n
                                      : std::min(n, static_cast<std::size_t>(
                                                        cum * static_cast<double>(n) + 0.5));
                for (std::size_t i = start; i < end; ++i)
                    plan.client_shards[static_cast<std::size_t>(c)].push_back(indices[i]);
                start = std::max(start, end);
            }
        }

        bool ok = true;
        for (auto& shard : plan.client_shards) {
            if (shard.empty()) {
                ok = false;
                break;
            }
            std::sort(shard.begin(), shard.end());
        }
        if (ok) return plan;
    }
    throw std::runtime_error(
        "dirichlet_partition: empty shard after 100 redraws; increase delta or reduce clients");
}

}  // namespace efl::data
