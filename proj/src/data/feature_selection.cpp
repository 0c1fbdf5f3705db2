#include "efl/data/feature_selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace efl::data {

std::optional<double> pcc(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw std::invalid_argument("pcc: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pcc: need at least 2 samples");
    const double n = static_cast<double>(x.size());
    const double mx = x.mean();
    const double my = y.mean();
    const Vec dx = x.array() - mx;
    const Vec dy = y.array() - my;
    const double sx = dx.squaredNorm() / n;
    const double sy = dy.squaredNorm() / n;
    if (sx == 0.0 || sy == 0.0) return std::nullopt;
    const double cov = dx.dot(dy) / n;
    return std::clamp(cov / std::sqrt(sx * sy), -1.0, 1.0);
}

FeatureSelection select_features(const Mat& features, Index top_k, double band_lo,
                                 double band_hi) {
    const Index d = features.cols();
    if (top_k < 1 || top_k > d) throw std::invalid_argument("select_features: bad top_k");

    FeatureSelection sel;
    sel.band_lo = band_lo;
    sel.band_hi = band_hi;
    sel.top_k = top_k;
    sel.qualifying_counts.assign(static_cast<std::size_t>(d), 0);

    for (Index a = 0; a < d; ++a)
        for (Index b = a + 1; b < d; ++b) {
            auto r = pcc(features.col(a), features.col(b));
            if (!r) continue;
            const double m = std::abs(*r);
            if (m >= band_lo && m <= band_hi) {
                ++sel.qualifying_counts[static_cast<std::size_t>(a)];
                ++sel.qualifying_counts[static_cast<std::size_t>(b)];
            }
        }

    std::vector<Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        const int ca = sel.qualifying_counts[static_cast<std::size_t>(a)];
        const int cb = sel.qualifying_counts[static_cast<std::size_t>(b)];
        if (ca != cb) return ca > cb;
        return a < b;  // tie: lower column index wins
    });
    sel.selected_indices.assign(order.begin(), order.begin() + top_k);
    std::sort(sel.selected_indices.begin(), sel.selected_indices.end());
    return sel;
}

}  // namespace efl::data
