#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace efl {

template <class Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatT<double>;
using Vec = VecT<double>;
using Index = Eigen::Index;

/// Dense n-dimensional value container, row-major.
struct Tensor {
    std::vector<Index> shape;
    Vec data;

    Tensor() = default;
    Tensor(std::vector<Index> s, Vec d) : shape(std::move(s)), data(std::move(d)) {
        if (size_from_shape(shape) != data.size())
            throw std::invalid_argument("Tensor: shape/data size mismatch");
    }

    static Index size_from_shape(const std::vector<Index>& s) {
        return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<Index>());
    }

    static Tensor zeros(std::vector<Index> s) {
        Index n = size_from_shape(s);
        return Tensor(std::move(s), Vec::Zero(n));
    }

    Index size() const { return data.size(); }

    Index dim(std::size_t i) const { return shape.at(i); }

    bool all_finite() const { return data.allFinite(); }

    /// View a [B, ...] tensor as a B x (rest) row-major matrix.
    Eigen::Map<const Mat> as_matrix() const {
        if (shape.empty()) throw std::invalid_argument("Tensor: rank 0 has no matrix view");
        Index rows = shape[0];
        Index cols = rows == 0 ? 0 : data.size() / rows;
        return Eigen::Map<const Mat>(data.data(), rows, cols);
    }
    Eigen::Map<Mat> as_matrix() {
        if (shape.empty()) throw std::invalid_argument("Tensor: rank 0 has no matrix view");
        Index rows = shape[0];
        Index cols = rows == 0 ? 0 : data.size() / rows;
        return Eigen::Map<Mat>(data.data(), rows, cols);
    }
};

/// splitmix64; used to derive independent seeds for per-client/per-round streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t h = mix_seed(master);
    h = mix_seed(h ^ a);
    h = mix_seed(h ^ b);
    h = mix_seed(h ^ c);
    return h;
}

}  // namespace efl
