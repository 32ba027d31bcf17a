#pragma once

// Sample-by-sample distances and the locally scaled affinity kernel
//   A(j, n) = exp(-d(j, n)^2 / (0.5 sigma_j sigma_n + 0.5 d(j, n)))
// where sigma_j is the mean distance from j to its k1 nearest neighbours.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "lidaf/error.hpp"
#include "lidaf/omics.hpp"

namespace lidaf {

// Symmetric, nonnegative, zero diagonal.
struct DistanceMatrix {
    Matrix values;
    std::size_t size() const { return values.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return values(i, j); }

    void validate() const {
        const std::size_t n = values.rows();
        if (values.cols() != n) throw ArgumentError("DistanceMatrix: not square");
        for (std::size_t i = 0; i < n; ++i) {
            if (values(i, i) != 0.0) throw ArgumentError("DistanceMatrix: nonzero diagonal");
            for (std::size_t j = 0; j < n; ++j) {
                const double v = values(i, j);
                if (!std::isfinite(v) || v < 0.0 || v != values(j, i))
                    throw ArgumentError("DistanceMatrix: entry (" + std::to_string(i) + ", " +
                                        std::to_string(j) + ") breaks symmetry or sign");
            }
        }
    }
};

// Symmetric, entries in (0, 1], unit diagonal.
struct AffinityMatrix {
    Matrix values;
    std::size_t size() const { return values.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
};

inline DistanceMatrix euclidean_distance_matrix(const Matrix& x) {
    const std::size_t n = x.rows();
    DistanceMatrix d{Matrix(n, n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = std::sqrt(squared_distance(x.row(i), x.row(j)));
            d.values(i, j) = v;
            d.values(j, i) = v;
        }
    }
    return d;
}

inline DistanceMatrix euclidean_distance_matrix(const OmicsMatrix& x) {
    if (x.has_missing()) throw ArgumentError("euclidean_distance_matrix: input has missing cells");
    return euclidean_distance_matrix(x.values);
}

// Off-diagonal distances of row j, ascending.
inline std::vector<double> sorted_neighbor_distances(const DistanceMatrix& d, std::size_t j) {
    std::vector<double> row;
    row.reserve(d.size() - 1);
    for (std::size_t n = 0; n < d.size(); ++n)
        if (n != j) row.push_back(d(j, n));
    std::sort(row.begin(), row.end());
    return row;
}

inline std::vector<double> local_scales(const DistanceMatrix& d, std::size_t k1) {
    const std::size_t n = d.size();
    if (k1 < 1 || k1 + 1 > n)
        throw ArgumentError("local_scales: k1 = " + std::to_string(k1) + " outside [1, " +
                            std::to_string(n == 0 ? 0 : n - 1) + "]");
    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto row = sorted_neighbor_distances(d, j);
        double s = 0.0;
        for (std::size_t k = 0; k < k1; ++k) s += row[k];
        sigma[j] = s / static_cast<double>(k1);
    }
    return sigma;
}

inline std::size_t default_kernel_neighbors(std::size_t n) {
    const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    return std::clamp<std::size_t>(k, 1, n > 1 ? n - 1 : 1);
}

// The kernel as printed: sigma_j sigma_n and d are mixed in the denominator.
// A zero denominator only arises for coincident samples and yields 1.
// Underflow is clamped to the smallest normal double so entries stay positive.
inline AffinityMatrix affinity_from_distance(const DistanceMatrix& d,
                                             std::optional<std::size_t> k1 = std::nullopt) {
    const std::size_t n = d.size();
    const auto sigma = local_scales(d, k1.value_or(default_kernel_neighbors(n)));
    AffinityMatrix a{Matrix(n, n, 1.0)};
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t m = j + 1; m < n; ++m) {
            const double dist = d(j, m);
            const double denom = 0.5 * sigma[j] * sigma[m] + 0.5 * dist;
            const double v =
                denom > 0.0 ? std::max(std::exp(-dist * dist / denom), std::numeric_limits<double>::min())
                            : 1.0;
            a.values(j, m) = v;
            a.values(m, j) = v;
        }
    }
    return a;
}

}  // namespace lidaf
