#pragma once

// K-means++ and the partition agreement scores (adjusted Rand index from pair
// counts, normalized mutual information over the max entropy).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "lidaf/error.hpp"
#include "lidaf/matrix.hpp"
#include "lidaf/rng.hpp"

namespace lidaf {

struct Partition {
    std::vector<int> labels;  // in [0, k), every cluster nonempty
    int k = 0;

    std::size_t size() const { return labels.size(); }

    // Relabels arbitrary integer labels to 0, 1, ... in order of first appearance.
    static Partition from_labels(std::span<const int> raw) {
        Partition p;
        std::map<int, int> code;
        for (int v : raw) {
            auto [it, fresh] = code.try_emplace(v, p.k);
            if (fresh) ++p.k;
            p.labels.push_back(it->second);
        }
        return p;
    }
};

struct KMeansFit {
    Partition partition;
    Matrix centroids;  // k x m
    double inertia = 0.0;
};

namespace detail {

inline std::size_t nearest_centroid(std::span<const double> x, const Matrix& c, double* dist2 = nullptr) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.rows(); ++k) {
        const double d = squared_distance(x, c.row(k));
        if (d < bd) {
            bd = d;
            best = k;
        }
    }
    if (dist2) *dist2 = bd;
    return best;
}

inline Matrix kmeanspp_seed(const Matrix& x, std::size_t k, Rng& rng) {
    const std::size_t n = x.rows();
    Matrix c(k, x.cols());
    auto take = [&](std::size_t row, std::size_t slot) {
        for (std::size_t j = 0; j < x.cols(); ++j) c(slot, j) = x(row, j);
    };
    take(rng.index(n), 0);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    for (std::size_t s = 1; s < k; ++s) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(x.row(i), c.row(s - 1)));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                target -= d2[pick];
                if (target < 0.0 && d2[pick] > 0.0) break;
            }
        } else {
            pick = rng.index(n);
        }
        take(pick, s);
    }
    return c;
}

// Assigns every point and re-seeds empty clusters with the point farthest
// from its centroid, taken from a cluster that can spare it.
inline void assign_with_repair(const Matrix& x, const Matrix& c, std::vector<int>& labels) {
    const std::size_t n = x.rows();
    const std::size_t k = c.rows();
    std::vector<double> d2(n);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(nearest_centroid(x.row(i), c, &d2[i]));
        ++count[labels[i]];
    }
    for (std::size_t e = 0; e < k; ++e) {
        if (count[e] > 0) continue;
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i)
            if (count[labels[i]] > 1 && (far == n || d2[i] > d2[far])) far = i;
        --count[labels[far]];
        labels[far] = static_cast<int>(e);
        count[e] = 1;
        d2[far] = 0.0;
    }
}

inline Matrix centroids_of(const Matrix& x, const std::vector<int>& labels, std::size_t k) {
    Matrix c(k, x.cols(), 0.0);
    std::vector<double> count(k, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        count[labels[i]] += 1.0;
        for (std::size_t j = 0; j < x.cols(); ++j) c(labels[i], j) += x(i, j);
    }
    for (std::size_t s = 0; s < k; ++s)
        for (std::size_t j = 0; j < x.cols(); ++j) c(s, j) /= count[s];
    return c;
}

}  // namespace detail

// Best of `restarts` k-means++ runs by within-cluster sum of squares. Lloyd
// iterations stop when no centroid moves by 1e-8 or after 300 rounds.
inline KMeansFit kmeans_pp_fit(const Matrix& points, std::size_t k, std::uint64_t seed,
                               std::size_t restarts = 10) {
    const std::size_t n = points.rows();
    if (k < 1 || k > n)
        throw ArgumentError("kmeans_pp: k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    if (restarts < 1) throw ArgumentError("kmeans_pp: restarts must be >= 1");
    if (!points.all_finite()) throw ArgumentError("kmeans_pp: non-finite input");

    Rng rng(seed);
    KMeansFit best;
    best.inertia = std::numeric_limits<double>::infinity();
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < restarts; ++r) {
        Matrix c = detail::kmeanspp_seed(points, k, rng);
        for (int it = 0; it < 300; ++it) {
            detail::assign_with_repair(points, c, labels);
            Matrix next = detail::centroids_of(points, labels, k);
            double shift = 0.0;
            for (std::size_t s = 0; s < k; ++s) shift = std::max(shift, squared_distance(c.row(s), next.row(s)));
            c = std::move(next);
            if (std::sqrt(shift) < 1e-8) break;
        }
        detail::assign_with_repair(points, c, labels);
        c = detail::centroids_of(points, labels, k);
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) inertia += squared_distance(points.row(i), c.row(labels[i]));
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.centroids = c;
            best.partition.labels = labels;
        }
    }
    // Canonical label order: first appearance.
    Partition canon = Partition::from_labels(best.partition.labels);
    Matrix reordered(k, points.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < points.cols(); ++j)
            reordered(canon.labels[i], j) = best.centroids(best.partition.labels[i], j);
    best.centroids = std::move(reordered);
    best.partition = std::move(canon);
    return best;
}

inline Partition kmeans_pp(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts = 10) {
    return kmeans_pp_fit(points, k, seed, restarts).partition;
}

namespace detail {

struct Contingency {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows, cols;
    double n = 0.0;
};

inline Contingency contingency(std::span<const int> a, std::span<const int> b, const char* who) {
    if (a.size() != b.size())
        throw ArgumentError(std::string(who) + ": partitions of different length (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
    Contingency t;
    for (std::size_t i = 0; i < a.size(); ++i) {
        t.joint[{a[i], b[i]}] += 1.0;
        t.rows[a[i]] += 1.0;
        t.cols[b[i]] += 1.0;
    }
    t.n = static_cast<double>(a.size());
    return t;
}

inline double pairs(double m) { return 0.5 * m * (m - 1.0); }

}  // namespace detail

// ARI = 2(ad - bc) / ((a + b)(b + d) + (a + c)(c + d)) with a = pairs together
// in both, b = together only in the first, c = together only in the second,
// d = apart in both. A zero denominator means both partitions are the same
// trivial split and scores 1.
inline double ari(std::span<const int> x, std::span<const int> y) {
    const auto t = detail::contingency(x, y, "ari");
    double a = 0.0, same_x = 0.0, same_y = 0.0;
    for (const auto& [cell, m] : t.joint) a += detail::pairs(m);
    for (const auto& [l, m] : t.rows) same_x += detail::pairs(m);
    for (const auto& [l, m] : t.cols) same_y += detail::pairs(m);
    const double b = same_x - a;
    const double c = same_y - a;
    const double d = detail::pairs(t.n) - a - b - c;
    const double denom = (a + b) * (b + d) + (a + c) * (c + d);
    if (denom == 0.0) return 1.0;
    return 2.0 * (a * d - b * c) / denom;
}

// I(A, B) / max(H(A), H(B)) in nats. Both entropies zero means two one-cluster
// partitions, which agree perfectly.
inline double nmi(std::span<const int> x, std::span<const int> y) {
    const auto t = detail::contingency(x, y, "nmi");
    if (t.n == 0.0) return 1.0;
    double hx = 0.0, hy = 0.0, mi = 0.0;
    for (const auto& [l, m] : t.rows) hx -= m / t.n * std::log(m / t.n);
    for (const auto& [l, m] : t.cols) hy -= m / t.n * std::log(m / t.n);
    for (const auto& [cell, m] : t.joint)
        mi += m / t.n * std::log(m * t.n / (t.rows.at(cell.first) * t.cols.at(cell.second)));
    const double h = std::max(hx, hy);
    if (h == 0.0) return 1.0;
    return std::clamp(mi / h, 0.0, 1.0);
}

inline double ari(const Partition& a, const Partition& b) { return ari(a.labels, b.labels); }
inline double nmi(const Partition& a, const Partition& b) { return nmi(a.labels, b.labels); }

}  // namespace lidaf
