#pragma once

// Per-matrix preprocessing: sparse-feature removal, KNN imputation, Z-score
// standardization and Box-Cox / Yeo-Johnson power transforms. Feature
// selection by Bayesian GMM lives in bgmm.hpp.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "lidaf/error.hpp"
#include "lidaf/omics.hpp"

namespace lidaf {

struct FilterResult {
    OmicsMatrix matrix;
    std::vector<std::size_t> kept;  // indices into the input features
    std::size_t removed = 0;
};

// Drops every feature whose share of zeros plus missing cells exceeds
// `zero_fraction_threshold`.
inline FilterResult filter_sparse_features(const OmicsMatrix& x,
                                           double zero_fraction_threshold = 0.20) {
    if (!(zero_fraction_threshold > 0.0 && zero_fraction_threshold < 1.0))
        throw ArgumentError("filter_sparse_features: threshold must lie in (0, 1)");
    const std::size_t n = x.samples();
    FilterResult out;
    for (std::size_t j = 0; j < x.features(); ++j) {
        std::size_t sparse = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (x.is_missing(i, j) || x.values(i, j) == 0.0) ++sparse;
        if (static_cast<double>(sparse) / static_cast<double>(n) <= zero_fraction_threshold)
            out.kept.push_back(j);
    }
    out.removed = x.features() - out.kept.size();
    if (out.kept.empty())
        throw DegenerateInputError("filter_sparse_features: every feature of " +
                                   std::string(to_string(x.kind)) + " matrix exceeds the " +
                                   std::to_string(zero_fraction_threshold) + " sparsity threshold");
    out.matrix = x.select_features(out.kept);
    return out;
}

// round(sqrt(n)), the neighbour-count heuristic.
inline std::size_t default_neighbor_count(std::size_t n) {
    return static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
}

namespace detail {

// Euclidean distance over coordinates observed in both rows, scaled by
// sqrt(p / shared). Infinity when the rows share no coordinate.
inline double masked_distance(const OmicsMatrix& x, std::size_t a, std::size_t b) {
    const std::size_t p = x.features();
    double sum = 0.0;
    std::size_t shared = 0;
    for (std::size_t j = 0; j < p; ++j) {
        if (x.is_missing(a, j) || x.is_missing(b, j)) continue;
        const double d = x.values(a, j) - x.values(b, j);
        sum += d * d;
        ++shared;
    }
    if (shared == 0) return std::numeric_limits<double>::infinity();
    return std::sqrt(sum * static_cast<double>(p) / static_cast<double>(shared));
}

}  // namespace detail

// Fills each missing cell with the mean of that feature over the k nearest
// samples observing it. Observed cells are never modified.
inline OmicsMatrix knn_impute(const OmicsMatrix& x, std::optional<std::size_t> k = std::nullopt) {
    const std::size_t n = x.samples();
    const std::size_t p = x.features();
    const std::size_t kk = k.value_or(default_neighbor_count(n));
    if (kk < 2 || kk + 1 > n)
        throw ArgumentError("knn_impute: k = " + std::to_string(kk) + " outside [2, " +
                            std::to_string(n == 0 ? 0 : n - 1) + "]");

    for (std::size_t j = 0; j < p; ++j) {
        bool observed = false;
        for (std::size_t i = 0; i < n && !observed; ++i) observed = !x.is_missing(i, j);
        if (!observed)
            throw DegenerateInputError("knn_impute: feature " + x.feature_ids[j] +
                                       " is not observed in any sample");
    }
    for (std::size_t i = 0; i < n; ++i) {
        bool any = false;
        for (std::size_t j = 0; j < p && !any; ++j) any = !x.is_missing(i, j);
        if (!any)
            throw DegenerateInputError("knn_impute: sample " + x.sample_ids[i] +
                                       " has no observed value");
    }

    OmicsMatrix out = x;
    std::vector<std::pair<double, std::size_t>> by_distance;
    for (std::size_t i = 0; i < n; ++i) {
        bool needs = false;
        for (std::size_t j = 0; j < p && !needs; ++j) needs = x.is_missing(i, j);
        if (!needs) continue;

        by_distance.clear();
        for (std::size_t o = 0; o < n; ++o)
            if (o != i) by_distance.emplace_back(detail::masked_distance(x, i, o), o);
        std::stable_sort(by_distance.begin(), by_distance.end());

        for (std::size_t j = 0; j < p; ++j) {
            if (!x.is_missing(i, j)) continue;
            double sum = 0.0;
            std::size_t used = 0;
            for (const auto& [dist, o] : by_distance) {
                if (x.is_missing(o, j)) continue;
                sum += x.values(o, j);
                if (++used == kk) break;
            }
            out.values(i, j) = sum / static_cast<double>(used);
        }
    }
    std::fill(out.missing.begin(), out.missing.end(), 0);
    return out;
}

struct ZscoreResult {
    OmicsMatrix matrix;
    std::vector<std::string> dropped;  // constant features
};

// Centres each feature and scales it by its sample (n - 1) standard deviation.
inline ZscoreResult zscore_standardize(const OmicsMatrix& x) {
    if (x.has_missing()) throw ArgumentError("zscore_standardize: input has missing cells");
    const std::size_t n = x.samples();
    if (n < 2) throw ArgumentError("zscore_standardize: need at least 2 samples");
    std::vector<std::size_t> keep;
    std::vector<double> mean(x.features()), sd(x.features());
    ZscoreResult out;
    for (std::size_t j = 0; j < x.features(); ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += x.values(i, j);
        m /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (x.values(i, j) - m) * (x.values(i, j) - m);
        const double s = std::sqrt(ss / static_cast<double>(n - 1));
        mean[j] = m;
        sd[j] = s;
        if (s > 1e-12 * std::max(1.0, std::abs(m))) keep.push_back(j);
        else out.dropped.push_back(x.feature_ids[j]);
    }
    out.matrix = x.select_features(keep);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < keep.size(); ++c)
            out.matrix.values(i, c) = (x.values(i, keep[c]) - mean[keep[c]]) / sd[keep[c]];
    return out;
}

enum class PowerMethod { box_cox, yeo_johnson };

inline std::string_view to_string(PowerMethod m) {
    return m == PowerMethod::box_cox ? "box_cox" : "yeo_johnson";
}

struct PowerTransformParams {
    PowerMethod method = PowerMethod::yeo_johnson;
    std::vector<double> lambdas;  // one per feature
};

inline double box_cox(double x, double lambda) {
    if (!(x > 0.0)) throw DomainError("box_cox: value " + std::to_string(x) + " is not positive");
    const double lx = std::log(x);
    if (lambda == 0.0) return lx;
    return std::expm1(lambda * lx) / lambda;
}

inline double yeo_johnson(double x, double lambda) {
    if (x >= 0.0) {
        if (lambda == 0.0) return std::log1p(x);
        return std::expm1(lambda * std::log1p(x)) / lambda;
    }
    if (lambda == 2.0) return -std::log1p(-x);
    const double a = 2.0 - lambda;
    return -std::expm1(a * std::log1p(-x)) / a;
}

namespace detail {

// Gaussian profile log-likelihood of the transformed feature, including the
// log-Jacobian of the transform.
inline double power_log_likelihood(std::span<const double> col, double lambda, PowerMethod method) {
    const double n = static_cast<double>(col.size());
    double mean = 0.0;
    double jacobian = 0.0;
    std::vector<double> y(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) {
        const double x = col[i];
        if (method == PowerMethod::box_cox) {
            y[i] = box_cox(x, lambda);
            jacobian += std::log(x);
        } else {
            y[i] = yeo_johnson(x, lambda);
            jacobian += (x >= 0.0 ? 1.0 : -1.0) * std::log1p(std::abs(x));
        }
        mean += y[i];
    }
    mean /= n;
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= n;
    if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
    return -0.5 * n * std::log(var) + (lambda - 1.0) * jacobian;
}

// Maximizes the profile likelihood over [-5, 5]: a 101-point grid locates the
// maximum; when the grid profile is unimodal a golden-section search refines it
// to 1e-4, otherwise the grid maximizer is returned.
inline double fit_lambda(std::span<const double> col, PowerMethod method) {
    constexpr double lo = -5.0, hi = 5.0;
    constexpr int grid = 101;
    std::vector<double> ll(grid);
    for (int i = 0; i < grid; ++i) ll[i] = power_log_likelihood(col, lo + 0.1 * i, method);
    const int best = static_cast<int>(std::max_element(ll.begin(), ll.end()) - ll.begin());
    if (!std::isfinite(ll[best])) return 1.0;

    const double slack = 1e-12 * std::max(1.0, std::abs(ll[best]));
    bool unimodal = true;
    for (int i = 1; i <= best && unimodal; ++i) unimodal = ll[i] >= ll[i - 1] - slack;
    for (int i = best + 1; i < grid && unimodal; ++i) unimodal = ll[i] <= ll[i - 1] + slack;
    if (!unimodal) return lo + 0.1 * best;

    double a = std::max(lo, lo + 0.1 * (best - 1));
    double b = std::min(hi, lo + 0.1 * (best + 1));
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = power_log_likelihood(col, c, method);
    double fd = power_log_likelihood(col, d, method);
    while (b - a > 1e-4) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = power_log_likelihood(col, c, method);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = power_log_likelihood(col, d, method);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// Per-feature maximum-likelihood lambda.
inline PowerTransformParams fit_power_transform(const OmicsMatrix& x, PowerMethod method) {
    if (x.has_missing()) throw ArgumentError("fit_power_transform: input has missing cells");
    PowerTransformParams params{method, std::vector<double>(x.features())};
    for (std::size_t j = 0; j < x.features(); ++j) {
        const std::vector<double> col = x.values.col(j);
        if (method == PowerMethod::box_cox) {
            for (double v : col)
                if (!(v > 0.0))
                    throw DomainError("fit_power_transform: Box-Cox needs positive values, feature " +
                                      x.feature_ids[j] + " has " + std::to_string(v));
        }
        params.lambdas[j] = detail::fit_lambda(col, method);
    }
    return params;
}

inline OmicsMatrix apply_power_transform(const OmicsMatrix& x, const PowerTransformParams& params) {
    if (params.lambdas.size() != x.features())
        throw ArgumentError("apply_power_transform: " + std::to_string(params.lambdas.size()) +
                            " lambdas for " + std::to_string(x.features()) + " features");
    OmicsMatrix out = x;
    for (std::size_t i = 0; i < x.samples(); ++i) {
        for (std::size_t j = 0; j < x.features(); ++j) {
            const double v = x.values(i, j);
            out.values(i, j) = params.method == PowerMethod::box_cox ? box_cox(v, params.lambdas[j])
                                                                     : yeo_johnson(v, params.lambdas[j]);
            if (!std::isfinite(out.values(i, j)))
                throw NumericalError("apply_power_transform: non-finite result for feature " +
                                     x.feature_ids[j]);
        }
    }
    return out;
}

}  // namespace lidaf
