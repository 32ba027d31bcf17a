#pragma once

// Synthetic three-omics cohorts with planted clusters, missing cells and
// cluster-dependent exponential survival. Every draw comes from one Rng
// seeded by the spec, in a fixed order, so a spec reproduces bit-identical data.

#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "lidaf/clustering.hpp"
#include "lidaf/error.hpp"
#include "lidaf/omics.hpp"
#include "lidaf/rng.hpp"
#include "lidaf/survival.hpp"

namespace lidaf {

struct SynthSpec {
    std::size_t n = 150;
    std::size_t k = 3;
    std::array<std::size_t, 3> dims{60, 40, 50};
    double separation = 8.0;             // gap between adjacent cluster means, in within-cluster sd
    double noise_features_fraction = 0.2;
    double missing_rate = 0.05;          // completely at random, every cell
    double high_missing_fraction = 0.1;  // share of features given heavy missingness
    double high_missing_rate = 0.5;
    double hazard_ratio = 3.0;           // highest over lowest cluster hazard
    double base_hazard = 0.1;
    double censoring_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 1 || n < k) throw ArgumentError("SynthSpec: need n >= k >= 1");
        for (auto d : dims)
            if (d < 1) throw ArgumentError("SynthSpec: every omics needs at least one feature");
        if (!(separation >= 0.0)) throw ArgumentError("SynthSpec: separation must be >= 0");
        for (double f : {noise_features_fraction, missing_rate, high_missing_fraction, high_missing_rate,
                         censoring_fraction})
            if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError("SynthSpec: fractions must lie in [0, 1]");
        if (!(hazard_ratio >= 1.0)) throw ArgumentError("SynthSpec: hazard_ratio must be >= 1");
        if (!(base_hazard > 0.0)) throw ArgumentError("SynthSpec: base_hazard must be positive");
    }
};

struct SynthDataset {
    std::vector<OmicsMatrix> omics;  // gene expression, miRNA, methylation
    Partition truth;
    std::vector<SurvivalRecord> survival;
    std::vector<std::vector<std::size_t>> noise_features;        // per omics
    std::vector<std::vector<std::size_t>> high_missing_features;  // per omics
};

inline SynthDataset generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SynthDataset out;

    // Balanced labels in shuffled sample order.
    std::vector<int> labels(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) labels[i] = static_cast<int>(i % spec.k);
    rng.shuffle(std::span<int>(labels));
    out.truth.labels = labels;
    out.truth.k = static_cast<int>(spec.k);

    std::vector<std::string> ids(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "sample_%04zu", i + 1);
        ids[i] = buf;
    }

    out.noise_features.resize(3);
    out.high_missing_features.resize(3);
    const OmicsKind kinds[3] = {OmicsKind::gene_expression, OmicsKind::mirna, OmicsKind::methylation};
    const char* prefixes[3] = {"gene_", "mir_", "cpg_"};
    for (int m = 0; m < 3; ++m) {
        const std::size_t p = spec.dims[m];
        std::vector<std::size_t> order(p);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        const auto noise_count = static_cast<std::size_t>(std::llround(spec.noise_features_fraction * p));
        std::vector<bool> is_noise(p, false);
        for (std::size_t t = 0; t < noise_count; ++t) is_noise[order[t]] = true;

        rng.shuffle(std::span<std::size_t>(order));
        const auto heavy_count = static_cast<std::size_t>(std::llround(spec.high_missing_fraction * p));
        std::vector<bool> is_heavy(p, false);
        for (std::size_t t = 0; t < heavy_count; ++t) is_heavy[order[t]] = true;

        OmicsMatrix x;
        x.kind = kinds[m];
        x.sample_ids = ids;
        x.values = Matrix(spec.n, p);
        x.missing.assign(spec.n * p, 0);
        for (std::size_t j = 0; j < p; ++j) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s%04zu", prefixes[m], j + 1);
            x.feature_ids.push_back(buf);

            // Cluster means separation * (c - (k - 1) / 2), assigned to clusters
            // in a per-feature random order.
            std::vector<double> means(spec.k, 0.0);
            if (!is_noise[j]) {
                for (std::size_t c = 0; c < spec.k; ++c)
                    means[c] = spec.separation * (static_cast<double>(c) - 0.5 * static_cast<double>(spec.k - 1));
                rng.shuffle(std::span<double>(means));
            }
            const double rate = is_heavy[j] ? spec.high_missing_rate : spec.missing_rate;
            for (std::size_t i = 0; i < spec.n; ++i) {
                x.values(i, j) = means[labels[i]] + rng.normal();
                if (rng.uniform() < rate) {
                    x.missing[i * p + j] = 1;
                    x.values(i, j) = 0.0;
                }
            }
            if (is_noise[j]) out.noise_features[m].push_back(j);
            if (is_heavy[j]) out.high_missing_features[m].push_back(j);
        }
        out.omics.push_back(std::move(x));
    }

    // Cluster c has hazard base * ratio^(c / (k - 1)).
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double frac = spec.k > 1 ? static_cast<double>(labels[i]) / static_cast<double>(spec.k - 1) : 0.0;
        const double hazard = spec.base_hazard * std::pow(spec.hazard_ratio, frac);
        double t = rng.exponential(hazard);
        bool event = true;
        if (rng.uniform() < spec.censoring_fraction) {
            t *= std::max(rng.uniform(), 1e-3);
            event = false;
        }
        out.survival.push_back({std::max(t, 1e-9), event});
    }
    return out;
}

}  // namespace lidaf
