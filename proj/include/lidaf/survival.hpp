#pragma once

// k-group log-rank test. Ties at an event time are handled by counting every
// subject at risk at that time once (the usual hypergeometric treatment).

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lidaf/clustering.hpp"
#include "lidaf/error.hpp"
#include "lidaf/numkernel.hpp"

namespace lidaf {

inline constexpr double kSignificanceThreshold = 1.30;  // -log10(0.05)

struct SurvivalRecord {
    double time = 0.0;
    bool event = false;  // true = death observed, false = censored
};

struct SurvivalReport {
    double chi2 = 0.0;
    std::size_t df = 0;
    double p = 1.0;
    double neg_log10_p = 0.0;
    bool significant = false;
    std::vector<int> groups;  // label of each row below
    std::vector<double> observed;
    std::vector<double> expected;
    std::vector<std::size_t> sizes;
};

inline SurvivalReport logrank_test(std::span<const int> labels, std::span<const SurvivalRecord> records) {
    const std::size_t n = labels.size();
    if (records.size() != n)
        throw ArgumentError("logrank_test: " + std::to_string(n) + " labels for " + std::to_string(records.size()) +
                            " survival records");
    for (std::size_t i = 0; i < n; ++i)
        if (!(records[i].time > 0.0) || !std::isfinite(records[i].time))
            throw ArgumentError("logrank_test: record " + std::to_string(i) + " has non-positive or non-finite time");

    std::map<int, std::size_t> group_index;
    for (int l : labels) group_index.try_emplace(l, 0);
    const std::size_t k = group_index.size();
    if (k < 2) throw ArgumentError("logrank_test: need at least 2 groups, got " + std::to_string(k));
    {
        std::size_t g = 0;
        for (auto& [label, idx] : group_index) idx = g++;
    }
    std::vector<std::size_t> group(n);
    for (std::size_t i = 0; i < n; ++i) group[i] = group_index.at(labels[i]);

    std::size_t events = 0;
    for (const auto& r : records) events += r.event;
    if (events == 0) throw DegenerateInputError("logrank_test: no observed events");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].time < records[b].time; });

    std::vector<double> at_risk(k, 0.0), observed(k, 0.0), expected(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) at_risk[group[i]] += 1.0;
    SurvivalReport rep;
    rep.sizes.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++rep.sizes[group[i]];

    Matrix v(k, k, 0.0);
    std::vector<double> deaths(k), leaving(k);
    for (std::size_t pos = 0; pos < n;) {
        const double t = records[order[pos]].time;
        std::fill(deaths.begin(), deaths.end(), 0.0);
        std::fill(leaving.begin(), leaving.end(), 0.0);
        std::size_t end = pos;
        for (; end < n && records[order[end]].time == t; ++end) {
            const std::size_t g = group[order[end]];
            leaving[g] += 1.0;
            if (records[order[end]].event) deaths[g] += 1.0;
        }
        const double total = std::accumulate(at_risk.begin(), at_risk.end(), 0.0);
        const double d = std::accumulate(deaths.begin(), deaths.end(), 0.0);
        if (d > 0.0) {
            for (std::size_t g = 0; g < k; ++g) {
                observed[g] += deaths[g];
                expected[g] += d * at_risk[g] / total;
            }
            if (total > 1.0) {
                const double w = d * (total - d) / (total - 1.0);
                for (std::size_t g = 0; g < k; ++g)
                    for (std::size_t h = 0; h < k; ++h)
                        v(g, h) += w * at_risk[g] / total * ((g == h ? 1.0 : 0.0) - at_risk[h] / total);
            }
        }
        for (std::size_t g = 0; g < k; ++g) at_risk[g] -= leaving[g];
        pos = end;
    }

    // Quadratic form over the first k - 1 groups; a pseudo-inverse guards
    // against groups that never share a risk set with an event.
    const std::size_t m = k - 1;
    Matrix vm(m, m);
    std::vector<double> diff(m);
    for (std::size_t g = 0; g < m; ++g) {
        diff[g] = observed[g] - expected[g];
        for (std::size_t h = 0; h < m; ++h) vm(g, h) = v(g, h);
    }
    const auto eig = sym_eig(vm, m, EigenOrder::largest);
    const double top = std::max(eig.values.front(), 0.0);
    double chi2 = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        if (!(eig.values[c] > 1e-12 * top) || top == 0.0) continue;
        double proj = 0.0;
        for (std::size_t g = 0; g < m; ++g) proj += eig.vectors(g, c) * diff[g];
        chi2 += proj * proj / eig.values[c];
    }

    rep.chi2 = std::max(chi2, 0.0);
    rep.df = m;
    rep.p = chi_square_sf(rep.chi2, rep.df);
    rep.neg_log10_p = -std::log10(std::max(rep.p, 1e-300));
    rep.significant = rep.neg_log10_p >= kSignificanceThreshold;
    for (const auto& [label, idx] : group_index) rep.groups.push_back(label);
    rep.observed = observed;
    rep.expected = expected;
    return rep;
}

inline SurvivalReport logrank_test(const Partition& labels, std::span<const SurvivalRecord> records) {
    return logrank_test(std::span<const int>(labels.labels), records);
}

}  // namespace lidaf
