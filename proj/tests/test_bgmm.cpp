#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "lidaf/bgmm.hpp"

using lidaf::Matrix;
using lidaf::OmicsMatrix;

namespace {

Matrix blobs(const std::vector<std::vector<double>>& centers, std::size_t per, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const std::size_t p = centers[0].size();
    Matrix x(centers.size() * per, p);
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (std::size_t i = 0; i < per; ++i)
            for (std::size_t d = 0; d < p; ++d) x(c * per + i, d) = centers[c][d] + nd(rng);
    return x;
}

void expect_nondecreasing(const std::vector<double>& trace) {
    for (std::size_t t = 1; t < trace.size(); ++t) EXPECT_GE(trace[t], trace[t - 1] - 1e-8) << "step " << t;
}

}  // namespace

TEST(Bgmm, SingleBlobHasOneEffectiveComponent) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Matrix x = blobs({{0, 0, 0}}, 200, seed);
        auto model = lidaf::fit_bayesian_gmm(x);
        EXPECT_EQ(model.effective_components, 1u) << "seed " << seed;
        expect_nondecreasing(model.elbo_trace);
    }
}

TEST(Bgmm, TwoSeparatedBlobs) {
    const Matrix x = blobs({{0, 0}, {10, 0}}, 100, 42);
    auto model = lidaf::fit_bayesian_gmm(x);
    EXPECT_EQ(model.effective_components, 2u);
    expect_nondecreasing(model.elbo_trace);

    // Map each live component to the blob holding most of its mass.
    std::map<std::size_t, std::size_t> owner;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        if (model.weights[k] < 1e-3) continue;
        double mass[2] = {0, 0};
        for (std::size_t i = 0; i < x.rows(); ++i) mass[i / 100] += model.responsibilities(i, k);
        owner[k] = mass[1] > mass[0] ? 1 : 0;
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double own = 0.0;
        for (auto [k, blob] : owner)
            if (blob == i / 100) own += model.responsibilities(i, k);
        EXPECT_GE(own, 0.99) << "sample " << i;
    }
}

TEST(Bgmm, WeightsOnSimplexAndVariancesFloored) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> ud(12, 60);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = ud(rng);
        Matrix x = blobs({{0, 0, 0, 0}}, n, 100 + t);
        for (std::size_t i = 0; i < n; ++i) x(i, 3) = 1.0;  // constant column
        lidaf::BgmmOptions opt;
        opt.seed = t;
        auto model = lidaf::fit_bayesian_gmm(x, opt);
        double s = 0.0;
        for (double w : model.weights) {
            EXPECT_GE(w, 0.0);
            s += w;
        }
        EXPECT_NEAR(s, 1.0, 1e-10);
        for (double v : model.diag_variances.values()) EXPECT_GE(v, 1e-6);
        expect_nondecreasing(model.elbo_trace);
    }
}

TEST(Bgmm, ResponsibilitiesAreDistributions) {
    const Matrix x = blobs({{0, 0}, {4, 4}, {-4, 4}}, 40, 6);
    auto model = lidaf::fit_bayesian_gmm(x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < model.weights.size(); ++k) s += model.responsibilities(i, k);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    EXPECT_EQ(model.effective_components, 3u);
}

TEST(Bgmm, DeterministicForSeed) {
    const Matrix x = blobs({{0, 0}, {5, 0}}, 50, 17);
    auto a = lidaf::fit_bayesian_gmm(x);
    auto b = lidaf::fit_bayesian_gmm(x);
    EXPECT_EQ(a.means, b.means);
    EXPECT_EQ(a.elbo_trace, b.elbo_trace);
}

TEST(Bgmm, FewerSamplesThanComponentsThrows) {
    EXPECT_THROW(lidaf::fit_bayesian_gmm(Matrix(5, 2, 1.0)), lidaf::ArgumentError);
    auto m = OmicsMatrix::from_values(Matrix(20, 2, 1.0));
    m.missing[0] = 1;
    EXPECT_THROW(lidaf::fit_bayesian_gmm(m), lidaf::ArgumentError);
}

TEST(Digamma, KnownValues) {
    EXPECT_NEAR(lidaf::detail::digamma(1.0), -0.57721566490153286, 1e-13);
    EXPECT_NEAR(lidaf::detail::digamma(0.5), -0.57721566490153286 - 2.0 * std::log(2.0), 1e-13);
    for (double x : {0.01, 0.3, 2.7, 11.0, 150.0})
        EXPECT_NEAR(lidaf::detail::digamma(x + 1.0) - lidaf::detail::digamma(x), 1.0 / x, 1e-12);
}

TEST(SelectFeatures, FullTargetKeepsEverything) {
    auto m = OmicsMatrix::from_values(blobs({{0, 0, 0, 0, 0}}, 40, 4));
    auto sel = lidaf::select_features_bgmm(m, 1.0);
    EXPECT_EQ(sel.selected.size(), 5u);
    EXPECT_EQ(sel.matrix.feature_ids, m.feature_ids);
}

TEST(SelectFeatures, PlantedInformativeFeaturesRankFirst) {
    std::vector<double> a(10, 0.0), b(10, 0.0);
    b[3] = 10.0;
    b[7] = 10.0;
    auto m = OmicsMatrix::from_values(blobs({a, b}, 60, 12));
    auto sel = lidaf::select_features_bgmm(m);
    std::vector<std::size_t> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return sel.relevance[x] > sel.relevance[y]; });
    std::vector<std::size_t> top{order[0], order[1]};
    std::sort(top.begin(), top.end());
    EXPECT_EQ(top, (std::vector<std::size_t>{3, 7}));
    for (double r : sel.relevance) EXPECT_GE(r, 0.0);
    EXPECT_EQ(sel.selected, (std::vector<std::size_t>{3, 7}));
}

TEST(SelectFeatures, SubsetInOriginalOrder) {
    std::mt19937_64 rng(30);
    std::normal_distribution<double> nd;
    Matrix x(60, 12);
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t j = 0; j < 12; ++j) x(i, j) = nd(rng) * (1.0 + j % 4) + (i < 30 ? 0.0 : 3.0 * (j % 3));
    auto m = OmicsMatrix::from_values(x);
    for (double target : {0.3, 0.6, 0.95}) {
        auto sel = lidaf::select_features_bgmm(m, target);
        ASSERT_FALSE(sel.selected.empty());
        EXPECT_TRUE(std::is_sorted(sel.selected.begin(), sel.selected.end()));
        double total = 0.0, kept = 0.0;
        for (double r : sel.relevance) total += r;
        for (auto j : sel.selected) kept += sel.relevance[j];
        EXPECT_GE(kept, target * total * (1 - 1e-12));
        for (std::size_t c = 0; c < sel.selected.size(); ++c)
            EXPECT_EQ(sel.matrix.feature_ids[c], m.feature_ids[sel.selected[c]]);
    }
    EXPECT_THROW(lidaf::select_features_bgmm(m, 0.0), lidaf::ArgumentError);
    EXPECT_THROW(lidaf::select_features_bgmm(m, 1.5), lidaf::ArgumentError);
}
