#include <gtest/gtest.h>

#include <algorithm>

#include "lidaf/preprocess.hpp"
#include "lidaf/synthgen.hpp"

using lidaf::SynthSpec;

namespace {

bool same_data(const lidaf::SynthDataset& a, const lidaf::SynthDataset& b) {
    if (a.truth.labels != b.truth.labels) return false;
    for (int m = 0; m < 3; ++m) {
        const auto& x = a.omics[m];
        const auto& y = b.omics[m];
        if (x.missing != y.missing || x.feature_ids != y.feature_ids || x.sample_ids != y.sample_ids) return false;
        for (std::size_t i = 0; i < x.samples(); ++i)
            for (std::size_t j = 0; j < x.features(); ++j)
                if (x.values(i, j) != y.values(i, j)) return false;
    }
    for (std::size_t i = 0; i < a.survival.size(); ++i)
        if (a.survival[i].time != b.survival[i].time || a.survival[i].event != b.survival[i].event) return false;
    return true;
}

}  // namespace

TEST(Synthgen, BitIdenticalForOneSeed) {
    SynthSpec s;
    s.seed = 42;
    EXPECT_TRUE(same_data(lidaf::generate(s), lidaf::generate(s)));
    SynthSpec t = s;
    t.seed = 43;
    EXPECT_FALSE(same_data(lidaf::generate(s), lidaf::generate(t)));
}

TEST(Synthgen, ShapesAndBalancedClusters) {
    SynthSpec s;
    s.n = 152;
    s.k = 4;
    const auto d = lidaf::generate(s);
    ASSERT_EQ(d.omics.size(), 3u);
    EXPECT_EQ(d.omics[0].kind, lidaf::OmicsKind::gene_expression);
    EXPECT_EQ(d.omics[1].kind, lidaf::OmicsKind::mirna);
    EXPECT_EQ(d.omics[2].kind, lidaf::OmicsKind::methylation);
    for (int m = 0; m < 3; ++m) {
        EXPECT_EQ(d.omics[m].samples(), s.n);
        EXPECT_EQ(d.omics[m].features(), s.dims[m]);
        EXPECT_NO_THROW(d.omics[m].validate());
        EXPECT_EQ(d.omics[m].sample_ids, d.omics[0].sample_ids);
    }
    std::vector<std::size_t> sizes(4, 0);
    for (int l : d.truth.labels) ++sizes[l];
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    EXPECT_LE(*hi - *lo, 1u);
    EXPECT_EQ(d.survival.size(), s.n);
}

TEST(Synthgen, MissingRatesMatchSpec) {
    SynthSpec s;
    s.n = 400;
    s.dims = {100, 100, 100};
    s.seed = 3;
    const auto d = lidaf::generate(s);
    for (int m = 0; m < 3; ++m) {
        const auto& x = d.omics[m];
        const auto& heavy = d.high_missing_features[m];
        EXPECT_EQ(heavy.size(), 10u);
        double light_missing = 0, light_cells = 0, heavy_missing = 0, heavy_cells = 0;
        for (std::size_t j = 0; j < x.features(); ++j) {
            const bool h = std::find(heavy.begin(), heavy.end(), j) != heavy.end();
            for (std::size_t i = 0; i < x.samples(); ++i) {
                (h ? heavy_cells : light_cells) += 1;
                if (x.is_missing(i, j)) {
                    (h ? heavy_missing : light_missing) += 1;
                    EXPECT_EQ(x.values(i, j), 0.0);
                }
            }
        }
        EXPECT_NEAR(light_missing / light_cells, s.missing_rate, 0.01);
        EXPECT_NEAR(heavy_missing / heavy_cells, s.high_missing_rate, 0.03);
    }
}

TEST(Synthgen, SparsityFilterRemovesExactlyTheHeavyFeatures) {
    SynthSpec s;
    s.seed = 5;
    const auto d = lidaf::generate(s);
    for (int m = 0; m < 3; ++m) {
        const auto f = lidaf::filter_sparse_features(d.omics[m], 0.2);
        std::vector<std::size_t> removed;
        for (std::size_t j = 0; j < d.omics[m].features(); ++j)
            if (std::find(f.kept.begin(), f.kept.end(), j) == f.kept.end()) removed.push_back(j);
        EXPECT_EQ(removed, d.high_missing_features[m]);
    }
}

TEST(Synthgen, SignalLivesOnlyInInformativeFeatures) {
    SynthSpec s;
    s.n = 300;
    s.seed = 9;
    const auto d = lidaf::generate(s);
    for (int m = 0; m < 3; ++m) {
        const auto& x = d.omics[m];
        const auto& noise = d.noise_features[m];
        EXPECT_EQ(noise.size(), static_cast<std::size_t>(std::llround(0.2 * s.dims[m])));
        for (std::size_t j = 0; j < x.features(); ++j) {
            std::vector<double> sum(s.k, 0.0), cnt(s.k, 0.0);
            for (std::size_t i = 0; i < x.samples(); ++i)
                if (!x.is_missing(i, j)) {
                    sum[d.truth.labels[i]] += x.values(i, j);
                    cnt[d.truth.labels[i]] += 1;
                }
            double lo = 1e300, hi = -1e300;
            for (std::size_t c = 0; c < s.k; ++c) {
                lo = std::min(lo, sum[c] / cnt[c]);
                hi = std::max(hi, sum[c] / cnt[c]);
            }
            const bool is_noise = std::find(noise.begin(), noise.end(), j) != noise.end();
            // Group means of 100 unit-variance draws sit within about 0.1 of truth.
            if (is_noise)
                EXPECT_LT(hi - lo, 1.0) << "omics " << m << " feature " << j;
            else
                EXPECT_NEAR(hi - lo, s.separation * (s.k - 1), 1.0) << "omics " << m << " feature " << j;
        }
    }
}

TEST(Synthgen, HazardOrdersClusterSurvival) {
    SynthSpec s;
    s.n = 900;
    s.censoring_fraction = 0.0;
    s.seed = 11;
    const auto d = lidaf::generate(s);
    std::vector<double> sum(3, 0.0), cnt(3, 0.0);
    for (std::size_t i = 0; i < s.n; ++i) {
        EXPECT_TRUE(d.survival[i].event);
        sum[d.truth.labels[i]] += d.survival[i].time;
        cnt[d.truth.labels[i]] += 1;
    }
    // Mean exponential time is 1 / hazard: 10, 10 / sqrt(3), 10 / 3.
    EXPECT_NEAR(sum[0] / cnt[0], 10.0, 1.5);
    EXPECT_NEAR(sum[1] / cnt[1], 10.0 / std::sqrt(3.0), 0.9);
    EXPECT_NEAR(sum[2] / cnt[2], 10.0 / 3.0, 0.5);
}

TEST(Synthgen, CensoringShareAndTimesPositive) {
    SynthSpec s;
    s.n = 2000;
    s.seed = 12;
    const auto d = lidaf::generate(s);
    double censored = 0;
    for (const auto& r : d.survival) {
        EXPECT_GT(r.time, 0.0);
        censored += !r.event;
    }
    EXPECT_NEAR(censored / s.n, s.censoring_fraction, 0.03);
}

TEST(Synthgen, RejectsBadSpecs) {
    SynthSpec s;
    s.k = 0;
    EXPECT_THROW(lidaf::generate(s), lidaf::ArgumentError);
    s = SynthSpec{};
    s.n = 2;
    EXPECT_THROW(lidaf::generate(s), lidaf::ArgumentError);
    s = SynthSpec{};
    s.missing_rate = 1.5;
    EXPECT_THROW(lidaf::generate(s), lidaf::ArgumentError);
    s = SynthSpec{};
    s.hazard_ratio = 0.5;
    EXPECT_THROW(lidaf::generate(s), lidaf::ArgumentError);
    s = SynthSpec{};
    s.dims[1] = 0;
    EXPECT_THROW(lidaf::generate(s), lidaf::ArgumentError);
}
