#include <gtest/gtest.h>

#include "lidaf/pipeline.hpp"
#include "lidaf/synthgen.hpp"

using lidaf::PipelineConfig;
using lidaf::SynthSpec;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
    SynthSpec s;
    s.n = 60;
    s.dims = {20, 15, 18};
    s.seed = seed;
    return s;
}

PipelineConfig small_config() {
    PipelineConfig c;
    c.cluster_counts = {2, 3};
    c.eval_cluster_count = 3;
    c.stage3_hi = 30;
    return c;
}

}  // namespace

TEST(Pipeline, RecoversPlantedClustersAndReportsEveryStage) {
    const auto d = lidaf::generate(small_spec(1));
    const auto cfg = small_config();
    const auto r = lidaf::run_pipeline(d.omics, cfg, d.survival, d.truth);

    EXPECT_EQ(*r.config.impute_k, 8u);
    EXPECT_EQ(*r.config.k1, 8u);
    EXPECT_EQ(*r.config.stage2_hi, 62u);
    ASSERT_EQ(r.prep.size(), 3u);
    for (int m = 0; m < 3; ++m) {
        EXPECT_EQ(r.prep[m].sparse_removed, d.high_missing_features[m].size());
        EXPECT_FALSE(r.prep[m].selected_features.empty());
        std::size_t total = 0;
        for (auto c : r.prep[m].transformed_values.counts) total += c;
        EXPECT_EQ(total, 60 * (small_spec(1).dims[m] - r.prep[m].sparse_removed - r.prep[m].constant_dropped.size()));
    }
    EXPECT_EQ(r.intra.size(), 3u);
    EXPECT_EQ(r.inter.size(), 6u);
    EXPECT_EQ(r.inter_pairs[0].label, "mirna->gene_expression");

    // Two and three clusters share the three-eigenvector fusion.
    ASSERT_EQ(r.fusion.size(), 1u);
    EXPECT_EQ(r.fusion.begin()->first, 3u);
    const auto& fr = r.fusion.at(3);
    EXPECT_EQ(fr.stage2.rr.rr_values.size(), 57u);  // [2, n + 2] clamped to [2, n - 2]
    EXPECT_EQ(fr.candidates.size(), 29u);

    ASSERT_EQ(r.runs.size(), 2u);
    EXPECT_EQ(r.runs[0].k, 2u);
    EXPECT_EQ(r.runs[0].labels.k, 2);
    EXPECT_EQ(r.runs[1].labels.k, 3);
    for (const auto& run : r.runs) {
        ASSERT_TRUE(run.survival.has_value()) << run.survival_error;
        EXPECT_EQ(run.survival->df, run.k - 1);
    }

    ASSERT_TRUE(r.evaluation.has_value());
    EXPECT_GE(r.evaluation->ari, 0.9);
    EXPECT_GE(r.evaluation->nmi, 0.8);
    ASSERT_EQ(r.evaluation->sweep.size(), fr.candidates.size());
    for (std::size_t i = 0; i < fr.candidates.size(); ++i) EXPECT_EQ(r.evaluation->sweep[i].k2, i + 2);
    EXPECT_EQ(r.evaluation->run.final_k2, fr.candidates[r.evaluation->run.final_index].k2);
}

TEST(Pipeline, Deterministic) {
    const auto d = lidaf::generate(small_spec(2));
    auto cfg = small_config();
    cfg.cluster_counts = {3};
    cfg.stage3_hi = 10;
    const auto a = lidaf::run_pipeline(d.omics, cfg, d.survival, d.truth);
    const auto b = lidaf::run_pipeline(d.omics, cfg, d.survival, d.truth);
    EXPECT_EQ(a.runs[0].labels.labels, b.runs[0].labels.labels);
    EXPECT_EQ(a.fusion.at(3).candidates[3].state->s.values().size(),
              b.fusion.at(3).candidates[3].state->s.values().size());
    const auto sa = a.fusion.at(3).candidates[3].state->s.values();
    const auto sb = b.fusion.at(3).candidates[3].state->s.values();
    EXPECT_TRUE(std::equal(sa.begin(), sa.end(), sb.begin()));
    EXPECT_EQ(a.runs[0].survival->chi2, b.runs[0].survival->chi2);
}

TEST(Pipeline, NoSignalGivesChanceAgreement) {
    auto s = small_spec(3);
    s.separation = 0.0;
    const auto d = lidaf::generate(s);
    auto cfg = small_config();
    cfg.cluster_counts = {3};
    const auto r = lidaf::run_pipeline(d.omics, cfg, {}, d.truth);
    EXPECT_LE(std::abs(r.evaluation->ari), 0.2);
    for (const auto& row : r.evaluation->sweep) {
        ASSERT_TRUE(row.ari.has_value()) << row.error;
        EXPECT_LE(std::abs(*row.ari), 0.2) << "k2 = " << row.k2;
        EXPECT_LE(*row.nmi, 0.2) << "k2 = " << row.k2;
    }
}

TEST(Pipeline, SpectralFactorSwitch) {
    const auto d = lidaf::generate(small_spec(4));
    auto cfg = small_config();
    cfg.cluster_counts = {3};
    cfg.stage3_hi = 10;
    cfg.cluster_space = lidaf::ClusterSpace::spectral_factor;
    const auto r = lidaf::run_pipeline(d.omics, cfg, {}, d.truth);
    EXPECT_GE(r.evaluation->ari, 0.9);
    EXPECT_EQ(lidaf::cluster_space_from_string("spectral_factor"), lidaf::ClusterSpace::spectral_factor);
    EXPECT_THROW(lidaf::cluster_space_from_string("rows"), lidaf::ArgumentError);
}

TEST(Pipeline, InputErrors) {
    const auto d = lidaf::generate(small_spec(5));
    const auto cfg = small_config();
    auto shifted = d.omics;
    std::swap(shifted[2].sample_ids[0], shifted[2].sample_ids[1]);
    EXPECT_THROW(lidaf::run_pipeline(shifted, cfg), lidaf::AlignmentError);

    std::vector<lidaf::SurvivalRecord> short_survival(d.survival.begin(), d.survival.end() - 1);
    EXPECT_THROW(lidaf::run_pipeline(d.omics, cfg, short_survival), lidaf::AlignmentError);

    std::vector<lidaf::OmicsMatrix> two(d.omics.begin(), d.omics.begin() + 2);
    EXPECT_THROW(lidaf::run_pipeline(two, cfg), lidaf::ArgumentError);

    auto bad = cfg;
    bad.cluster_counts = {1};
    EXPECT_THROW(lidaf::run_pipeline(d.omics, bad), lidaf::ArgumentError);
    bad = cfg;
    bad.zero_fraction_threshold = 1.0;
    EXPECT_THROW(lidaf::run_pipeline(d.omics, bad), lidaf::ArgumentError);
}

TEST(Pipeline, StageFailuresCarryTheStageName) {
    auto d = lidaf::generate(small_spec(6));
    for (std::size_t i = 0; i < d.omics[1].samples(); ++i)
        for (std::size_t j = 0; j < d.omics[1].features(); ++j) d.omics[1].values(i, j) = 0.0;
    try {
        lidaf::run_pipeline(d.omics, small_config());
        FAIL() << "expected a degenerate-input error";
    } catch (const lidaf::DegenerateInputError& e) {
        EXPECT_NE(std::string(e.what()).find("preprocess mirna"), std::string::npos) << e.what();
    }
}

TEST(Histogram, CountsEveryValue) {
    const std::vector<double> v{0.0, 0.5, 1.0, 1.0, 2.0};
    const auto h = lidaf::histogram(v, 4);
    EXPECT_EQ(h.lo, 0.0);
    EXPECT_EQ(h.hi, 2.0);
    EXPECT_EQ(h.counts, (std::vector<std::size_t>{1, 1, 2, 1}));
    const auto flat = lidaf::histogram(std::vector<double>{3.0, 3.0}, 3);
    EXPECT_EQ(flat.counts, (std::vector<std::size_t>{2, 0, 0}));
}
