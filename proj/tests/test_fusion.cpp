#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lidaf/clustering.hpp"
#include "lidaf/fusion.hpp"
#include "oracles.hpp"

using lidaf::AffinityMatrix;
using lidaf::DistanceMatrix;
using lidaf::FusionConfig;
using lidaf::FusionState;
using lidaf::Matrix;

namespace {

std::vector<int> block_labels(std::size_t n, std::size_t blocks) {
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i * blocks / n);
    return y;
}

// Planted blocks with affinity `within` inside and `between` across, jittered.
AffinityMatrix planted_affinity(const std::vector<int>& y, double within, double between, double jitter,
                                std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-jitter, jitter);
    const std::size_t n = y.size();
    AffinityMatrix a{Matrix(n, n, 1.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = std::clamp((y[i] == y[j] ? within : between) + u(rng), 1e-6, 1.0);
            a.values(i, j) = v;
            a.values(j, i) = v;
        }
    return a;
}

AffinityMatrix noisy_points_affinity(const std::vector<int>& y, double sep, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Matrix x(y.size(), 3);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t d = 0; d < 3; ++d) x(i, d) = nd(rng) + (d == static_cast<std::size_t>(y[i] % 3) ? sep : 0.0);
    return lidaf::affinity_from_distance(lidaf::euclidean_distance_matrix(x));
}

DistanceMatrix random_distance(std::size_t n, std::mt19937_64& rng) {
    return lidaf::euclidean_distance_matrix(oracle::random_matrix(n, 3, rng));
}

// Soundness checks shared by every fusion run in this file.
void expect_sound(std::span<const AffinityMatrix> affs, const FusionState& st, const FusionConfig& cfg) {
    for (std::size_t t = 1; t < st.objective_trace.size(); ++t)
        EXPECT_LE(st.objective_trace[t], st.objective_trace[t - 1] + 1e-9) << "step " << t;
    double asum = 0.0;
    for (double a : st.alpha) {
        EXPECT_GE(a, 0.0);
        asum += a;
    }
    EXPECT_NEAR(asum, 1.0, 1e-12);
    for (std::size_t j = 0; j < st.s.rows(); ++j) {
        double rs = 0.0;
        for (std::size_t m = 0; m < st.s.cols(); ++m) {
            EXPECT_GE(st.s(j, m), -1e-10);
            rs += st.s(j, m);
        }
        EXPECT_NEAR(rs, 1.0, 1e-10);
        EXPECT_EQ(st.s(j, j), 0.0);
    }
    const Matrix g = st.f.transpose() * st.f;
    for (std::size_t a = 0; a < g.rows(); ++a)
        for (std::size_t b = 0; b < g.cols(); ++b) EXPECT_NEAR(g(a, b), a == b ? 1.0 : 0.0, 1e-8);

    // alpha is the softmax of -e_l / gamma at the final S, recomputed here.
    std::vector<double> e(affs.size());
    double mx = -1e300;
    for (std::size_t l = 0; l < affs.size(); ++l) {
        double inner = 0.0, sq = 0.0;
        for (std::size_t k = 0; k < st.s.values().size(); ++k) {
            inner += affs[l].values.values()[k] * st.s.values()[k];
            sq += affs[l].values.values()[k] * affs[l].values.values()[k];
        }
        e[l] = (inner - 0.5 * sq) / cfg.gamma;
        mx = std::max(mx, e[l]);
    }
    double z = 0.0;
    for (double v : e) z += std::exp(v - mx);
    for (std::size_t l = 0; l < affs.size(); ++l) EXPECT_NEAR(st.alpha[l], std::exp(e[l] - mx) / z, 1e-10);

    // F spans eigenvectors of I - S_sym.
    const std::size_t n = st.s.rows();
    Matrix lap = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lap(i, j) -= 0.5 * (st.s(i, j) + st.s(j, i));
    const Matrix lf = lap * st.f;
    const Matrix lambda = st.f.transpose() * lf;
    const Matrix resid = lf - st.f * lambda;
    EXPECT_LE(resid.frobenius_norm(), 1e-6);
}

}  // namespace

TEST(Gamma, SortedRowsOneTwoGiveThree) {
    // A 4-cycle with sides 1 and 2 and diagonals 5: every sorted row starts
    // (1, 2), so with k2 = 1 each row contributes 2^2 - 1^2.
    DistanceMatrix d{Matrix{{0, 1, 5, 2}, {1, 0, 2, 5}, {5, 2, 0, 1}, {2, 5, 1, 0}}};
    EXPECT_EQ(lidaf::gamma_from_neighbors(d, 1), 3.0);
}

TEST(Gamma, UniformMetricAndRange) {
    DistanceMatrix u{Matrix(5, 5, 0.7)};
    for (std::size_t i = 0; i < 5; ++i) u.values(i, i) = 0.0;
    EXPECT_EQ(lidaf::gamma_from_neighbors(u, 2), 0.0);
    EXPECT_THROW(lidaf::gamma_from_neighbors(u, 0), lidaf::ArgumentError);
    EXPECT_THROW(lidaf::gamma_from_neighbors(u, 4), lidaf::ArgumentError);
}

TEST(Gamma, MatchesBruteForceAndGrowsWithK2) {
    std::mt19937_64 rng(1);
    const auto d = random_distance(15, rng);
    double prev = -1.0;
    for (std::size_t k2 = 1; k2 <= 13; ++k2) {
        double brute = 0.0;
        for (std::size_t j = 0; j < 15; ++j) {
            std::vector<double> row;
            for (std::size_t m = 0; m < 15; ++m)
                if (m != j) row.push_back(d(j, m));
            std::sort(row.begin(), row.end());
            for (std::size_t m = 0; m < k2; ++m) brute += row[k2] * row[k2] - row[m] * row[m];
        }
        brute /= 15.0;
        const double g = lidaf::gamma_from_neighbors(d, k2);
        EXPECT_NEAR(g, brute, 1e-12);
        EXPECT_GE(g, prev);
        prev = g;
    }
}

TEST(RrSelect, HandRow) {
    // A 5-point metric where row 0 sorts to (1, 2, 4, 8).
    Matrix m(5, 5, 0.0);
    const double row0[4] = {1, 2, 4, 8};
    for (std::size_t j = 1; j < 5; ++j) m(0, j) = m(j, 0) = row0[j - 1];
    for (std::size_t i = 1; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) m(i, j) = m(j, i) = 3.0;
    const DistanceMatrix d{m};
    // Only row 0 is checked by hand; compute the others the same way.
    double expected = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
        auto s = lidaf::sorted_neighbor_distances(d, j);
        expected += (2.0 * s[2] - (s[1] + s[2])) / 2.0;
    }
    expected /= 5.0;
    auto sel = lidaf::rr_select_k2(d, 2, 3);
    EXPECT_NEAR(sel.rr_values[0], expected, 1e-15);
    auto s0 = lidaf::sorted_neighbor_distances(d, 0);
    EXPECT_EQ((2.0 * s0[2] - (s0[1] + s0[2])) / 2.0, 1.0);
}

TEST(RrSelect, UniformMetricPicksRangeMinimum) {
    DistanceMatrix u{Matrix(8, 8, 1.5)};
    for (std::size_t i = 0; i < 8; ++i) u.values(i, i) = 0.0;
    auto sel = lidaf::rr_select_k2(u, 2, 6);
    EXPECT_EQ(sel.k2, 2u);
    for (double v : sel.rr_values) EXPECT_EQ(v, 0.0);
}

TEST(RrSelect, MatchesExhaustiveScan) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        const auto d = random_distance(30, rng);
        auto sel = lidaf::rr_select_k2(d, 2, 28);
        std::size_t best = 0;
        double best_v = -1e300;
        for (std::size_t i = 2; i <= 28; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < 30; ++j) {
                auto s = lidaf::sorted_neighbor_distances(d, j);  // s[0] is the 1st smallest
                double sum = 0.0;
                for (std::size_t l = 2; l <= i + 1; ++l) sum += s[l - 1];
                v += (static_cast<double>(i) * s[i] - sum) / 2.0;
            }
            v /= 30.0;
            EXPECT_NEAR(sel.rr_values[i - 2], v, 1e-12);
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        EXPECT_EQ(sel.k2, best);
    }
    EXPECT_THROW(lidaf::rr_select_k2(random_distance(10, rng), 5, 4), lidaf::ArgumentError);
    EXPECT_THROW(lidaf::rr_select_k2(random_distance(10, rng), 2, 9), lidaf::ArgumentError);
}

TEST(FuseAffinities, SingleViewHasUnitWeight) {
    std::mt19937_64 rng(3);
    const auto y = block_labels(24, 3);
    std::vector<AffinityMatrix> affs{noisy_points_affinity(y, 4.0, rng)};
    FusionConfig cfg{3, 0.5, 0.5, 100, 1e-6, 0};
    auto st = lidaf::fuse_affinities(affs, cfg);
    ASSERT_EQ(st.alpha.size(), 1u);
    EXPECT_EQ(st.alpha[0], 1.0);
    expect_sound(affs, st, cfg);
}

TEST(FuseAffinities, IdenticalViewsShareWeightEqually) {
    std::mt19937_64 rng(4);
    const auto y = block_labels(30, 3);
    const auto a = noisy_points_affinity(y, 4.0, rng);
    std::vector<AffinityMatrix> affs{a, a, a};
    FusionConfig cfg{3, 1.0, 1.0, 100, 1e-6, 0};
    auto st = lidaf::fuse_affinities(affs, cfg);
    for (double w : st.alpha) EXPECT_NEAR(w, 1.0 / 3.0, 1e-9);
    expect_sound(affs, st, cfg);
}

TEST(FuseAffinities, PlantedBlocksRecovered) {
    std::mt19937_64 rng(5);
    const auto y = block_labels(20, 2);
    std::vector<AffinityMatrix> affs{planted_affinity(y, 1.0, 0.0, 0.0, rng),
                                     planted_affinity(y, 1.0, 0.0, 0.0, rng)};
    for (auto& a : affs)
        for (auto& v : a.values.values()) v = std::max(v, 1e-300);
    // A row stays inside its block of 10 when the in-block lead of its
    // update, 1 / (2 gamma) + 1 / 20 from the block eigenvectors, reaches the
    // 1 / 9 a nine-way split needs: gamma <= 8.18.
    FusionConfig cfg{3, 1.0, 1.0, 100, 1e-6, 0};
    auto st = lidaf::fuse_affinities(affs, cfg);
    expect_sound(affs, st, cfg);
    double off = 0.0;
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j)
            if (y[i] != y[j]) off += st.s(i, j);
    EXPECT_LE(off, 1e-6);
    auto p = lidaf::kmeans_pp(st.s, 2, 0);
    EXPECT_EQ(lidaf::ari(p.labels, y), 1.0);
}

TEST(FuseAffinities, SoundOnRandomViews) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 8; ++t) {
        const auto y = block_labels(25, 2 + t % 3);
        std::vector<AffinityMatrix> affs;
        for (int l = 0; l < 1 + t % 4; ++l) affs.push_back(noisy_points_affinity(y, 1.0 + l, rng));
        const auto d = lidaf::fusion_distance(affs);
        const std::size_t k2 = 3 + t;
        const double gamma = lidaf::gamma_from_neighbors(d, k2);
        FusionConfig cfg{lidaf::spectral_count_for(2 + t % 3), gamma, gamma, 100, 1e-6, k2};
        auto st = lidaf::fuse_affinities(affs, cfg);
        expect_sound(affs, st, cfg);
    }
}

TEST(FuseAffinities, ObjectiveTermsMatchDirectEvaluation) {
    std::mt19937_64 rng(7);
    const auto y = block_labels(12, 2);
    std::vector<AffinityMatrix> affs{noisy_points_affinity(y, 2.0, rng), noisy_points_affinity(y, 3.0, rng)};
    FusionConfig cfg{3, 0.8, 0.3, 5, 1e-12, 0};
    auto st = lidaf::fuse_affinities(affs, cfg);
    double j = 0.0;
    for (std::size_t l = 0; l < 2; ++l) {
        double inner = 0.0, sq = 0.0;
        for (std::size_t a = 0; a < 12; ++a)
            for (std::size_t b = 0; b < 12; ++b) {
                inner += affs[l](a, b) * st.s(a, b);
                sq += affs[l](a, b) * affs[l](a, b);
            }
        j += -st.alpha[l] * inner + 0.5 * st.alpha[l] * sq + 0.8 * st.alpha[l] * std::log(st.alpha[l]);
    }
    double ss = 0.0, tr = 0.0;
    for (std::size_t a = 0; a < 12; ++a)
        for (std::size_t b = 0; b < 12; ++b) ss += st.s(a, b) * st.s(a, b);
    // tr(F^T (I - S) F) column by column.
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t a = 0; a < 12; ++a) {
            double v = st.f(a, c);
            for (std::size_t b = 0; b < 12; ++b) v -= st.s(a, b) * st.f(b, c);
            tr += st.f(a, c) * v;
        }
    j += 0.8 * ss + 0.3 * tr;
    EXPECT_NEAR(st.objective_trace.back(), j, 1e-9 * std::abs(j));
}

TEST(FuseAffinities, Errors) {
    std::vector<AffinityMatrix> none;
    EXPECT_THROW(lidaf::fuse_affinities(none, FusionConfig{}), lidaf::ArgumentError);
    std::vector<AffinityMatrix> one{AffinityMatrix{Matrix(4, 4, 1.0)}};
    FusionConfig bad{2, 0.0, 1.0, 10, 1e-6, 0};
    EXPECT_THROW(lidaf::fuse_affinities(one, bad), lidaf::ArgumentError);
    FusionConfig big{5, 1.0, 1.0, 10, 1e-6, 0};
    EXPECT_THROW(lidaf::fuse_affinities(one, big), lidaf::ArgumentError);
}

TEST(FuseAffinities, PermutationEquivariantAndDeterministic) {
    std::mt19937_64 rng(8);
    const auto y = block_labels(18, 3);
    std::vector<AffinityMatrix> affs{noisy_points_affinity(y, 3.0, rng), noisy_points_affinity(y, 2.0, rng)};
    std::vector<std::size_t> perm(18);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<AffinityMatrix> permuted;
    for (const auto& a : affs) {
        AffinityMatrix p{Matrix(18, 18)};
        for (std::size_t i = 0; i < 18; ++i)
            for (std::size_t j = 0; j < 18; ++j) p.values(i, j) = a(perm[i], perm[j]);
        permuted.push_back(p);
    }
    FusionConfig cfg{3, 1.0, 1.0, 100, 1e-6, 0};
    auto a = lidaf::fuse_affinities(affs, cfg);
    auto b = lidaf::fuse_affinities(permuted, cfg);
    auto again = lidaf::fuse_affinities(affs, cfg);
    EXPECT_EQ(a.s, again.s);
    EXPECT_EQ(a.objective_trace, again.objective_trace);
    for (std::size_t i = 0; i < 18; ++i)
        for (std::size_t j = 0; j < 18; ++j) EXPECT_NEAR(b.s(i, j), a.s(perm[i], perm[j]), 1e-8);
}

TEST(Rekernelize, ProducesValidAffinity) {
    std::mt19937_64 rng(9);
    const auto y = block_labels(20, 2);
    std::vector<AffinityMatrix> affs{noisy_points_affinity(y, 4.0, rng)};
    auto st = lidaf::fuse_affinities(affs, FusionConfig{3, 0.5, 0.5, 50, 1e-6, 0});
    auto k = lidaf::rekernelize(st.s);
    for (std::size_t i = 0; i < 20; ++i) {
        EXPECT_EQ(k(i, i), 1.0);
        for (std::size_t j = 0; j < 20; ++j) {
            EXPECT_GT(k(i, j), 0.0);
            EXPECT_LE(k(i, j), 1.0);
            EXPECT_EQ(k(i, j), k(j, i));
        }
    }
}

TEST(ThreeStage, IdenticalInputsGiveUniformStageWeights) {
    std::mt19937_64 rng(10);
    const auto y = block_labels(30, 3);
    const auto a = noisy_points_affinity(y, 5.0, rng);
    std::vector<AffinityMatrix> intra(3, a), inter(6, a);
    lidaf::ThreeStageOptions opt;
    opt.stage3_hi = 6;
    auto r = lidaf::three_stage_fuse(intra, inter, 3, opt);
    for (double w : r.stage1.state.alpha) EXPECT_NEAR(w, 1.0 / 3.0, 1e-9);
    for (double w : r.stage2.state.alpha) EXPECT_NEAR(w, 1.0 / 6.0, 1e-9);
    EXPECT_EQ(r.stage2.rr.first + r.stage2.rr.rr_values.size() - 1, 28u);  // n + 2 clamped to n - 2
    ASSERT_EQ(r.candidates.size(), 5u);
    for (const auto& c : r.candidates) {
        ASSERT_TRUE(c.state.has_value()) << c.error;
        for (std::size_t i = 0; i < 30; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < 30; ++j) rs += c.state->s(i, j);
            EXPECT_NEAR(rs, 1.0, 1e-10);
        }
    }
}

TEST(ThreeStage, PlantedThreeBlocksRobustAcrossK2) {
    std::mt19937_64 rng(11);
    const auto y = block_labels(90, 3);
    std::vector<AffinityMatrix> intra, inter;
    for (int l = 0; l < 3; ++l) intra.push_back(noisy_points_affinity(y, 4.0, rng));
    for (int l = 0; l < 6; ++l) inter.push_back(noisy_points_affinity(y, 3.0, rng));
    auto r = lidaf::three_stage_fuse(intra, inter, 3);
    ASSERT_EQ(r.candidates.size(), 87u);  // [2, 100] clamped to n - 2 = 88
    std::size_t good = 0;
    for (const auto& c : r.candidates) {
        ASSERT_TRUE(c.state.has_value()) << c.error;
        for (std::size_t t = 1; t < c.state->objective_trace.size(); ++t)
            ASSERT_LE(c.state->objective_trace[t], c.state->objective_trace[t - 1] + 1e-9);
        if (lidaf::ari(lidaf::kmeans_pp(c.state->s, 3, 0).labels, y) >= 0.9) ++good;
    }
    EXPECT_GE(good, static_cast<std::size_t>(std::ceil(0.8 * r.candidates.size())));
    const auto final_idx = lidaf::select_final_candidate(r, 3);
    ASSERT_LT(final_idx, r.candidates.size());
}
