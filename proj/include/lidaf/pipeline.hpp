#pragma once

// Whole-cohort orchestration: preprocessing of three aligned omics matrices,
// the nine affinities, three-stage fusion once per distinct eigenvector count,
// clustering of every stage-3 candidate, labelled metrics and survival.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lidaf/affinity.hpp"
#include "lidaf/bgmm.hpp"
#include "lidaf/cca.hpp"
#include "lidaf/clustering.hpp"
#include "lidaf/fusion.hpp"
#include "lidaf/preprocess.hpp"
#include "lidaf/survival.hpp"

namespace lidaf {

enum class ClusterSpace { fused_rows, spectral_factor };

inline std::string_view to_string(ClusterSpace s) {
    return s == ClusterSpace::fused_rows ? "fused_rows" : "spectral_factor";
}

inline ClusterSpace cluster_space_from_string(std::string_view s) {
    if (s == "fused_rows") return ClusterSpace::fused_rows;
    if (s == "spectral_factor") return ClusterSpace::spectral_factor;
    throw ArgumentError("unknown cluster space '" + std::string(s) + "'");
}

struct PipelineConfig {
    double zero_fraction_threshold = 0.20;
    std::optional<std::size_t> impute_k;  // round(sqrt(n)) when unset
    PowerMethod transform = PowerMethod::yeo_johnson;
    double cumulative_target = 0.95;
    std::size_t max_components = 10;
    std::optional<std::size_t> k1;  // round(sqrt(n)) when unset
    std::size_t stage1_lo = 2, stage1_hi = 100;
    std::size_t stage2_lo = 2;
    std::optional<std::size_t> stage2_hi;  // n + 2 when unset
    std::size_t stage3_lo = 2, stage3_hi = 100;
    std::vector<std::size_t> cluster_counts{3, 4, 5};
    std::size_t eval_cluster_count = 2;
    ClusterSpace cluster_space = ClusterSpace::fused_rows;
    std::size_t max_iter = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(zero_fraction_threshold > 0.0 && zero_fraction_threshold < 1.0))
            throw ArgumentError("zero_fraction_threshold must lie in (0, 1)");
        if (!(cumulative_target > 0.0 && cumulative_target <= 1.0))
            throw ArgumentError("cumulative_target must lie in (0, 1]");
        if (max_components < 1) throw ArgumentError("max_components must be >= 1");
        if (cluster_counts.empty()) throw ArgumentError("cluster_counts must not be empty");
        for (auto k : cluster_counts)
            if (k < 2) throw ArgumentError("every cluster count must be >= 2");
        if (eval_cluster_count < 2) throw ArgumentError("eval_cluster_count must be >= 2");
        if (stage1_lo > stage1_hi || stage3_lo > stage3_hi || (stage2_hi && stage2_lo > *stage2_hi))
            throw ArgumentError("k2 ranges must have lo <= hi");
        if (max_iter < 1 || !(tol > 0.0)) throw ArgumentError("max_iter must be >= 1 and tol > 0");
    }

    // Fills the data-dependent defaults for n samples.
    PipelineConfig resolved(std::size_t n) const {
        PipelineConfig r = *this;
        if (!r.impute_k) r.impute_k = default_neighbor_count(n);
        if (!r.k1) r.k1 = default_kernel_neighbors(n);
        if (!r.stage2_hi) r.stage2_hi = n + 2;
        return r;
    }
};

struct Histogram {
    double lo = 0.0, hi = 0.0;
    std::vector<std::size_t> counts;  // equal-width bins over [lo, hi]
};

inline Histogram histogram(std::span<const double> v, std::size_t bins = 30) {
    if (bins < 1) throw ArgumentError("histogram: need at least one bin");
    Histogram h;
    h.counts.assign(bins, 0);
    if (v.empty()) return h;
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    h.lo = *mn;
    h.hi = *mx;
    const double width = (h.hi - h.lo) / static_cast<double>(bins);
    for (double x : v) {
        std::size_t b = width > 0.0 ? static_cast<std::size_t>((x - h.lo) / width) : 0;
        ++h.counts[std::min(b, bins - 1)];
    }
    return h;
}

struct OmicsPrepReport {
    OmicsKind kind = OmicsKind::other;
    std::size_t input_features = 0;
    std::size_t sparse_removed = 0;
    std::size_t imputed_cells = 0;
    std::vector<std::string> constant_dropped;
    std::vector<double> lambdas;  // per feature entering the power transform
    Histogram standardized_values, transformed_values;
    std::size_t bgmm_components = 0;
    std::vector<std::string> selected_features;
};

struct CandidateMetrics {
    std::size_t k2 = 0;
    double gamma = 0.0;
    std::optional<double> ari, nmi;
    std::string error;
};

struct ClusterRun {
    std::size_t k = 0;  // requested clusters
    std::size_t c = 0;  // eigenvectors used by the fusion
    std::size_t final_index = 0;
    std::size_t final_k2 = 0;
    Partition labels;
    std::optional<SurvivalReport> survival;
    std::string survival_error;
};

struct Evaluation {
    ClusterRun run;
    double ari = 0.0, nmi = 0.0;
    std::vector<CandidateMetrics> sweep;  // one row per stage-3 candidate
};

struct PipelineResult {
    PipelineConfig config;  // with data-dependent defaults filled in
    std::vector<std::string> sample_ids;
    std::vector<OmicsPrepReport> prep;
    std::vector<AffinityMatrix> intra;
    std::vector<PairDistance> inter_pairs;
    std::vector<AffinityMatrix> inter;
    std::map<std::size_t, ThreeStageResult> fusion;  // keyed by eigenvector count
    std::vector<ClusterRun> runs;                     // one per requested cluster count
    std::optional<Evaluation> evaluation;             // when true labels are given
};

namespace detail {

struct PreparedOmics {
    OmicsMatrix standardized;  // intra input
    OmicsMatrix selected;      // inter input
    OmicsPrepReport report;
};

inline PreparedOmics prepare_omics(const OmicsMatrix& x, const PipelineConfig& cfg, std::uint64_t seed) {
    PreparedOmics out;
    out.report.kind = x.kind;
    out.report.input_features = x.features();
    auto filtered = filter_sparse_features(x, cfg.zero_fraction_threshold);
    out.report.sparse_removed = filtered.removed;
    for (auto m : filtered.matrix.missing) out.report.imputed_cells += m;
    const OmicsMatrix imputed = knn_impute(filtered.matrix, cfg.impute_k);
    auto z = zscore_standardize(imputed);
    out.report.constant_dropped = z.dropped;
    out.standardized = z.matrix;
    const auto params = fit_power_transform(z.matrix, cfg.transform);
    out.report.lambdas = params.lambdas;
    const OmicsMatrix transformed = apply_power_transform(z.matrix, params);
    out.report.standardized_values = histogram(z.matrix.values.values());
    out.report.transformed_values = histogram(transformed.values.values());
    BgmmOptions opt;
    opt.max_components = cfg.max_components;
    opt.seed = seed;
    auto sel = select_features_bgmm(transformed, cfg.cumulative_target, opt);
    out.report.bgmm_components = sel.model.effective_components;
    for (auto j : sel.selected) out.report.selected_features.push_back(transformed.feature_ids[j]);
    out.selected = std::move(sel.matrix);
    return out;
}

inline Matrix clustering_points(const FusionState& st, ClusterSpace space) {
    return space == ClusterSpace::fused_rows ? st.s : st.f;
}

template <typename F>
auto with_stage(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const NumericalError& e) {
        throw NumericalError(stage + ": " + e.what());
    } catch (const DegenerateInputError& e) {
        throw DegenerateInputError(stage + ": " + e.what());
    } catch (const DomainError& e) {
        throw DomainError(stage + ": " + e.what());
    }
}

}  // namespace detail

// Survival records and true labels, when given, must follow the sample order
// of the omics matrices. Stage failures surface as errors prefixed with the
// stage name; a failed stage-3 candidate is recorded and skipped.
inline PipelineResult run_pipeline(std::span<const OmicsMatrix> omics, const PipelineConfig& config,
                                   std::span<const SurvivalRecord> survival = {},
                                   const std::optional<Partition>& truth = std::nullopt) {
    config.validate();
    if (omics.size() != 3) throw ArgumentError("run_pipeline: expected 3 omics matrices, got " +
                                               std::to_string(omics.size()));
    for (const auto& x : omics) x.validate();
    require_aligned(omics);
    const std::size_t n = omics[0].samples();
    if (!survival.empty() && survival.size() != n)
        throw AlignmentError("run_pipeline: " + std::to_string(survival.size()) + " survival records for " +
                             std::to_string(n) + " samples", {});
    if (truth && truth->size() != n)
        throw AlignmentError("run_pipeline: " + std::to_string(truth->size()) + " true labels for " +
                             std::to_string(n) + " samples", {});

    PipelineResult res;
    res.config = config.resolved(n);
    const PipelineConfig& cfg = res.config;
    res.sample_ids = omics[0].sample_ids;

    std::vector<OmicsMatrix> standardized, selected;
    for (std::size_t m = 0; m < 3; ++m) {
        auto p = detail::with_stage("preprocess " + std::string(to_string(omics[m].kind)),
                                    [&] { return detail::prepare_omics(omics[m], cfg, cfg.seed + m); });
        standardized.push_back(std::move(p.standardized));
        selected.push_back(std::move(p.selected));
        res.prep.push_back(std::move(p.report));
    }

    detail::with_stage("intra affinity", [&] {
        for (const auto& z : standardized)
            res.intra.push_back(affinity_from_distance(euclidean_distance_matrix(z), cfg.k1));
    });
    detail::with_stage("inter affinity", [&] {
        res.inter_pairs = all_directed_pair_distances(selected);
        for (const auto& pd : res.inter_pairs) res.inter.push_back(affinity_from_distance(pd.distance, cfg.k1));
    });

    ThreeStageOptions topt;
    topt.stage1_lo = cfg.stage1_lo;
    topt.stage1_hi = cfg.stage1_hi;
    topt.stage2_lo = cfg.stage2_lo;
    topt.stage2_hi = cfg.stage2_hi;
    topt.stage3_lo = cfg.stage3_lo;
    topt.stage3_hi = cfg.stage3_hi;
    topt.k1 = cfg.k1;
    topt.max_iter = cfg.max_iter;
    topt.tol = cfg.tol;

    std::set<std::size_t> counts(cfg.cluster_counts.begin(), cfg.cluster_counts.end());
    if (truth) counts.insert(cfg.eval_cluster_count);
    for (auto k : counts) {
        const std::size_t c = spectral_count_for(k);
        if (!res.fusion.count(c)) res.fusion.emplace(c, three_stage_fuse(res.intra, res.inter, k, topt));
    }

    auto cluster_final = [&](std::size_t k) {
        ClusterRun run;
        run.k = k;
        run.c = spectral_count_for(k);
        const auto& fr = res.fusion.at(run.c);
        run.final_index = select_final_candidate(fr, k);
        if (run.final_index == fr.candidates.size())
            throw NumericalError("stage 3: every k2 candidate failed, first error: " + fr.candidates.front().error);
        const auto& cand = fr.candidates[run.final_index];
        run.final_k2 = cand.k2;
        run.labels = kmeans_pp(detail::clustering_points(*cand.state, cfg.cluster_space), k, cfg.seed);
        if (!survival.empty()) {
            try {
                run.survival = logrank_test(run.labels, survival);
            } catch (const Error& e) {
                run.survival_error = e.what();
            }
        }
        return run;
    };

    for (auto k : cfg.cluster_counts) res.runs.push_back(cluster_final(k));

    if (truth) {
        Evaluation ev;
        ev.run = cluster_final(cfg.eval_cluster_count);
        ev.ari = ari(ev.run.labels, *truth);
        ev.nmi = nmi(ev.run.labels, *truth);
        for (const auto& cand : res.fusion.at(ev.run.c).candidates) {
            CandidateMetrics row;
            row.k2 = cand.k2;
            row.gamma = cand.gamma;
            if (cand.state) {
                try {
                    const Partition p = kmeans_pp(detail::clustering_points(*cand.state, cfg.cluster_space),
                                                  cfg.eval_cluster_count, cfg.seed);
                    row.ari = ari(p, *truth);
                    row.nmi = nmi(p, *truth);
                } catch (const Error& e) {
                    row.error = e.what();
                }
            } else {
                row.error = cand.error;
            }
            ev.sweep.push_back(std::move(row));
        }
        res.evaluation = std::move(ev);
    }
    return res;
}

}  // namespace lidaf
