#pragma once

// Entropy-weighted affinity fusion. For affinities A_1..A_L the fused network
// S (rows on the probability simplex), spectral factor F (n x c, orthonormal)
// and view weights alpha (on the simplex) minimize
//
//   J = -sum_l alpha_l <A_l, S> + 0.5 sum_l alpha_l ||A_l||^2 + beta ||S||^2
//       + lambda tr(F^T (I - S) F) + gamma sum_l alpha_l log alpha_l
//
// with beta = gamma and S constrained to a zero diagonal, so each sample
// spreads its mass over the other samples only. Each block update below is the
// exact minimizer with the other two blocks fixed, so J never increases. One
// sweep updates, in order:
//   s_j      = simplex projection, off the diagonal, of
//              (sum_l alpha_l a_j^(l) + lambda (F F^T)_j) / (2 gamma)
//   F        = the c smallest eigenvectors of I - (S + S^T) / 2
//   alpha_l  proportional to exp(-e_l / gamma),  e_l = -<A_l, S> + 0.5 ||A_l||^2

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lidaf/affinity.hpp"
#include "lidaf/error.hpp"
#include "lidaf/numkernel.hpp"

namespace lidaf {

struct FusionConfig {
    std::size_t c = 3;
    double gamma = 1.0;         // also the ||S||^2 weight
    double trace_weight = 1.0;  // lambda
    std::size_t max_iter = 100;
    double tol = 1e-6;          // relative objective change
    std::size_t k2 = 0;         // neighbourhood size gamma came from, for reporting
};

struct FusionState {
    Matrix s;
    Matrix f;
    std::vector<double> alpha;
    std::vector<double> objective_trace;  // [0] is the initial state
    std::size_t iterations = 0;
    bool converged = false;
};

// Spectral-gap cluster count convention: two clusters still use three
// eigenvectors.
inline std::size_t spectral_count_for(std::size_t clusters) { return clusters == 2 ? 3 : clusters; }

// gamma = (1/N) sum_j sum_{n <= k2} (s_{j,k2+1}^2 - s_{j,n}^2) on each row's
// ascending off-diagonal distances.
inline double gamma_from_neighbors(const DistanceMatrix& d, std::size_t k2) {
    const std::size_t n = d.size();
    if (k2 < 1 || k2 + 2 > n)
        throw ArgumentError("gamma_from_neighbors: k2 = " + std::to_string(k2) + " outside [1, " +
                            std::to_string(n < 2 ? 0 : n - 2) + "]");
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto s = sorted_neighbor_distances(d, j);
        const double edge = s[k2] * s[k2];
        for (std::size_t m = 0; m < k2; ++m) total += edge - s[m] * s[m];
    }
    return total / static_cast<double>(n);
}

struct RrSelection {
    std::size_t k2 = 0;
    std::size_t first = 0;      // candidate of rr_values[0]
    std::vector<double> rr_values;
};

// rr(i) = mean_j (i s_{j,i+1} - sum_{l=2}^{i+1} s_{j,l}) / 2 with 1-based
// ascending off-diagonal distances; the argmax is returned, smallest i on ties.
inline RrSelection rr_select_k2(const DistanceMatrix& d, std::size_t lo, std::size_t hi) {
    const std::size_t n = d.size();
    if (lo > hi) throw ArgumentError("rr_select_k2: empty range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    if (lo < 2 || hi + 2 > n)
        throw ArgumentError("rr_select_k2: range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                            "] outside [2, " + std::to_string(n < 2 ? 0 : n - 2) + "]");
    RrSelection out;
    out.first = lo;
    out.rr_values.assign(hi - lo + 1, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const auto s = sorted_neighbor_distances(d, j);
        // prefix[i] = s_2 + ... + s_{i+1} (1-based), i.e. s[1..i] 0-based.
        double prefix = 0.0;
        for (std::size_t i = 1; i <= hi; ++i) {
            prefix += s[i];
            if (i >= lo) out.rr_values[i - lo] += (static_cast<double>(i) * s[i] - prefix) / 2.0;
        }
    }
    for (auto& v : out.rr_values) v /= static_cast<double>(n);
    std::size_t best = 0;
    for (std::size_t t = 1; t < out.rr_values.size(); ++t)
        if (out.rr_values[t] > out.rr_values[best]) best = t;
    out.k2 = lo + best;
    return out;
}

// One minus the mean affinity, zero diagonal: the dissimilarity the gamma and
// rr heuristics read for a group of affinities.
inline DistanceMatrix fusion_distance(std::span<const AffinityMatrix> affs) {
    if (affs.empty()) throw ArgumentError("fusion_distance: no affinities");
    const std::size_t n = affs[0].size();
    DistanceMatrix d{Matrix(n, n, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double m = 0.0;
            for (const auto& a : affs) m += a(i, j);
            d.values(i, j) = std::max(0.0, 1.0 - m / static_cast<double>(affs.size()));
        }
    return d;
}

namespace detail {

inline Matrix outer_self(const Matrix& f) { return f * f.transpose(); }

// Writes the simplex projection of b without entry j into row j of s, with
// s(j, j) = 0.
inline void set_row_off_diagonal(Matrix& s, std::size_t j, std::span<const double> b) {
    const std::size_t n = b.size();
    if (n == 1) {
        s(0, 0) = 1.0;
        return;
    }
    std::vector<double> rest;
    rest.reserve(n - 1);
    for (std::size_t m = 0; m < n; ++m)
        if (m != j) rest.push_back(b[m]);
    const auto row = project_row_simplex(rest);
    for (std::size_t m = 0, t = 0; m < n; ++m) s(j, m) = m == j ? 0.0 : row[t++];
}

inline Matrix spectral_factor(const Matrix& s, std::size_t c) {
    const std::size_t n = s.rows();
    Matrix lap = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lap(i, j) -= 0.5 * (s(i, j) + s(j, i));
    return sym_eig(lap, c, EigenOrder::smallest).vectors;
}

inline double frobenius_inner(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
    return s;
}

}  // namespace detail

// The five objective terms evaluated directly.
inline double fusion_objective(std::span<const AffinityMatrix> affs, const Matrix& s, const Matrix& f,
                               std::span<const double> alpha, double gamma, double trace_weight) {
    double j = 0.0;
    for (std::size_t l = 0; l < affs.size(); ++l) {
        const double sq = detail::frobenius_inner(affs[l].values, affs[l].values);
        j += alpha[l] * (-detail::frobenius_inner(affs[l].values, s) + 0.5 * sq);
        if (alpha[l] > 0.0) j += gamma * alpha[l] * std::log(alpha[l]);
    }
    j += gamma * detail::frobenius_inner(s, s);
    const Matrix ff = detail::outer_self(f);
    j += trace_weight * (static_cast<double>(f.cols()) - detail::frobenius_inner(s, ff));
    return j;
}

// Entropic closed form for the view weights given S.
inline std::vector<double> fusion_view_weights(std::span<const AffinityMatrix> affs, const Matrix& s, double gamma) {
    const std::size_t L = affs.size();
    std::vector<double> logit(L);
    for (std::size_t l = 0; l < L; ++l) {
        const double e = -detail::frobenius_inner(affs[l].values, s) +
                         0.5 * detail::frobenius_inner(affs[l].values, affs[l].values);
        logit[l] = -e / gamma;
    }
    const double mx = *std::max_element(logit.begin(), logit.end());
    std::vector<double> alpha(L);
    double z = 0.0;
    for (std::size_t l = 0; l < L; ++l) z += alpha[l] = std::exp(logit[l] - mx);
    for (auto& a : alpha) a /= z;
    return alpha;
}

inline FusionState fuse_affinities(std::span<const AffinityMatrix> affs, const FusionConfig& cfg) {
    if (affs.empty()) throw ArgumentError("fuse_affinities: no affinity matrices");
    const std::size_t n = affs[0].size();
    for (const auto& a : affs)
        if (a.values.rows() != n || a.values.cols() != n)
            throw ArgumentError("fuse_affinities: affinity matrices differ in size");
    if (cfg.c < 1 || cfg.c > n)
        throw ArgumentError("fuse_affinities: c = " + std::to_string(cfg.c) + " outside [1, " + std::to_string(n) + "]");
    if (!(cfg.gamma > 0.0) || !std::isfinite(cfg.gamma))
        throw ArgumentError("fuse_affinities: gamma must be positive, got " + std::to_string(cfg.gamma));
    if (!(cfg.trace_weight >= 0.0)) throw ArgumentError("fuse_affinities: trace weight must be nonnegative");
    const std::size_t L = affs.size();

    FusionState st;
    st.alpha.assign(L, 1.0 / static_cast<double>(L));
    st.s = Matrix(n, n, 0.0);
    {
        Matrix mean(n, n, 0.0);
        for (std::size_t l = 0; l < L; ++l) mean += affs[l].values * st.alpha[l];
        for (std::size_t j = 0; j < n; ++j) detail::set_row_off_diagonal(st.s, j, mean.row(j));
    }
    st.f = detail::spectral_factor(st.s, cfg.c);
    st.objective_trace.push_back(fusion_objective(affs, st.s, st.f, st.alpha, cfg.gamma, cfg.trace_weight));

    std::vector<double> b(n);
    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        const Matrix ff = detail::outer_self(st.f);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t m = 0; m < n; ++m) {
                double v = cfg.trace_weight * ff(j, m);
                for (std::size_t l = 0; l < L; ++l) v += st.alpha[l] * affs[l](j, m);
                b[m] = v / (2.0 * cfg.gamma);
            }
            detail::set_row_off_diagonal(st.s, j, b);
        }

        st.f = detail::spectral_factor(st.s, cfg.c);
        st.alpha = fusion_view_weights(affs, st.s, cfg.gamma);

        const double obj = fusion_objective(affs, st.s, st.f, st.alpha, cfg.gamma, cfg.trace_weight);
        if (!std::isfinite(obj))
            throw NumericalError("fuse_affinities: non-finite objective at iteration " + std::to_string(it + 1));
        const double prev = st.objective_trace.back();
        st.objective_trace.push_back(obj);
        st.iterations = it + 1;
        if (std::abs(prev - obj) <= cfg.tol * std::max(1.0, std::abs(prev))) {
            st.converged = true;
            break;
        }
    }
    return st;
}

// Symmetrizes a fused network, maps it to the dissimilarity 1 - S/max(S)
// (zero diagonal) and applies the locally scaled kernel again.
inline AffinityMatrix rekernelize(const Matrix& s, std::optional<std::size_t> k1 = std::nullopt) {
    const std::size_t n = s.rows();
    Matrix sym(n, n);
    double mx = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            sym(i, j) = 0.5 * (s(i, j) + s(j, i));
            mx = std::max(mx, sym(i, j));
        }
    if (!(mx > 0.0)) throw DegenerateInputError("rekernelize: fused network is identically zero");
    DistanceMatrix d{Matrix(n, n, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) d.values(i, j) = std::max(0.0, 1.0 - sym(i, j) / mx);
    return affinity_from_distance(d, k1);
}

struct StageRecord {
    std::string name;
    std::size_t k2 = 0;
    double gamma = 0.0;
    RrSelection rr;
    FusionState state;
};

struct Stage3Candidate {
    std::size_t k2 = 0;
    double gamma = 0.0;
    std::optional<FusionState> state;  // empty when the run failed
    std::string error;
};

struct ThreeStageOptions {
    std::size_t stage1_lo = 2, stage1_hi = 100;
    std::optional<std::size_t> stage2_hi;  // default n + 2
    std::size_t stage2_lo = 2;
    std::size_t stage3_lo = 2, stage3_hi = 100;
    std::optional<std::size_t> k1;  // kernel neighbours for re-kernelization
    std::size_t max_iter = 100;
    double tol = 1e-6;
};

struct ThreeStageResult {
    std::size_t c = 0;
    StageRecord stage1;
    StageRecord stage2;
    AffinityMatrix stage1_kernel;
    AffinityMatrix stage2_kernel;
    std::vector<Stage3Candidate> candidates;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> clamp_range(std::size_t lo, std::size_t hi, std::size_t n,
                                                       const std::string& stage) {
    const std::size_t top = n >= 4 ? n - 2 : 0;
    lo = std::max<std::size_t>(lo, 2);
    hi = std::min(hi, top);
    if (lo > hi)
        throw ArgumentError(stage + ": k2 range is empty for " + std::to_string(n) + " samples");
    return {lo, hi};
}

inline StageRecord run_rr_stage(const std::string& name, std::span<const AffinityMatrix> affs, std::size_t lo,
                                std::size_t hi, std::size_t c, const ThreeStageOptions& opt) {
    try {
        StageRecord rec;
        rec.name = name;
        const DistanceMatrix d = fusion_distance(affs);
        const auto [a, b] = clamp_range(lo, hi, d.size(), name);
        rec.rr = rr_select_k2(d, a, b);
        rec.k2 = rec.rr.k2;
        rec.gamma = gamma_from_neighbors(d, rec.k2);
        if (!(rec.gamma > 0.0))
            throw DegenerateInputError("gamma is zero for k2 = " + std::to_string(rec.k2) + " (uniform distances)");
        FusionConfig cfg{c, rec.gamma, rec.gamma, opt.max_iter, opt.tol, rec.k2};
        rec.state = fuse_affinities(affs, cfg);
        return rec;
    } catch (const NumericalError& e) {
        throw NumericalError(name + ": " + e.what());
    } catch (const DegenerateInputError& e) {
        throw DegenerateInputError(name + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw ArgumentError(name + ": " + e.what());
    }
}

}  // namespace detail

// Stage 1 fuses the intra-omics affinities, stage 2 the inter-omics ones, each
// with k2 chosen by rr; stage 3 fuses the two re-kernelized outputs for every
// k2 in the stage-3 range. Failed stage-3 candidates are recorded, not thrown.
inline ThreeStageResult three_stage_fuse(std::span<const AffinityMatrix> intra, std::span<const AffinityMatrix> inter,
                                         std::size_t cluster_count, const ThreeStageOptions& opt = {}) {
    if (intra.empty() || inter.empty()) throw ArgumentError("three_stage_fuse: missing affinity group");
    const std::size_t n = intra[0].size();
    for (const auto* group : {&intra, &inter})
        for (const auto& a : *group)
            if (a.size() != n) throw ArgumentError("three_stage_fuse: affinity matrices differ in size");
    if (cluster_count < 1) throw ArgumentError("three_stage_fuse: cluster count must be >= 1");

    ThreeStageResult out;
    out.c = spectral_count_for(cluster_count);
    out.stage1 = detail::run_rr_stage("stage 1", intra, opt.stage1_lo, opt.stage1_hi, out.c, opt);
    out.stage2 = detail::run_rr_stage("stage 2", inter, opt.stage2_lo, opt.stage2_hi.value_or(n + 2), out.c, opt);
    out.stage1_kernel = rekernelize(out.stage1.state.s, opt.k1);
    out.stage2_kernel = rekernelize(out.stage2.state.s, opt.k1);

    const std::vector<AffinityMatrix> pair{out.stage1_kernel, out.stage2_kernel};
    const DistanceMatrix d3 = fusion_distance(pair);
    const auto [lo, hi] = detail::clamp_range(opt.stage3_lo, opt.stage3_hi, n, "stage 3");
    for (std::size_t k2 = lo; k2 <= hi; ++k2) {
        Stage3Candidate cand;
        cand.k2 = k2;
        try {
            cand.gamma = gamma_from_neighbors(d3, k2);
            if (!(cand.gamma > 0.0)) throw DegenerateInputError("gamma is zero (uniform distances)");
            FusionConfig cfg{out.c, cand.gamma, cand.gamma, opt.max_iter, opt.tol, k2};
            cand.state = fuse_affinities(pair, cfg);
        } catch (const Error& e) {
            cand.error = std::string("stage 3, k2 = ") + std::to_string(k2) + ": " + e.what();
        }
        out.candidates.push_back(std::move(cand));
    }
    return out;
}

// Gap between the `clusters`-th and next eigenvalue of (S + S^T) / 2, largest
// first: how cleanly the fused network separates into that many blocks.
inline double block_eigengap(const Matrix& s, std::size_t clusters) {
    const std::size_t n = s.rows();
    if (clusters < 1 || clusters >= n) throw ArgumentError("block_eigengap: cluster count out of range");
    const auto eig = sym_eig(s, clusters + 1, EigenOrder::largest);
    return eig.values[clusters - 1] - eig.values[clusters];
}

// Unsupervised choice among stage-3 candidates: the largest block eigengap,
// smallest k2 on ties. Returns candidates.size() when every candidate failed.
inline std::size_t select_final_candidate(const ThreeStageResult& r, std::size_t clusters) {
    std::size_t best = r.candidates.size();
    double best_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        if (!r.candidates[i].state) continue;
        const double gap = block_eigengap(r.candidates[i].state->s, clusters);
        if (gap > best_gap) {
            best_gap = gap;
            best = i;
        }
    }
    return best;
}

}  // namespace lidaf
