#pragma once

// Canonical correlation analysis by whitening each block with its thin SVD
// and taking the SVD of the whitened cross-product, plus the canonical
// variate distance used to build the inter-omics affinities.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "lidaf/affinity.hpp"
#include "lidaf/error.hpp"
#include "lidaf/numkernel.hpp"
#include "lidaf/omics.hpp"

namespace lidaf {

struct CcaResult {
    Matrix wx;                          // n x r, unit sample variance columns
    Matrix wy;                          // n x r
    std::vector<double> correlations;   // r, descending, in [0, 1]
    std::size_t rank = 0;
};

namespace detail {

inline Matrix center_columns(Matrix x) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) m += x(i, j);
        m /= static_cast<double>(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) x(i, j) -= m;
    }
    return x;
}

// Orthonormal basis of the column space of a centred block, dropping
// directions below 1e-10 of the leading singular value.
inline Matrix whitened_basis(const Matrix& centred, const Matrix& raw, const char* name) {
    const SvdFactors f = svd_thin(centred);
    const double smax = f.singular_values.empty() ? 0.0 : f.singular_values.front();
    if (!(smax > 1e-12 * std::max(1.0, raw.frobenius_norm())))
        throw DegenerateInputError(std::string("cca_fit: block ") + name + " has no variance");
    std::size_t r = 0;
    while (r < f.singular_values.size() && f.singular_values[r] >= 1e-10 * smax) ++r;
    return f.u.left_cols(r);
}

}  // namespace detail

inline CcaResult cca_fit(const Matrix& x, const Matrix& y) {
    const std::size_t n = x.rows();
    if (n < 3) throw ArgumentError("cca_fit: need at least 3 samples, got " + std::to_string(n));
    if (y.rows() != n)
        throw ArgumentError("cca_fit: " + std::to_string(n) + " vs " + std::to_string(y.rows()) + " samples");
    if (x.cols() == 0 || y.cols() == 0) throw ArgumentError("cca_fit: empty block");

    const Matrix ux = detail::whitened_basis(detail::center_columns(x), x, "x");
    const Matrix uy = detail::whitened_basis(detail::center_columns(y), y, "y");
    const SvdFactors core = svd_thin(ux.transpose() * uy);

    const double smax = core.singular_values.empty() ? 0.0 : core.singular_values.front();
    if (!(smax > 0.0)) throw DegenerateInputError("cca_fit: blocks are uncorrelated");
    std::size_t r = 0;
    while (r < core.singular_values.size() && core.singular_values[r] > 1e-10 * smax) ++r;

    // Scaling by sqrt(n - 1) gives every variate unit sample variance.
    const double scale = std::sqrt(static_cast<double>(n - 1));
    CcaResult out;
    out.rank = r;
    out.wx = ux * core.u.left_cols(r) * scale;
    out.wy = uy * core.vt.transpose().left_cols(r) * scale;
    for (std::size_t i = 0; i < r; ++i) out.correlations.push_back(std::clamp(core.singular_values[i], 0.0, 1.0));
    return out;
}

inline DistanceMatrix canonical_distance_matrix(const CcaResult& res) {
    if (res.wx.rows() != res.wy.rows() || res.wx.cols() != res.wy.cols())
        throw ArgumentError("canonical_distance_matrix: variate blocks differ in shape");
    const std::size_t n = res.wx.rows();
    DistanceMatrix d{Matrix(n, n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = std::sqrt(squared_distance(res.wx.row(i), res.wx.row(j)) +
                                       squared_distance(res.wy.row(i), res.wy.row(j)));
            d.values(i, j) = v;
            d.values(j, i) = v;
        }
    }
    return d;
}

struct DirectedPair {
    std::size_t predictor;  // index into the omics triple
    std::size_t response;
};

struct PairDistance {
    DirectedPair pair;
    std::string label;  // "<predictor kind>-><response kind>"
    std::vector<double> correlations;
    DistanceMatrix distance;
};

// Throws AlignmentError unless every matrix lists the same samples in the
// same order; offenders are ids absent somewhere or out of position.
inline void require_aligned(std::span<const OmicsMatrix> omics) {
    if (omics.empty()) return;
    const auto& ref = omics[0].sample_ids;
    std::set<std::string> offending;
    std::vector<std::set<std::string>> sets;
    for (const auto& m : omics) sets.emplace_back(m.sample_ids.begin(), m.sample_ids.end());
    for (std::size_t a = 0; a < omics.size(); ++a)
        for (const auto& id : omics[a].sample_ids)
            for (const auto& s : sets)
                if (!s.count(id)) offending.insert(id);
    for (const auto& m : omics) {
        const std::size_t common = std::min(m.sample_ids.size(), ref.size());
        for (std::size_t i = 0; i < common; ++i)
            if (m.sample_ids[i] != ref[i]) {
                offending.insert(m.sample_ids[i]);
                offending.insert(ref[i]);
            }
    }
    if (!offending.empty()) {
        std::vector<std::string> ids(offending.begin(), offending.end());
        std::string msg = "omics matrices are not sample-aligned; offending ids:";
        for (std::size_t i = 0; i < std::min<std::size_t>(ids.size(), 10); ++i) msg += " " + ids[i];
        if (ids.size() > 10) msg += " ... (" + std::to_string(ids.size()) + " total)";
        throw AlignmentError(msg, std::move(ids));
    }
}

// The six predictor -> response orders: miRNA->GE, GE->miRNA, miRNA->meth,
// meth->miRNA, GE->meth, meth->GE. When the triple holds exactly one matrix
// of each of those kinds roles follow the kinds; otherwise positions 0, 1, 2
// stand for GE, miRNA and methylation.
inline std::array<DirectedPair, 6> directed_pairs(std::span<const OmicsMatrix> omics) {
    std::array<std::size_t, 3> role{0, 1, 2};  // role[GE, miRNA, meth] -> index
    const OmicsKind kinds[3] = {OmicsKind::gene_expression, OmicsKind::mirna, OmicsKind::methylation};
    std::array<int, 3> found{-1, -1, -1};
    for (std::size_t i = 0; i < omics.size() && i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            if (omics[i].kind == kinds[k]) found[k] = found[k] == -1 ? static_cast<int>(i) : -2;
    if (found[0] >= 0 && found[1] >= 0 && found[2] >= 0)
        for (int k = 0; k < 3; ++k) role[k] = static_cast<std::size_t>(found[k]);
    const std::size_t ge = role[0], mi = role[1], me = role[2];
    return {DirectedPair{mi, ge}, DirectedPair{ge, mi}, DirectedPair{mi, me},
            DirectedPair{me, mi}, DirectedPair{ge, me}, DirectedPair{me, ge}};
}

inline std::vector<PairDistance> all_directed_pair_distances(std::span<const OmicsMatrix> omics) {
    if (omics.size() != 3)
        throw ArgumentError("all_directed_pair_distances: expected 3 omics matrices, got " +
                            std::to_string(omics.size()));
    require_aligned(omics);
    for (const auto& m : omics)
        if (m.has_missing()) throw ArgumentError("all_directed_pair_distances: input has missing cells");
    std::vector<PairDistance> out;
    for (const auto& pair : directed_pairs(omics)) {
        const auto& px = omics[pair.predictor];
        const auto& py = omics[pair.response];
        CcaResult res = cca_fit(px.values, py.values);
        std::string label = std::string(to_string(px.kind)) + "->" + std::string(to_string(py.kind));
        if (px.kind == py.kind)
            label = "omics" + std::to_string(pair.predictor) + "->omics" + std::to_string(pair.response);
        out.push_back({pair, std::move(label), res.correlations, canonical_distance_matrix(res)});
    }
    return out;
}

}  // namespace lidaf
