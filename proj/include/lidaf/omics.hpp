#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lidaf/error.hpp"
#include "lidaf/matrix.hpp"

namespace lidaf {

enum class OmicsKind { gene_expression, mirna, methylation, other };

inline std::string_view to_string(OmicsKind k) {
    switch (k) {
        case OmicsKind::gene_expression: return "gene_expression";
        case OmicsKind::mirna: return "mirna";
        case OmicsKind::methylation: return "methylation";
        case OmicsKind::other: return "other";
    }
    return "other";
}

inline OmicsKind omics_kind_from_string(std::string_view s) {
    if (s == "gene_expression") return OmicsKind::gene_expression;
    if (s == "mirna") return OmicsKind::mirna;
    if (s == "methylation") return OmicsKind::methylation;
    if (s == "other") return OmicsKind::other;
    throw ArgumentError("unknown omics kind '" + std::string(s) + "'");
}

// Samples x features measurements from one assay. Cells flagged in `missing`
// carry no value; their entry in `values` is unspecified (kept at 0).
struct OmicsMatrix {
    Matrix values;
    std::vector<std::string> sample_ids;
    std::vector<std::string> feature_ids;
    OmicsKind kind = OmicsKind::other;
    std::vector<std::uint8_t> missing;  // row-major, 1 = missing

    std::size_t samples() const { return values.rows(); }
    std::size_t features() const { return values.cols(); }

    bool is_missing(std::size_t i, std::size_t j) const {
        return !missing.empty() && missing[i * values.cols() + j] != 0;
    }

    bool has_missing() const {
        for (auto m : missing)
            if (m) return true;
        return false;
    }

    // Fresh matrix with generated ids and no missing cells.
    static OmicsMatrix from_values(Matrix v, OmicsKind kind = OmicsKind::other,
                                   std::string_view feature_prefix = "f") {
        OmicsMatrix m;
        m.kind = kind;
        for (std::size_t i = 0; i < v.rows(); ++i) m.sample_ids.push_back("s" + std::to_string(i));
        for (std::size_t j = 0; j < v.cols(); ++j)
            m.feature_ids.push_back(std::string(feature_prefix) + std::to_string(j));
        m.missing.assign(v.rows() * v.cols(), 0);
        m.values = std::move(v);
        return m;
    }

    // Throws ArgumentError when ids, mask and matrix disagree.
    void validate() const {
        if (sample_ids.size() != values.rows() || feature_ids.size() != values.cols())
            throw ArgumentError("OmicsMatrix: id counts do not match matrix dimensions");
        if (!missing.empty() && missing.size() != values.rows() * values.cols())
            throw ArgumentError("OmicsMatrix: missing mask size mismatch");
        std::unordered_set<std::string> seen;
        for (const auto& s : sample_ids)
            if (!seen.insert(s).second) throw ArgumentError("OmicsMatrix: duplicate sample id " + s);
        seen.clear();
        for (const auto& f : feature_ids)
            if (!seen.insert(f).second) throw ArgumentError("OmicsMatrix: duplicate feature id " + f);
        for (std::size_t i = 0; i < values.rows(); ++i)
            for (std::size_t j = 0; j < values.cols(); ++j)
                if (!is_missing(i, j) && !std::isfinite(values(i, j)))
                    throw ArgumentError("OmicsMatrix: non-finite observed value at sample " +
                                        sample_ids[i] + ", feature " + feature_ids[j]);
    }

    OmicsMatrix select_features(const std::vector<std::size_t>& keep) const {
        OmicsMatrix out;
        out.kind = kind;
        out.sample_ids = sample_ids;
        out.values = values.select_cols(keep);
        for (auto j : keep) out.feature_ids.push_back(feature_ids[j]);
        out.missing.assign(samples() * keep.size(), 0);
        for (std::size_t i = 0; i < samples(); ++i)
            for (std::size_t c = 0; c < keep.size(); ++c)
                out.missing[i * keep.size() + c] = is_missing(i, keep[c]) ? 1 : 0;
        return out;
    }

    // Rows in the given order.
    OmicsMatrix select_samples(const std::vector<std::size_t>& order) const {
        OmicsMatrix out;
        out.kind = kind;
        out.feature_ids = feature_ids;
        out.values = Matrix(order.size(), features());
        out.missing.assign(order.size() * features(), 0);
        for (std::size_t r = 0; r < order.size(); ++r) {
            out.sample_ids.push_back(sample_ids[order[r]]);
            for (std::size_t j = 0; j < features(); ++j) {
                out.values(r, j) = values(order[r], j);
                out.missing[r * features() + j] = is_missing(order[r], j) ? 1 : 0;
            }
        }
        return out;
    }
};

}  // namespace lidaf
