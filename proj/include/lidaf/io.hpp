#pragma once

// CSV readers and writers. Matrices: header "sample_id" then feature ids, one
// row per sample, empty cell = missing. Survival: sample_id,time,event (0/1).
// Labels: sample_id then one integer column per labelling. Numbers are written
// with 12 significant digits.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lidaf/affinity.hpp"
#include "lidaf/error.hpp"
#include "lidaf/omics.hpp"
#include "lidaf/survival.hpp"

namespace lidaf::io {

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// The value format_number would print, read back.
inline double round_to_printed(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cell));
            cell.clear();
        } else {
            cell += ch;
        }
    }
    out.push_back(std::move(cell));
    return out;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                          " fields, found " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(lineno);
    }
    if (t.header.empty()) throw IoError("'" + path + "' is empty");
    return t;
}

inline double parse_double(const std::string& s, const std::string& where) {
    std::size_t b = 0, e = s.size();
    while (b < e && s[b] == ' ') ++b;
    while (e > b && s[e - 1] == ' ') --e;
    double v = 0.0;
    const char* first = s.data() + b;
    if (b < e && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + e, v);
    if (ec != std::errc() || ptr != s.data() + e || !std::isfinite(v))
        throw IoError(where + ": '" + s + "' is not a finite number");
    return v;
}

inline void require_unique(const std::vector<std::string>& ids, const std::string& what, const std::string& path) {
    std::set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second) throw IoError(path + ": duplicate " + what + " '" + id + "'");
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace detail

inline OmicsMatrix read_omics_csv(const std::string& path, OmicsKind kind = OmicsKind::other) {
    const auto t = detail::read_csv(path);
    if (t.header.size() < 2) throw IoError(path + ": needs a sample_id column and at least one feature");
    OmicsMatrix x;
    x.kind = kind;
    x.feature_ids.assign(t.header.begin() + 1, t.header.end());
    detail::require_unique(x.feature_ids, "feature id", path);
    const std::size_t n = t.rows.size(), p = x.feature_ids.size();
    if (n == 0) throw IoError(path + ": no samples");
    x.values = Matrix(n, p, 0.0);
    x.missing.assign(n * p, 0);
    for (std::size_t i = 0; i < n; ++i) {
        x.sample_ids.push_back(t.rows[i][0]);
        for (std::size_t j = 0; j < p; ++j) {
            const auto& cell = t.rows[i][j + 1];
            if (cell.find_first_not_of(' ') == std::string::npos) {
                x.missing[i * p + j] = 1;
            } else {
                x.values(i, j) = detail::parse_double(cell, path + ":" + std::to_string(t.line_numbers[i]));
            }
        }
    }
    detail::require_unique(x.sample_ids, "sample id", path);
    return x;
}

// Writes a samples x columns table; missing cells stay empty.
inline void write_matrix_csv(const std::string& path, const std::vector<std::string>& row_ids,
                             const std::vector<std::string>& col_ids, const Matrix& values,
                             const std::vector<std::uint8_t>& missing = {}) {
    auto out = detail::open_out(path);
    out << "sample_id";
    for (const auto& c : col_ids) out << ',' << detail::csv_field(c);
    out << '\n';
    for (std::size_t i = 0; i < values.rows(); ++i) {
        out << detail::csv_field(row_ids[i]);
        for (std::size_t j = 0; j < values.cols(); ++j) {
            out << ',';
            if (missing.empty() || !missing[i * values.cols() + j]) out << format_number(values(i, j));
        }
        out << '\n';
    }
    detail::finish(out, path);
}

inline void write_omics_csv(const std::string& path, const OmicsMatrix& x) {
    write_matrix_csv(path, x.sample_ids, x.feature_ids, x.values, x.missing);
}

struct SurvivalTable {
    std::vector<std::string> sample_ids;
    std::vector<SurvivalRecord> records;
};

inline SurvivalTable read_survival_csv(const std::string& path) {
    const auto t = detail::read_csv(path);
    if (t.header != std::vector<std::string>{"sample_id", "time", "event"})
        throw IoError(path + ": header must be sample_id,time,event");
    SurvivalTable s;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        s.sample_ids.push_back(t.rows[i][0]);
        const double time = detail::parse_double(t.rows[i][1], where);
        const std::string& ev = t.rows[i][2];
        if (ev != "0" && ev != "1") throw IoError(where + ": event must be 0 or 1, got '" + ev + "'");
        s.records.push_back({time, ev == "1"});
    }
    detail::require_unique(s.sample_ids, "sample id", path);
    return s;
}

inline void write_survival_csv(const std::string& path, const std::vector<std::string>& ids,
                               const std::vector<SurvivalRecord>& records) {
    auto out = detail::open_out(path);
    out << "sample_id,time,event\n";
    for (std::size_t i = 0; i < records.size(); ++i)
        out << detail::csv_field(ids[i]) << ',' << format_number(records[i].time) << ','
            << (records[i].event ? 1 : 0) << '\n';
    detail::finish(out, path);
}

struct LabelTable {
    std::vector<std::string> sample_ids;
    std::vector<std::string> names;         // one per labelling column
    std::vector<std::vector<int>> columns;  // columns[c][i]
};

inline LabelTable read_labels_csv(const std::string& path) {
    const auto t = detail::read_csv(path);
    if (t.header.size() < 2 || t.header[0] != "sample_id")
        throw IoError(path + ": header must be sample_id followed by label columns");
    LabelTable l;
    l.names.assign(t.header.begin() + 1, t.header.end());
    l.columns.assign(l.names.size(), {});
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        l.sample_ids.push_back(t.rows[i][0]);
        for (std::size_t c = 0; c < l.names.size(); ++c) {
            const auto& cell = t.rows[i][c + 1];
            int v = 0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw IoError(path + ":" + std::to_string(t.line_numbers[i]) + ": label '" + cell +
                              "' is not an integer");
            l.columns[c].push_back(v);
        }
    }
    detail::require_unique(l.sample_ids, "sample id", path);
    return l;
}

inline void write_labels_csv(const std::string& path, const std::vector<std::string>& ids,
                             const std::vector<std::string>& names, const std::vector<std::vector<int>>& columns) {
    auto out = detail::open_out(path);
    out << "sample_id";
    for (const auto& nme : names) out << ',' << detail::csv_field(nme);
    out << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << detail::csv_field(ids[i]);
        for (const auto& col : columns) out << ',' << col[i];
        out << '\n';
    }
    detail::finish(out, path);
}

// Position in `have` of every id in `want`, in `want` order. Ids of `want`
// absent from `have`, and ids of `have` absent from `want`, are reported
// together as one AlignmentError.
inline std::vector<std::size_t> match_ids(const std::vector<std::string>& want, const std::vector<std::string>& have,
                                          const std::string& what) {
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < have.size(); ++i) pos.emplace(have[i], i);
    std::vector<std::size_t> idx;
    std::vector<std::string> bad;
    std::set<std::string> wanted(want.begin(), want.end());
    for (const auto& id : want) {
        auto it = pos.find(id);
        if (it == pos.end()) bad.push_back(id);
        else idx.push_back(it->second);
    }
    for (const auto& id : have)
        if (!wanted.count(id)) bad.push_back(id);
    if (!bad.empty()) {
        std::string msg = what + " does not match the omics samples; offending ids:";
        for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg += " " + bad[i];
        if (bad.size() > 20) msg += " ... (" + std::to_string(bad.size()) + " in total)";
        throw AlignmentError(msg, bad);
    }
    return idx;
}

inline std::vector<SurvivalRecord> aligned_survival(const SurvivalTable& s, const std::vector<std::string>& ids) {
    const auto idx = match_ids(ids, s.sample_ids, "survival file");
    std::vector<SurvivalRecord> out;
    for (auto i : idx) out.push_back(s.records[i]);
    return out;
}

inline std::vector<int> aligned_labels(const LabelTable& l, std::size_t column, const std::vector<std::string>& ids,
                                       const std::string& what) {
    const auto idx = match_ids(ids, l.sample_ids, what);
    std::vector<int> out;
    for (auto i : idx) out.push_back(l.columns[column][i]);
    return out;
}

inline void write_affinity_csv(const std::string& path, const std::vector<std::string>& ids, const Matrix& a) {
    write_matrix_csv(path, ids, ids, a);
}

}  // namespace lidaf::io
