// lidaf: batch front-end. Subcommands pipeline, synth, survival, metrics.
// Exit codes: 0 ok, 1 usage, 2 sample alignment, 3 numerical failure, 4 I/O.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lidaf/lidaf.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kAlignment = 2, kNumerical = 3, kIo = 4 };

double num(double x) { return lidaf::io::round_to_printed(x); }

json num_array(std::span<const double> v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

std::string default_out_dir() {
    const char* env = std::getenv("LIDAF_OUT_DIR");
    return env && *env ? env : "lidaf_out";
}

void make_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw lidaf::IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw lidaf::IoError("cannot open '" + p.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw lidaf::IoError("write to '" + p.string() + "' failed");
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::vector<std::size_t> parse_counts(const std::string& s, const std::string& what) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != item.size() || item.find('-') != std::string::npos)
            throw lidaf::ArgumentError(what + ": '" + item + "' is not a count");
        out.push_back(v);
    }
    if (out.empty()) throw lidaf::ArgumentError(what + " must list at least one count");
    return out;
}

std::optional<std::size_t> parse_auto(const std::string& s, const std::string& what) {
    if (s == "auto") return std::nullopt;
    return parse_counts(s, what).at(0);
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

// Splices `key = value` lines of the --config file into the argument list,
// right after the subcommand, so flags given on the command line come later
// and win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty() || args.empty()) return args;
    std::ifstream in(path);
    if (!in) throw lidaf::IoError("cannot open config file '" + path + "'");
    std::vector<std::string> spliced;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw lidaf::ArgumentError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        if (key.empty() || key == "config")
            throw lidaf::ArgumentError(path + ":" + std::to_string(lineno) + ": bad key");
        spliced.push_back("--" + key);
        spliced.push_back(trim(line.substr(eq + 1)));
    }
    args.insert(args.begin() + 1, spliced.begin(), spliced.end());
    return args;
}

// ---------------------------------------------------------------- pipeline

struct PipelineArgs {
    std::string gene_expression, mirna, methylation, survival, truth;
    std::string out;
    double zero_fraction = 0.20;
    std::string impute_k = "auto";
    std::string transform = "yeo_johnson";
    double cumulative_target = 0.95;
    std::size_t max_components = 10;
    std::string k1 = "auto";
    std::size_t stage1_lo = 2, stage1_hi = 100, stage2_lo = 2;
    std::string stage2_hi = "auto";
    std::size_t stage3_lo = 2, stage3_hi = 100;
    std::string clusters = "3,4,5";
    std::size_t eval_k = 2;
    std::string cluster_on = "fused_rows";
    std::size_t max_iter = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    bool write_fused = true;
    std::string config;
};

lidaf::PipelineConfig to_config(const PipelineArgs& a) {
    lidaf::PipelineConfig c;
    c.zero_fraction_threshold = a.zero_fraction;
    c.impute_k = parse_auto(a.impute_k, "impute-k");
    if (a.transform == "yeo_johnson") c.transform = lidaf::PowerMethod::yeo_johnson;
    else if (a.transform == "box_cox") c.transform = lidaf::PowerMethod::box_cox;
    else throw lidaf::ArgumentError("transform must be yeo_johnson or box_cox, got '" + a.transform + "'");
    c.cumulative_target = a.cumulative_target;
    c.max_components = a.max_components;
    c.k1 = parse_auto(a.k1, "k1");
    c.stage1_lo = a.stage1_lo;
    c.stage1_hi = a.stage1_hi;
    c.stage2_lo = a.stage2_lo;
    c.stage2_hi = parse_auto(a.stage2_hi, "stage2-hi");
    c.stage3_lo = a.stage3_lo;
    c.stage3_hi = a.stage3_hi;
    c.cluster_counts = parse_counts(a.clusters, "clusters");
    c.eval_cluster_count = a.eval_k;
    c.cluster_space = lidaf::cluster_space_from_string(a.cluster_on);
    c.max_iter = a.max_iter;
    c.tol = a.tol;
    c.seed = a.seed;
    c.validate();
    return c;
}

// The resolved configuration in the --config format, so it can be fed back.
// The output directory is left out so reruns elsewhere compare byte for byte.
std::string echo_config(const PipelineArgs& a, const lidaf::PipelineConfig& c) {
    std::ostringstream s;
    auto kv = [&](const char* k, const std::string& v) { s << k << " = " << v << "\n"; };
    kv("gene-expression", a.gene_expression);
    kv("mirna", a.mirna);
    kv("methylation", a.methylation);
    if (!a.survival.empty()) kv("survival", a.survival);
    if (!a.truth.empty()) kv("truth", a.truth);
    kv("zero-fraction", lidaf::io::format_number(c.zero_fraction_threshold));
    kv("impute-k", std::to_string(*c.impute_k));
    kv("transform", std::string(lidaf::to_string(c.transform)));
    kv("cumulative-target", lidaf::io::format_number(c.cumulative_target));
    kv("max-components", std::to_string(c.max_components));
    kv("k1", std::to_string(*c.k1));
    kv("stage1-lo", std::to_string(c.stage1_lo));
    kv("stage1-hi", std::to_string(c.stage1_hi));
    kv("stage2-lo", std::to_string(c.stage2_lo));
    kv("stage2-hi", std::to_string(*c.stage2_hi));
    kv("stage3-lo", std::to_string(c.stage3_lo));
    kv("stage3-hi", std::to_string(c.stage3_hi));
    kv("clusters", join(c.cluster_counts));
    kv("eval-k", std::to_string(c.eval_cluster_count));
    kv("cluster-on", std::string(lidaf::to_string(c.cluster_space)));
    kv("max-iter", std::to_string(c.max_iter));
    kv("tol", lidaf::io::format_number(c.tol));
    kv("seed", std::to_string(c.seed));
    kv("write-fused", a.write_fused ? "true" : "false");
    return s.str();
}

json state_summary(const lidaf::FusionState& st) {
    json j;
    j["alpha"] = num_array(st.alpha);
    j["iterations"] = st.iterations;
    j["converged"] = st.converged;
    j["objective_initial"] = num(st.objective_trace.front());
    j["objective_final"] = num(st.objective_trace.back());
    return j;
}

json stage_json(const lidaf::StageRecord& r) {
    json j;
    j["k2"] = r.k2;
    j["gamma"] = num(r.gamma);
    j["rr_first_k2"] = r.rr.first;
    j["rr_values"] = num_array(r.rr.rr_values);
    j.update(state_summary(r.state));
    return j;
}

json survival_json(const lidaf::SurvivalReport& r) {
    json j;
    j["chi2"] = num(r.chi2);
    j["df"] = r.df;
    j["p"] = num(r.p);
    j["neg_log10_p"] = num(r.neg_log10_p);
    j["significant"] = r.significant;
    json groups = json::array();
    for (std::size_t g = 0; g < r.groups.size(); ++g)
        groups.push_back({{"label", r.groups[g]},
                          {"size", r.sizes[g]},
                          {"observed", num(r.observed[g])},
                          {"expected", num(r.expected[g])}});
    j["groups"] = groups;
    return j;
}

std::string candidate_file(std::size_t c, std::size_t k2) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "fused/c%zu/k2_%03zu.csv", c, k2);
    return buf;
}

// The three matrices in gene expression sample order.
std::vector<lidaf::OmicsMatrix> load_omics(const PipelineArgs& a) {
    std::vector<lidaf::OmicsMatrix> omics{
        lidaf::io::read_omics_csv(a.gene_expression, lidaf::OmicsKind::gene_expression),
        lidaf::io::read_omics_csv(a.mirna, lidaf::OmicsKind::mirna),
        lidaf::io::read_omics_csv(a.methylation, lidaf::OmicsKind::methylation)};
    const char* names[3] = {"gene expression", "miRNA", "methylation"};
    for (int m = 1; m < 3; ++m) {
        const auto idx = lidaf::io::match_ids(omics[0].sample_ids, omics[m].sample_ids,
                                              std::string(names[m]) + " matrix");
        omics[m] = omics[m].select_samples(idx);
    }
    return omics;
}

int cmd_pipeline(const PipelineArgs& a) {
    const auto cfg = to_config(a);
    const std::string out_dir = a.out.empty() ? default_out_dir() : a.out;
    const auto omics = load_omics(a);
    const auto& ids = omics[0].sample_ids;

    std::vector<lidaf::SurvivalRecord> survival;
    if (!a.survival.empty())
        survival = lidaf::io::aligned_survival(lidaf::io::read_survival_csv(a.survival), ids);
    std::optional<lidaf::Partition> truth;
    if (!a.truth.empty()) {
        const auto t = lidaf::io::read_labels_csv(a.truth);
        truth = lidaf::Partition::from_labels(lidaf::io::aligned_labels(t, 0, ids, "truth file"));
    }

    const auto res = lidaf::run_pipeline(omics, cfg, survival, truth);
    const fs::path out(out_dir);
    make_dir(out / "affinity");
    write_text(out / "config.txt", echo_config(a, res.config));

    json prep = json::array();
    std::ostringstream hist;
    hist << "omics,stage,bin,lo,hi,count\n";
    for (const auto& p : res.prep) {
        const std::string kind(lidaf::to_string(p.kind));
        json j;
        j["kind"] = kind;
        j["input_features"] = p.input_features;
        j["sparse_removed"] = p.sparse_removed;
        j["imputed_cells"] = p.imputed_cells;
        j["constant_dropped"] = p.constant_dropped;
        j["transform"] = std::string(lidaf::to_string(res.config.transform));
        j["lambdas"] = num_array(p.lambdas);
        j["bgmm_effective_components"] = p.bgmm_components;
        j["selected_count"] = p.selected_features.size();
        j["selected_features"] = p.selected_features;
        prep.push_back(j);
        for (const auto& [stage, h] : {std::pair{"standardized", &p.standardized_values},
                                       std::pair{"transformed", &p.transformed_values}}) {
            const double w = (h->hi - h->lo) / static_cast<double>(h->counts.size());
            for (std::size_t b = 0; b < h->counts.size(); ++b)
                hist << kind << ',' << stage << ',' << b << ',' << lidaf::io::format_number(h->lo + w * b) << ','
                     << lidaf::io::format_number(h->lo + w * (b + 1)) << ',' << h->counts[b] << '\n';
        }
    }
    write_json(out / "preprocess.json", json{{"order", {"filter", "impute", "zscore", "power_transform", "select"}},
                                             {"omics", prep}});
    write_text(out / "histograms.csv", hist.str());

    for (std::size_t m = 0; m < 3; ++m)
        lidaf::io::write_affinity_csv(
            (out / "affinity" / ("intra_" + std::string(lidaf::to_string(res.prep[m].kind)) + ".csv")).string(), ids,
            res.intra[m].values);
    for (std::size_t p = 0; p < res.inter.size(); ++p) {
        std::string name = res.inter_pairs[p].label;
        name.replace(name.find("->"), 2, "_to_");
        lidaf::io::write_affinity_csv((out / "affinity" / ("inter_" + name + ".csv")).string(), ids,
                                      res.inter[p].values);
    }

    json fusion = json::array();
    for (const auto& [c, fr] : res.fusion) {
        json j;
        j["c"] = c;
        j["stage1"] = stage_json(fr.stage1);
        j["stage2"] = stage_json(fr.stage2);
        json cands = json::array();
        if (a.write_fused) make_dir(out / "fused" / ("c" + std::to_string(c)));
        for (const auto& cand : fr.candidates) {
            json cj;
            cj["k2"] = cand.k2;
            cj["gamma"] = num(cand.gamma);
            if (cand.state) {
                cj.update(state_summary(*cand.state));
                if (a.write_fused) {
                    const std::string file = candidate_file(c, cand.k2);
                    lidaf::io::write_affinity_csv((out / file).string(), ids, cand.state->s);
                    cj["file"] = file;
                }
            } else {
                cj["error"] = cand.error;
            }
            cands.push_back(cj);
        }
        j["candidates"] = cands;
        fusion.push_back(j);
    }
    write_json(out / "fusion.json", fusion);

    std::vector<std::string> names;
    std::vector<std::vector<int>> cols;
    json clusters = json::array(), surv = json::array();
    for (const auto& run : res.runs) {
        names.push_back("clusters_" + std::to_string(run.k));
        cols.push_back(run.labels.labels);
        std::vector<std::size_t> sizes(run.labels.k, 0);
        for (int l : run.labels.labels) ++sizes[l];
        const auto& cand = res.fusion.at(run.c).candidates[run.final_index];
        clusters.push_back({{"k", run.k},
                            {"c", run.c},
                            {"final_k2", run.final_k2},
                            {"block_eigengap", num(lidaf::block_eigengap(cand.state->s, run.k))},
                            {"sizes", sizes}});
        if (!survival.empty()) {
            json sj{{"k", run.k}, {"final_k2", run.final_k2}};
            if (run.survival) sj.update(survival_json(*run.survival));
            else sj["error"] = run.survival_error;
            surv.push_back(sj);
        }
        std::cout << "k = " << run.k << ": final k2 = " << run.final_k2;
        if (run.survival) std::cout << ", -log10 p = " << lidaf::io::format_number(run.survival->neg_log10_p);
        std::cout << "\n";
    }
    lidaf::io::write_labels_csv((out / "labels.csv").string(), ids, names, cols);
    write_json(out / "clusters.json", clusters);
    if (!survival.empty())
        write_json(out / "survival.json",
                   json{{"threshold", num(lidaf::kSignificanceThreshold)}, {"reports", surv}});

    if (res.evaluation) {
        const auto& ev = *res.evaluation;
        std::ostringstream sweep;
        sweep << "k2,gamma,ari,nmi,error\n";
        std::size_t excellent = 0;
        for (const auto& row : ev.sweep) {
            sweep << row.k2 << ',' << lidaf::io::format_number(row.gamma) << ','
                  << (row.ari ? lidaf::io::format_number(*row.ari) : "") << ','
                  << (row.nmi ? lidaf::io::format_number(*row.nmi) : "") << ','
                  << lidaf::io::detail::csv_field(row.error) << '\n';
            if (row.ari && *row.ari >= 0.9) ++excellent;
        }
        write_text(out / "metrics_sweep.csv", sweep.str());
        const double share = ev.sweep.empty() ? 0.0 : static_cast<double>(excellent) / ev.sweep.size();
        write_json(out / "metrics.json", json{{"eval_k", ev.run.k},
                                              {"final_k2", ev.run.final_k2},
                                              {"ari", num(ev.ari)},
                                              {"nmi", num(ev.nmi)},
                                              {"candidates", ev.sweep.size()},
                                              {"candidates_ari_at_least_0.9", num(share)}});
        lidaf::io::write_labels_csv((out / "eval_labels.csv").string(), ids,
                                    {"clusters_" + std::to_string(ev.run.k)}, {ev.run.labels.labels});
        std::cout << "evaluation k = " << ev.run.k << ": ARI = " << lidaf::io::format_number(ev.ari)
                  << ", NMI = " << lidaf::io::format_number(ev.nmi) << ", candidates with ARI >= 0.9: " << excellent
                  << "/" << ev.sweep.size() << "\n";
    }
    std::cout << "wrote " << out_dir << "\n";
    return kOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    lidaf::SynthSpec spec;
    std::string dims = "60,40,50";
    std::string out;
};

int cmd_synth(SynthArgs a) {
    const auto d = parse_counts(a.dims, "dims");
    if (d.size() != 3) throw lidaf::ArgumentError("dims must list 3 feature counts");
    std::copy(d.begin(), d.end(), a.spec.dims.begin());
    const auto data = lidaf::generate(a.spec);
    const fs::path out(a.out.empty() ? default_out_dir() : a.out);
    make_dir(out);
    const char* files[3] = {"gene_expression.csv", "mirna.csv", "methylation.csv"};
    for (int m = 0; m < 3; ++m) lidaf::io::write_omics_csv((out / files[m]).string(), data.omics[m]);
    const auto& ids = data.omics[0].sample_ids;
    lidaf::io::write_survival_csv((out / "survival.csv").string(), ids, data.survival);
    lidaf::io::write_labels_csv((out / "truth.csv").string(), ids, {"truth"}, {data.truth.labels});
    std::cout << "wrote " << a.spec.n << " samples, " << a.spec.k << " clusters to " << out.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------- survival

int cmd_survival(const std::string& labels_path, const std::string& survival_path, const std::string& out_arg) {
    const auto labels = lidaf::io::read_labels_csv(labels_path);
    const auto records = lidaf::io::aligned_survival(lidaf::io::read_survival_csv(survival_path), labels.sample_ids);
    json reports = json::array();
    for (std::size_t c = 0; c < labels.names.size(); ++c) {
        const auto r = lidaf::logrank_test(labels.columns[c], records);
        json j{{"labels", labels.names[c]}};
        j.update(survival_json(r));
        reports.push_back(j);
        std::cout << labels.names[c] << ": chi2 = " << lidaf::io::format_number(r.chi2) << ", df = " << r.df
                  << ", -log10 p = " << lidaf::io::format_number(r.neg_log10_p)
                  << (r.significant ? " (significant)" : " (not significant)") << "\n";
    }
    const fs::path out(out_arg.empty() ? default_out_dir() : out_arg);
    make_dir(out);
    write_json(out / "survival.json", json{{"threshold", num(lidaf::kSignificanceThreshold)}, {"reports", reports}});
    return kOk;
}

// ---------------------------------------------------------------- metrics

int cmd_metrics(const std::string& labels_path, const std::string& truth_path, const std::string& truth_column,
                const std::string& out_arg) {
    const auto labels = lidaf::io::read_labels_csv(labels_path);
    const auto truth_table = lidaf::io::read_labels_csv(truth_path);
    std::size_t col = 0;
    if (!truth_column.empty()) {
        const auto it = std::find(truth_table.names.begin(), truth_table.names.end(), truth_column);
        if (it == truth_table.names.end())
            throw lidaf::ArgumentError("truth file has no column '" + truth_column + "'");
        col = static_cast<std::size_t>(it - truth_table.names.begin());
    }
    const auto truth = lidaf::io::aligned_labels(truth_table, col, labels.sample_ids, "truth file");
    json rows = json::array();
    for (std::size_t c = 0; c < labels.names.size(); ++c) {
        const double a = lidaf::ari(labels.columns[c], truth);
        const double m = lidaf::nmi(labels.columns[c], truth);
        rows.push_back({{"labels", labels.names[c]}, {"ari", num(a)}, {"nmi", num(m)}});
        std::cout << labels.names[c] << ": ARI = " << lidaf::io::format_number(a)
                  << ", NMI = " << lidaf::io::format_number(m) << "\n";
    }
    const fs::path out(out_arg.empty() ? default_out_dir() : out_arg);
    make_dir(out);
    write_json(out / "metrics.json", json{{"truth", truth_table.names[col]}, {"metrics", rows}});
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-omics subtype discovery by inter- and intra-omics affinity fusion."};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    const std::string out_help = "output directory (default $LIDAF_OUT_DIR, else lidaf_out)";

    PipelineArgs pa;
    auto* pipe = app.add_subcommand("pipeline", "preprocess, fuse, cluster and report");
    pipe->add_option("--config", pa.config, "key = value file; flags override its values");
    pipe->add_option("--gene-expression", pa.gene_expression, "gene expression matrix CSV")->required();
    pipe->add_option("--mirna", pa.mirna, "miRNA matrix CSV")->required();
    pipe->add_option("--methylation", pa.methylation, "methylation matrix CSV")->required();
    pipe->add_option("--survival", pa.survival, "survival CSV (sample_id,time,event)");
    pipe->add_option("--truth", pa.truth, "true labels CSV; enables ARI/NMI and the k2 sweep table");
    pipe->add_option("--out", pa.out, out_help);
    pipe->add_option("--zero-fraction", pa.zero_fraction, "sparse-feature threshold")->capture_default_str();
    pipe->add_option("--impute-k", pa.impute_k, "imputation neighbours or auto")->capture_default_str();
    pipe->add_option("--transform", pa.transform, "yeo_johnson or box_cox")->capture_default_str();
    pipe->add_option("--cumulative-target", pa.cumulative_target, "feature selection target")->capture_default_str();
    pipe->add_option("--max-components", pa.max_components, "mixture components")->capture_default_str();
    pipe->add_option("--k1", pa.k1, "kernel neighbours or auto")->capture_default_str();
    pipe->add_option("--stage1-lo", pa.stage1_lo)->capture_default_str();
    pipe->add_option("--stage1-hi", pa.stage1_hi)->capture_default_str();
    pipe->add_option("--stage2-lo", pa.stage2_lo)->capture_default_str();
    pipe->add_option("--stage2-hi", pa.stage2_hi, "or auto = samples + 2")->capture_default_str();
    pipe->add_option("--stage3-lo", pa.stage3_lo)->capture_default_str();
    pipe->add_option("--stage3-hi", pa.stage3_hi)->capture_default_str();
    pipe->add_option("--clusters", pa.clusters, "comma-separated cluster counts")->capture_default_str();
    pipe->add_option("--eval-k", pa.eval_k, "cluster count scored against --truth")->capture_default_str();
    pipe->add_option("--cluster-on", pa.cluster_on, "fused_rows or spectral_factor")->capture_default_str();
    pipe->add_option("--max-iter", pa.max_iter, "fusion sweeps")->capture_default_str();
    pipe->add_option("--tol", pa.tol, "relative objective tolerance")->capture_default_str();
    pipe->add_option("--seed", pa.seed)->capture_default_str();
    pipe->add_option("--write-fused", pa.write_fused, "write every stage-3 fused network")->capture_default_str();

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "write a synthetic cohort with planted clusters");
    synth->add_option("--n", sa.spec.n, "samples")->capture_default_str();
    synth->add_option("--k", sa.spec.k, "planted clusters")->capture_default_str();
    synth->add_option("--dims", sa.dims, "features per omics")->capture_default_str();
    synth->add_option("--separation", sa.spec.separation, "cluster mean gap in sd units")->capture_default_str();
    synth->add_option("--noise-fraction", sa.spec.noise_features_fraction)->capture_default_str();
    synth->add_option("--missing-rate", sa.spec.missing_rate)->capture_default_str();
    synth->add_option("--high-missing-fraction", sa.spec.high_missing_fraction)->capture_default_str();
    synth->add_option("--high-missing-rate", sa.spec.high_missing_rate)->capture_default_str();
    synth->add_option("--hazard-ratio", sa.spec.hazard_ratio)->capture_default_str();
    synth->add_option("--base-hazard", sa.spec.base_hazard)->capture_default_str();
    synth->add_option("--censoring", sa.spec.censoring_fraction)->capture_default_str();
    synth->add_option("--seed", sa.spec.seed)->capture_default_str();
    synth->add_option("--out", sa.out, out_help);

    std::string labels_path, survival_path, truth_path, truth_column, out_arg;
    auto* surv = app.add_subcommand("survival", "log-rank test of each labelling");
    surv->add_option("--labels", labels_path, "labels CSV")->required();
    surv->add_option("--survival", survival_path, "survival CSV")->required();
    surv->add_option("--out", out_arg, out_help);

    auto* metrics = app.add_subcommand("metrics", "ARI and NMI of each labelling against true labels");
    metrics->add_option("--labels", labels_path, "labels CSV")->required();
    metrics->add_option("--truth", truth_path, "true labels CSV")->required();
    metrics->add_option("--truth-column", truth_column, "column of the truth file (default: first)");
    metrics->add_option("--out", out_arg, out_help);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(std::move(args));
        std::reverse(args.begin(), args.end());
        try {
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? kOk : kUsage;
        }
        if (pipe->parsed()) return cmd_pipeline(pa);
        if (synth->parsed()) return cmd_synth(sa);
        if (surv->parsed()) return cmd_survival(labels_path, survival_path, out_arg);
        if (metrics->parsed()) return cmd_metrics(labels_path, truth_path, truth_column, out_arg);
        return kUsage;
    } catch (const lidaf::AlignmentError& e) {
        std::cerr << "alignment error: " << e.what() << "\n";
        return kAlignment;
    } catch (const lidaf::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const lidaf::ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return kUsage;
    } catch (const lidaf::Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    }
}
