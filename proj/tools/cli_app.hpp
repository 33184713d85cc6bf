#pragma once

// kwlngb command-line front end. `run` is the whole program; main() only
// forwards argv so the tests can drive commands in-process.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kwlngb/kwlngb.hpp"

#ifndef KWLNGB_VERSION
#define KWLNGB_VERSION "0.0.0"
#endif

namespace kwlngb::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { Ok = 0, InputError = 2, ConvergenceWarning = 3, Infeasible = 4 };

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    QuadratureSpec quadrature{};
    double score_tol = 1e-6;
    std::size_t reps = 2000;
    std::uint64_t seed = 1;
    unsigned parallelism = 1;
    std::string format = "json";

    void validate() const {
        quadrature.validate();
        if (!(score_tol > 0.0) || !std::isfinite(score_tol)) throw UsageError("score_tol must be positive");
        if (reps == 0) throw UsageError("reps must be positive");
        if (parallelism == 0) throw UsageError("parallelism must be positive");
        if (format != "json" && format != "csv") throw UsageError("format must be json or csv");
    }

    AnalysisOptions analysis() const {
        AnalysisOptions a;
        a.quadrature = quadrature;
        return a;
    }

    FitOptions fit() const {
        FitOptions f;
        f.score_tol_per_obs = score_tol;
        return f;
    }
};

/// key = value lines; '#' starts a comment. Unknown keys are errors.
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

// ---------------------------------------------------------------------------
// Dataset ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') { cur += '"'; ++i; }
            else if (c == '"') quoted = false;
            else cur += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    for (auto& f : fields) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return fields;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline std::string join_rows(const std::vector<std::size_t>& rows) {
    std::ostringstream os;
    for (std::size_t k = 0; k < rows.size() && k < 20; ++k) os << (k ? ", " : "") << rows[k];
    if (rows.size() > 20) os << ", ... (" << rows.size() << " rows)";
    return os.str();
}

} // namespace detail

/// One observation per row. A first row that is not numeric is a header;
/// `column` picks a field by header name and is required for multi-column
/// files. Row numbers in errors are 1-based file lines.
inline Sample read_dataset(std::istream& in, const std::string& source, const std::optional<std::string>& column) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(detail::split_csv_line(line));
        line_numbers.push_back(lineno);
    }
    if (rows.empty()) throw UsageError(source + ": no data rows");

    bool has_header = false;
    for (const auto& f : rows.front())
        if (!detail::parse_number(f)) has_header = true;

    std::size_t col = 0;
    if (column) {
        if (!has_header) throw UsageError(source + ": --column given but the file has no header row");
        const auto& header = rows.front();
        const auto it = std::find(header.begin(), header.end(), *column);
        if (it == header.end()) throw UsageError(source + ": no column named '" + *column + "'");
        col = static_cast<std::size_t>(it - header.begin());
    } else if (rows.front().size() > 1) {
        throw UsageError(source + ": file has " + std::to_string(rows.front().size()) +
                         " columns; select one with --column");
    }

    std::vector<double> values;
    std::vector<std::size_t> non_numeric, out_of_range;
    for (std::size_t r = has_header ? 1 : 0; r < rows.size(); ++r) {
        const auto v = col < rows[r].size() ? detail::parse_number(rows[r][col]) : std::nullopt;
        if (!v || !std::isfinite(*v)) { non_numeric.push_back(line_numbers[r]); continue; }
        if (!(*v > 0.0 && *v < 1.0)) { out_of_range.push_back(line_numbers[r]); continue; }
        values.push_back(*v);
    }
    if (!non_numeric.empty()) {
        throw UsageError(source + ": non-numeric value on row(s) " + detail::join_rows(non_numeric));
    }
    if (!out_of_range.empty()) {
        throw UsageError(source + ": value outside (0, 1) on row(s) " + detail::join_rows(out_of_range));
    }
    if (values.empty()) throw UsageError(source + ": no data rows");
    return Sample(std::move(values));
}

inline Sample read_dataset(const std::string& path, const std::optional<std::string>& column) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open data file " + path);
    return read_dataset(in, path, column);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline Json to_json(const KwParams& p) { return {{"alpha", p.alpha()}, {"delta", p.delta()}}; }
inline Json to_json(const LngbParams& p) { return {{"a", p.a()}, {"b", p.b()}, {"beta", p.beta()}}; }

inline Json to_json(const std::variant<KwParams, LngbParams>& v) {
    return std::visit([](const auto& p) { return to_json(p); }, v);
}

template <class Params>
Json fit_json(const FitResult<Params>& f, Family family) {
    Json j;
    j["model"] = family_name(family);
    j["params"] = to_json(f.params);
    j["loglik"] = f.log_likelihood;
    j["aic"] = f.aic;
    j["bic"] = f.bic;
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["gradient_norm"] = f.gradient_norm;
    j["at_boundary"] = f.at_boundary;
    j["n"] = f.n;
    j["diagnostics"] = f.diagnostics;
    return j;
}

inline Json null_json(const NullAnalysis& h) {
    Json j;
    j["null"] = family_name(h.family());
    j["params"] = h.family() == Family::Kw ? to_json(h.null.kw_params()) : to_json(h.null.lngb_params());
    j["pseudo_true"] = to_json(h.pseudo_true);
    j["m_per_obs"] = h.m_per_obs;
    j["var_per_obs"] = h.var_per_obs;
    j["at_boundary"] = h.at_boundary;
    return j;
}

namespace detail {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline void flatten(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array()) {
        std::string joined;
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) joined += ';';
            joined += j[i].is_string() ? j[i].get<std::string>() : j[i].dump();
        }
        out.emplace_back(prefix, joined);
    } else if (j.is_null()) {
        out.emplace_back(prefix, "");
    } else if (j.is_boolean()) {
        out.emplace_back(prefix, j.get<bool>() ? "true" : "false");
    } else if (j.is_number_float()) {
        out.emplace_back(prefix, format_number(j.get<double>()));
    } else if (j.is_number()) {
        out.emplace_back(prefix, j.dump());
    } else {
        out.emplace_back(prefix, j.get<std::string>());
    }
}

} // namespace detail

/// JSON at round-trip precision, or a two-line CSV (flattened keys, then values).
inline void emit(const Json& j, const std::string& format, std::ostream& out) {
    if (format == "csv") {
        std::vector<std::pair<std::string, std::string>> cells;
        detail::flatten(j, "", cells);
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << detail::csv_escape(cells[i].first);
        out << '\n';
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << detail::csv_escape(cells[i].second);
        out << '\n';
    } else {
        out << j.dump(2) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Null-hypothesis flags shared by several subcommands
// ---------------------------------------------------------------------------

struct NullFlags {
    std::string family;
    std::optional<double> alpha, delta, a, b, beta;

    void attach(CLI::App* sub) {
        sub->add_option("--null", family, "Null family")->required()->check(CLI::IsMember({"kw", "lngb"}));
        sub->add_option("--alpha", alpha, "KW alpha");
        sub->add_option("--delta", delta, "KW delta");
        sub->add_option("--a", a, "LNGB a");
        sub->add_option("--b", b, "LNGB b");
        sub->add_option("--beta", beta, "LNGB beta");
    }

    NullHypothesis build() const {
        if (family == "kw") {
            if (!alpha || !delta) throw UsageError("--null kw needs --alpha and --delta");
            return NullHypothesis::kw(KwParams(*alpha, *delta));
        }
        if (!a || !b || !beta) throw UsageError("--null lngb needs --a, --b and --beta");
        return NullHypothesis::lngb(LngbParams(*a, *b, *beta));
    }
};

inline Json null_params_json(const NullHypothesis& h) {
    return h.family() == Family::Kw ? to_json(h.kw_params()) : to_json(h.lngb_params());
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

struct TableFlags {
    int which = 0;
    double lambda = 0.0;
};

namespace detail {

inline std::string fixed(double v, int decimals) {
    if (!std::isfinite(v)) return format_number(v);
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << v;
    return os.str();
}

inline void provenance(std::ostream& out, int which, const RunConfig& cfg, bool simulated) {
    out << "# kwlngb " << KWLNGB_VERSION << " table " << which << '\n';
    if (simulated) out << "# seed=" << cfg.seed << " reps=" << cfg.reps << '\n';
    out << "# quadrature abs_tol=" << format_number(cfg.quadrature.abs_tol)
        << " rel_tol=" << format_number(cfg.quadrature.rel_tol) << " max_depth=" << cfg.quadrature.max_depth
        << '\n';
}

inline const std::vector<std::size_t>& pcs_columns() {
    static const std::vector<std::size_t> ns{25, 40, 70, 85, 100, 150, 400};
    return ns;
}

inline const std::vector<double>& pcs_rows() {
    static const std::vector<double> rows{0.2, 0.5, 0.9, 1.5, 2.0, 3.0, 5.0};
    return rows;
}

} // namespace detail

inline int write_table(const TableFlags& t, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const AnalysisOptions an = cfg.analysis();
    using detail::fixed;
    switch (t.which) {
    case 1: {
        detail::provenance(out, 1, cfg, false);
        out << "# LNGB null a=1.2 b=1.5\n";
        out << "beta,M,Var,alpha_tilde,delta_tilde\n";
        for (double be : {0.2, 0.5, 0.7, 1.2, 1.5, 2.0}) {
            const auto h = null_analysis(NullHypothesis::lngb(LngbParams(1.2, 1.5, be)), an);
            const auto& k = std::get<KwParams>(h.pseudo_true);
            out << fixed(be, 1) << ',' << fixed(h.m_per_obs, 6) << ',' << fixed(h.var_per_obs, 6) << ','
                << fixed(k.alpha(), 4) << ',' << fixed(k.delta(), 4) << '\n';
        }
        return Ok;
    }
    case 2: {
        detail::provenance(out, 2, cfg, false);
        out << "# KW null delta=2.4\n";
        out << "alpha,M,Var,a_tilde,b_tilde,beta_tilde\n";
        for (double al : {0.2, 0.5, 0.7, 1.2, 1.5, 2.0}) {
            const auto h = null_analysis(NullHypothesis::kw(KwParams(al, 2.4)), an);
            const auto& l = std::get<LngbParams>(h.pseudo_true);
            out << fixed(al, 1) << ',' << fixed(h.m_per_obs, 6) << ',' << fixed(h.var_per_obs, 6) << ','
                << fixed(l.a(), 4) << ',' << fixed(l.b(), 4) << ',' << fixed(l.beta(), 4) << '\n';
        }
        return Ok;
    }
    case 3:
    case 4: {
        const bool kw_null = t.which == 3;
        const std::vector<double> grid = kw_null ? std::vector<double>{1.5, 2.0, 2.5, 3.0, 3.5, 4.0}
                                                 : std::vector<double>{0.25, 0.35, 0.45, 1.25, 1.45, 2.0};
        detail::provenance(out, t.which, cfg, false);
        out << (kw_null ? "# KW null delta=2.5, rival at its pseudo-true LNGB\n"
                        : "# LNGB null b=1.5 beta=2.5, rival at its pseudo-true KW\n");
        out << "# PWD lambda=" << detail::format_number(t.lambda) << " direction=kw-from-lngb\n";
        std::vector<std::array<std::string, 5>> cols;
        for (double v : grid) {
            const NullHypothesis h0 = kw_null ? NullHypothesis::kw(KwParams(v, 2.5))
                                              : NullHypothesis::lngb(LngbParams(v, 1.5, 2.5));
            const auto h = null_analysis(h0, an);
            const KwParams kw = kw_null ? h0.kw_params() : std::get<KwParams>(h.pseudo_true);
            const LngbParams lngb = kw_null ? std::get<LngbParams>(h.pseudo_true) : h0.lngb_params();
            std::array<std::string, 5> c;
            int k = 0;
            for (double p : {0.25, 0.55, 0.75}) {
                try {
                    c[k] = std::to_string(min_sample_size(h, p, false, std::nullopt, an).n_required);
                } catch (const InfeasibleError&) {
                    c[k] = "inf";
                }
                ++k;
            }
            c[3] = fixed(hellinger(kw, lngb, cfg.quadrature).value, 4);
            try {
                c[4] = fixed(power_divergence(kw, lngb, t.lambda, PwdDirection::KwFromLngb, cfg.quadrature).value, 4);
            } catch (const InfeasibleError&) {
                c[4] = "inf";
            }
            cols.push_back(c);
        }
        out << (kw_null ? "alpha" : "a");
        for (double v : grid) out << ',' << detail::format_number(v);
        out << '\n';
        const char* labels[] = {"n(p=0.25)", "n(p=0.55)", "n(p=0.75)", "H", "PWD"};
        for (int r = 0; r < 5; ++r) {
            out << labels[r];
            for (const auto& c : cols) out << ',' << c[r];
            out << '\n';
        }
        return Ok;
    }
    case 5:
    case 6:
    case 7:
    case 8: {
        const bool kw_null = t.which <= 6;
        const bool empirical = t.which == 6 || t.which == 8;
        std::vector<NullHypothesis> nulls;
        for (double v : detail::pcs_rows())
            nulls.push_back(kw_null ? NullHypothesis::kw(KwParams(v, 2.5))
                                    : NullHypothesis::lngb(LngbParams(v, 1.25, 1.5)));
        const auto table = pcs_table(nulls, detail::pcs_columns(), empirical ? cfg.reps : 0, cfg.seed,
                                     cfg.parallelism, an, cfg.fit());
        detail::provenance(out, t.which, cfg, empirical);
        out << (kw_null ? "# KW null delta=2.5" : "# LNGB null b=1.25 beta=1.5")
            << (empirical ? ", empirical PCS\n" : ", asymptotic PCS\n");
        out << (kw_null ? "alpha" : "a");
        for (auto n : detail::pcs_columns()) out << ',' << n;
        out << '\n';
        bool unreliable = false;
        for (std::size_t r = 0; r < table.size(); ++r) {
            out << fixed(detail::pcs_rows()[r], 1);
            for (const auto& cell : table[r]) {
                if (empirical) {
                    out << ',' << fixed(cell.empirical->empirical_pcs, 4);
                    unreliable = unreliable || cell.empirical->unreliable;
                } else {
                    out << ',' << (cell.asymptotic ? fixed(*cell.asymptotic, 4) : std::string("nan"));
                }
            }
            out << '\n';
        }
        if (unreliable) {
            err << "warning: some cells lost more than 5% of replicates to fit failures\n";
            return ConvergenceWarning;
        }
        return Ok;
    }
    default:
        throw UsageError("unknown table id " + std::to_string(t.which) + " (expected 1..8)");
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Runs one command. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               const char* config_env = std::getenv("KWLNGB_CONFIG")) {
    CLI::App app{"Discriminate between Kumaraswamy and Libby-Novick generalized beta models", "kwlngb"};
    app.require_subcommand(1);
    app.set_version_flag("--version", KWLNGB_VERSION);

    RunConfig cfg;
    std::optional<std::string> config_path;
    auto* o_config = app.add_option("--config", config_path, "key = value config file (env KWLNGB_CONFIG)");
    auto* o_format = app.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    auto* o_abs = app.add_option("--abs-tol", cfg.quadrature.abs_tol, "Quadrature absolute tolerance");
    auto* o_rel = app.add_option("--rel-tol", cfg.quadrature.rel_tol, "Quadrature relative tolerance");
    auto* o_depth = app.add_option("--max-depth", cfg.quadrature.max_depth, "Quadrature refinement depth");
    auto* o_score = app.add_option("--score-tol", cfg.score_tol, "Fit score tolerance per observation");
    o_config->capture_default_str();

    // fit
    auto* fit = app.add_subcommand("fit", "Maximum likelihood fit of one family");
    std::string model;
    std::string data;
    std::optional<std::string> column;
    fit->add_option("--model", model, "kw or lngb")->required()->check(CLI::IsMember({"kw", "lngb"}));
    fit->add_option("--data", data, "CSV file")->required();
    fit->add_option("--column", column, "Column name for multi-column files");

    // discriminate
    auto* disc = app.add_subcommand("discriminate", "Fit both families and select one");
    disc->add_option("--data", data, "CSV file")->required();
    disc->add_option("--column", column, "Column name for multi-column files");

    // pcs
    auto* pcs_cmd = app.add_subcommand("pcs", "Asymptotic probability of correct selection");
    NullFlags null_flags;
    null_flags.attach(pcs_cmd);
    std::size_t n = 0;
    pcs_cmd->add_option("--n", n, "Sample size")->required()->check(CLI::PositiveNumber);

    // distance
    auto* dist = app.add_subcommand("distance", "Pseudo-distance between a KW and an LNGB law");
    std::string measure;
    std::optional<double> lambda;
    std::string direction = "kw-from-lngb";
    std::string method = "quadrature";
    std::vector<double> kw_vals, lngb_vals;
    bool paper_formula = false;
    dist->add_option("--measure", measure)->required()->check(CLI::IsMember({"hellinger", "pwd", "ks"}));
    dist->add_option("--lambda", lambda, "Power divergence index");
    dist->add_option("--direction", direction)->check(CLI::IsMember({"kw-from-lngb", "lngb-from-kw"}));
    dist->add_option("--method", method, "Hellinger evaluator")->check(CLI::IsMember({"quadrature", "closed-form"}));
    dist->add_option("--kw", kw_vals, "alpha delta")->expected(2);
    dist->add_option("--lngb", lngb_vals, "a b beta")->expected(3);
    dist->add_flag("--paper-formula", paper_formula, "Report Hellinger as 1 - affinity");

    // samplesize
    auto* ss = app.add_subcommand("samplesize", "Minimum n for a protection level");
    NullFlags ss_null;
    ss_null.attach(ss);
    double p = 0.0;
    std::optional<double> tolerance;
    ss->add_option("--p", p, "Protection level in (0, 1)")->required();
    ss->add_option("--tolerance", tolerance, "Tolerance distance carried into the report");
    ss->add_flag("--paper-formula", paper_formula, "Use z^2 Var / |M|");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte Carlo probability of correct selection");
    NullFlags sim_null;
    sim_null.attach(sim);
    std::size_t sim_n = 0;
    sim->add_option("--n", sim_n, "Sample size")->required()->check(CLI::PositiveNumber);
    auto* o_reps = sim->add_option("--reps", cfg.reps, "Replicates");
    auto* o_seed = sim->add_option("--seed", cfg.seed, "Seed");
    auto* o_par = sim->add_option("--parallelism", cfg.parallelism, "Worker threads");

    // tables
    auto* tab = app.add_subcommand("tables", "Regenerate a reference table as CSV");
    TableFlags tflags;
    tab->add_option("--which", tflags.which, "Table id 1..8")->required();
    tab->add_option("--lambda", tflags.lambda, "PWD index for tables 3 and 4");
    auto* o_treps = tab->add_option("--reps", cfg.reps, "Replicates per cell (tables 6, 8)");
    auto* o_tseed = tab->add_option("--seed", cfg.seed, "Seed");
    auto* o_tpar = tab->add_option("--parallelism", cfg.parallelism, "Worker threads");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return InputError;
    }

    try {
        // Config file values apply only where no flag was given.
        if (!config_path && config_env && *config_env) config_path = config_env;
        if (config_path) {
            const auto kv = read_config_file(*config_path);
            auto given = [](CLI::Option* o) { return o->count() > 0; };
            auto num = [](const std::string& key, const std::string& v) {
                const auto d = detail::parse_number(v);
                if (!d) throw UsageError("config: " + key + " is not a number: " + v);
                return *d;
            };
            for (const auto& [key, value] : kv) {
                if (key == "abs_tol") { if (!given(o_abs)) cfg.quadrature.abs_tol = num(key, value); }
                else if (key == "rel_tol") { if (!given(o_rel)) cfg.quadrature.rel_tol = num(key, value); }
                else if (key == "max_depth") { if (!given(o_depth)) cfg.quadrature.max_depth = static_cast<int>(num(key, value)); }
                else if (key == "score_tol") { if (!given(o_score)) cfg.score_tol = num(key, value); }
                else if (key == "reps") { if (!given(o_reps) && !given(o_treps)) cfg.reps = static_cast<std::size_t>(num(key, value)); }
                else if (key == "seed") { if (!given(o_seed) && !given(o_tseed)) cfg.seed = static_cast<std::uint64_t>(num(key, value)); }
                else if (key == "parallelism") { if (!given(o_par) && !given(o_tpar)) cfg.parallelism = static_cast<unsigned>(num(key, value)); }
                else if (key == "format") { if (!given(o_format)) cfg.format = value; }
                else throw UsageError("config: unknown key '" + key + "'");
            }
        }
        cfg.validate();
        const AnalysisOptions an = cfg.analysis();

        if (fit->parsed()) {
            const Sample s = read_dataset(data, column);
            Json j{{"command", "fit"}};
            bool converged = false;
            if (model == "kw") {
                const auto f = fit_kw(s, cfg.fit());
                j.update(fit_json(f, Family::Kw));
                converged = f.converged;
            } else {
                const auto f = fit_lngb(s, cfg.fit());
                j.update(fit_json(f, Family::Lngb));
                converged = f.converged;
            }
            emit(j, cfg.format, out);
            if (!converged) {
                err << "warning: fit did not converge\n";
                return ConvergenceWarning;
            }
            return Ok;
        }

        if (disc->parsed()) {
            const Sample s = read_dataset(data, column);
            SelectionOptions so;
            so.analysis = an;
            so.fit = cfg.fit();
            const auto r = select_model(s, so);
            Json j{{"command", "discriminate"}, {"n", s.size()}};
            j["kw"] = fit_json(r.kw_fit, Family::Kw);
            j["lngb"] = fit_json(r.lngb_fit, Family::Lngb);
            j["w_n"] = r.w_n;
            j["pcs_lngb"] = r.pcs_lngb;
            j["pcs_kw"] = r.pcs_kw;
            j["selected"] = family_name(r.selected);
            j["selected_variance_rule"] = family_name(r.selected_variance_rule);
            j["lngb_null"] = r.lngb_null ? null_json(*r.lngb_null) : Json(nullptr);
            j["kw_null"] = r.kw_null ? null_json(*r.kw_null) : Json(nullptr);
            j["fallback"] = r.fallback;
            j["warnings"] = r.warnings;
            emit(j, cfg.format, out);
            for (const auto& w : r.warnings) err << "warning: " << w << '\n';
            return r.fallback ? ConvergenceWarning : Ok;
        }

        if (pcs_cmd->parsed()) {
            const auto h = null_analysis(null_flags.build(), an);
            Json j{{"command", "pcs"}};
            j.update(null_json(h));
            j["n"] = n;
            j["pcs"] = pcs(h, n, an);
            j["nested"] = h.nested(an);
            emit(j, cfg.format, out);
            return Ok;
        }

        if (dist->parsed()) {
            if (kw_vals.empty() && lngb_vals.empty()) throw UsageError("distance needs --kw and/or --lngb");
            std::string pairing = "given";
            std::optional<KwParams> kw;
            std::optional<LngbParams> lngb;
            if (!kw_vals.empty()) kw.emplace(kw_vals[0], kw_vals[1]);
            if (!lngb_vals.empty()) lngb.emplace(lngb_vals[0], lngb_vals[1], lngb_vals[2]);
            if (!lngb) { lngb = pseudo_true_lngb(*kw, an); pairing = "pseudo-true LNGB"; }
            if (!kw) { kw = pseudo_true_kw(*lngb, an); pairing = "pseudo-true KW"; }

            DivergenceResult d;
            if (measure == "hellinger") {
                d = method == "closed-form" ? hellinger_closed_form(*kw, *lngb) : hellinger(*kw, *lngb, cfg.quadrature);
            } else if (measure == "pwd") {
                if (!lambda) throw UsageError("--measure pwd needs --lambda");
                const auto dir = direction == "kw-from-lngb" ? PwdDirection::KwFromLngb : PwdDirection::LngbFromKw;
                d = power_divergence(*kw, *lngb, *lambda, dir, cfg.quadrature);
            } else {
                d = ks_distance(*kw, *lngb);
            }
            Json j{{"command", "distance"}, {"measure", measure_name(d.measure)}};
            j["value"] = (paper_formula && d.hellinger_one_minus) ? *d.hellinger_one_minus : d.value;
            j["method"] = method_name(d.method);
            j["kw"] = to_json(*kw);
            j["lngb"] = to_json(*lngb);
            j["pairing"] = pairing;
            if (d.lambda) j["lambda"] = *d.lambda;
            if (d.direction) j["direction"] = direction_name(*d.direction);
            if (d.affinity) {
                j["affinity"] = *d.affinity;
                j["hellinger_2_minus_2a"] = d.value;
                j["hellinger_1_minus_a"] = *d.hellinger_one_minus;
            }
            if (d.argmax) j["argmax"] = *d.argmax;
            emit(j, cfg.format, out);
            return Ok;
        }

        if (ss->parsed()) {
            const auto h = null_analysis(ss_null.build(), an);
            const auto r = min_sample_size(h, p, paper_formula, tolerance, an);
            Json j{{"command", "samplesize"}};
            j.update(null_json(h));
            j["p"] = r.protection_level;
            j["n_required"] = r.n_required;
            j["paper_formula"] = r.paper_formula;
            j["tolerance_distance"] = r.tolerance_distance ? Json(*r.tolerance_distance) : Json(nullptr);
            emit(j, cfg.format, out);
            return Ok;
        }

        if (sim->parsed()) {
            const SimulationConfig sc{sim_null.build(), sim_n, cfg.reps, cfg.seed, cfg.parallelism};
            const auto r = run_simulation(sc, an, cfg.fit());
            Json j{{"command", "simulate"}, {"null", family_name(sc.null.family())}};
            j["params"] = null_params_json(sc.null);
            j["n"] = sc.n;
            j["reps"] = sc.reps;
            j["seed"] = sc.seed;
            j["successes"] = r.successes;
            j["empirical_pcs"] = r.empirical_pcs;
            j["asymptotic_pcs"] = r.asymptotic_pcs ? Json(*r.asymptotic_pcs) : Json(nullptr);
            j["fit_failures"] = r.fit_failures;
            j["unreliable"] = r.unreliable;
            if (cfg.format == "csv") {
                // Scheduling details go in comments so the body depends only on the config.
                out << "# parallelism=" << sc.parallelism << " wall_time_seconds="
                    << detail::format_number(r.wall_time.count()) << '\n';
            } else {
                j["parallelism"] = sc.parallelism;
                j["wall_time_seconds"] = r.wall_time.count();
            }
            emit(j, cfg.format, out);
            if (r.unreliable) {
                err << "warning: more than 5% of replicates failed to fit\n";
                return ConvergenceWarning;
            }
            return Ok;
        }

        if (tab->parsed()) return write_table(tflags, cfg, out, err);
        return InputError;
    } catch (const InfeasibleError& e) {
        err << "error: " << e.what() << '\n';
        return Infeasible;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << " (best estimate " << detail::format_number(e.estimate())
            << ", error bound " << detail::format_number(e.error_bound()) << ")\n";
        return ConvergenceWarning;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return InputError;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return InputError;
    }
}

} // namespace kwlngb::cli
