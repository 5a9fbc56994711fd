#include "sacesim/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sacesim/errors.hpp"
#include "sacesim/format.hpp"

namespace sacesim {

namespace fs = std::filesystem;

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else if (c != '\r') {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace {

std::string opt(const std::optional<double>& v) { return format_optional(v); }

std::string lower_of(const std::optional<Interval>& i) { return i ? format_double(i->lower) : std::string(); }
std::string upper_of(const std::optional<Interval>& i) { return i ? format_double(i->upper) : std::string(); }

const ScenarioResult& scenario_of(const StudyResult& result, const std::string& id) {
    for (const auto& sc : result.scenarios) {
        if (sc.spec.id == id) return sc;
    }
    throw DomainError("unknown scenario '" + id + "'");
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ExecutionError("cannot open '" + path.string() + "' for writing");
    return out;
}

template <class F>
void write_file(const fs::path& path, F&& writer) {
    auto out = open_out(path);
    writer(out);
    out.flush();
    if (!out) throw ExecutionError("failed writing '" + path.string() + "'");
}

// Panel positions: survival effect rows and outcome effect columns, each in
// descending order.
struct PanelIndex {
    std::map<double, int, std::greater<>> row, col;

    explicit PanelIndex(const StudyResult& result) {
        for (const auto& sc : result.scenarios) {
            row.emplace(sc.spec.effect_on_survival_logodds, 0);
            col.emplace(sc.spec.effect_on_outcome, 0);
        }
        int k = 0;
        for (auto& [v, i] : row) i = k++;
        k = 0;
        for (auto& [v, i] : col) i = k++;
    }
};

const std::vector<std::string> kRecordColumns = {
    "scenario_id", "effect_on_outcome", "effect_on_survival_logodds", "sim_index", "theta2s",
    "n_patients", "n_survivors", "n_always", "n_treatment_only", "n_control_only", "n_never",
    "method", "covariate_set", "status", "estimate", "se", "ci_lower", "ci_upper",
    "bound_lower", "bound_upper", "n_analyzed", "message"};

void write_header(std::ostream& out, const std::vector<std::string>& columns) {
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
}

}  // namespace

void write_records_csv(const StudyResult& result, std::ostream& out) {
    write_header(out, kRecordColumns);
    for (const auto& sc : result.scenarios) {
        for (const auto& r : sc.records) {
            std::ostringstream prefix;
            prefix << csv_field(r.scenario_id) << ',' << format_double(r.effect_on_outcome) << ','
                   << format_double(r.effect_on_survival_logodds) << ',' << r.sim_index << ',' << opt(r.theta2s)
                   << ',' << r.n_patients << ',' << r.n_survivors << ',' << r.strata.always << ','
                   << r.strata.treatment_only << ',' << r.strata.control_only << ',' << r.strata.never << ',';
            const std::string p = prefix.str();
            for (const auto& e : r.estimates) {
                out << p << to_string(e.method) << ',' << to_string(e.covariate_set) << ',' << to_string(e.status)
                    << ',' << opt(e.estimate) << ',' << opt(e.se) << ',' << lower_of(e.ci) << ',' << upper_of(e.ci)
                    << ',' << lower_of(e.bounds) << ',' << upper_of(e.bounds) << ','
                    << format_double(e.n_analyzed) << ',' << csv_field(e.message) << '\n';
            }
        }
    }
}

void write_summary_csv(const StudyResult& result, std::ostream& out) {
    out << "scenario_id,effect_on_outcome,effect_on_survival_logodds,method,covariate_set,estimand,estimand_value,"
           "mean_estimate,mean_se,mean_ci_lower,mean_ci_upper,bias,bias_mc_se,mse,mse_mc_se,variance,coverage,"
           "coverage_mc_se,n_sim_used,n_failed,avg_n_analyzed\n";
    for (const auto& s : result.summaries) {
        const auto& spec = scenario_of(result, s.scenario_id).spec;
        out << csv_field(s.scenario_id) << ',' << format_double(spec.effect_on_outcome) << ','
            << format_double(spec.effect_on_survival_logodds) << ',' << to_string(s.method) << ','
            << to_string(s.covariate_set) << ',' << to_string(s.estimand) << ',' << format_double(s.estimand_value)
            << ',' << format_double(s.mean.mean) << ',' << format_double(s.mean.empirical_se) << ','
            << format_double(s.mean.ci.lower) << ',' << format_double(s.mean.ci.upper) << ','
            << format_double(s.bias.value) << ',' << format_double(s.bias.mc_se) << ','
            << format_double(s.mse.value) << ',' << format_double(s.mse.mc_se) << ',' << format_double(s.variance)
            << ',' << format_double(s.coverage.value) << ',' << format_double(s.coverage.mc_se) << ','
            << s.n_sim_used << ',' << s.n_failed << ',' << format_double(s.avg_n_analyzed) << '\n';
    }
}

void write_estimands_csv(const StudyResult& result, std::ostream& out) {
    out << "scenario_id,effect_on_outcome,effect_on_survival_logodds,theta1,theta2,theta2_mc_se,n_defined\n";
    for (const auto& sc : result.scenarios) {
        out << csv_field(sc.spec.id) << ',' << format_double(sc.spec.effect_on_outcome) << ','
            << format_double(sc.spec.effect_on_survival_logodds) << ',' << format_double(sc.estimands.theta1) << ','
            << format_double(sc.estimands.theta2) << ',' << format_double(sc.estimands.theta2_mc_se) << ','
            << sc.estimands.theta2_per_sim.size() << '\n';
    }
}

void write_analyzed_csv(const StudyResult& result, std::ostream& out) {
    out << "effect_on_survival_logodds,n_sim,mi_n,cca_n,sace_all_n,sace_no_hc_n,sace_no_ga_n,survivors_pct,"
           "sace_all_pct,sace_no_hc_pct,sace_no_ga_pct,true_always_pct\n";
    for (const auto& a : result.analyzed) {
        out << format_double(a.effect_on_survival_logodds) << ',' << a.n_sim << ',' << format_double(a.mi_n) << ','
            << format_double(a.cca_n);
        for (double v : a.sace_n) out << ',' << format_double(v);
        out << ',' << format_double(a.survivors_pct);
        for (double v : a.estimated_always_pct) out << ',' << format_double(v);
        out << ',' << format_double(a.true_always_pct) << '\n';
    }
}

void write_bounds_csv(const StudyResult& result, std::ostream& out) {
    out << "scenario_id,method,n_used,n_failed,mean_lower,mean_upper,contains_sace_estimate,contains_oracle\n";
    for (const auto& b : result.bounds) {
        out << csv_field(b.scenario_id) << ',' << to_string(b.method) << ',' << b.n_used << ',' << b.n_failed << ','
            << format_double(b.mean_lower) << ',' << format_double(b.mean_upper) << ','
            << format_double(b.contains_sace_estimate) << ',' << format_double(b.contains_oracle) << '\n';
    }
}

void write_report(const StudyResult& result, std::ostream& out) {
    auto f = [](double v) { return format_fixed(v, 4); };
    out << "Bias against theta1 pooled by survival odds ratio\n";
    out << "odds_ratio  method  covariates  bias  mc_se  n\n";
    for (const auto& pb : pooled_bias_by_survival_effect(result)) {
        out << f(std::exp(pb.effect_on_survival_logodds)) << "  " << to_string(pb.method) << "  "
            << to_string(pb.covariate_set) << "  " << f(pb.bias.value) << "  " << f(pb.bias.mc_se) << "  " << pb.n
            << '\n';
    }
    out << "\nAverage number of patients analyzed per trial\n";
    out << "odds_ratio  MI  CCA  SACE_ALL  SACE_NO_HC  SACE_NO_GA  survivors%  always%(est ALL)  always%(true)\n";
    for (const auto& a : result.analyzed) {
        out << f(std::exp(a.effect_on_survival_logodds)) << "  " << f(a.mi_n) << "  " << f(a.cca_n) << "  "
            << f(a.sace_n[0]) << "  " << f(a.sace_n[1]) << "  " << f(a.sace_n[2]) << "  " << f(a.survivors_pct)
            << "  " << f(a.estimated_always_pct[0]) << "  " << f(a.true_always_pct) << '\n';
    }
    out << "\nPer-scenario performance\n";
    out << "scenario  method  covariates  estimand  value  mean  bias  mse  coverage  used\n";
    for (const auto& s : result.summaries) {
        out << s.scenario_id << "  " << to_string(s.method) << "  " << to_string(s.covariate_set) << "  "
            << to_string(s.estimand) << "  " << f(s.estimand_value) << "  " << f(s.mean.mean) << "  "
            << f(s.bias.value) << "  " << f(s.mse.value) << "  " << f(s.coverage.value) << "  " << s.n_sim_used
            << '\n';
    }
    if (!result.warnings.empty()) {
        out << "\nWarnings\n";
        for (const auto& w : result.warnings) out << w << '\n';
    }
}

std::string manifest_json(const StudyResult& result) {
    nlohmann::ordered_json j;
    j["version"] = result.provenance.version;
    j["master_seed"] = result.provenance.master_seed;
    j["plan_digest"] = result.provenance.plan_digest;
    j["n_sim"] = result.plan.n_sim;
    j["workers"] = result.provenance.workers;
    j["elapsed_seconds"] = result.provenance.elapsed_seconds;
    auto& per = j["scenario_seconds"] = nlohmann::ordered_json::object();
    for (const auto& [id, secs] : result.provenance.scenario_seconds) per[id] = secs;
    j["warnings"] = result.warnings;
    return j.dump(2) + "\n";
}

namespace {

double parse_number(const std::string& text, const char* column, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ValidationError(column, "line " + std::to_string(line) + ": not a number '" + text + "'");
    }
    return v;
}

std::optional<double> parse_optional(const std::string& text, const char* column, std::size_t line) {
    if (text.empty()) return std::nullopt;
    return parse_number(text, column, line);
}

int parse_int(const std::string& text, const char* column, std::size_t line) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ValidationError(column, "line " + std::to_string(line) + ": not an integer '" + text + "'");
    }
    return v;
}

std::optional<Interval> parse_interval(const std::string& lo, const std::string& hi, const char* column,
                                       std::size_t line) {
    if (lo.empty() && hi.empty()) return std::nullopt;
    return Interval{parse_number(lo, column, line), parse_number(hi, column, line)};
}

}  // namespace

std::vector<ScenarioResult> read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("records", "empty records file");
    if (split_csv_line(line) != kRecordColumns) throw ValidationError("records", "unexpected header");

    std::vector<ScenarioSpec> specs;
    std::map<std::string, std::vector<SimulationRecord>> by_scenario;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != kRecordColumns.size()) {
            throw ValidationError("records", "line " + std::to_string(line_no) + ": expected " +
                                                 std::to_string(kRecordColumns.size()) + " fields");
        }
        const std::string& id = f[0];
        auto& recs = by_scenario[id];
        if (recs.empty() && std::none_of(specs.begin(), specs.end(), [&](const auto& s) { return s.id == id; })) {
            ScenarioSpec spec;
            spec.id = id;
            spec.effect_on_outcome = parse_number(f[1], "effect_on_outcome", line_no);
            spec.effect_on_survival_logodds = parse_number(f[2], "effect_on_survival_logodds", line_no);
            specs.push_back(spec);
        }
        const auto sim = static_cast<std::uint64_t>(parse_number(f[3], "sim_index", line_no));
        if (recs.empty() || recs.back().sim_index != sim) {
            SimulationRecord r;
            r.scenario_id = id;
            r.sim_index = sim;
            r.effect_on_outcome = parse_number(f[1], "effect_on_outcome", line_no);
            r.effect_on_survival_logodds = parse_number(f[2], "effect_on_survival_logodds", line_no);
            r.theta2s = parse_optional(f[4], "theta2s", line_no);
            r.n_patients = parse_int(f[5], "n_patients", line_no);
            r.n_survivors = parse_int(f[6], "n_survivors", line_no);
            r.strata = {parse_int(f[7], "n_always", line_no), parse_int(f[8], "n_treatment_only", line_no),
                        parse_int(f[9], "n_control_only", line_no), parse_int(f[10], "n_never", line_no)};
            recs.push_back(std::move(r));
        }
        EstimateRecord e;
        try {
            e.method = parse_method(f[11]);
            e.covariate_set = parse_covariate_variant(f[12]);
            e.status = parse_status(f[13]);
        } catch (const std::exception& ex) {
            throw ValidationError("records", "line " + std::to_string(line_no) + ": " + ex.what());
        }
        e.estimate = parse_optional(f[14], "estimate", line_no);
        e.se = parse_optional(f[15], "se", line_no);
        e.ci = parse_interval(f[16], f[17], "ci", line_no);
        e.bounds = parse_interval(f[18], f[19], "bounds", line_no);
        e.n_analyzed = parse_number(f[20], "n_analyzed", line_no);
        e.message = f[21];
        auto& rec = recs.back();
        if (rec.n_patients == 0 && rec.error.empty()) rec.error = e.message;
        rec.estimates.push_back(std::move(e));
    }

    std::vector<ScenarioResult> out;
    for (const auto& spec : specs) {
        auto& recs = by_scenario[spec.id];
        for (const auto& r : recs) {
            if (r.estimates.size() != kPointRecordsPerSim + kBoundsRecordsPerSim) {
                throw ValidationError("records", "scenario " + spec.id + " simulation " +
                                                     std::to_string(r.sim_index) + " has " +
                                                     std::to_string(r.estimates.size()) + " estimate rows");
            }
        }
        out.push_back(collect_scenario(spec, std::move(recs)));
    }
    return out;
}

std::vector<ScenarioResult> read_records_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("records", "cannot open '" + path.string() + "'");
    return read_records_csv(in);
}

void export_summaries(const StudyResult& result, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_file(out_dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(result, o); });
    write_file(out_dir / "estimands.csv", [&](std::ostream& o) { write_estimands_csv(result, o); });
    write_file(out_dir / "analyzed.csv", [&](std::ostream& o) { write_analyzed_csv(result, o); });
    write_file(out_dir / "bounds.csv", [&](std::ostream& o) { write_bounds_csv(result, o); });
    write_file(out_dir / "report.txt", [&](std::ostream& o) { write_report(result, o); });
}

void export_results(const StudyResult& result, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_file(out_dir / "records.csv", [&](std::ostream& o) { write_records_csv(result, o); });
    export_summaries(result, out_dir);
    write_file(out_dir / "manifest.json", [&](std::ostream& o) { o << manifest_json(result); });
    write_run_plan(result.plan, out_dir / "plan.yaml");
}

void emit_plot_data(const StudyResult& result, const fs::path& out_dir) {
    if (result.summaries.empty()) throw DomainError("emit_plot_data: no summaries");
    fs::create_directories(out_dir);
    const PanelIndex panels(result);
    const auto band = coverage_band(result.plan.confidence_level, result.plan.n_sim);
    const std::string key_header =
        "panel_row,panel_col,scenario_id,odds_ratio,effect_on_outcome,method,covariate_set,estimand";
    auto key = [&](const PerformanceSummary& s) {
        const auto& spec = scenario_of(result, s.scenario_id).spec;
        std::ostringstream k;
        k << panels.row.at(spec.effect_on_survival_logodds) << ',' << panels.col.at(spec.effect_on_outcome) << ','
          << csv_field(s.scenario_id) << ',' << format_double(spec.odds_ratio()) << ','
          << format_double(spec.effect_on_outcome) << ',' << to_string(s.method) << ','
          << to_string(s.covariate_set) << ',' << to_string(s.estimand);
        return k.str();
    };
    const double level = result.plan.confidence_level;

    write_file(out_dir / "plot_estimates.csv", [&](std::ostream& o) {
        o << key_header << ",estimand_value,mean_estimate,ci_lower,ci_upper\n";
        for (const auto& s : result.summaries) {
            o << key(s) << ',' << format_double(s.estimand_value) << ',' << format_double(s.mean.mean) << ','
              << format_double(s.mean.ci.lower) << ',' << format_double(s.mean.ci.upper) << '\n';
        }
    });
    auto mc_panel = [&](const char* file, auto member) {
        write_file(out_dir / file, [&](std::ostream& o) {
            o << key_header << ",value,mc_se,ci_lower,ci_upper\n";
            for (const auto& s : result.summaries) {
                const McValue& v = s.*member;
                const auto ci = v.ci(level);
                o << key(s) << ',' << format_double(v.value) << ',' << format_double(v.mc_se) << ','
                  << format_double(ci.lower) << ',' << format_double(ci.upper) << '\n';
            }
        });
    };
    mc_panel("plot_bias.csv", &PerformanceSummary::bias);
    mc_panel("plot_mse.csv", &PerformanceSummary::mse);
    write_file(out_dir / "plot_coverage.csv", [&](std::ostream& o) {
        o << key_header << ",value,mc_se,ci_lower,ci_upper,band_lower,band_upper\n";
        for (const auto& s : result.summaries) {
            const auto ci = s.coverage.ci(level);
            o << key(s) << ',' << format_double(s.coverage.value) << ',' << format_double(s.coverage.mc_se) << ','
              << format_double(ci.lower) << ',' << format_double(ci.upper) << ',' << format_double(band.lower)
              << ',' << format_double(band.upper) << '\n';
        }
    });
}

}  // namespace sacesim
