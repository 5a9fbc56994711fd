#include "sacesim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "sacesim/errors.hpp"
#include "sacesim/format.hpp"
#include "sacesim/rng.hpp"

namespace sacesim {

std::string_view to_string(Covariate c) {
    switch (c) {
        case Covariate::GestationalAge: return "gestational_age";
        case Covariate::HeadCircumference: return "head_circumference";
        case Covariate::Ses: return "ses";
        case Covariate::Apgar: return "apgar";
    }
    return "?";
}

std::string_view to_string(CovariateVariant v) {
    switch (v) {
        case CovariateVariant::All: return "ALL";
        case CovariateVariant::NoHc: return "NO_HC";
        case CovariateVariant::NoGa: return "NO_GA";
    }
    return "?";
}

Covariate parse_covariate(std::string_view name) {
    for (auto c : {Covariate::GestationalAge, Covariate::HeadCircumference, Covariate::Ses, Covariate::Apgar}) {
        if (to_string(c) == name) return c;
    }
    throw DomainError("unknown covariate '" + std::string(name) + "'");
}

CovariateVariant parse_covariate_variant(std::string_view name) {
    for (auto v : kCovariateVariants) {
        if (to_string(v) == name) return v;
    }
    throw DomainError("unknown covariate set '" + std::string(name) + "'");
}

CovariateSet apply_variant(const CovariateSet& set, CovariateVariant variant) {
    CovariateSet out;
    for (Covariate c : set) {
        if (variant == CovariateVariant::NoHc && c == Covariate::HeadCircumference) continue;
        if (variant == CovariateVariant::NoGa && c == Covariate::GestationalAge) continue;
        out.push_back(c);
    }
    return out;
}

double ScenarioSpec::odds_ratio() const { return std::exp(effect_on_survival_logodds); }

std::vector<ScenarioSpec> scenario_grid() {
    const CovariateSet sace = {Covariate::GestationalAge, Covariate::HeadCircumference, Covariate::Apgar};
    const CovariateSet mi = {Covariate::GestationalAge, Covariate::HeadCircumference, Covariate::Ses};
    const double outcome_effects[] = {5.0, 0.0, -5.0};
    const double survival_effects[] = {std::log(2.0), 0.0, std::log(0.5)};
    std::vector<ScenarioSpec> grid;
    char id = 'A';
    for (double md : outcome_effects) {
        for (double lor : survival_effects) {
            grid.push_back({std::string(1, id++), md, lor, sace, mi});
        }
    }
    return grid;
}

int plan_n_sim(double sigma, double delta, double alpha) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("plan_n_sim: sigma must be positive");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("plan_n_sim: delta must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("plan_n_sim: alpha must lie in (0, 1)");
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const double ratio = z * sigma / delta;
    return static_cast<int>(std::ceil(ratio * ratio));
}

DgmParams default_dgm_params() {
    DgmParams p;
    // Marginal outcome mean 100, SD ~14.5 (BSID-like scale).
    p.outcome = {-36.3684, 0.6, 0.4, 1.0, 11.0};
    // Intercept calibrated to 84 % marginal survival with no treatment effect.
    p.survival = {-23.96207, 0.12, 0.05, 0.2};
    auto& cm = p.covariates;
    cm.apgar_probs = {0.02, 0.02, 0.03, 0.04, 0.06, 0.10, 0.17, 0.25, 0.22, 0.09};
    cm.gestational_age_means = {186, 188, 190, 192, 194, 196, 198, 200, 202, 204};
    cm.head_circumference_means = {24.6, 24.8, 25.0, 25.2, 25.4, 25.6, 25.8, 26.0, 26.2, 26.4};
    // SD 14 days and 1.8 cm, correlation 0.6.
    cm.covariance << 196.0, 15.12, 15.12, 3.24;
    const std::array<double, kSesLevels> ses = {0.03, 0.05, 0.09, 0.12, 0.15, 0.16, 0.14, 0.11, 0.08, 0.05, 0.02};
    cm.ses_probs.fill(ses);
    p.n_per_trial = 500;
    p.allocation = {250, 250};
    return p;
}

RunPlan default_run_plan(std::uint64_t master_seed) {
    RunPlan plan;
    plan.scenarios = scenario_grid();
    plan.dgm = default_dgm_params();
    plan.master_seed = master_seed;
    return plan;
}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& message) {
    throw ValidationError(field, message);
}

template <std::size_t N>
void check_probabilities(const std::array<double, N>& probs, const std::string& field) {
    double sum = 0.0;
    for (double v : probs) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail(field, "probabilities must be finite and nonnegative");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9) fail(field, "probabilities must sum to 1 (got " + format_double(sum) + ")");
}

void check_finite(double v, const std::string& field) {
    if (!std::isfinite(v)) fail(field, "must be finite");
}

}  // namespace

void validate(const DgmParams& p, const std::string& prefix) {
    const std::string o = prefix + ".outcome.";
    check_finite(p.outcome.intercept, o + "intercept");
    check_finite(p.outcome.gestational_age, o + "gestational_age");
    check_finite(p.outcome.head_circumference, o + "head_circumference");
    check_finite(p.outcome.ses, o + "ses");
    if (!(p.outcome.residual_sd > 0.0) || !std::isfinite(p.outcome.residual_sd)) {
        fail(o + "residual_sd", "must be > 0");
    }
    const std::string s = prefix + ".survival.";
    check_finite(p.survival.intercept, s + "intercept");
    check_finite(p.survival.gestational_age, s + "gestational_age");
    check_finite(p.survival.head_circumference, s + "head_circumference");
    check_finite(p.survival.apgar, s + "apgar");

    const std::string c = prefix + ".covariates.";
    check_probabilities(p.covariates.apgar_probs, c + "apgar_probs");
    for (int a = 0; a < kApgarLevels; ++a) {
        check_finite(p.covariates.gestational_age_means[a], c + "gestational_age_means");
        check_finite(p.covariates.head_circumference_means[a], c + "head_circumference_means");
        check_probabilities(p.covariates.ses_probs[a], c + "ses_probs[" + std::to_string(a) + "]");
    }
    try {
        BivariateNormal check(p.covariates.covariance);
    } catch (const DomainError& e) {
        fail(c + "covariance", "must be symmetric positive-definite");
    }
    if (p.allocation.control < 2) fail(prefix + ".allocation.control", "must be >= 2");
    if (p.allocation.treatment < 2) fail(prefix + ".allocation.treatment", "must be >= 2");
    if (p.n_per_trial != p.allocation.total()) {
        fail(prefix + ".n_per_trial", "must equal allocation.control + allocation.treatment");
    }
}

void validate(const RunPlan& plan) {
    if (plan.n_sim < 2) fail("n_sim", "must be >= 2");
    if (!(plan.confidence_level > 0.0 && plan.confidence_level < 1.0)) {
        fail("confidence_level", "must lie in (0, 1)");
    }
    if (plan.mi_count < 2) fail("mi_count", "must be >= 2");
    if (plan.bootstrap_reps < 2) fail("bootstrap_reps", "must be >= 2");
    if (!std::isfinite(plan.chiba_alpha.lower) || !std::isfinite(plan.chiba_alpha.upper) ||
        plan.chiba_alpha.lower > plan.chiba_alpha.upper) {
        fail("chiba_alpha", "must be a finite [min, max] pair with min <= max");
    }
    if (plan.scenarios.empty()) fail("scenarios", "must not be empty");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < plan.scenarios.size(); ++i) {
        const auto& sc = plan.scenarios[i];
        const std::string f = "scenarios[" + std::to_string(i) + "]";
        if (sc.id.empty() || sc.id.find_first_of(",\"\n\r ") != std::string::npos) {
            fail(f + ".id", "must be nonempty without commas, quotes or whitespace");
        }
        if (!ids.insert(sc.id).second) fail(f + ".id", "duplicate scenario id '" + sc.id + "'");
        check_finite(sc.effect_on_outcome, f + ".effect_on_outcome");
        check_finite(sc.effect_on_survival_logodds, f + ".effect_on_survival_logodds");
        for (const auto& [name, set] : {std::pair{"sace_covariates", &sc.sace_covariates},
                                        std::pair{"mi_covariates", &sc.mi_covariates}}) {
            if (set->empty()) fail(f + "." + name, "must be a nonempty covariate subset");
            std::set<Covariate> seen(set->begin(), set->end());
            if (seen.size() != set->size()) fail(f + "." + name, "contains duplicates");
        }
    }
    validate(plan.dgm, "dgm");
}

// ---------------------------------------------------------------------------
// YAML plan format

namespace {

using Keys = std::initializer_list<std::string_view>;

void check_keys(const YAML::Node& node, const std::string& path, Keys allowed) {
    if (!node.IsMap()) fail(path.empty() ? "<root>" : path, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            fail(path.empty() ? key : path + "." + key, "unknown key");
        }
    }
}

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

template <typename T>
void read_scalar(const YAML::Node& parent, const std::string& path, std::string_view key, T& out) {
    const YAML::Node node = parent[std::string(key)];
    if (!node) return;
    try {
        out = node.as<T>();
    } catch (const YAML::Exception&) {
        fail(join(path, key), "invalid value '" + (node.IsScalar() ? node.Scalar() : std::string("<non-scalar>")) + "'");
    }
}

template <std::size_t N>
void read_array(const YAML::Node& parent, const std::string& path, std::string_view key, std::array<double, N>& out) {
    const YAML::Node node = parent[std::string(key)];
    if (!node) return;
    const std::string f = join(path, key);
    if (!node.IsSequence() || node.size() != N) fail(f, "expected a list of " + std::to_string(N) + " numbers");
    for (std::size_t i = 0; i < N; ++i) {
        try {
            out[i] = node[i].as<double>();
        } catch (const YAML::Exception&) {
            fail(f + "[" + std::to_string(i) + "]", "not a number");
        }
    }
}

CovariateSet read_covariates(const YAML::Node& node, const std::string& f) {
    if (!node.IsSequence()) fail(f, "expected a list of covariate names");
    CovariateSet set;
    for (const auto& item : node) {
        try {
            set.push_back(parse_covariate(item.as<std::string>()));
        } catch (const std::exception& e) {
            fail(f, e.what());
        }
    }
    return set;
}

void read_dgm(const YAML::Node& node, DgmParams& p) {
    const std::string path = "dgm";
    check_keys(node, path, {"n_per_trial", "allocation", "outcome", "survival", "covariates"});
    read_scalar(node, path, "n_per_trial", p.n_per_trial);
    if (auto a = node["allocation"]) {
        check_keys(a, "dgm.allocation", {"control", "treatment"});
        read_scalar(a, "dgm.allocation", "control", p.allocation.control);
        read_scalar(a, "dgm.allocation", "treatment", p.allocation.treatment);
        if (!node["n_per_trial"]) p.n_per_trial = p.allocation.total();
    }
    if (auto o = node["outcome"]) {
        const std::string f = "dgm.outcome";
        check_keys(o, f, {"intercept", "gestational_age", "head_circumference", "ses", "residual_sd"});
        read_scalar(o, f, "intercept", p.outcome.intercept);
        read_scalar(o, f, "gestational_age", p.outcome.gestational_age);
        read_scalar(o, f, "head_circumference", p.outcome.head_circumference);
        read_scalar(o, f, "ses", p.outcome.ses);
        read_scalar(o, f, "residual_sd", p.outcome.residual_sd);
    }
    if (auto s = node["survival"]) {
        const std::string f = "dgm.survival";
        check_keys(s, f, {"intercept", "gestational_age", "head_circumference", "apgar"});
        read_scalar(s, f, "intercept", p.survival.intercept);
        read_scalar(s, f, "gestational_age", p.survival.gestational_age);
        read_scalar(s, f, "head_circumference", p.survival.head_circumference);
        read_scalar(s, f, "apgar", p.survival.apgar);
    }
    if (auto c = node["covariates"]) {
        const std::string f = "dgm.covariates";
        check_keys(c, f,
                   {"apgar_probs", "gestational_age_means", "head_circumference_means", "covariance", "ses_probs"});
        read_array(c, f, "apgar_probs", p.covariates.apgar_probs);
        read_array(c, f, "gestational_age_means", p.covariates.gestational_age_means);
        read_array(c, f, "head_circumference_means", p.covariates.head_circumference_means);
        if (auto cov = c["covariance"]) {
            if (!cov.IsSequence() || cov.size() != 2) fail(f + ".covariance", "expected a 2x2 nested list");
            for (int r = 0; r < 2; ++r) {
                const YAML::Node row = cov[r];
                if (!row.IsSequence() || row.size() != 2) fail(f + ".covariance", "expected a 2x2 nested list");
                for (int k = 0; k < 2; ++k) {
                    try {
                        p.covariates.covariance(r, k) = row[k].as<double>();
                    } catch (const YAML::Exception&) {
                        fail(f + ".covariance", "not a number");
                    }
                }
            }
        }
        if (auto ses = c["ses_probs"]) {
            if (!ses.IsSequence() || ses.size() != kApgarLevels) {
                fail(f + ".ses_probs", "expected 10 rows (one per Apgar score)");
            }
            for (int a = 0; a < kApgarLevels; ++a) {
                const YAML::Node row = ses[a];
                const std::string rf = f + ".ses_probs[" + std::to_string(a) + "]";
                if (!row.IsSequence() || row.size() != kSesLevels) fail(rf, "expected 11 probabilities (SES 2..12)");
                for (int k = 0; k < kSesLevels; ++k) {
                    try {
                        p.covariates.ses_probs[a][k] = row[k].as<double>();
                    } catch (const YAML::Exception&) {
                        fail(rf, "not a number");
                    }
                }
            }
        }
    }
}

ScenarioSpec read_scenario(const YAML::Node& node, const std::string& f) {
    check_keys(node, f, {"id", "effect_on_outcome", "effect_on_survival_logodds", "sace_covariates", "mi_covariates"});
    ScenarioSpec sc = scenario_grid().front();
    sc.id.clear();
    sc.effect_on_outcome = 0.0;
    sc.effect_on_survival_logodds = 0.0;
    if (!node["id"]) fail(f + ".id", "required");
    read_scalar(node, f, "id", sc.id);
    read_scalar(node, f, "effect_on_outcome", sc.effect_on_outcome);
    read_scalar(node, f, "effect_on_survival_logodds", sc.effect_on_survival_logodds);
    if (auto s = node["sace_covariates"]) sc.sace_covariates = read_covariates(s, f + ".sace_covariates");
    if (auto s = node["mi_covariates"]) sc.mi_covariates = read_covariates(s, f + ".mi_covariates");
    return sc;
}

}  // namespace

RunPlan parse_run_plan(std::string_view yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml_text));
    } catch (const YAML::Exception& e) {
        fail("<root>", std::string("not a valid plan document: ") + e.what());
    }
    if (!root || root.IsNull()) fail("<root>", "empty plan document");
    check_keys(root, "",
               {"master_seed", "n_sim", "confidence_level", "mi_count", "bootstrap_reps", "chiba_alpha", "scenarios",
                "dgm"});

    RunPlan plan = default_run_plan();
    if (!root["master_seed"]) fail("master_seed", "required");
    read_scalar(root, "", "master_seed", plan.master_seed);
    read_scalar(root, "", "n_sim", plan.n_sim);
    read_scalar(root, "", "confidence_level", plan.confidence_level);
    read_scalar(root, "", "mi_count", plan.mi_count);
    read_scalar(root, "", "bootstrap_reps", plan.bootstrap_reps);
    if (auto a = root["chiba_alpha"]) {
        std::array<double, 2> range{};
        read_array(root, "", "chiba_alpha", range);
        plan.chiba_alpha = {range[0], range[1]};
    }
    if (auto s = root["scenarios"]) {
        if (!s.IsSequence()) fail("scenarios", "expected a list");
        plan.scenarios.clear();
        for (std::size_t i = 0; i < s.size(); ++i) {
            plan.scenarios.push_back(read_scenario(s[i], "scenarios[" + std::to_string(i) + "]"));
        }
    }
    if (auto d = root["dgm"]) read_dgm(d, plan.dgm);
    validate(plan);
    return plan;
}

RunPlan load_run_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("<file>", "cannot open plan file '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_run_plan(buffer.str());
}

namespace {

template <typename Range>
void emit_numbers(YAML::Emitter& out, const Range& values) {
    out << YAML::Flow << YAML::BeginSeq;
    for (double v : values) out << format_double(v);
    out << YAML::EndSeq;
}

void emit_covariates(YAML::Emitter& out, const CovariateSet& set) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Covariate c : set) out << std::string(to_string(c));
    out << YAML::EndSeq;
}

}  // namespace

std::string to_yaml(const RunPlan& plan) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "master_seed" << YAML::Value << plan.master_seed;
    out << YAML::Key << "n_sim" << YAML::Value << plan.n_sim;
    out << YAML::Key << "confidence_level" << YAML::Value << format_double(plan.confidence_level);
    out << YAML::Key << "mi_count" << YAML::Value << plan.mi_count;
    out << YAML::Key << "bootstrap_reps" << YAML::Value << plan.bootstrap_reps;
    out << YAML::Key << "chiba_alpha" << YAML::Value;
    emit_numbers(out, std::array<double, 2>{plan.chiba_alpha.lower, plan.chiba_alpha.upper});

    out << YAML::Key << "scenarios" << YAML::Value << YAML::BeginSeq;
    for (const auto& sc : plan.scenarios) {
        out << YAML::BeginMap;
        out << YAML::Key << "id" << YAML::Value << sc.id;
        out << YAML::Key << "effect_on_outcome" << YAML::Value << format_double(sc.effect_on_outcome);
        out << YAML::Key << "effect_on_survival_logodds" << YAML::Value
            << format_double(sc.effect_on_survival_logodds);
        out << YAML::Key << "sace_covariates" << YAML::Value;
        emit_covariates(out, sc.sace_covariates);
        out << YAML::Key << "mi_covariates" << YAML::Value;
        emit_covariates(out, sc.mi_covariates);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    const DgmParams& d = plan.dgm;
    out << YAML::Key << "dgm" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "n_per_trial" << YAML::Value << d.n_per_trial;
    out << YAML::Key << "allocation" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "control" << YAML::Value << d.allocation.control;
    out << YAML::Key << "treatment" << YAML::Value << d.allocation.treatment;
    out << YAML::EndMap;

    out << YAML::Key << "outcome" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "intercept" << YAML::Value << format_double(d.outcome.intercept);
    out << YAML::Key << "gestational_age" << YAML::Value << format_double(d.outcome.gestational_age);
    out << YAML::Key << "head_circumference" << YAML::Value << format_double(d.outcome.head_circumference);
    out << YAML::Key << "ses" << YAML::Value << format_double(d.outcome.ses);
    out << YAML::Key << "residual_sd" << YAML::Value << format_double(d.outcome.residual_sd);
    out << YAML::EndMap;

    out << YAML::Key << "survival" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "intercept" << YAML::Value << format_double(d.survival.intercept);
    out << YAML::Key << "gestational_age" << YAML::Value << format_double(d.survival.gestational_age);
    out << YAML::Key << "head_circumference" << YAML::Value << format_double(d.survival.head_circumference);
    out << YAML::Key << "apgar" << YAML::Value << format_double(d.survival.apgar);
    out << YAML::EndMap;

    const CovariateModel& c = d.covariates;
    out << YAML::Key << "covariates" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "apgar_probs" << YAML::Value;
    emit_numbers(out, c.apgar_probs);
    out << YAML::Key << "gestational_age_means" << YAML::Value;
    emit_numbers(out, c.gestational_age_means);
    out << YAML::Key << "head_circumference_means" << YAML::Value;
    emit_numbers(out, c.head_circumference_means);
    out << YAML::Key << "covariance" << YAML::Value << YAML::BeginSeq;
    emit_numbers(out, std::array<double, 2>{c.covariance(0, 0), c.covariance(0, 1)});
    emit_numbers(out, std::array<double, 2>{c.covariance(1, 0), c.covariance(1, 1)});
    out << YAML::EndSeq;
    out << YAML::Key << "ses_probs" << YAML::Value << YAML::BeginSeq;
    for (const auto& row : c.ses_probs) emit_numbers(out, row);
    out << YAML::EndSeq;
    out << YAML::EndMap;

    out << YAML::EndMap;  // dgm
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

void write_run_plan(const RunPlan& plan, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ExecutionError("cannot write plan file '" + path.string() + "'");
    out << to_yaml(plan);
    if (!out) throw ExecutionError("failed writing plan file '" + path.string() + "'");
}

std::string plan_digest(const RunPlan& plan) {
    const std::uint64_t h = fnv1a64(to_yaml(plan));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace sacesim
