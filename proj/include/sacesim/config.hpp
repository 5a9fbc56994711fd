#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sacesim/distributions.hpp"

namespace sacesim {

enum class Covariate { GestationalAge, HeadCircumference, Ses, Apgar };

using CovariateSet = std::vector<Covariate>;

/// Which covariate is dropped from a scenario's modeling set.
enum class CovariateVariant { All, NoHc, NoGa };

inline constexpr std::array<CovariateVariant, 3> kCovariateVariants = {
    CovariateVariant::All, CovariateVariant::NoHc, CovariateVariant::NoGa};

std::string_view to_string(Covariate c);
std::string_view to_string(CovariateVariant v);
Covariate parse_covariate(std::string_view name);
CovariateVariant parse_covariate_variant(std::string_view name);

/// Removes the covariate named by `variant` (if present).
CovariateSet apply_variant(const CovariateSet& set, CovariateVariant variant);

/// One cell of the 3x3 effect grid.
struct ScenarioSpec {
    std::string id;
    double effect_on_outcome = 0.0;           // mean difference, score points
    double effect_on_survival_logodds = 0.0;  // log odds ratio, treatment vs control
    CovariateSet sace_covariates;             // survival model for the SACE estimator
    CovariateSet mi_covariates;               // imputation model predictors (treatment always added)

    double odds_ratio() const;
    bool operator==(const ScenarioSpec&) const = default;
};

inline constexpr int kApgarLevels = 10;  // Apgar 1..10
inline constexpr int kSesLevels = 11;    // SES 2..12
inline constexpr int kSesMin = 2;

struct OutcomeCoefs {
    double intercept = 0.0;
    double gestational_age = 0.0;     // per day
    double head_circumference = 0.0;  // per cm
    double ses = 0.0;                 // per SES point
    double residual_sd = 1.0;
    bool operator==(const OutcomeCoefs&) const = default;
};

/// Log-odds scale.
struct SurvivalCoefs {
    double intercept = 0.0;
    double gestational_age = 0.0;
    double head_circumference = 0.0;
    double apgar = 0.0;
    bool operator==(const SurvivalCoefs&) const = default;
};

struct CovariateModel {
    std::array<double, kApgarLevels> apgar_probs{};
    std::array<double, kApgarLevels> gestational_age_means{};     // days
    std::array<double, kApgarLevels> head_circumference_means{};  // cm
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();     // shared across Apgar levels
    std::array<std::array<double, kSesLevels>, kApgarLevels> ses_probs{};

    bool operator==(const CovariateModel& o) const {
        return apgar_probs == o.apgar_probs && gestational_age_means == o.gestational_age_means &&
               head_circumference_means == o.head_circumference_means &&
               covariance == o.covariance && ses_probs == o.ses_probs;
    }
};

struct Allocation {
    int control = 250;
    int treatment = 250;
    int total() const { return control + treatment; }
    bool operator==(const Allocation&) const = default;
};

struct DgmParams {
    OutcomeCoefs outcome;
    SurvivalCoefs survival;
    CovariateModel covariates;
    int n_per_trial = 500;
    Allocation allocation;
    bool operator==(const DgmParams&) const = default;
};

struct RunPlan {
    std::vector<ScenarioSpec> scenarios;
    DgmParams dgm;
    int n_sim = 1300;
    std::uint64_t master_seed = 0;
    double confidence_level = 0.95;
    int mi_count = 10;
    int bootstrap_reps = 200;
    Interval chiba_alpha{-2.0, 2.0};  // sensitivity range for the Chiba-style bounds
    bool operator==(const RunPlan&) const = default;
};

/// The nine scenarios A..I: outcome effect {5, 0, -5} x odds ratio {2, 1, 0.5}.
std::vector<ScenarioSpec> scenario_grid();

/// ceil((z_{1-alpha/2} * sigma / delta)^2).
int plan_n_sim(double sigma, double delta, double alpha);

DgmParams default_dgm_params();
RunPlan default_run_plan(std::uint64_t master_seed = 20240917);

/// Throws ValidationError naming the first offending field.
void validate(const DgmParams& params, const std::string& prefix = "dgm");
void validate(const RunPlan& plan);

RunPlan parse_run_plan(std::string_view yaml_text);
RunPlan load_run_plan(const std::filesystem::path& path);
std::string to_yaml(const RunPlan& plan);
void write_run_plan(const RunPlan& plan, const std::filesystem::path& path);

/// Stable 64-bit digest of the canonical serialization, as 16 hex digits.
std::string plan_digest(const RunPlan& plan);

}  // namespace sacesim
