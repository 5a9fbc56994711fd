#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sacesim/config.hpp"
#include "sacesim/rng.hpp"

namespace sacesim {

struct CovariateRow {
    double gestational_age = 0.0;     // days
    double head_circumference = 0.0;  // cm
    int ses = kSesMin;                // 2..12
    int apgar = 1;                    // 1..10
};

using CovariateTable = std::vector<CovariateRow>;

double covariate_value(const CovariateRow& row, Covariate c);

struct PotentialOutcomes {
    std::vector<double> treated;  // Y(1)
    std::vector<double> control;  // Y(0)
};

struct PotentialSurvival {
    std::vector<double> p_treated;  // p(1)
    std::vector<double> p_control;  // p(0)
    std::vector<std::uint8_t> treated;  // S(1)
    std::vector<std::uint8_t> control;  // S(0)
};

/// One simulated patient, carrying both the counterfactual and the observed side.
struct PatientRecord {
    CovariateRow x;
    double y1 = 0.0;
    double y0 = 0.0;
    bool s1 = false;
    bool s0 = false;
    int z = 0;
    bool observed_survival = false;
    std::optional<double> observed_outcome;  // absent iff the patient died
};

struct TrialDataset {
    std::vector<PatientRecord> patients;
    std::string scenario_id;
    std::uint64_t sim_index = 0;

    std::size_t size() const { return patients.size(); }
};

/// Apgar categorical; (GA, HC) bivariate normal with per-Apgar means and shared
/// covariance; SES from the per-Apgar categorical distribution.
CovariateTable simulate_covariates(std::size_t n, const DgmParams& params, RngStream& stream);

/// Y(1) ~ N(lp + effect, sd^2), Y(0) ~ N(lp, sd^2) with independent noise per arm.
PotentialOutcomes simulate_potential_outcomes(const CovariateTable& covariates, const DgmParams& params,
                                              double effect_on_outcome, RngStream& stream);

/// S(1), S(0) independent Bernoulli given covariates; the treatment shifts the log odds.
PotentialSurvival simulate_potential_survival(const CovariateTable& covariates, const DgmParams& params,
                                              double effect_on_survival_logodds, RngStream& stream);

/// Exact-count permutation randomization, then the observed-data view.
TrialDataset randomize_and_observe(const CovariateTable& covariates, const PotentialOutcomes& outcomes,
                                   const PotentialSurvival& survival, const Allocation& allocation,
                                   RngStream& stream);

/// Full trial for one (scenario, sim_index) lineage. Each generation step draws
/// from its own purpose-tagged stream.
TrialDataset simulate_trial(const DgmParams& params, const ScenarioSpec& scenario, std::uint64_t master_seed,
                            std::uint64_t sim_index);

/// Bisection on the survival intercept so that the expected marginal survival
/// (no treatment effect) over a fixed Monte Carlo covariate sample is within
/// `tolerance` of `target`.
double calibrate_survival_intercept(const DgmParams& params, double target, double tolerance,
                                    std::uint64_t seed = 1, std::size_t n_eval = 200000);

/// Expected marginal survival probability with no treatment effect, averaged
/// over a Monte Carlo covariate sample.
double marginal_survival(const DgmParams& params, std::uint64_t seed, std::size_t n_eval);

/// CSV columns: id,x1,x2,x3,x4,z,s1,s0,y1,y0,observed_survival,observed_outcome.
/// A missing outcome is an empty field.
void write_trial_csv(const TrialDataset& trial, const std::filesystem::path& path);

}  // namespace sacesim
