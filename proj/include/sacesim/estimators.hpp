#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sacesim/config.hpp"
#include "sacesim/dgm.hpp"
#include "sacesim/distributions.hpp"
#include "sacesim/rng.hpp"

namespace sacesim {

enum class Method { Cca, Sace, Mi, SaceBoundsZhang, SaceBoundsChiba };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
bool is_point_method(Method m);

enum class EstimateStatus { Ok, Unstable, Failed };

std::string_view to_string(EstimateStatus s);
EstimateStatus parse_status(std::string_view name);

/// One method's result on one simulated trial.
///
/// Point methods carry `estimate`, `se` and `ci`; bounds methods carry `bounds`.
/// A failed record carries only `message`.
struct EstimateRecord {
    Method method = Method::Cca;
    CovariateVariant covariate_set = CovariateVariant::All;
    EstimateStatus status = EstimateStatus::Ok;
    std::optional<double> estimate;
    std::optional<double> se;
    std::optional<Interval> ci;
    std::optional<Interval> bounds;
    double n_analyzed = 0.0;
    std::string message;

    bool ok() const { return status == EstimateStatus::Ok; }
    bool operator==(const EstimateRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Complete case analysis

/// Closed-form OLS of outcome on intercept + binary treatment: the treatment
/// coefficient is the difference of arm means, its SE uses the pooled residual
/// variance with n - 2 degrees of freedom.
struct TreatmentContrast {
    double control_mean = 0.0;
    double difference = 0.0;
    double se = 0.0;
    int n_control = 0;
    int n_treated = 0;
};

TreatmentContrast fit_treatment_contrast(std::span<const double> outcomes, std::span<const int> arms);

/// Survivors only. Throws InsufficientDataError if an arm has fewer than 2 survivors.
EstimateRecord estimate_cca(const TrialDataset& trial, double level = 0.95);

// ---------------------------------------------------------------------------
// Hayden SACE estimator

struct HaydenPoint {
    double estimate = 0.0;
    /// Sum over treated survivors of p(0) plus sum over control survivors of p(1).
    double n_analyzed = 0.0;
};

/// Weighted survivor means with injected cross-arm survival probabilities.
/// `p_control[i]` is used for treated survivors and `p_treated[j]` for control
/// survivors; both spans are indexed by patient.
HaydenPoint hayden_estimate(const TrialDataset& trial, std::span<const double> p_control,
                            std::span<const double> p_treated);

struct SaceOptions {
    int bootstrap_reps = 200;
    double level = 0.95;
};

/// Per-arm logistic survival fits on `covariates`, cross-arm predicted survival
/// as weights, and a within-arm nonparametric bootstrap SE (every replicate
/// refits both models). An arm without deaths gets predicted survival 1.
///
/// Throws InsufficientDataError if an arm has no survivors. A point fit that
/// does not converge yields a Failed record; more than half of the bootstrap
/// replicates failing yields an Unstable record.
EstimateRecord estimate_sace_hayden(const TrialDataset& trial, const CovariateSet& covariates,
                                    const SaceOptions& options, RngStream& stream);

// ---------------------------------------------------------------------------
// Multiple imputation

/// Proper normal-linear imputation: per imputation, draw (sigma*, beta*) from
/// the posterior of the complete-case regression of outcome on intercept +
/// treatment + `covariates`, then draw each missing outcome from its predictive
/// distribution. Observed outcomes are copied unchanged.
std::vector<std::vector<double>> impute_outcomes(const TrialDataset& trial, const CovariateSet& covariates, int m,
                                                 RngStream& stream);

struct RubinPooled {
    double estimate = 0.0;
    double se = 0.0;
    double within = 0.0;   // W
    double between = 0.0;  // B
    double total = 0.0;    // T = W + (1 + 1/m) B
};

RubinPooled pool_rubin(std::span<const double> estimates, std::span<const double> variances);

EstimateRecord estimate_mi(const TrialDataset& trial, const CovariateSet& covariates, int m, RngStream& stream,
                           double level = 0.95);

// ---------------------------------------------------------------------------
// Bounds under monotonicity

enum class MonotonicityDirection {
    TreatmentSurvivesMore,  // S(1) >= S(0)
    ControlSurvivesMore,    // S(0) >= S(1)
};

/// TreatmentSurvivesMore if the observed treated survival rate is at least the control rate.
MonotonicityDirection empirical_monotonicity_direction(const TrialDataset& trial);

/// Trimming bounds: the always-survivor share among survivors of the favored arm
/// is pi = p_other / p_favored; keep ceil(pi * k) of its k survivor outcomes from
/// the bottom (or top) and compare with the other arm's survivor mean.
///
/// Throws MonotonicityError when the observed rates contradict `direction`.
Interval bounds_zhang(const TrialDataset& trial,
                      MonotonicityDirection direction = MonotonicityDirection::TreatmentSurvivesMore);

/// [crude - alpha_max, crude - alpha_min], crude = survivor mean difference.
Interval bounds_chiba(const TrialDataset& trial, const Interval& alpha_range);

}  // namespace sacesim
