#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sacesim/config.hpp"
#include "sacesim/distributions.hpp"
#include "sacesim/estimators.hpp"

namespace sacesim {

/// A performance measure with its Monte Carlo standard error.
struct McValue {
    double value = 0.0;
    double mc_se = 0.0;

    /// value +/- 1.96 mc_se at the default level.
    Interval ci(double level = 0.95) const { return wald_ci(value, mc_se, level); }
};

/// mean(estimates) - estimand; MC SE = sqrt(sum (e - mean)^2 / (n (n - 1))).
McValue compute_bias(std::span<const double> estimates, double estimand);

/// mean((e - estimand)^2); MC SE = sqrt(sum ((e - estimand)^2 - mse)^2 / (n (n - 1))).
McValue compute_mse(std::span<const double> estimates, double estimand);

/// Share of closed intervals containing the estimand; MC SE = sqrt(c (1 - c) / n).
McValue compute_coverage(std::span<const Interval> intervals, double estimand);

/// level +/- multiplier * sqrt(level (1 - level) / n_sim). The default multiplier
/// is the 95 % normal quantile, which gives (0.938, 0.962) at level 0.95 and
/// n_sim 1300; pass 1.0 for a one-SE band.
Interval coverage_band(double level, int n_sim, double multiplier = 1.959963984540054);

struct MeanEstimate {
    double mean = 0.0;
    double empirical_se = 0.0;  // SD(estimates) / sqrt(n)
    Interval ci;
};

MeanEstimate mean_estimate(std::span<const double> estimates, double level = 0.95);

/// Share of simulations with lower <= estimate <= upper.
double bounds_containment(std::span<const double> point_estimates, std::span<const Interval> bounds);

enum class Estimand { Theta1, Theta2 };

std::string_view to_string(Estimand e);

struct PerformanceSummary {
    std::string scenario_id;
    Method method = Method::Cca;
    CovariateVariant covariate_set = CovariateVariant::All;
    Estimand estimand = Estimand::Theta1;
    double estimand_value = 0.0;
    MeanEstimate mean;
    McValue bias;
    McValue mse;
    McValue coverage;
    double variance = 0.0;  // 1/n convention, so mse == bias^2 + variance
    int n_sim_used = 0;
    int n_failed = 0;
    double avg_n_analyzed = 0.0;

    /// More than 1 % of replicates excluded.
    bool excessive_failures() const { return n_failed * 100 > (n_sim_used + n_failed); }
};

/// Summarizes the Ok records of one (scenario, method, covariate set) against
/// one estimand. Records that are not Ok are counted in `n_failed`.
PerformanceSummary summarize_performance(std::string scenario_id, std::span<const EstimateRecord> records,
                                         Estimand estimand, double estimand_value, double level = 0.95);

/// One row of the analyzed-patients table: averages over every simulation whose
/// scenario has the given survival effect.
struct AnalyzedRow {
    double effect_on_survival_logodds = 0.0;
    int n_sim = 0;
    double mi_n = 0.0;
    double cca_n = 0.0;
    double sace_n[3] = {0.0, 0.0, 0.0};  // ALL, NO_HC, NO_GA
    double survivors_pct = 0.0;
    double estimated_always_pct[3] = {0.0, 0.0, 0.0};
    double true_always_pct = 0.0;  // from the counterfactual census
};

/// Input for summarize_analyzed: one simulation's analyzed counts. A method
/// whose record failed is left empty and drops out of that column's average.
struct AnalyzedInput {
    double effect_on_survival_logodds = 0.0;
    int n_patients = 0;
    int n_survivors = 0;
    int n_always = 0;
    std::optional<double> mi_n;
    std::optional<double> cca_n;
    std::array<std::optional<double>, 3> sace_n;
};

/// Groups by survival effect, ordered by descending log odds ratio.
std::vector<AnalyzedRow> summarize_analyzed(std::span<const AnalyzedInput> inputs);

}  // namespace sacesim
