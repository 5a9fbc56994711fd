#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sacesim/config.hpp"
#include "sacesim/estimators.hpp"
#include "sacesim/metrics.hpp"
#include "sacesim/oracle.hpp"

namespace sacesim {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

/// Everything kept from one simulated trial.
struct SimulationRecord {
    std::string scenario_id;
    std::uint64_t sim_index = 0;
    double effect_on_outcome = 0.0;
    double effect_on_survival_logodds = 0.0;
    std::optional<double> theta2s;  // empty when no patient is an always survivor
    StrataCounts strata;
    int n_patients = 0;
    int n_survivors = 0;
    /// CCA; SACE x {ALL, NO_HC, NO_GA}; MI x {ALL, NO_HC, NO_GA}; Zhang; Chiba.
    std::vector<EstimateRecord> estimates;
    /// Set when the replicate itself could not be simulated.
    std::string error;

    bool lost() const { return !error.empty() || !theta2s; }
    const EstimateRecord& find(Method method, CovariateVariant set) const;
    bool operator==(const SimulationRecord&) const = default;
};

inline constexpr int kPointRecordsPerSim = 7;
inline constexpr int kBoundsRecordsPerSim = 2;

/// (method, covariate set) in record order.
struct AnalysisKey {
    Method method;
    CovariateVariant set;
};
const std::vector<AnalysisKey>& point_analyses();

/// Simulates and analyzes replicate `sim_index` of `scenario`. Estimator
/// failures become Failed records; a failure to simulate sets `error`.
SimulationRecord run_replicate(const ScenarioSpec& scenario, const RunPlan& plan, std::uint64_t sim_index);

using ProgressCallback = std::function<void(std::string_view scenario_id, int done, int total)>;

struct RunOptions {
    int workers = 1;
    ProgressCallback progress;
};

/// `plan.n_sim` replicates in sim_index order; content does not depend on `workers`.
std::vector<SimulationRecord> run_scenario(const ScenarioSpec& scenario, const RunPlan& plan,
                                           const RunOptions& options = {});

struct ScenarioResult {
    ScenarioSpec spec;
    std::vector<SimulationRecord> records;
    EstimandSet estimands;
};

/// Bounds behavior of one bounds method in one scenario.
struct BoundsSummary {
    std::string scenario_id;
    Method method = Method::SaceBoundsZhang;
    int n_used = 0;
    int n_failed = 0;
    double mean_lower = 0.0;
    double mean_upper = 0.0;
    /// Share of replicates whose SACE (ALL) point estimate lies inside the bounds.
    double contains_sace_estimate = 0.0;
    /// Share of replicates whose oracle theta2s lies inside the bounds.
    double contains_oracle = 0.0;
};

struct Provenance {
    std::uint64_t master_seed = 0;
    std::string plan_digest;
    std::string version{kArtifactVersion};
    int workers = 1;
    double elapsed_seconds = 0.0;
    std::vector<std::pair<std::string, double>> scenario_seconds;
};

struct StudyResult {
    RunPlan plan;
    std::vector<ScenarioResult> scenarios;
    std::vector<PerformanceSummary> summaries;
    std::vector<BoundsSummary> bounds;
    std::vector<AnalyzedRow> analyzed;
    Provenance provenance;
    /// Cells with more than 1 % excluded replicates.
    std::vector<std::string> warnings;
};

/// Builds the EstimandSet from the records: theta1 is the outcome effect and
/// theta2 averages the defined theta2s values.
ScenarioResult collect_scenario(const ScenarioSpec& spec, std::vector<SimulationRecord> records);

/// Fills summaries, bounds, analyzed and warnings from `result.scenarios`.
void summarize_study(StudyResult& result);

/// Runs every scenario of the plan. Throws ExecutionError when a scenario loses
/// more than 10 % of its replicates.
StudyResult run_grid(const RunPlan& plan, const RunOptions& options = {});

/// Bias against theta1 pooled over all scenarios sharing a survival effect.
struct PooledBias {
    double effect_on_survival_logodds = 0.0;
    Method method = Method::Cca;
    CovariateVariant covariate_set = CovariateVariant::All;
    McValue bias;
    int n = 0;
};
std::vector<PooledBias> pooled_bias_by_survival_effect(const StudyResult& result);

}  // namespace sacesim
