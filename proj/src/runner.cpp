#include "sacesim/runner.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "sacesim/dgm.hpp"
#include "sacesim/errors.hpp"

namespace sacesim {

namespace {

EstimateRecord failed_record(Method method, CovariateVariant set, std::string message) {
    EstimateRecord rec;
    rec.method = method;
    rec.covariate_set = set;
    rec.status = EstimateStatus::Failed;
    rec.message = std::move(message);
    return rec;
}

template <class F>
EstimateRecord guarded(Method method, CovariateVariant set, F&& f) {
    try {
        EstimateRecord rec = f();
        rec.method = method;
        rec.covariate_set = set;
        return rec;
    } catch (const std::exception& e) {
        return failed_record(method, set, e.what());
    }
}

EstimateRecord bounds_record(Method method, const Interval& bounds, double n_analyzed) {
    EstimateRecord rec;
    rec.method = method;
    rec.bounds = bounds;
    rec.n_analyzed = n_analyzed;
    return rec;
}

std::string stream_purpose(std::string_view prefix, CovariateVariant set) {
    return std::string(prefix) + ":" + std::string(to_string(set));
}

// Runs fn(i) for i in [0, n) on `workers` threads. Each index is claimed once
// from a shared counter; callers write results into slot i, so the output
// order never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, int workers, F&& fn) {
    const auto threads = static_cast<std::size_t>(std::max(1, workers));
    if (threads == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

const std::vector<AnalysisKey>& point_analyses() {
    static const std::vector<AnalysisKey> keys = {
        {Method::Cca, CovariateVariant::All},   {Method::Sace, CovariateVariant::All},
        {Method::Sace, CovariateVariant::NoHc}, {Method::Sace, CovariateVariant::NoGa},
        {Method::Mi, CovariateVariant::All},    {Method::Mi, CovariateVariant::NoHc},
        {Method::Mi, CovariateVariant::NoGa},
    };
    return keys;
}

const EstimateRecord& SimulationRecord::find(Method method, CovariateVariant set) const {
    for (const auto& r : estimates) {
        if (r.method == method && (r.covariate_set == set || !is_point_method(method) || method == Method::Cca)) {
            return r;
        }
    }
    throw DomainError("simulation record has no " + std::string(to_string(method)) + "/" +
                      std::string(to_string(set)) + " entry");
}

SimulationRecord run_replicate(const ScenarioSpec& scenario, const RunPlan& plan, std::uint64_t sim_index) {
    SimulationRecord out;
    out.scenario_id = scenario.id;
    out.sim_index = sim_index;
    out.effect_on_outcome = scenario.effect_on_outcome;
    out.effect_on_survival_logodds = scenario.effect_on_survival_logodds;

    TrialDataset trial;
    try {
        trial = simulate_trial(plan.dgm, scenario, plan.master_seed, sim_index);
    } catch (const std::exception& e) {
        out.error = e.what();
        for (const auto& key : point_analyses()) out.estimates.push_back(failed_record(key.method, key.set, out.error));
        out.estimates.push_back(failed_record(Method::SaceBoundsZhang, CovariateVariant::All, out.error));
        out.estimates.push_back(failed_record(Method::SaceBoundsChiba, CovariateVariant::All, out.error));
        return out;
    }

    out.strata = strata_census(trial);
    out.n_patients = static_cast<int>(trial.size());
    for (const auto& p : trial.patients) out.n_survivors += p.observed_survival ? 1 : 0;
    try {
        out.theta2s = sace_reference(trial);
    } catch (const UndefinedEstimandError&) {
        out.theta2s.reset();
    }

    const double level = plan.confidence_level;
    out.estimates.reserve(kPointRecordsPerSim + kBoundsRecordsPerSim);
    out.estimates.push_back(
        guarded(Method::Cca, CovariateVariant::All, [&] { return estimate_cca(trial, level); }));
    for (auto set : kCovariateVariants) {
        out.estimates.push_back(guarded(Method::Sace, set, [&] {
            auto stream = spawn_stream(plan.master_seed, scenario.id, sim_index, stream_purpose("sace", set));
            return estimate_sace_hayden(trial, apply_variant(scenario.sace_covariates, set),
                                        {plan.bootstrap_reps, level}, stream);
        }));
    }
    for (auto set : kCovariateVariants) {
        out.estimates.push_back(guarded(Method::Mi, set, [&] {
            auto stream = spawn_stream(plan.master_seed, scenario.id, sim_index, stream_purpose("mi", set));
            return estimate_mi(trial, apply_variant(scenario.mi_covariates, set), plan.mi_count, stream, level);
        }));
    }
    const double survivors = out.n_survivors;
    out.estimates.push_back(guarded(Method::SaceBoundsZhang, CovariateVariant::All, [&] {
        return bounds_record(Method::SaceBoundsZhang,
                             bounds_zhang(trial, empirical_monotonicity_direction(trial)), survivors);
    }));
    out.estimates.push_back(guarded(Method::SaceBoundsChiba, CovariateVariant::All, [&] {
        return bounds_record(Method::SaceBoundsChiba, bounds_chiba(trial, plan.chiba_alpha), survivors);
    }));
    return out;
}

std::vector<SimulationRecord> run_scenario(const ScenarioSpec& scenario, const RunPlan& plan,
                                           const RunOptions& options) {
    const auto n = static_cast<std::size_t>(plan.n_sim);
    std::vector<SimulationRecord> records(n);
    std::atomic<int> done{0};
    std::mutex progress_mutex;
    parallel_for(n, options.workers, [&](std::size_t i) {
        records[i] = run_replicate(scenario, plan, i);
        const int finished = ++done;
        if (options.progress) {
            std::lock_guard lock(progress_mutex);
            options.progress(scenario.id, finished, plan.n_sim);
        }
    });
    return records;
}

ScenarioResult collect_scenario(const ScenarioSpec& spec, std::vector<SimulationRecord> records) {
    ScenarioResult result;
    result.spec = spec;
    std::vector<double> theta2;
    for (const auto& r : records) {
        if (r.theta2s) theta2.push_back(*r.theta2s);
    }
    if (theta2.empty()) throw ExecutionError("scenario " + spec.id + ": no replicate has a defined SACE");
    result.estimands = make_estimand_set(spec.effect_on_outcome, std::move(theta2));
    result.records = std::move(records);
    return result;
}

namespace {

std::string cell_name(const std::string& scenario, Method m, CovariateVariant v) {
    return scenario + "/" + std::string(to_string(m)) + "/" + std::string(to_string(v));
}

BoundsSummary summarize_bounds(const ScenarioResult& sc, Method method) {
    BoundsSummary b;
    b.scenario_id = sc.spec.id;
    b.method = method;
    int inside_sace = 0, with_sace = 0, inside_oracle = 0, with_oracle = 0;
    for (const auto& r : sc.records) {
        const auto& rec = r.find(method, CovariateVariant::All);
        if (!rec.ok() || !rec.bounds) {
            ++b.n_failed;
            continue;
        }
        ++b.n_used;
        b.mean_lower += rec.bounds->lower;
        b.mean_upper += rec.bounds->upper;
        const auto& sace = r.find(Method::Sace, CovariateVariant::All);
        if (sace.estimate && sace.status != EstimateStatus::Failed) {
            ++with_sace;
            inside_sace += rec.bounds->contains(*sace.estimate) ? 1 : 0;
        }
        if (r.theta2s) {
            ++with_oracle;
            inside_oracle += rec.bounds->contains(*r.theta2s) ? 1 : 0;
        }
    }
    if (b.n_used > 0) {
        b.mean_lower /= b.n_used;
        b.mean_upper /= b.n_used;
    }
    if (with_sace > 0) b.contains_sace_estimate = static_cast<double>(inside_sace) / with_sace;
    if (with_oracle > 0) b.contains_oracle = static_cast<double>(inside_oracle) / with_oracle;
    return b;
}

}  // namespace

void summarize_study(StudyResult& result) {
    result.summaries.clear();
    result.bounds.clear();
    result.warnings.clear();
    std::vector<AnalyzedInput> analyzed;
    const double level = result.plan.confidence_level;
    for (const auto& sc : result.scenarios) {
        for (const auto& key : point_analyses()) {
            std::vector<EstimateRecord> cell;
            cell.reserve(sc.records.size());
            for (const auto& r : sc.records) cell.push_back(r.find(key.method, key.set));
            for (auto estimand : {Estimand::Theta1, Estimand::Theta2}) {
                const double value = estimand == Estimand::Theta1 ? sc.estimands.theta1 : sc.estimands.theta2;
                auto s = summarize_performance(sc.spec.id, cell, estimand, value, level);
                s.method = key.method;
                s.covariate_set = key.set;
                if (estimand == Estimand::Theta1 && s.excessive_failures()) {
                    result.warnings.push_back(cell_name(sc.spec.id, key.method, key.set) + ": " +
                                              std::to_string(s.n_failed) + " replicates excluded");
                }
                result.summaries.push_back(std::move(s));
            }
        }
        result.bounds.push_back(summarize_bounds(sc, Method::SaceBoundsZhang));
        result.bounds.push_back(summarize_bounds(sc, Method::SaceBoundsChiba));

        for (const auto& r : sc.records) {
            if (!r.error.empty()) continue;
            AnalyzedInput in;
            in.effect_on_survival_logodds = r.effect_on_survival_logodds;
            in.n_patients = r.n_patients;
            in.n_survivors = r.n_survivors;
            in.n_always = r.strata.always;
            auto take = [&](Method m, CovariateVariant v) -> std::optional<double> {
                const auto& rec = r.find(m, v);
                if (rec.status == EstimateStatus::Failed) return std::nullopt;
                return rec.n_analyzed;
            };
            in.cca_n = take(Method::Cca, CovariateVariant::All);
            in.mi_n = take(Method::Mi, CovariateVariant::All);
            for (std::size_t v = 0; v < kCovariateVariants.size(); ++v) {
                in.sace_n[v] = take(Method::Sace, kCovariateVariants[v]);
            }
            analyzed.push_back(in);
        }
    }
    result.analyzed = analyzed.empty() ? std::vector<AnalyzedRow>{} : summarize_analyzed(analyzed);
}

StudyResult run_grid(const RunPlan& plan, const RunOptions& options) {
    validate(plan);
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();

    StudyResult result;
    result.plan = plan;
    result.provenance.master_seed = plan.master_seed;
    result.provenance.plan_digest = plan_digest(plan);
    result.provenance.workers = std::max(1, options.workers);

    for (const auto& spec : plan.scenarios) {
        const auto t0 = clock::now();
        auto records = run_scenario(spec, plan, options);
        int lost = 0;
        for (const auto& r : records) lost += r.lost() ? 1 : 0;
        if (lost * 10 > plan.n_sim) {
            throw ExecutionError("scenario " + spec.id + " lost " + std::to_string(lost) + " of " +
                                 std::to_string(plan.n_sim) + " replicates");
        }
        result.scenarios.push_back(collect_scenario(spec, std::move(records)));
        result.provenance.scenario_seconds.emplace_back(
            spec.id, std::chrono::duration<double>(clock::now() - t0).count());
    }
    summarize_study(result);
    result.provenance.elapsed_seconds = std::chrono::duration<double>(clock::now() - start).count();
    return result;
}

std::vector<PooledBias> pooled_bias_by_survival_effect(const StudyResult& result) {
    std::map<double, std::vector<const ScenarioResult*>, std::greater<>> rows;
    for (const auto& sc : result.scenarios) rows[sc.spec.effect_on_survival_logodds].push_back(&sc);
    std::vector<PooledBias> out;
    for (const auto& [effect, scenarios] : rows) {
        for (const auto& key : point_analyses()) {
            // Errors relative to each scenario's theta1, pooled with equal weight per replicate.
            std::vector<double> errors;
            for (const auto* sc : scenarios) {
                for (const auto& r : sc->records) {
                    const auto& rec = r.find(key.method, key.set);
                    if (rec.ok() && rec.estimate) errors.push_back(*rec.estimate - sc->estimands.theta1);
                }
            }
            if (errors.size() < 2) continue;
            PooledBias pb;
            pb.effect_on_survival_logodds = effect;
            pb.method = key.method;
            pb.covariate_set = key.set;
            pb.bias = compute_bias(errors, 0.0);
            pb.n = static_cast<int>(errors.size());
            out.push_back(pb);
        }
    }
    return out;
}

}  // namespace sacesim
