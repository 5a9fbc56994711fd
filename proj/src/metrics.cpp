#include "sacesim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sacesim/errors.hpp"

namespace sacesim {

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void require_two(std::size_t n, const char* what) {
    if (n < 2) throw DomainError(std::string(what) + ": need at least 2 estimates");
}

}  // namespace

McValue compute_bias(std::span<const double> estimates, double estimand) {
    require_two(estimates.size(), "compute_bias");
    const double n = static_cast<double>(estimates.size());
    const double mean = mean_of(estimates);
    double ss = 0.0;
    for (double e : estimates) ss += (e - mean) * (e - mean);
    return {mean - estimand, std::sqrt(ss / (n * (n - 1.0)))};
}

McValue compute_mse(std::span<const double> estimates, double estimand) {
    require_two(estimates.size(), "compute_mse");
    const double n = static_cast<double>(estimates.size());
    double mse = 0.0;
    for (double e : estimates) mse += (e - estimand) * (e - estimand);
    mse /= n;
    double ss = 0.0;
    for (double e : estimates) {
        const double d = (e - estimand) * (e - estimand) - mse;
        ss += d * d;
    }
    return {mse, std::sqrt(ss / (n * (n - 1.0)))};
}

McValue compute_coverage(std::span<const Interval> intervals, double estimand) {
    if (intervals.empty()) throw DomainError("compute_coverage: no intervals");
    std::size_t hits = 0;
    for (const auto& ci : intervals) hits += ci.contains(estimand) ? 1 : 0;
    const double n = static_cast<double>(intervals.size());
    const double c = static_cast<double>(hits) / n;
    return {c, std::sqrt(c * (1.0 - c) / n)};
}

Interval coverage_band(double level, int n_sim, double multiplier) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("coverage_band: level must lie in (0, 1)");
    if (n_sim < 1) throw DomainError("coverage_band: n_sim must be positive");
    const double half = multiplier * std::sqrt(level * (1.0 - level) / n_sim);
    return {level - half, level + half};
}

MeanEstimate mean_estimate(std::span<const double> estimates, double level) {
    require_two(estimates.size(), "mean_estimate");
    const double n = static_cast<double>(estimates.size());
    MeanEstimate out;
    out.mean = mean_of(estimates);
    double ss = 0.0;
    for (double e : estimates) ss += (e - out.mean) * (e - out.mean);
    out.empirical_se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    out.ci = wald_ci(out.mean, out.empirical_se, level);
    return out;
}

double bounds_containment(std::span<const double> point_estimates, std::span<const Interval> bounds) {
    if (point_estimates.size() != bounds.size()) throw DomainError("bounds_containment: length mismatch");
    if (bounds.empty()) throw DomainError("bounds_containment: no simulations");
    std::size_t inside = 0;
    for (std::size_t i = 0; i < bounds.size(); ++i) inside += bounds[i].contains(point_estimates[i]) ? 1 : 0;
    return static_cast<double>(inside) / static_cast<double>(bounds.size());
}

std::string_view to_string(Estimand e) { return e == Estimand::Theta1 ? "THETA1" : "THETA2"; }

PerformanceSummary summarize_performance(std::string scenario_id, std::span<const EstimateRecord> records,
                                         Estimand estimand, double estimand_value, double level) {
    PerformanceSummary s;
    s.scenario_id = std::move(scenario_id);
    s.estimand = estimand;
    s.estimand_value = estimand_value;
    if (!records.empty()) {
        s.method = records.front().method;
        s.covariate_set = records.front().covariate_set;
    }
    std::vector<double> estimates;
    std::vector<Interval> intervals;
    double analyzed = 0.0;
    for (const auto& r : records) {
        if (!r.ok() || !r.estimate || !r.ci) {
            ++s.n_failed;
            continue;
        }
        estimates.push_back(*r.estimate);
        intervals.push_back(*r.ci);
        analyzed += r.n_analyzed;
    }
    s.n_sim_used = static_cast<int>(estimates.size());
    if (estimates.size() < 2) throw ExecutionError("summarize_performance: fewer than 2 usable replicates");
    s.mean = mean_estimate(estimates, level);
    s.bias = compute_bias(estimates, estimand_value);
    s.mse = compute_mse(estimates, estimand_value);
    s.coverage = compute_coverage(intervals, estimand_value);
    double ss = 0.0;
    for (double e : estimates) ss += (e - s.mean.mean) * (e - s.mean.mean);
    s.variance = ss / static_cast<double>(estimates.size());
    s.avg_n_analyzed = analyzed / static_cast<double>(estimates.size());
    return s;
}

namespace {

struct RunningMean {
    double sum = 0.0;
    int n = 0;
    void add(const std::optional<double>& v) {
        if (!v) return;
        sum += *v;
        ++n;
    }
    double mean() const { return n > 0 ? sum / n : 0.0; }
};

struct AnalyzedAccumulator {
    int n_sim = 0;
    RunningMean mi, cca, survivors, always;
    RunningMean sace[3], sace_pct[3];
};

}  // namespace

std::vector<AnalyzedRow> summarize_analyzed(std::span<const AnalyzedInput> inputs) {
    if (inputs.empty()) throw DomainError("summarize_analyzed: no simulations");
    std::map<double, AnalyzedAccumulator, std::greater<>> groups;
    for (const auto& in : inputs) {
        if (in.n_patients <= 0) throw DomainError("summarize_analyzed: n_patients must be positive");
        auto& acc = groups[in.effect_on_survival_logodds];
        ++acc.n_sim;
        acc.mi.add(in.mi_n);
        acc.cca.add(in.cca_n);
        acc.survivors.add(100.0 * in.n_survivors / in.n_patients);
        acc.always.add(100.0 * in.n_always / in.n_patients);
        for (int v = 0; v < 3; ++v) {
            acc.sace[v].add(in.sace_n[v]);
            if (in.sace_n[v]) acc.sace_pct[v].add(100.0 * *in.sace_n[v] / in.n_patients);
        }
    }
    std::vector<AnalyzedRow> rows;
    for (const auto& [key, acc] : groups) {
        AnalyzedRow row;
        row.effect_on_survival_logodds = key;
        row.n_sim = acc.n_sim;
        row.mi_n = acc.mi.mean();
        row.cca_n = acc.cca.mean();
        row.survivors_pct = acc.survivors.mean();
        row.true_always_pct = acc.always.mean();
        for (int v = 0; v < 3; ++v) {
            row.sace_n[v] = acc.sace[v].mean();
            row.estimated_always_pct[v] = acc.sace_pct[v].mean();
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace sacesim
