#include "sacesim/oracle.hpp"

#include <cmath>

#include "sacesim/errors.hpp"

namespace sacesim {

std::string_view to_string(StratumLabel s) {
    switch (s) {
        case StratumLabel::AlwaysSurvivor: return "ALWAYS_SURVIVOR";
        case StratumLabel::TreatmentOnlySurvivor: return "TREATMENT_ONLY_SURVIVOR";
        case StratumLabel::ControlOnlySurvivor: return "CONTROL_ONLY_SURVIVOR";
        case StratumLabel::NeverSurvivor: return "NEVER_SURVIVOR";
    }
    return "?";
}

StratumLabel classify_stratum(bool s1, bool s0) {
    if (s1) return s0 ? StratumLabel::AlwaysSurvivor : StratumLabel::TreatmentOnlySurvivor;
    return s0 ? StratumLabel::ControlOnlySurvivor : StratumLabel::NeverSurvivor;
}

StrataCounts strata_census(const TrialDataset& trial) {
    StrataCounts counts;
    for (const auto& p : trial.patients) {
        switch (classify_stratum(p.s1, p.s0)) {
            case StratumLabel::AlwaysSurvivor: ++counts.always; break;
            case StratumLabel::TreatmentOnlySurvivor: ++counts.treatment_only; break;
            case StratumLabel::ControlOnlySurvivor: ++counts.control_only; break;
            case StratumLabel::NeverSurvivor: ++counts.never; break;
        }
    }
    return counts;
}

double sace_reference(const TrialDataset& trial) {
    double numerator = 0.0;
    double denominator = 0.0;
    for (const auto& p : trial.patients) {
        const double both = static_cast<double>(p.s1) * static_cast<double>(p.s0);
        numerator += (p.y1 - p.y0) * both;
        denominator += both;
    }
    if (denominator == 0.0) throw UndefinedEstimandError("sace_reference: the always-survivor stratum is empty");
    return numerator / denominator;
}

double average_reference(std::span<const double> theta2_per_sim) {
    if (theta2_per_sim.empty()) throw DomainError("average_reference: no per-simulation values");
    double sum = 0.0;
    for (double v : theta2_per_sim) sum += v;
    return sum / static_cast<double>(theta2_per_sim.size());
}

EstimandSet make_estimand_set(double theta1, std::vector<double> theta2_per_sim) {
    EstimandSet set;
    set.theta1 = theta1;
    set.theta2 = average_reference(theta2_per_sim);
    const auto n = static_cast<double>(theta2_per_sim.size());
    if (theta2_per_sim.size() > 1) {
        double ss = 0.0;
        for (double v : theta2_per_sim) ss += (v - set.theta2) * (v - set.theta2);
        set.theta2_mc_se = std::sqrt(ss / (n * (n - 1.0)));
    }
    set.theta2_per_sim = std::move(theta2_per_sim);
    return set;
}

}  // namespace sacesim
