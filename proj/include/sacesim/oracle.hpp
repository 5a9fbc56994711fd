#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "sacesim/dgm.hpp"

namespace sacesim {

enum class StratumLabel { AlwaysSurvivor, TreatmentOnlySurvivor, ControlOnlySurvivor, NeverSurvivor };

std::string_view to_string(StratumLabel s);

/// (s1, s0): (1,1) always, (1,0) treatment-only, (0,1) control-only, (0,0) never.
StratumLabel classify_stratum(bool s1, bool s0);

struct StrataCounts {
    int always = 0;
    int treatment_only = 0;
    int control_only = 0;
    int never = 0;

    int total() const { return always + treatment_only + control_only + never; }
    bool operator==(const StrataCounts&) const = default;
};

StrataCounts strata_census(const TrialDataset& trial);

/// Sum{(Y(1) - Y(0)) S(1) S(0)} / Sum{S(1) S(0)} over all patients.
/// Throws UndefinedEstimandError when no patient survives under both arms.
double sace_reference(const TrialDataset& trial);

/// Arithmetic mean; throws DomainError on empty input.
double average_reference(std::span<const double> theta2_per_sim);

struct EstimandSet {
    double theta1 = 0.0;
    std::vector<double> theta2_per_sim;
    double theta2 = 0.0;
    /// Monte Carlo SE of theta2 (reported only, not used for coverage).
    double theta2_mc_se = 0.0;
};

EstimandSet make_estimand_set(double theta1, std::vector<double> theta2_per_sim);

}  // namespace sacesim
