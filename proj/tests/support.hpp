#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "sacesim/config.hpp"
#include "sacesim/dgm.hpp"

namespace testing {

// Patient with explicit potential values; observed side follows from z.
inline sacesim::PatientRecord patient(int z, bool s1, bool s0, double y1, double y0,
                                      sacesim::CovariateRow x = {}) {
    sacesim::PatientRecord p;
    p.x = x;
    p.z = z;
    p.s1 = s1;
    p.s0 = s0;
    p.y1 = y1;
    p.y0 = y0;
    p.observed_survival = z == 1 ? s1 : s0;
    if (p.observed_survival) p.observed_outcome = z == 1 ? y1 : y0;
    return p;
}

// Observed-only patient: y is the outcome under the assigned arm.
inline sacesim::PatientRecord observed(int z, bool survived, double y, sacesim::CovariateRow x = {}) {
    return patient(z, z == 1 ? survived : true, z == 0 ? survived : true, y, y, x);
}

inline sacesim::TrialDataset trial_of(std::vector<sacesim::PatientRecord> patients) {
    sacesim::TrialDataset t;
    t.patients = std::move(patients);
    t.scenario_id = "T";
    return t;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("sacesim_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Small, fast plan for pipeline tests.
inline sacesim::RunPlan quick_plan(int n_sim, std::uint64_t seed = 7) {
    auto plan = sacesim::default_run_plan(seed);
    plan.n_sim = n_sim;
    plan.bootstrap_reps = 20;
    plan.mi_count = 3;
    return plan;
}

}  // namespace testing
