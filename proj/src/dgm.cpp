#include "sacesim/dgm.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "sacesim/distributions.hpp"
#include "sacesim/errors.hpp"
#include "sacesim/format.hpp"

namespace sacesim {

double covariate_value(const CovariateRow& row, Covariate c) {
    switch (c) {
        case Covariate::GestationalAge: return row.gestational_age;
        case Covariate::HeadCircumference: return row.head_circumference;
        case Covariate::Ses: return static_cast<double>(row.ses);
        case Covariate::Apgar: return static_cast<double>(row.apgar);
    }
    return 0.0;
}

namespace {

template <std::size_t N>
int draw_categorical(const std::array<double, N>& probs, RngStream& stream) {
    const double u = stream.uniform();
    double cumulative = 0.0;
    int last_positive = 0;
    for (std::size_t k = 0; k < N; ++k) {
        if (probs[k] <= 0.0) continue;
        cumulative += probs[k];
        last_positive = static_cast<int>(k);
        if (u < cumulative) return last_positive;
    }
    return last_positive;
}

double outcome_predictor(const CovariateRow& x, const OutcomeCoefs& b) {
    return b.intercept + b.gestational_age * x.gestational_age + b.head_circumference * x.head_circumference +
           b.ses * x.ses;
}

double survival_predictor(const CovariateRow& x, const SurvivalCoefs& b) {
    return b.intercept + b.gestational_age * x.gestational_age + b.head_circumference * x.head_circumference +
           b.apgar * x.apgar;
}

}  // namespace

CovariateTable simulate_covariates(std::size_t n, const DgmParams& params, RngStream& stream) {
    const CovariateModel& cm = params.covariates;
    const BivariateNormal mvn(cm.covariance);
    CovariateTable table(n);
    for (auto& row : table) {
        const int a = draw_categorical(cm.apgar_probs, stream);
        const Eigen::Vector2d draw =
            mvn.sample({cm.gestational_age_means[a], cm.head_circumference_means[a]}, stream);
        row.apgar = a + 1;
        row.gestational_age = draw(0);
        row.head_circumference = draw(1);
        row.ses = kSesMin + draw_categorical(cm.ses_probs[a], stream);
    }
    return table;
}

PotentialOutcomes simulate_potential_outcomes(const CovariateTable& covariates, const DgmParams& params,
                                              double effect_on_outcome, RngStream& stream) {
    const double sd = params.outcome.residual_sd;
    PotentialOutcomes out;
    out.treated.resize(covariates.size());
    out.control.resize(covariates.size());
    for (std::size_t i = 0; i < covariates.size(); ++i) {
        const double lp = outcome_predictor(covariates[i], params.outcome);
        out.treated[i] = lp + effect_on_outcome + sd * stream.normal();
        out.control[i] = lp + sd * stream.normal();
    }
    return out;
}

PotentialSurvival simulate_potential_survival(const CovariateTable& covariates, const DgmParams& params,
                                              double effect_on_survival_logodds, RngStream& stream) {
    const std::size_t n = covariates.size();
    PotentialSurvival out;
    out.p_treated.resize(n);
    out.p_control.resize(n);
    out.treated.resize(n);
    out.control.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lp = survival_predictor(covariates[i], params.survival);
        out.p_treated[i] = inv_logit(lp + effect_on_survival_logodds);
        out.p_control[i] = inv_logit(lp);
        out.treated[i] = stream.bernoulli(out.p_treated[i]);
        out.control[i] = stream.bernoulli(out.p_control[i]);
    }
    return out;
}

TrialDataset randomize_and_observe(const CovariateTable& covariates, const PotentialOutcomes& outcomes,
                                   const PotentialSurvival& survival, const Allocation& allocation,
                                   RngStream& stream) {
    const std::size_t n = covariates.size();
    if (allocation.control < 0 || allocation.treatment < 0 || static_cast<std::size_t>(allocation.total()) != n) {
        throw DomainError("randomize_and_observe: allocation does not sum to the number of patients");
    }
    if (outcomes.treated.size() != n || outcomes.control.size() != n || survival.treated.size() != n ||
        survival.control.size() != n) {
        throw DomainError("randomize_and_observe: potential outcome tables do not match covariates");
    }
    std::vector<int> arm(n, 0);
    std::fill(arm.begin() + allocation.control, arm.end(), 1);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = stream.uniform_index(i);
        std::swap(arm[i - 1], arm[j]);
    }

    TrialDataset trial;
    trial.patients.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        PatientRecord& p = trial.patients[i];
        p.x = covariates[i];
        p.y1 = outcomes.treated[i];
        p.y0 = outcomes.control[i];
        p.s1 = survival.treated[i] != 0;
        p.s0 = survival.control[i] != 0;
        p.z = arm[i];
        p.observed_survival = p.z == 1 ? p.s1 : p.s0;
        if (p.observed_survival) p.observed_outcome = p.z == 1 ? p.y1 : p.y0;
    }
    return trial;
}

TrialDataset simulate_trial(const DgmParams& params, const ScenarioSpec& scenario, std::uint64_t master_seed,
                            std::uint64_t sim_index) {
    auto cov_stream = spawn_stream(master_seed, scenario.id, sim_index, "dgm:covariates");
    auto outcome_stream = spawn_stream(master_seed, scenario.id, sim_index, "dgm:outcomes");
    auto survival_stream = spawn_stream(master_seed, scenario.id, sim_index, "dgm:survival");
    auto arm_stream = spawn_stream(master_seed, scenario.id, sim_index, "dgm:randomization");

    const auto covariates = simulate_covariates(static_cast<std::size_t>(params.n_per_trial), params, cov_stream);
    const auto outcomes =
        simulate_potential_outcomes(covariates, params, scenario.effect_on_outcome, outcome_stream);
    const auto survival =
        simulate_potential_survival(covariates, params, scenario.effect_on_survival_logodds, survival_stream);
    TrialDataset trial = randomize_and_observe(covariates, outcomes, survival, params.allocation, arm_stream);
    trial.scenario_id = scenario.id;
    trial.sim_index = sim_index;
    return trial;
}

namespace {

std::vector<double> survival_slopes(const DgmParams& params, std::uint64_t seed, std::size_t n_eval) {
    auto stream = spawn_stream(seed, "calibration", 0, "calibration:covariates");
    const auto table = simulate_covariates(n_eval, params, stream);
    SurvivalCoefs slopes = params.survival;
    slopes.intercept = 0.0;
    std::vector<double> lp(n_eval);
    for (std::size_t i = 0; i < n_eval; ++i) lp[i] = survival_predictor(table[i], slopes);
    return lp;
}

double mean_survival(const std::vector<double>& slopes, double intercept) {
    double sum = 0.0;
    for (double v : slopes) sum += inv_logit(intercept + v);
    return sum / static_cast<double>(slopes.size());
}

}  // namespace

double marginal_survival(const DgmParams& params, std::uint64_t seed, std::size_t n_eval) {
    return mean_survival(survival_slopes(params, seed, n_eval), params.survival.intercept);
}

double calibrate_survival_intercept(const DgmParams& params, double target, double tolerance, std::uint64_t seed,
                                    std::size_t n_eval) {
    if (!(target > 0.0 && target < 1.0)) {
        throw DomainError("calibrate_survival_intercept: target survival must lie strictly between 0 and 1");
    }
    if (!(tolerance > 0.0)) throw DomainError("calibrate_survival_intercept: tolerance must be positive");
    if (n_eval == 0) throw DomainError("calibrate_survival_intercept: n_eval must be positive");
    const auto slopes = survival_slopes(params, seed, n_eval);

    double lo = -200.0;
    double hi = 200.0;
    if (mean_survival(slopes, lo) > target || mean_survival(slopes, hi) < target) {
        throw DomainError("calibrate_survival_intercept: target is not bracketed by the intercept search range");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double achieved = mean_survival(slopes, mid);
        if (std::fabs(achieved - target) <= tolerance) return mid;
        (achieved < target ? lo : hi) = mid;
    }
    throw DomainError("calibrate_survival_intercept: bisection did not reach the tolerance");
}

void write_trial_csv(const TrialDataset& trial, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ExecutionError("cannot write trial dump '" + path.string() + "'");
    out << "id,x1,x2,x3,x4,z,s1,s0,y1,y0,observed_survival,observed_outcome\n";
    for (std::size_t i = 0; i < trial.size(); ++i) {
        const auto& p = trial.patients[i];
        out << i << ',' << format_double(p.x.gestational_age) << ',' << format_double(p.x.head_circumference) << ','
            << p.x.ses << ',' << p.x.apgar << ',' << p.z << ',' << int(p.s1) << ',' << int(p.s0) << ','
            << format_double(p.y1) << ',' << format_double(p.y0) << ',' << int(p.observed_survival) << ','
            << format_optional(p.observed_outcome) << '\n';
    }
    if (!out) throw ExecutionError("failed writing trial dump '" + path.string() + "'");
}

}  // namespace sacesim
