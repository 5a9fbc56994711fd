#include "sacesim/estimators.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "sacesim/errors.hpp"
#include "sacesim/regression.hpp"

namespace sacesim {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Cca: return "CCA";
        case Method::Sace: return "SACE";
        case Method::Mi: return "MI";
        case Method::SaceBoundsZhang: return "SACE_BOUNDS_ZHANG";
        case Method::SaceBoundsChiba: return "SACE_BOUNDS_CHIBA";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    for (auto m : {Method::Cca, Method::Sace, Method::Mi, Method::SaceBoundsZhang, Method::SaceBoundsChiba}) {
        if (to_string(m) == name) return m;
    }
    throw DomainError("unknown method '" + std::string(name) + "'");
}

bool is_point_method(Method m) { return m == Method::Cca || m == Method::Sace || m == Method::Mi; }

std::string_view to_string(EstimateStatus s) {
    switch (s) {
        case EstimateStatus::Ok: return "OK";
        case EstimateStatus::Unstable: return "UNSTABLE";
        case EstimateStatus::Failed: return "FAILED";
    }
    return "?";
}

EstimateStatus parse_status(std::string_view name) {
    for (auto s : {EstimateStatus::Ok, EstimateStatus::Unstable, EstimateStatus::Failed}) {
        if (to_string(s) == name) return s;
    }
    throw DomainError("unknown status '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

TreatmentContrast fit_treatment_contrast(std::span<const double> outcomes, std::span<const int> arms) {
    if (outcomes.size() != arms.size()) throw DomainError("fit_treatment_contrast: length mismatch");
    double sum[2] = {0.0, 0.0};
    int count[2] = {0, 0};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const int a = arms[i] == 1 ? 1 : 0;
        sum[a] += outcomes[i];
        ++count[a];
    }
    if (count[0] < 1 || count[1] < 1 || count[0] + count[1] < 3) {
        throw InsufficientDataError("fit_treatment_contrast: need both arms and more than 2 observations");
    }
    const double mean0 = sum[0] / count[0];
    const double mean1 = sum[1] / count[1];
    double ss = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const double d = outcomes[i] - (arms[i] == 1 ? mean1 : mean0);
        ss += d * d;
    }
    const double s2 = ss / static_cast<double>(count[0] + count[1] - 2);
    TreatmentContrast fit;
    fit.control_mean = mean0;
    fit.difference = mean1 - mean0;
    fit.se = std::sqrt(s2 * (1.0 / count[0] + 1.0 / count[1]));
    fit.n_control = count[0];
    fit.n_treated = count[1];
    return fit;
}

EstimateRecord estimate_cca(const TrialDataset& trial, double level) {
    std::vector<double> y;
    std::vector<int> z;
    y.reserve(trial.size());
    z.reserve(trial.size());
    int survivors[2] = {0, 0};
    for (const auto& p : trial.patients) {
        if (!p.observed_outcome) continue;
        y.push_back(*p.observed_outcome);
        z.push_back(p.z);
        ++survivors[p.z];
    }
    if (survivors[0] < 2 || survivors[1] < 2) {
        throw InsufficientDataError("estimate_cca: each arm needs at least 2 survivors");
    }
    const auto fit = fit_treatment_contrast(y, z);
    EstimateRecord rec;
    rec.method = Method::Cca;
    rec.estimate = fit.difference;
    rec.se = fit.se;
    rec.ci = wald_ci(fit.difference, fit.se, level);
    rec.n_analyzed = static_cast<double>(y.size());
    return rec;
}

// ---------------------------------------------------------------------------

HaydenPoint hayden_estimate(const TrialDataset& trial, std::span<const double> p_control,
                            std::span<const double> p_treated) {
    if (p_control.size() != trial.size() || p_treated.size() != trial.size()) {
        throw DomainError("hayden_estimate: probability vectors must have one entry per patient");
    }
    double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
    for (std::size_t i = 0; i < trial.size(); ++i) {
        const auto& p = trial.patients[i];
        if (!p.observed_outcome) continue;
        if (p.z == 1) {
            num1 += *p.observed_outcome * p_control[i];
            den1 += p_control[i];
        } else {
            num0 += *p.observed_outcome * p_treated[i];
            den0 += p_treated[i];
        }
    }
    if (!(den1 > 0.0) || !(den0 > 0.0)) {
        throw InsufficientDataError("hayden_estimate: an arm has no survivors with positive weight");
    }
    return {num1 / den1 - num0 / den0, den1 + den0};
}

namespace {

struct ArmModel {
    bool deterministic = false;  // no deaths: predicted survival is 1
    Eigen::VectorXd coefficients;
};

Eigen::MatrixXd survival_design(const TrialDataset& trial, const CovariateSet& covariates) {
    const auto n = static_cast<Eigen::Index>(trial.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(covariates.size()) + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (std::size_t k = 0; k < covariates.size(); ++k) {
            x(i, static_cast<Eigen::Index>(k) + 1) = covariate_value(trial.patients[i].x, covariates[k]);
        }
    }
    return x;
}

// Returns nullopt when the logistic fit does not converge.
std::optional<ArmModel> fit_arm_survival(const TrialDataset& trial, const Eigen::MatrixXd& design,
                                         std::span<const std::size_t> idx, const Eigen::VectorXd& start) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::Index deaths = 0;
    for (std::size_t i : idx) deaths += trial.patients[i].observed_survival ? 0 : 1;
    if (deaths == n) throw InsufficientDataError("SACE: an arm has no survivors");
    if (deaths == 0) return ArmModel{true, {}};

    Eigen::MatrixXd x(n, design.cols());
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const std::size_t i = idx[static_cast<std::size_t>(r)];
        x.row(r) = design.row(static_cast<Eigen::Index>(i));
        y(r) = trial.patients[i].observed_survival ? 1.0 : 0.0;
    }
    LogisticOptions options;
    options.compute_covariance = false;
    auto fit = fit_logistic(x, y, options, start);
    if (!fit.converged) return std::nullopt;
    return ArmModel{false, std::move(fit.coefficients)};
}

double predict_survival(const ArmModel& model, const Eigen::MatrixXd& design, std::size_t i) {
    if (model.deterministic) return 1.0;
    return inv_logit(design.row(static_cast<Eigen::Index>(i)).dot(model.coefficients));
}

struct HaydenFit {
    HaydenPoint point;
    ArmModel treated;
    ArmModel control;
};

std::optional<HaydenFit> hayden_fit(const TrialDataset& trial, const Eigen::MatrixXd& design,
                                    std::span<const std::size_t> arm1, std::span<const std::size_t> arm0,
                                    const HaydenFit* warm) {
    const Eigen::VectorXd none;
    auto treated = fit_arm_survival(trial, design, arm1,
                                    warm && !warm->treated.deterministic ? warm->treated.coefficients : none);
    if (!treated) return std::nullopt;
    auto control = fit_arm_survival(trial, design, arm0,
                                    warm && !warm->control.deterministic ? warm->control.coefficients : none);
    if (!control) return std::nullopt;

    double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
    for (std::size_t i : arm1) {
        const auto& p = trial.patients[i];
        if (!p.observed_outcome) continue;
        const double w = predict_survival(*control, design, i);
        num1 += *p.observed_outcome * w;
        den1 += w;
    }
    for (std::size_t j : arm0) {
        const auto& p = trial.patients[j];
        if (!p.observed_outcome) continue;
        const double w = predict_survival(*treated, design, j);
        num0 += *p.observed_outcome * w;
        den0 += w;
    }
    if (!(den1 > 0.0) || !(den0 > 0.0)) return std::nullopt;
    return HaydenFit{{num1 / den1 - num0 / den0, den1 + den0}, std::move(*treated), std::move(*control)};
}

}  // namespace

EstimateRecord estimate_sace_hayden(const TrialDataset& trial, const CovariateSet& covariates,
                                    const SaceOptions& options, RngStream& stream) {
    if (options.bootstrap_reps < 2) throw DomainError("estimate_sace_hayden: need at least 2 bootstrap replicates");
    std::vector<std::size_t> arm1, arm0;
    for (std::size_t i = 0; i < trial.size(); ++i) (trial.patients[i].z == 1 ? arm1 : arm0).push_back(i);
    if (arm1.empty() || arm0.empty()) throw InsufficientDataError("SACE: both arms must be nonempty");

    const Eigen::MatrixXd design = survival_design(trial, covariates);
    EstimateRecord rec;
    rec.method = Method::Sace;
    const auto point = hayden_fit(trial, design, arm1, arm0, nullptr);
    if (!point) {
        rec.status = EstimateStatus::Failed;
        rec.message = "survival model did not converge";
        return rec;
    }
    rec.estimate = point->point.estimate;
    rec.n_analyzed = point->point.n_analyzed;

    std::vector<double> replicates;
    replicates.reserve(static_cast<std::size_t>(options.bootstrap_reps));
    std::vector<std::size_t> boot1(arm1.size()), boot0(arm0.size());
    int failures = 0;
    for (int r = 0; r < options.bootstrap_reps; ++r) {
        RngStream rep = stream.split(static_cast<std::uint64_t>(r));
        for (auto& i : boot1) i = arm1[rep.uniform_index(arm1.size())];
        for (auto& j : boot0) j = arm0[rep.uniform_index(arm0.size())];
        try {
            const auto fit = hayden_fit(trial, design, boot1, boot0, &*point);
            if (fit) {
                replicates.push_back(fit->point.estimate);
            } else {
                ++failures;
            }
        } catch (const InsufficientDataError&) {
            ++failures;
        }
    }

    if (replicates.size() >= 2) {
        double mean = 0.0;
        for (double v : replicates) mean += v;
        mean /= static_cast<double>(replicates.size());
        double ss = 0.0;
        for (double v : replicates) ss += (v - mean) * (v - mean);
        const double se = std::sqrt(ss / static_cast<double>(replicates.size() - 1));
        rec.se = se;
        rec.ci = wald_ci(*rec.estimate, se, options.level);
    }
    if (2 * failures > options.bootstrap_reps || replicates.size() < 2) {
        rec.status = EstimateStatus::Unstable;
        rec.message = std::to_string(failures) + " of " + std::to_string(options.bootstrap_reps) +
                      " bootstrap replicates failed";
    }
    return rec;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> impute_outcomes(const TrialDataset& trial, const CovariateSet& covariates, int m,
                                                 RngStream& stream) {
    if (m < 2) throw DomainError("impute_outcomes: need at least 2 imputations");
    const auto p = static_cast<Eigen::Index>(covariates.size()) + 2;
    auto row_of = [&](const PatientRecord& patient) {
        Eigen::RowVectorXd row(p);
        row(0) = 1.0;
        row(1) = patient.z;
        for (std::size_t k = 0; k < covariates.size(); ++k) {
            row(static_cast<Eigen::Index>(k) + 2) = covariate_value(patient.x, covariates[k]);
        }
        return row;
    };

    std::vector<double> base(trial.size(), 0.0);
    std::vector<std::size_t> observed, missing;
    for (std::size_t i = 0; i < trial.size(); ++i) {
        if (trial.patients[i].observed_outcome) {
            base[i] = *trial.patients[i].observed_outcome;
            observed.push_back(i);
        } else {
            missing.push_back(i);
        }
    }
    if (static_cast<Eigen::Index>(observed.size()) < p + 2) {
        throw InsufficientDataError("impute_outcomes: too few complete cases for the imputation model");
    }
    if (missing.empty()) return std::vector<std::vector<double>>(static_cast<std::size_t>(m), base);

    const auto n_obs = static_cast<Eigen::Index>(observed.size());
    Eigen::MatrixXd x(n_obs, p);
    Eigen::VectorXd y(n_obs);
    for (Eigen::Index r = 0; r < n_obs; ++r) {
        const auto& patient = trial.patients[observed[static_cast<std::size_t>(r)]];
        x.row(r) = row_of(patient);
        y(r) = *patient.observed_outcome;
    }
    const FitResult fit = fit_ols(x, y);
    const double df = static_cast<double>(n_obs - p);
    const double rss = fit.residual_variance * df;
    const Eigen::LLT<Eigen::MatrixXd> llt(fit.unscaled_covariance);
    if (llt.info() != Eigen::Success) throw SingularMatrixError("impute_outcomes: (X'X)^-1 is not positive-definite");
    const Eigen::MatrixXd chol = llt.matrixL();

    std::vector<Eigen::RowVectorXd> missing_rows;
    missing_rows.reserve(missing.size());
    for (std::size_t i : missing) missing_rows.push_back(row_of(trial.patients[i]));

    std::vector<std::vector<double>> completed(static_cast<std::size_t>(m), base);
    for (int k = 0; k < m; ++k) {
        RngStream draw = stream.split(static_cast<std::uint64_t>(k));
        const double sigma = std::sqrt(rss / draw.chi_squared(df));
        Eigen::VectorXd noise(p);
        for (Eigen::Index j = 0; j < p; ++j) noise(j) = draw.normal();
        const Eigen::VectorXd beta = fit.coefficients + sigma * (chol * noise);
        auto& out = completed[static_cast<std::size_t>(k)];
        for (std::size_t t = 0; t < missing.size(); ++t) {
            out[missing[t]] = missing_rows[t].dot(beta) + sigma * draw.normal();
        }
    }
    return completed;
}

RubinPooled pool_rubin(std::span<const double> estimates, std::span<const double> variances) {
    const std::size_t m = estimates.size();
    if (m < 2) throw DomainError("pool_rubin: need at least 2 imputations");
    if (variances.size() != m) throw DomainError("pool_rubin: estimates and variances differ in length");
    double mean = 0.0;
    double within = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (!(variances[k] >= 0.0)) throw DomainError("pool_rubin: variances must be nonnegative");
        // running means keep identical inputs exactly identical
        mean += (estimates[k] - mean) / static_cast<double>(k + 1);
        within += (variances[k] - within) / static_cast<double>(k + 1);
    }
    double ss = 0.0;
    for (double e : estimates) ss += (e - mean) * (e - mean);
    const double md = static_cast<double>(m);
    RubinPooled out;
    out.estimate = mean;
    out.within = within;
    out.between = ss / (md - 1.0);
    out.total = within + (1.0 + 1.0 / md) * out.between;
    out.se = std::sqrt(out.total);
    return out;
}

EstimateRecord estimate_mi(const TrialDataset& trial, const CovariateSet& covariates, int m, RngStream& stream,
                           double level) {
    const auto completed = impute_outcomes(trial, covariates, m, stream);
    std::vector<int> arms(trial.size());
    for (std::size_t i = 0; i < trial.size(); ++i) arms[i] = trial.patients[i].z;
    std::vector<double> estimates, variances;
    for (const auto& y : completed) {
        const auto fit = fit_treatment_contrast(y, arms);
        estimates.push_back(fit.difference);
        variances.push_back(fit.se * fit.se);
    }
    const auto pooled = pool_rubin(estimates, variances);
    EstimateRecord rec;
    rec.method = Method::Mi;
    rec.estimate = pooled.estimate;
    rec.se = pooled.se;
    rec.ci = wald_ci(pooled.estimate, pooled.se, level);
    rec.n_analyzed = static_cast<double>(trial.size());
    return rec;
}

// ---------------------------------------------------------------------------

namespace {

struct ArmSurvivors {
    int n[2] = {0, 0};
    std::vector<double> outcomes[2];

    double rate(int arm) const { return n[arm] > 0 ? static_cast<double>(outcomes[arm].size()) / n[arm] : 0.0; }
    double mean(int arm) const {
        double s = 0.0;
        for (double v : outcomes[arm]) s += v;
        return s / static_cast<double>(outcomes[arm].size());
    }
};

ArmSurvivors collect_survivors(const TrialDataset& trial) {
    ArmSurvivors s;
    for (const auto& p : trial.patients) {
        ++s.n[p.z];
        if (p.observed_outcome) s.outcomes[p.z].push_back(*p.observed_outcome);
    }
    return s;
}

}  // namespace

MonotonicityDirection empirical_monotonicity_direction(const TrialDataset& trial) {
    const auto s = collect_survivors(trial);
    return s.rate(1) >= s.rate(0) ? MonotonicityDirection::TreatmentSurvivesMore
                                  : MonotonicityDirection::ControlSurvivesMore;
}

Interval bounds_zhang(const TrialDataset& trial, MonotonicityDirection direction) {
    auto s = collect_survivors(trial);
    const int favored = direction == MonotonicityDirection::TreatmentSurvivesMore ? 1 : 0;
    const int other = 1 - favored;
    const double p_favored = s.rate(favored);
    const double p_other = s.rate(other);
    if (p_favored == 0.0) throw InsufficientDataError("bounds_zhang: the favored arm has no survivors");
    if (s.outcomes[other].empty()) throw InsufficientDataError("bounds_zhang: the other arm has no survivors");
    if (p_favored < p_other) {
        throw MonotonicityError("bounds_zhang: observed survival contradicts the assumed monotonicity direction");
    }

    auto& trimmed = s.outcomes[favored];
    std::sort(trimmed.begin(), trimmed.end());
    const auto k = trimmed.size();
    const double pi = p_other / p_favored;
    auto keep = static_cast<std::size_t>(std::ceil(pi * static_cast<double>(k) - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, k);

    double low = 0.0, high = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        low += trimmed[i];
        high += trimmed[k - keep + i];
    }
    low /= static_cast<double>(keep);
    high /= static_cast<double>(keep);
    const double other_mean = s.mean(other);
    if (favored == 1) return {low - other_mean, high - other_mean};
    return {other_mean - high, other_mean - low};
}

Interval bounds_chiba(const TrialDataset& trial, const Interval& alpha_range) {
    const auto s = collect_survivors(trial);
    if (s.outcomes[0].empty() || s.outcomes[1].empty()) {
        throw InsufficientDataError("bounds_chiba: both arms need survivors");
    }
    if (alpha_range.lower > alpha_range.upper) throw DomainError("bounds_chiba: alpha range is reversed");
    const double crude = s.mean(1) - s.mean(0);
    return {crude - alpha_range.upper, crude - alpha_range.lower};
}

}  // namespace sacesim
