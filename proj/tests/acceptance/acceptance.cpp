// Acceptance suite: one PASS/FAIL line per criterion. Runs the full default
// plan twice (about 45 minutes on one core). Usage: acceptance [out_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "sacesim/config.hpp"
#include "sacesim/errors.hpp"
#include "sacesim/estimators.hpp"
#include "sacesim/io.hpp"
#include "sacesim/metrics.hpp"
#include "sacesim/oracle.hpp"
#include "sacesim/runner.hpp"

using namespace sacesim;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "  violated: " << what << "\n";
        }
    }
};

int failures = 0;

void report(int k, const std::string& title, const Outcome& o) {
    std::cout << "ACCEPTANCE " << k << ' ' << (o.pass ? "PASS" : "FAIL") << ": " << title << "\n";
    std::cout << o.detail.str() << std::flush;
    if (!o.pass) ++failures;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const PerformanceSummary& cell(const StudyResult& r, const std::string& id, Method m, CovariateVariant v,
                               Estimand e) {
    for (const auto& s : r.summaries) {
        if (s.scenario_id == id && s.method == m && s.covariate_set == v && s.estimand == e) return s;
    }
    throw std::runtime_error("missing summary cell " + id);
}

const BoundsSummary& bounds_cell(const StudyResult& r, const std::string& id, Method m) {
    for (const auto& b : r.bounds) {
        if (b.scenario_id == id && b.method == m) return b;
    }
    throw std::runtime_error("missing bounds cell " + id);
}

std::string label(Method m, CovariateVariant v) {
    return std::string(to_string(m)) + "/" + std::string(to_string(v));
}

PatientRecord make_patient(int z, bool s1, bool s0, double y1, double y0) {
    PatientRecord p;
    p.z = z;
    p.s1 = s1;
    p.s0 = s0;
    p.y1 = y1;
    p.y0 = y0;
    p.observed_survival = z == 1 ? s1 : s0;
    if (p.observed_survival) p.observed_outcome = z == 1 ? y1 : y0;
    return p;
}

void criterion_1() {
    Outcome o;
    const int n = plan_n_sim(1.73, 0.1, 0.05);
    const auto band = coverage_band(0.95, 1300);
    o.detail << "  plan_n_sim(1.73, 0.1, 0.05) = " << n << "; coverage_band(0.95, 1300) = (" << fmt(band.lower, 3)
             << ", " << fmt(band.upper, 3) << ")\n";
    o.require(n == 1150, "n_sim planner");
    o.require(fmt(band.lower, 3) == "0.938" && fmt(band.upper, 3) == "0.962", "coverage band");
    report(1, "planner and coverage band", o);
}

void criterion_7() {
    Outcome o;
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> y(-20.0, 20.0);
    std::bernoulli_distribution coin(0.6);
    int mismatches = 0, evaluated = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        TrialDataset t;
        const int n = 1 + static_cast<int>(gen() % 10);
        double sum = 0.0;
        int k = 0;
        for (int i = 0; i < n; ++i) {
            auto p = make_patient(coin(gen), coin(gen), coin(gen), y(gen), y(gen));
            if (p.s1 && p.s0) {
                sum += p.y1 - p.y0;
                ++k;
            }
            t.patients.push_back(p);
        }
        if (k == 0) continue;
        ++evaluated;
        mismatches += sace_reference(t) != sum / k;
    }
    o.detail << "  reference SACE vs brute force: " << mismatches << " mismatches in " << evaluated << " trials\n";
    o.require(mismatches == 0, "reference SACE equals brute force");

    const auto plan = default_run_plan();
    const auto trial = simulate_trial(plan.dgm, plan.scenarios[6], plan.master_seed, 0);
    const std::vector<double> flat(trial.size(), 0.6);
    double s[2] = {0, 0};
    int c[2] = {0, 0};
    for (const auto& p : trial.patients) {
        if (!p.observed_outcome) continue;
        s[p.z] += *p.observed_outcome;
        ++c[p.z];
    }
    const double gap = std::fabs(hayden_estimate(trial, flat, flat).estimate - (s[1] / c[1] - s[0] / c[0]));
    o.detail << "  constant-probability weighted estimate vs survivor difference: |gap| = " << gap << "\n";
    o.require(gap <= 1e-12, "constant probabilities");

    auto dgm = plan.dgm;
    dgm.survival.intercept = 60.0;
    const auto alive = simulate_trial(dgm, plan.scenarios[0], plan.master_seed, 0);
    auto ss = spawn_stream(1, "acc", 0, "sace");
    auto ms = spawn_stream(1, "acc", 0, "mi");
    const auto& sc = plan.scenarios[0];
    const double cca = *estimate_cca(alive).estimate;
    const double sace = *estimate_sace_hayden(alive, sc.sace_covariates, {20, 0.95}, ss).estimate;
    const double mi = *estimate_mi(alive, sc.mi_covariates, 10, ms).estimate;
    o.detail << "  zero mortality: CCA " << cca << ", SACE " << sace << ", MI " << mi << "\n";
    o.require(cca == sace && cca == mi, "zero mortality equality");

    const std::vector<double> e = {1, 3}, v = {1, 1};
    const auto pooled = pool_rubin(e, v);
    o.detail << "  Rubin {1,3},{1,1}: pooled " << pooled.estimate << ", se " << pooled.se << "\n";
    o.require(pooled.estimate == 2.0 && pooled.se == 2.0, "Rubin hand example");
    report(7, "oracle equivalences", o);
}

void criterion_2(const StudyResult& r) {
    Outcome o;
    const auto band = coverage_band(0.95, r.plan.n_sim);
    for (const auto& a : point_analyses()) {
        const auto& s = cell(r, "E", a.method, a.set, Estimand::Theta1);
        const bool bias_ok = std::fabs(s.bias.value) <= 3.0 * s.bias.mc_se;
        const bool cov_ok = band.contains(s.coverage.value) ||
                            std::fabs(s.coverage.value - 0.95) <= 1.959963984540054 * s.coverage.mc_se;
        o.detail << "  " << label(a.method, a.set) << ": bias " << fmt(s.bias.value) << " (mc se "
                 << fmt(s.bias.mc_se) << "), coverage " << fmt(s.coverage.value) << " (mc se "
                 << fmt(s.coverage.mc_se) << ")\n";
        o.require(bias_ok, label(a.method, a.set) + " bias");
        o.require(cov_ok, label(a.method, a.set) + " coverage");
    }
    report(2, "null scenario E unbiased with nominal coverage", o);
}

void criterion_3(const StudyResult& r) {
    Outcome o;
    for (const auto& p : pooled_bias_by_survival_effect(r)) {
        if (p.method != Method::Cca) continue;
        const double z = p.bias.value / p.bias.mc_se;
        const double orr = std::exp(p.effect_on_survival_logodds);
        o.detail << "  OR " << fmt(orr, 1) << ": pooled CCA bias " << fmt(p.bias.value) << " (mc se "
                 << fmt(p.bias.mc_se) << ", n " << p.n << ")\n";
        if (p.effect_on_survival_logodds > 0) {
            o.require(z < -3.0, "OR 2 bias negative and significant");
        } else if (p.effect_on_survival_logodds < 0) {
            o.require(z > 3.0, "OR 0.5 bias positive and significant");
        } else {
            o.require(std::fabs(z) <= 3.0, "OR 1 bias not significant");
        }
    }
    report(3, "CCA bias direction by survival effect", o);
}

void criterion_4(const StudyResult& r) {
    Outcome o;
    for (const auto& sc : r.scenarios) {
        const auto& id = sc.spec.id;
        const auto& sace = cell(r, id, Method::Sace, CovariateVariant::All, Estimand::Theta2);
        const auto& mi = cell(r, id, Method::Mi, CovariateVariant::All, Estimand::Theta1);
        const auto& cca2 = cell(r, id, Method::Cca, CovariateVariant::All, Estimand::Theta2);
        const auto& cca1 = cell(r, id, Method::Cca, CovariateVariant::All, Estimand::Theta1);
        o.detail << "  " << id << ": SACE bias(theta2) " << fmt(sace.bias.value) << " (mc se " << fmt(sace.bias.mc_se)
                 << "), MI bias(theta1) " << fmt(mi.bias.value) << " (mc se " << fmt(mi.bias.mc_se)
                 << "), CCA " << fmt(cca2.bias.value) << " / " << fmt(cca1.bias.value) << "\n";
        o.require(std::fabs(sace.bias.value) <= 3.0 * sace.bias.mc_se, id + " SACE bias within 3 mc se");
        o.require(std::fabs(mi.bias.value) <= 3.0 * mi.bias.mc_se, id + " MI bias within 3 mc se");
        if (sc.spec.effect_on_survival_logodds != 0.0) {
            o.require(std::fabs(sace.bias.value) < std::fabs(cca2.bias.value), id + " SACE below CCA");
            o.require(std::fabs(mi.bias.value) < std::fabs(cca1.bias.value), id + " MI below CCA");
        }
    }
    report(4, "SACE and MI remove the CCA bias", o);
}

void criterion_5(const StudyResult& r) {
    Outcome o;
    for (const auto& sc : r.scenarios) {
        if (sc.spec.effect_on_survival_logodds == 0.0) continue;
        const auto& id = sc.spec.id;
        for (auto [method, estimand] : {std::pair{Method::Sace, Estimand::Theta2}, std::pair{Method::Mi, Estimand::Theta1}}) {
            const auto& all = cell(r, id, method, CovariateVariant::All, estimand);
            const auto& no_ga = cell(r, id, method, CovariateVariant::NoGa, estimand);
            const auto& no_hc = cell(r, id, method, CovariateVariant::NoHc, estimand);
            const double ga_gap = std::fabs(no_ga.bias.value) - std::fabs(all.bias.value);
            const double ga_se = std::hypot(no_ga.bias.mc_se, all.bias.mc_se);
            const double hc_gap = std::fabs(no_hc.bias.value) - std::fabs(all.bias.value);
            const double hc_se = std::hypot(no_hc.bias.mc_se, all.bias.mc_se);
            const std::string name = id + " " + std::string(to_string(method));
            o.detail << "  " << name << ": |bias| ALL " << fmt(std::fabs(all.bias.value)) << ", NO_GA "
                     << fmt(std::fabs(no_ga.bias.value)) << " (gap " << fmt(ga_gap) << " vs 2se " << fmt(2 * ga_se)
                     << "), NO_HC " << fmt(std::fabs(no_hc.bias.value)) << " (gap " << fmt(hc_gap) << " vs 2se "
                     << fmt(2 * hc_se) << ")\n";
            o.require(ga_gap > 2.0 * ga_se, name + " omitting GA increases bias");
            o.require(hc_gap <= 2.0 * hc_se, name + " omitting HC does not");
        }
    }
    report(5, "omission ordering", o);
}

void criterion_6(const StudyResult& r) {
    Outcome o;
    double worst = 0.0;
    for (const auto& s : r.summaries) {
        worst = std::max(worst, std::fabs(s.mse.value - s.bias.value * s.bias.value - s.variance));
    }
    o.detail << "  max |MSE - bias^2 - variance| over " << r.summaries.size() << " cells = " << worst << "\n";
    o.require(worst < 1e-10, "MSE identity");
    for (const auto& sc : r.scenarios) {
        if (sc.spec.effect_on_survival_logodds == 0.0) continue;
        const auto& id = sc.spec.id;
        const double cca = cell(r, id, Method::Cca, CovariateVariant::All, Estimand::Theta1).mse.value;
        const double sace = cell(r, id, Method::Sace, CovariateVariant::All, Estimand::Theta1).mse.value;
        const double mi = cell(r, id, Method::Mi, CovariateVariant::All, Estimand::Theta1).mse.value;
        o.detail << "  " << id << ": MSE CCA " << fmt(cca) << ", SACE " << fmt(sace) << ", MI " << fmt(mi) << "\n";
        o.require(cca > sace, id + " CCA MSE above SACE");
        o.require(cca > mi, id + " CCA MSE above MI");
    }
    report(6, "MSE dominance and identity", o);
}

void criterion_8(const StudyResult& r) {
    Outcome o;
    for (const auto& sc : r.scenarios) {
        if (sc.spec.effect_on_survival_logodds == 0.0) continue;
        const auto& b = bounds_cell(r, sc.spec.id, Method::SaceBoundsZhang);
        o.detail << "  " << sc.spec.id << ": SACE estimate inside trimming bounds in "
                 << fmt(100.0 * b.contains_sace_estimate, 1) << " % (oracle " << fmt(100.0 * b.contains_oracle, 1)
                 << " %, n " << b.n_used << ")\n";
        o.require(b.contains_sace_estimate >= 0.80, sc.spec.id + " containment");
    }
    // Equal survival rates: no trimming, both bounds equal the survivor difference.
    TrialDataset t;
    const double ys[] = {3.0, 8.0, 1.0, 4.0, 6.0};
    for (int i = 0; i < 5; ++i) t.patients.push_back(make_patient(1, i != 4, true, ys[i], 0.0));
    for (int i = 0; i < 5; ++i) t.patients.push_back(make_patient(0, true, i != 0, 0.0, ys[i] - 2.0));
    const auto z = bounds_zhang(t);
    const double crude = 16.0 / 4.0 - 11.0 / 4.0;
    o.detail << "  equal survival rates: bounds [" << z.lower << ", " << z.upper << "], crude " << crude << "\n";
    o.require(z.lower == crude && z.upper == crude, "bounds collapse at pi = 1");
    report(8, "trimming bounds", o);
}

void criterion_9(const StudyResult& r) {
    Outcome o;
    for (const auto& sc : r.scenarios) {
        if (sc.spec.effect_on_survival_logodds == 0.0) {
            double frac = 0.0;
            for (const auto& rec : sc.records) frac += static_cast<double>(rec.n_survivors) / rec.n_patients;
            frac /= static_cast<double>(sc.records.size());
            o.detail << "  " << sc.spec.id << ": mean survivor fraction " << fmt(frac) << "\n";
            o.require(frac >= 0.83 && frac <= 0.85, sc.spec.id + " survivor fraction");
        } else {
            int nonempty = 0;
            for (const auto& rec : sc.records) nonempty += rec.strata.control_only > 0;
            const double share = static_cast<double>(nonempty) / static_cast<double>(sc.records.size());
            o.detail << "  " << sc.spec.id << ": control-only stratum nonempty in " << fmt(100.0 * share, 1)
                     << " % of trials\n";
            o.require(share > 0.5, sc.spec.id + " control-only stratum");
        }
    }
    report(9, "calibration and strata census", o);
}

void criterion_10(const StudyResult& a, const StudyResult& b) {
    Outcome o;
    std::ostringstream ra, rb, sa, sb;
    write_records_csv(a, ra);
    write_records_csv(b, rb);
    write_summary_csv(a, sa);
    write_summary_csv(b, sb);
    o.detail << "  workers " << a.provenance.workers << " vs " << b.provenance.workers << ": records "
             << ra.str().size() << " bytes, summary " << sa.str().size() << " bytes\n";
    o.require(ra.str() == rb.str(), "records identical");
    o.require(sa.str() == sb.str(), "summaries identical");
    report(10, "determinism across runs and worker counts", o);
}

StudyResult full_run(int workers) {
    const auto plan = default_run_plan();
    RunOptions options;
    options.workers = workers;
    options.progress = [](std::string_view id, int done, int total) {
        if (done == total) std::cerr << "  scenario " << id << " done (" << total << ")\n";
    };
    const auto start = std::chrono::steady_clock::now();
    auto result = run_grid(plan, options);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "full run with " << workers << " worker(s): " << fmt(secs, 1) << " s\n";
    return result;
}

}  // namespace

int main(int argc, char** argv) {
    const std::filesystem::path out_dir = argc > 1 ? argv[1] : "acceptance_out";
    try {
        criterion_1();
        criterion_7();

        const auto first = full_run(1);
        export_results(first, out_dir);
        emit_plot_data(first, out_dir);
        for (const auto& w : first.warnings) std::cout << "warning: " << w << "\n";

        criterion_2(first);
        criterion_3(first);
        criterion_4(first);
        criterion_5(first);
        criterion_6(first);
        criterion_8(first);
        criterion_9(first);

        const auto second = full_run(2);
        criterion_10(first, second);
    } catch (const std::exception& e) {
        std::cout << "ACCEPTANCE aborted: " << e.what() << "\n";
        return 2;
    }
    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
              << "\n";
    return failures == 0 ? 0 : 1;
}
