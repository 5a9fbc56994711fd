#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "sacesim/config.hpp"
#include "sacesim/errors.hpp"
#include "support.hpp"

using namespace sacesim;

TEST_CASE("scenario grid layout") {
    const auto grid = scenario_grid();
    REQUIRE(grid.size() == 9);
    CHECK(grid[0].id == "A");
    CHECK(grid[0].effect_on_outcome == 5.0);
    CHECK(grid[0].odds_ratio() == doctest::Approx(2.0));
    CHECK(grid[4].id == "E");
    CHECK(grid[4].effect_on_outcome == 0.0);
    CHECK(grid[4].odds_ratio() == 1.0);
    CHECK(grid[8].id == "I");
    CHECK(grid[8].effect_on_outcome == -5.0);
    CHECK(grid[8].odds_ratio() == doctest::Approx(0.5));

    std::set<std::pair<double, double>> cells;
    for (const auto& s : grid) cells.emplace(s.effect_on_outcome, s.effect_on_survival_logodds);
    CHECK(cells.size() == 9);
    CHECK(scenario_grid() == grid);
}

TEST_CASE("default modeling sets match the generating models") {
    const CovariateSet survival = {Covariate::GestationalAge, Covariate::HeadCircumference, Covariate::Apgar};
    const CovariateSet outcome = {Covariate::GestationalAge, Covariate::HeadCircumference, Covariate::Ses};
    for (const auto& s : scenario_grid()) {
        CHECK(s.sace_covariates == survival);
        CHECK(s.mi_covariates == outcome);
    }
    const CovariateSet all = scenario_grid()[0].sace_covariates;
    const auto no_hc = apply_variant(all, CovariateVariant::NoHc);
    CHECK(no_hc.size() == 2);
    CHECK(std::find(no_hc.begin(), no_hc.end(), Covariate::HeadCircumference) == no_hc.end());
    const auto no_ga = apply_variant(all, CovariateVariant::NoGa);
    CHECK(std::find(no_ga.begin(), no_ga.end(), Covariate::GestationalAge) == no_ga.end());
    CHECK(apply_variant(all, CovariateVariant::All) == all);
}

TEST_CASE("names round trip") {
    for (auto c : {Covariate::GestationalAge, Covariate::HeadCircumference, Covariate::Ses, Covariate::Apgar}) {
        CHECK(parse_covariate(to_string(c)) == c);
    }
    for (auto v : kCovariateVariants) CHECK(parse_covariate_variant(to_string(v)) == v);
    CHECK_THROWS(parse_covariate("weight"));
    CHECK_THROWS(parse_covariate_variant("NO_SES"));
}

TEST_CASE("plan_n_sim examples") {
    CHECK(plan_n_sim(1.73, 0.1, 0.05) == 1150);
    CHECK(plan_n_sim(1.0, 1.96, 0.05) == 1);
    CHECK(plan_n_sim(2.0, 0.1, 0.05) == 1537);
}

TEST_CASE("plan_n_sim is monotone in sigma and delta") {
    int prev = 0;
    for (double sigma = 0.1; sigma < 5.0; sigma += 0.1) {
        const int n = plan_n_sim(sigma, 0.1, 0.05);
        CHECK(n >= prev);
        prev = n;
    }
    prev = 1 << 30;
    for (double delta = 0.01; delta < 2.0; delta += 0.01) {
        const int n = plan_n_sim(1.5, delta, 0.05);
        CHECK(n <= prev);
        prev = n;
    }
}

TEST_CASE("plan_n_sim rejects bad inputs") {
    CHECK_THROWS_AS(plan_n_sim(0.0, 0.1, 0.05), DomainError);
    CHECK_THROWS_AS(plan_n_sim(1.0, -0.1, 0.05), DomainError);
    CHECK_THROWS_AS(plan_n_sim(1.0, 0.1, 1.0), DomainError);
}

TEST_CASE("default parameters satisfy their invariants") {
    const auto plan = default_run_plan();
    CHECK_NOTHROW(validate(plan));
    CHECK(plan.n_sim == 1300);
    CHECK(plan.mi_count == 10);
    CHECK(plan.confidence_level == 0.95);
    CHECK(plan.dgm.n_per_trial == 500);
    CHECK(plan.dgm.allocation.control == 250);
    CHECK(plan.dgm.allocation.treatment == 250);
    // Gestational age must dominate head circumference in survival prediction,
    // per SD of each covariate.
    const auto& cov = plan.dgm.covariates.covariance;
    CHECK(plan.dgm.survival.gestational_age * std::sqrt(cov(0, 0)) >
          plan.dgm.survival.head_circumference * std::sqrt(cov(1, 1)));
    CHECK(plan.dgm.outcome.gestational_age > 0.0);
    CHECK(plan.dgm.outcome.head_circumference > 0.0);
    CHECK(plan.dgm.outcome.ses > 0.0);
}

TEST_CASE("minimal plan file gets documented defaults") {
    const auto dir = testing::scratch_dir("config_min");
    {
        std::ofstream out(dir / "plan.yaml");
        out << "master_seed: 99\n";
    }
    const auto plan = load_run_plan(dir / "plan.yaml");
    CHECK(plan.master_seed == 99);
    CHECK(plan.scenarios.size() == 9);
    CHECK(plan.n_sim == 1300);
    CHECK(plan.mi_count == 10);
    CHECK(plan.dgm == default_dgm_params());
}

TEST_CASE("validation errors name the field") {
    auto field_of = [](const std::string& yaml) -> std::string {
        try {
            parse_run_plan(yaml);
        } catch (const ValidationError& e) {
            return e.field();
        }
        return "<no error>";
    };
    CHECK(field_of("master_seed: 1\nn_sim: 0\n") == "n_sim");
    CHECK(field_of("n_sim: 10\n") == "master_seed");
    CHECK(field_of("master_seed: 1\nconfidence_level: 1.5\n") == "confidence_level");
    CHECK(field_of("master_seed: 1\nmi_count: 1\n") == "mi_count");
    CHECK(field_of("master_seed: 1\nbogus: 3\n") == "bogus");
    CHECK(field_of("master_seed: 1\ndgm:\n  outcome:\n    residual_sd: 0\n") == "dgm.outcome.residual_sd");
    CHECK(field_of("master_seed: 1\ndgm:\n  covariates:\n    covariance: [[1, 2], [2, 1]]\n") ==
          "dgm.covariates.covariance");
    CHECK(field_of("master_seed: 1\ndgm:\n  n_per_trial: 400\n") == "dgm.n_per_trial");
    CHECK(field_of("master_seed: 1\nscenarios:\n  - id: X\n    sace_covariates: []\n") ==
          "scenarios[0].sace_covariates");
    CHECK(field_of("master_seed: 1\nscenarios:\n  - id: X\n  - id: X\n") == "scenarios[1].id");
    CHECK(field_of("master_seed: 1\nn_sim: abc\n") == "n_sim");
    CHECK_THROWS_AS(load_run_plan("/nonexistent/plan.yaml"), ValidationError);
}

TEST_CASE("default plan survives a write and reload unchanged") {
    const auto dir = testing::scratch_dir("config_roundtrip");
    const auto plan = default_run_plan(12345);
    write_run_plan(plan, dir / "plan.yaml");
    const auto back = load_run_plan(dir / "plan.yaml");
    CHECK(back == plan);
    CHECK(to_yaml(back) == to_yaml(plan));
    CHECK(plan_digest(back) == plan_digest(plan));
}

TEST_CASE("plan digest changes exactly when content changes") {
    const auto base = default_run_plan(1);
    CHECK(plan_digest(base) == plan_digest(default_run_plan(1)));
    CHECK(plan_digest(base).size() == 16);
    auto other = base;
    other.n_sim = 1301;
    CHECK(plan_digest(other) != plan_digest(base));
    other = base;
    other.dgm.outcome.residual_sd += 1e-9;
    CHECK(plan_digest(other) != plan_digest(base));
    other = base;
    other.master_seed = 2;
    CHECK(plan_digest(other) != plan_digest(base));
}

namespace {

std::array<double, 10> random_simplex10(std::mt19937_64& gen) {
    std::array<double, 10> p{};
    std::uniform_real_distribution<double> u(0.01, 1.0);
    double sum = 0.0;
    for (auto& v : p) sum += (v = u(gen));
    for (auto& v : p) v /= sum;
    return p;
}

RunPlan random_plan(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_int_distribution<int> small(2, 50);
    RunPlan plan = default_run_plan(gen());
    plan.n_sim = small(gen);
    plan.mi_count = small(gen);
    plan.bootstrap_reps = small(gen);
    plan.confidence_level = std::uniform_real_distribution<double>(0.5, 0.999)(gen);
    const double a = u(gen), b = u(gen);
    plan.chiba_alpha = {std::min(a, b), std::max(a, b)};
    plan.dgm.outcome = {u(gen), u(gen), u(gen), u(gen), std::fabs(u(gen)) + 0.1};
    plan.dgm.survival = {u(gen), u(gen) / 10, u(gen) / 10, u(gen) / 10};
    plan.dgm.allocation = {small(gen), small(gen)};
    plan.dgm.n_per_trial = plan.dgm.allocation.total();
    // Normalize so the probabilities sum to 1 in floating point.
    plan.dgm.covariates.apgar_probs = random_simplex10(gen);
    for (auto& v : plan.dgm.covariates.gestational_age_means) v = 180 + u(gen);
    const double sd1 = 5 + std::fabs(u(gen)), sd2 = 1 + std::fabs(u(gen)) / 5;
    const double rho = u(gen) / 11;
    plan.dgm.covariates.covariance << sd1 * sd1, rho * sd1 * sd2, rho * sd1 * sd2, sd2 * sd2;
    plan.scenarios.resize(1 + gen() % 9);
    for (std::size_t i = 0; i < plan.scenarios.size(); ++i) {
        plan.scenarios[i].id = "S" + std::to_string(i);
        plan.scenarios[i].effect_on_outcome = u(gen);
        plan.scenarios[i].effect_on_survival_logodds = u(gen) / 5;
        if (gen() % 2) plan.scenarios[i].sace_covariates = {Covariate::Apgar, Covariate::Ses};
    }
    return plan;
}

}  // namespace

TEST_CASE("randomized plans: every plan that loads satisfies the invariants, and valid plans round trip") {
    std::mt19937_64 gen(31337);
    int loaded = 0, rejected = 0;
    for (int rep = 0; rep < 200; ++rep) {
        RunPlan plan = random_plan(gen);
        bool valid = true;
        try {
            validate(plan);
        } catch (const ValidationError&) {
            valid = false;
        }
        if (valid) {
            const auto back = parse_run_plan(to_yaml(plan));
            CHECK(back == plan);
        }
        // Random corruption of one field; whatever loads must still validate.
        switch (gen() % 5) {
            case 0: plan.n_sim = static_cast<int>(gen() % 5) - 2; break;
            case 1: plan.dgm.outcome.residual_sd = -std::fabs(plan.dgm.outcome.residual_sd); break;
            case 2: plan.dgm.covariates.apgar_probs[0] += 0.1; break;
            case 3: plan.dgm.n_per_trial += 1; break;
            default: plan.confidence_level = 1.0 + (gen() % 2); break;
        }
        try {
            const auto back = parse_run_plan(to_yaml(plan));
            CHECK_NOTHROW(validate(back));
            ++loaded;
        } catch (const ValidationError&) {
            ++rejected;
        }
    }
    CHECK(rejected > 0);
    CHECK(loaded + rejected == 200);
}
