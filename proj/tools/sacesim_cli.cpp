// Command-line entry point: run, summarize, plan-nsim, default-plan, dump-trial.

#include <algorithm>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "sacesim/config.hpp"
#include "sacesim/dgm.hpp"
#include "sacesim/errors.hpp"
#include "sacesim/io.hpp"
#include "sacesim/runner.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitExecution = 3;

std::vector<std::string> split_ids(const std::string& text) {
    std::vector<std::string> ids;
    std::stringstream ss(text);
    std::string id;
    while (std::getline(ss, id, ',')) {
        if (!id.empty()) ids.push_back(id);
    }
    return ids;
}

void select_scenarios(sacesim::RunPlan& plan, const std::string& list) {
    std::vector<sacesim::ScenarioSpec> chosen;
    for (const auto& id : split_ids(list)) {
        auto it = std::find_if(plan.scenarios.begin(), plan.scenarios.end(),
                               [&](const auto& s) { return s.id == id; });
        if (it == plan.scenarios.end()) throw sacesim::ValidationError("scenarios", "unknown scenario '" + id + "'");
        chosen.push_back(*it);
    }
    if (chosen.empty()) throw sacesim::ValidationError("scenarios", "no scenario selected");
    plan.scenarios = std::move(chosen);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation study of estimators for outcomes truncated by death"};
    app.require_subcommand(1);

    std::string plan_path, out_dir, scenarios;
    std::uint64_t seed = 0;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    int nsim = 0;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run the simulation grid and export results");
    run->add_option("--plan", plan_path, "YAML run plan (default plan if omitted)")->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory")->required();
    auto* seed_opt = run->add_option("--seed", seed, "Override the master seed");
    run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--scenarios", scenarios, "Comma-separated scenario ids");
    auto* nsim_opt = run->add_option("--nsim", nsim, "Override the number of simulations");
    run->add_flag("--quiet", quiet, "No progress output");

    double sigma = 0.0, delta = 0.0, alpha = 0.05;
    auto* planner = app.add_subcommand("plan-nsim", "Number of simulations for a target MC error");
    planner->add_option("--sigma", sigma, "SD of the estimates")->required();
    planner->add_option("--delta", delta, "Accepted Monte Carlo error")->required();
    planner->add_option("--alpha", alpha, "Two-sided error level");

    std::string records_path, summary_out;
    double level = 0.95;
    auto* summarize = app.add_subcommand("summarize", "Recompute summaries from a records CSV");
    summarize->add_option("--records", records_path, "records.csv from a run")->required()->check(CLI::ExistingFile);
    summarize->add_option("--out", summary_out, "Output directory")->required();
    auto* level_opt = summarize->add_option("--level", level, "Confidence level of the recorded intervals");
    std::string summarize_plan;
    summarize->add_option("--plan", summarize_plan, "plan.yaml of the run (supplies level and n_sim)")
        ->check(CLI::ExistingFile);

    std::uint64_t default_seed = 20240917;
    auto* defaults = app.add_subcommand("default-plan", "Print the default plan as YAML");
    defaults->add_option("--seed", default_seed, "Master seed");

    std::string dump_plan, dump_scenario = "E", dump_out;
    std::uint64_t dump_sim = 0;
    auto* dump = app.add_subcommand("dump-trial", "Write one simulated trial as CSV");
    dump->add_option("--plan", dump_plan, "YAML run plan (default plan if omitted)")->check(CLI::ExistingFile);
    dump->add_option("--scenario", dump_scenario, "Scenario id");
    dump->add_option("--sim", dump_sim, "Simulation index");
    dump->add_option("--out", dump_out, "CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*run) {
            auto plan = plan_path.empty() ? sacesim::default_run_plan() : sacesim::load_run_plan(plan_path);
            if (*seed_opt) plan.master_seed = seed;
            if (*nsim_opt) plan.n_sim = nsim;
            if (!scenarios.empty()) select_scenarios(plan, scenarios);
            sacesim::validate(plan);
            sacesim::RunOptions options;
            options.workers = workers;
            if (!quiet) {
                options.progress = [](std::string_view id, int done, int total) {
                    if (done % 100 == 0 || done == total) {
                        std::cerr << "scenario " << id << ": " << done << "/" << total << "\n";
                    }
                };
            }
            const auto result = sacesim::run_grid(plan, options);
            sacesim::export_results(result, out_dir);
            sacesim::emit_plot_data(result, out_dir);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "wrote results to " << out_dir << "\n";
        } else if (*planner) {
            try {
                std::cout << sacesim::plan_n_sim(sigma, delta, alpha) << "\n";
            } catch (const sacesim::DomainError& e) {
                throw sacesim::ValidationError("plan-nsim", e.what());
            }
        } else if (*summarize) {
            sacesim::StudyResult result;
            result.plan = summarize_plan.empty() ? sacesim::default_run_plan() : sacesim::load_run_plan(summarize_plan);
            if (*level_opt) result.plan.confidence_level = level;
            result.scenarios = sacesim::read_records_csv(records_path);
            result.plan.scenarios.clear();
            for (const auto& sc : result.scenarios) {
                result.plan.scenarios.push_back(sc.spec);
                result.plan.n_sim = static_cast<int>(sc.records.size());
            }
            sacesim::summarize_study(result);
            sacesim::export_summaries(result, summary_out);
            sacesim::emit_plot_data(result, summary_out);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "wrote summaries to " << summary_out << "\n";
        } else if (*defaults) {
            std::cout << sacesim::to_yaml(sacesim::default_run_plan(default_seed));
        } else if (*dump) {
            const auto plan = dump_plan.empty() ? sacesim::default_run_plan() : sacesim::load_run_plan(dump_plan);
            auto it = std::find_if(plan.scenarios.begin(), plan.scenarios.end(),
                                   [&](const auto& s) { return s.id == dump_scenario; });
            if (it == plan.scenarios.end()) {
                throw sacesim::ValidationError("scenario", "unknown scenario '" + dump_scenario + "'");
            }
            const auto trial = sacesim::simulate_trial(plan.dgm, *it, plan.master_seed, dump_sim);
            sacesim::write_trial_csv(trial, dump_out);
        }
    } catch (const sacesim::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitExecution;
    }
    return 0;
}
