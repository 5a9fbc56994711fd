#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sacesim/runner.hpp"

namespace sacesim {

/// Splits one CSV line; handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);
/// Quotes a field only when it contains a comma, quote or line break.
std::string csv_field(std::string_view text);

/// Long format: one row per (simulation, method, covariate set). Missing values
/// are empty fields.
void write_records_csv(const StudyResult& result, std::ostream& out);
void write_summary_csv(const StudyResult& result, std::ostream& out);
void write_estimands_csv(const StudyResult& result, std::ostream& out);
void write_analyzed_csv(const StudyResult& result, std::ostream& out);
void write_bounds_csv(const StudyResult& result, std::ostream& out);
/// Human-readable tables rounded to 4 decimals.
void write_report(const StudyResult& result, std::ostream& out);
std::string manifest_json(const StudyResult& result);

/// Rebuilds per-scenario records from a records CSV, scenarios in order of
/// first appearance. Throws ValidationError on malformed input.
std::vector<ScenarioResult> read_records_csv(std::istream& in);
std::vector<ScenarioResult> read_records_csv(const std::filesystem::path& path);

/// records.csv, summary.csv, estimands.csv, analyzed.csv, bounds.csv,
/// report.txt, manifest.json and plan.yaml under `out_dir` (created if needed).
void export_results(const StudyResult& result, const std::filesystem::path& out_dir);

/// Summary outputs only (no records, manifest or plan), for offline summaries.
void export_summaries(const StudyResult& result, const std::filesystem::path& out_dir);

/// plot_estimates.csv, plot_bias.csv, plot_mse.csv, plot_coverage.csv: one row per
/// (scenario, method, covariate set, estimand) with the survival effect as panel
/// row and the outcome effect as panel column.
void emit_plot_data(const StudyResult& result, const std::filesystem::path& out_dir);

}  // namespace sacesim
