#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atriaseg/metrics.hpp"
#include "atriaseg/pipeline.hpp"

namespace atriaseg {

// Report files. Everything except the "timing_s" member of a case report and
// timings.csv is a deterministic function of the inputs.

inline constexpr const char* kHd95Definition =
    "max of the two directed nearest-rank 95th percentiles of surface-voxel distances (mm)";

nlohmann::json case_report(const CaseResult& result);
/// Inverse of case_report, without the prediction.
CaseResult case_from_report(const nlohmann::json& doc);

nlohmann::json metrics_json(const CaseMetrics& metrics);
CaseMetrics metrics_from_json(const nlohmann::json& doc);

nlohmann::json aggregate_json(const std::optional<AggregateMetrics>& aggregate,
                              std::span<const CaseResult> cases);
std::string aggregate_csv(const std::optional<AggregateMetrics>& aggregate);
/// One row per case and class: the data behind a box plot.
std::string boxplot_csv(std::span<const CaseResult> cases);
std::string timings_csv(std::span<const CaseResult> cases);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_case_report(const std::filesystem::path& output_dir, const CaseResult& result);
/// Aggregates the metrics of `cases` and writes the dataset-level files.
std::optional<AggregateMetrics> write_dataset_reports(const std::filesystem::path& output_dir,
                                                      std::span<const CaseResult> cases);
/// Loads every cases/*.json under `output_dir`, sorted by case id.
std::vector<CaseResult> read_case_reports(const std::filesystem::path& output_dir);

}  // namespace atriaseg
