#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atriaseg/backend.hpp"
#include "atriaseg/clahe.hpp"
#include "atriaseg/labels.hpp"
#include "atriaseg/metrics.hpp"
#include "atriaseg/roi.hpp"

namespace atriaseg {

struct PipelineConfig {
  std::filesystem::path dataset_root;
  /// Relative to dataset_root. "{case}" captures the case id (one path
  /// component); "*" matches any text within one component.
  std::string image_pattern = "{case}/{case}.nii.gz";
  std::string gt_pattern = "{case}/{case}_gt.nii.gz";
  std::filesystem::path output_dir = "atriaseg_out";

  RoiParams roi;
  ClaheParams clahe;
  bool clahe_enabled = true;
  bool postprocess_enabled = true;
  /// Largest-component selection order, by class name.
  std::vector<std::string> class_order = {"wall", "ra", "la"};
  LabelEncoding labels;

  BackendSpec coarse_backend;
  BackendSpec fine_backend;

  int workers = 1;
  bool write_predictions = true;

  std::vector<std::uint8_t> class_order_values() const;
  /// Checks everything that does not touch the filesystem.
  void validate() const;
};

/// Reads a config document. Keys mirror PipelineConfig; unknown keys are
/// rejected. Missing keys keep their defaults, so `base` can carry earlier
/// settings.
PipelineConfig config_from_json(const nlohmann::json& doc, PipelineConfig base = {});
nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);
BackendSpec backend_from_json(const nlohmann::json& doc);

struct CaseRecord {
  std::string id;
  std::filesystem::path image;
  /// Absent for inference-only cases.
  std::optional<std::filesystem::path> ground_truth;
};

/// Cases under config.dataset_root whose relative path matches
/// image_pattern, sorted by id. Throws ConfigError for an unreadable root,
/// zero matches or duplicate ids.
std::vector<CaseRecord> discover_cases(const PipelineConfig& config);

/// Stage A output.
struct RoiResult {
  CropBox box;
  Volume cropped;
  /// The coarse mask was empty and the grid centre was used instead.
  bool center_fallback = false;
};

/// Downsample, coarse segmentation, centroid, crop box and crop.
/// `gt` (original geometry) feeds ground-truth oracle backends.
RoiResult extract_roi(const Volume& image, const LabelMap* gt, const std::string& case_id,
                      const PipelineConfig& config);

struct CaseResult {
  std::string case_id;
  bool ok = false;
  std::string failed_stage;
  std::string error;
  std::optional<CropBox> crop_box;
  bool center_fallback = false;
  /// Prediction in the original image geometry.
  std::optional<LabelMap> prediction;
  std::optional<CaseMetrics> metrics;
  StageTimings timings;
};

/// Runs stages A-D on one case, then scores it when ground truth exists.
/// Never throws for per-case failures; they are reported in the result.
CaseResult run_case(const CaseRecord& record, const PipelineConfig& config);

struct DatasetResult {
  std::vector<CaseResult> cases;
  std::optional<AggregateMetrics> aggregate;
  std::size_t failed = 0;

  /// 0 when every case succeeded, 1 otherwise.
  int exit_code() const { return failed == 0 ? 0 : 1; }
};

/// Runs every discovered case on a pool of config.workers threads and
/// writes predictions/, cases/, aggregate.{json,csv}, boxplot.csv and
/// timings.csv under config.output_dir.
DatasetResult run_dataset(const PipelineConfig& config);

}  // namespace atriaseg
