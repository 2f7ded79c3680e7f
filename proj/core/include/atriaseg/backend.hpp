#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>

#include "atriaseg/labels.hpp"
#include "atriaseg/volume.hpp"

namespace atriaseg {

/// Replays stored or ground-truth-derived label maps. Used to exercise the
/// pipeline plumbing without a model.
struct OracleBackend {
  /// Return SegmentContext::reference instead of reading a file.
  bool from_ground_truth = true;
  std::filesystem::path directory;
  /// File name under `directory`; "{case}" is replaced by the case id.
  std::string pattern = "{case}.nii.gz";
};

/// Non-clinical smoke-test backend: intensities normalised to [0, 1], voxels
/// at or above the given nearest-rank percentile marked, largest
/// 6-connected component kept.
struct ThresholdBackend {
  double percentile = 90.0;
  /// Label written for marked voxels by segment(); coarse_segment() always
  /// produces a binary mask.
  std::uint8_t label = 3;
  bool keep_largest = true;
};

/// Runs a command template through /bin/sh. "{input}" and "{output}" are
/// replaced by NIfTI paths in a case-unique temp directory, "{case}" by the
/// case id. The command must exit 0 and leave a label image at {output}.
struct ExternalBackend {
  std::string command;
  std::filesystem::path temp_dir = std::filesystem::temp_directory_path();
  double timeout_s = 600.0;
};

struct BackendSpec {
  std::variant<OracleBackend, ThresholdBackend, ExternalBackend> settings = OracleBackend{};

  const char* kind() const;
  /// Throws ConfigError for a missing oracle directory or an external
  /// template without both placeholders.
  void validate() const;
};

/// What a backend may know about the case beyond the input volume.
struct SegmentContext {
  std::string case_id;
  /// Stage name used for temp file naming ("coarse" / "fine").
  std::string stage = "fine";
  /// Ground truth resampled or cropped to the input geometry, when known.
  const LabelMap* reference = nullptr;
  LabelEncoding labels{};
};

/// Fine segmentation. Output has the geometry of `vol` and only labels of
/// `ctx.labels`, or BackendError is thrown.
LabelMap segment(const Volume& vol, const BackendSpec& spec, const SegmentContext& ctx);

/// Stage-one segmentation on the downsampled image; any foreground label
/// is merged to 1.
LabelMap coarse_segment(const Volume& vol, const BackendSpec& spec, const SegmentContext& ctx);

/// Marks voxels whose normalised intensity is >= the nearest-rank
/// percentile. Empty for constant volumes.
LabelMap threshold_mask(const Volume& vol, double percentile);

/// Replaces each "{key}" in `tmpl` with its value.
std::string substitute(std::string tmpl, const std::map<std::string, std::string>& values);

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
};

/// Runs `command` with /bin/sh -c, killing its process group after
/// `timeout_s` seconds.
ProcessResult run_command(const std::string& command, double timeout_s);

}  // namespace atriaseg
