#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atriaseg/labels.hpp"
#include "atriaseg/volume.hpp"

namespace atriaseg {

struct DiceCounts {
  std::uint64_t intersection = 0;
  std::uint64_t pred = 0;
  std::uint64_t gt = 0;

  /// 2|P n G| / (|P| + |G|), 1 when both are empty.
  double value() const;
};

DiceCounts dice_counts(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls);
double dice(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls);

/// Voxels of `cls` with at least one face neighbour that is not `cls`; the
/// outside of the grid counts as not `cls`. Returned in scan order.
std::vector<Index3> surface_voxels(const LabelMap& labels, std::uint8_t cls);

enum class DistanceStatus { kDefined, kBothEmpty, kPredEmpty, kGtEmpty };

struct SurfaceDistance {
  DistanceStatus status = DistanceStatus::kBothEmpty;
  double mm = 0.0;

  bool defined() const { return status == DistanceStatus::kDefined; }
};

const char* to_string(DistanceStatus status);

/// Euclidean distance (mm, voxel centres) from every surface voxel of
/// `from` to the nearest surface voxel of `to`, in the scan order of
/// surface_voxels(from). Empty when either surface is empty.
std::vector<double> directed_surface_distances(const LabelMap& from, const LabelMap& to,
                                               std::uint8_t cls, const Spacing& spacing);

/// Nearest-rank percentile: the value at 1-based rank ceil(p/100 * n) of the
/// ascending sort. `values` is sorted in place.
double nearest_rank_percentile(std::vector<double>& values, double percentile);

/// max of the two directed nearest-rank percentiles of surface distances.
SurfaceDistance hausdorff_percentile(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls,
                                     const Spacing& spacing, double percentile);

/// 95th-percentile Hausdorff distance in mm.
SurfaceDistance hd95(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls,
                     const Spacing& spacing);

struct ThicknessStats {
  bool defined = false;
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
};

/// Wall thickness estimate from the distance transform of the wall to the
/// nearest non-wall voxel. Samples are taken at 6-neighbourhood local maxima
/// of the distance. With d the centre distance and k the largest per-axis
/// index offset to the nearest non-wall voxel, a sample is
/// 2 * d * (1 - 0.5 / k): twice the distance from the centre to the face of
/// that voxel along the connecting line. A one-voxel sheet thus measures one
/// voxel. Even thicknesses read one voxel thin.
ThicknessStats wall_thickness(const LabelMap& labels, std::uint8_t wall_cls, const Spacing& spacing);

struct StageTimings {
  double roi = 0.0;
  double clahe = 0.0;
  double segmentation = 0.0;
  double postprocess = 0.0;
  double total = 0.0;
};

struct ClassMetrics {
  std::string name;
  std::uint8_t label = 0;
  DiceCounts counts;
  double dice = 0.0;
  SurfaceDistance hd95;
};

struct CaseMetrics {
  std::string case_id;
  std::vector<ClassMetrics> classes;
  ThicknessStats wall_thickness;
  StageTimings timings;
};

/// Dice and HD95 for each class of `encoding` plus the wall thickness of
/// the prediction.
CaseMetrics evaluate_case(const std::string& case_id, const LabelMap& pred, const LabelMap& gt,
                          const LabelEncoding& encoding);

struct Summary {
  double mean = 0.0;
  /// Sample (n - 1) standard deviation; 0 when n == 1.
  double std = 0.0;
  std::size_t n = 0;
  std::size_t excluded = 0;

  bool single_sample() const { return n == 1; }
};

struct ClassAggregate {
  std::string name;
  std::uint8_t label = 0;
  Summary dice;
  Summary hd95;
};

struct AggregateMetrics {
  std::size_t cases = 0;
  std::vector<ClassAggregate> classes;
};

/// Per-class mean and sample std over the cases where each metric is
/// defined. Classes are matched by name in first-seen order.
AggregateMetrics aggregate(std::span<const CaseMetrics> cases);

Summary summarize(std::span<const double> values, std::size_t excluded = 0);

}  // namespace atriaseg
