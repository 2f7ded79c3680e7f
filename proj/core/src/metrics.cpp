#include "atriaseg/metrics.hpp"

#include <algorithm>
#include <optional>
#include <array>
#include <cmath>

#include "atriaseg/distance.hpp"

namespace atriaseg {
namespace {

bool is_surface(const LabelMap& labels, int x, int y, int z, std::uint8_t cls) {
  const Dims& d = labels.dims();
  if (x == 0 || y == 0 || z == 0 || x == d.nx - 1 || y == d.ny - 1 || z == d.nz - 1) return true;
  const std::size_t i = labels.offset(x, y, z);
  const std::size_t sy = static_cast<std::size_t>(d.nx);
  const std::size_t sz = sy * static_cast<std::size_t>(d.ny);
  return labels[i - 1] != cls || labels[i + 1] != cls || labels[i - sy] != cls ||
         labels[i + sy] != cls || labels[i - sz] != cls || labels[i + sz] != cls;
}

struct Box3 {
  Index3 lo{};
  Index3 hi{};  // inclusive

  void add(const Index3& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  Dims dims() const { return {hi.x - lo.x + 1, hi.y - lo.y + 1, hi.z - lo.z + 1}; }
};

}  // namespace

double DiceCounts::value() const {
  if (pred + gt == 0) return 1.0;
  return 2.0 * static_cast<double>(intersection) / static_cast<double>(pred + gt);
}

DiceCounts dice_counts(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls) {
  require_same_geometry(pred, gt, "dice");
  DiceCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == cls;
    const bool g = gt[i] == cls;
    c.pred += p;
    c.gt += g;
    c.intersection += p && g;
  }
  return c;
}

double dice(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls) {
  return dice_counts(pred, gt, cls).value();
}

std::vector<Index3> surface_voxels(const LabelMap& labels, std::uint8_t cls) {
  std::vector<Index3> out;
  const Dims& d = labels.dims();
  std::size_t i = 0;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x, ++i) {
        if (labels[i] == cls && is_surface(labels, x, y, z, cls)) out.push_back({x, y, z});
      }
    }
  }
  return out;
}

const char* to_string(DistanceStatus status) {
  switch (status) {
    case DistanceStatus::kDefined: return "defined";
    case DistanceStatus::kBothEmpty: return "both_empty";
    case DistanceStatus::kPredEmpty: return "pred_empty";
    case DistanceStatus::kGtEmpty: return "gt_empty";
  }
  return "unknown";
}

std::vector<double> directed_surface_distances(const LabelMap& from, const LabelMap& to,
                                               std::uint8_t cls, const Spacing& spacing) {
  require_same_geometry(from, to, "surface distance");
  const auto src = surface_voxels(from, cls);
  const auto dst = surface_voxels(to, cls);
  if (src.empty() || dst.empty()) return {};

  // Every nearest destination lies inside the bounding box of both surfaces,
  // so the transform only needs that sub-grid.
  Box3 box{src.front(), src.front()};
  for (const auto& p : src) box.add(p);
  for (const auto& p : dst) box.add(p);
  const Dims sub = box.dims();
  std::vector<std::uint8_t> sites(sub.count(), 0);
  for (const auto& p : dst) {
    sites[flatten(sub, p.x - box.lo.x, p.y - box.lo.y, p.z - box.lo.z)] = 1;
  }
  const DistanceField field = distance_transform(sub, spacing, sites);
  std::vector<double> out;
  out.reserve(src.size());
  for (const auto& p : src) {
    out.push_back(field.distance_mm[flatten(sub, p.x - box.lo.x, p.y - box.lo.y, p.z - box.lo.z)]);
  }
  return out;
}

double nearest_rank_percentile(std::vector<double>& values, double percentile) {
  if (values.empty()) throw ConfigError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n) / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

SurfaceDistance hausdorff_percentile(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls,
                                     const Spacing& spacing, double percentile) {
  require_same_geometry(pred, gt, "hausdorff distance");
  const bool has_pred = std::find(pred.data().begin(), pred.data().end(), cls) != pred.data().end();
  const bool has_gt = std::find(gt.data().begin(), gt.data().end(), cls) != gt.data().end();
  if (!has_pred && !has_gt) return {DistanceStatus::kBothEmpty, 0.0};
  if (!has_pred) return {DistanceStatus::kPredEmpty, 0.0};
  if (!has_gt) return {DistanceStatus::kGtEmpty, 0.0};
  auto forward = directed_surface_distances(pred, gt, cls, spacing);
  auto backward = directed_surface_distances(gt, pred, cls, spacing);
  return {DistanceStatus::kDefined, std::max(nearest_rank_percentile(forward, percentile),
                                             nearest_rank_percentile(backward, percentile))};
}

SurfaceDistance hd95(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls,
                     const Spacing& spacing) {
  return hausdorff_percentile(pred, gt, cls, spacing, 95.0);
}

ThicknessStats wall_thickness(const LabelMap& labels, std::uint8_t wall_cls, const Spacing& spacing) {
  ThicknessStats stats;
  const Dims& full = labels.dims();
  std::optional<Box3> wall;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != wall_cls) continue;
    const Index3 p = unflatten(full, i);
    if (wall) {
      wall->add(p);
    } else {
      wall = Box3{p, p};
    }
  }
  if (!wall) return stats;

  // Any site outside the wall box grown by one voxel is no closer than its
  // clamp onto the margin layer, which is itself a site.
  const Box3 box{{std::max(wall->lo.x - 1, 0), std::max(wall->lo.y - 1, 0), std::max(wall->lo.z - 1, 0)},
                 {std::min(wall->hi.x + 1, full.nx - 1), std::min(wall->hi.y + 1, full.ny - 1),
                  std::min(wall->hi.z + 1, full.nz - 1)}};
  const Dims d = box.dims();
  std::vector<std::uint8_t> sites(d.count());
  std::vector<std::uint8_t> is_wall(d.count());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t j = flatten(d, x, y, z);
        is_wall[j] = labels.at(x + box.lo.x, y + box.lo.y, z + box.lo.z) == wall_cls;
        sites[j] = !is_wall[j];
      }
  const DistanceField field = distance_transform(d, spacing, sites);

  const std::size_t sy = static_cast<std::size_t>(d.nx);
  const std::size_t sz = sy * static_cast<std::size_t>(d.ny);
  std::vector<double> samples;
  std::size_t i = 0;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x, ++i) {
        if (!is_wall[i] || field.nearest[i] < 0) continue;
        const double di = field.distance_mm[i];
        const bool peak = (x == 0 || field.distance_mm[i - 1] <= di) &&
                          (x + 1 == d.nx || field.distance_mm[i + 1] <= di) &&
                          (y == 0 || field.distance_mm[i - sy] <= di) &&
                          (y + 1 == d.ny || field.distance_mm[i + sy] <= di) &&
                          (z == 0 || field.distance_mm[i - sz] <= di) &&
                          (z + 1 == d.nz || field.distance_mm[i + sz] <= di);
        if (!peak) continue;
        const Index3 s = unflatten(d, static_cast<std::size_t>(field.nearest[i]));
        const int k = std::max({std::abs(s.x - x), std::abs(s.y - y), std::abs(s.z - z)});
        samples.push_back(2.0 * di * (1.0 - 0.5 / k));
      }
    }
  }
  if (samples.empty()) return stats;
  const Summary s = summarize(samples);
  stats.defined = true;
  stats.mean = s.mean;
  stats.std = s.std;
  stats.max = *std::max_element(samples.begin(), samples.end());
  stats.samples = samples.size();
  return stats;
}

CaseMetrics evaluate_case(const std::string& case_id, const LabelMap& pred, const LabelMap& gt,
                          const LabelEncoding& encoding) {
  require_same_geometry(pred, gt, "evaluate");
  CaseMetrics m;
  m.case_id = case_id;
  for (const std::uint8_t cls : encoding.classes()) {
    ClassMetrics c;
    c.name = std::string(encoding.name_of(cls));
    c.label = cls;
    c.counts = dice_counts(pred, gt, cls);
    c.dice = c.counts.value();
    c.hd95 = hd95(pred, gt, cls, gt.spacing());
    m.classes.push_back(std::move(c));
  }
  m.wall_thickness = wall_thickness(pred, encoding.wall, pred.spacing());
  return m;
}

Summary summarize(std::span<const double> values, std::size_t excluded) {
  Summary s;
  s.n = values.size();
  s.excluded = excluded;
  if (s.n == 0) return s;
  double sum = 0.0;
  for (const double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

AggregateMetrics aggregate(std::span<const CaseMetrics> cases) {
  if (cases.empty()) throw ConfigError("aggregate needs at least one case");
  AggregateMetrics out;
  out.cases = cases.size();
  struct Acc {
    std::vector<double> dice;
    std::vector<double> hd95;
    std::size_t hd95_excluded = 0;
  };
  std::vector<Acc> acc;
  for (const auto& c : cases) {
    for (const auto& cls : c.classes) {
      auto it = std::find_if(out.classes.begin(), out.classes.end(),
                             [&](const ClassAggregate& a) { return a.name == cls.name; });
      if (it == out.classes.end()) {
        out.classes.push_back({cls.name, cls.label, {}, {}});
        acc.emplace_back();
        it = out.classes.end() - 1;
      }
      Acc& a = acc[static_cast<std::size_t>(it - out.classes.begin())];
      a.dice.push_back(cls.dice);
      if (cls.hd95.defined()) {
        a.hd95.push_back(cls.hd95.mm);
      } else {
        ++a.hd95_excluded;
      }
    }
  }
  for (std::size_t k = 0; k < out.classes.size(); ++k) {
    out.classes[k].dice = summarize(acc[k].dice);
    out.classes[k].hd95 = summarize(acc[k].hd95, acc[k].hd95_excluded);
  }
  return out;
}

}  // namespace atriaseg
