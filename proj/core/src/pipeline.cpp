#include "atriaseg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <iostream>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include "atriaseg/morphology.hpp"
#include "atriaseg/nifti.hpp"
#include "atriaseg/report.hpp"
#include "atriaseg/resample.hpp"

namespace atriaseg {
namespace {

namespace fs = std::filesystem;

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// Compiled image pattern with the capture group of the case id and of each
// "*" wildcard in order.
struct CasePattern {
  std::regex re;
  std::size_t case_group = 0;
  std::vector<std::size_t> wildcard_groups;
};

CasePattern compile_pattern(const std::string& pattern) {
  CasePattern out;
  std::string re;
  std::size_t groups = 0;
  for (std::size_t i = 0; i < pattern.size();) {
    if (pattern.compare(i, 6, "{case}") == 0) {
      if (out.case_group == 0) {
        out.case_group = ++groups;
        re += "([^/]+)";
      } else {
        re += "\\" + std::to_string(out.case_group);
      }
      i += 6;
      continue;
    }
    const char c = pattern[i++];
    if (c == '*') {
      re += "([^/]*)";
      out.wildcard_groups.push_back(++groups);
    } else if (std::string_view(".^$|()[]{}+?\\").find(c) != std::string_view::npos) {
      re += '\\';
      re += c;
    } else {
      re += c;
    }
  }
  if (out.case_group == 0) throw ConfigError("image pattern must contain {case}");
  out.re = std::regex(re, std::regex::ECMAScript);
  return out;
}

std::string fill_pattern(const std::string& pattern, const std::string& id,
                         const std::vector<std::string>& wildcards) {
  std::string out;
  std::size_t w = 0;
  for (std::size_t i = 0; i < pattern.size();) {
    if (pattern.compare(i, 6, "{case}") == 0) {
      out += id;
      i += 6;
    } else if (pattern[i] == '*') {
      out += w < wildcards.size() ? wildcards[w++] : std::string();
      ++i;
    } else {
      out += pattern[i++];
    }
  }
  return out;
}

void warn(const std::string& msg) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "warning: " << msg << '\n';
}

}  // namespace

std::vector<CaseRecord> discover_cases(const PipelineConfig& config) {
  std::error_code ec;
  if (!fs::is_directory(config.dataset_root, ec)) {
    throw ConfigError("dataset root is not a readable directory: " + config.dataset_root.string());
  }
  const CasePattern pat = compile_pattern(config.image_pattern);
  std::map<std::string, CaseRecord> found;
  fs::recursive_directory_iterator it(config.dataset_root, ec);
  if (ec) throw ConfigError("cannot read dataset root: " + ec.message());
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), config.dataset_root).generic_string();
    std::smatch m;
    if (!std::regex_match(rel, m, pat.re)) continue;
    const std::string id = m[pat.case_group].str();
    std::vector<std::string> wild;
    for (const std::size_t g : pat.wildcard_groups) wild.push_back(m[g].str());
    if (found.contains(id)) {
      throw ConfigError("duplicate case id '" + id + "': " + found[id].image.string() + " and " +
                        entry.path().string());
    }
    CaseRecord rec{id, entry.path(), std::nullopt};
    const fs::path gt = config.dataset_root / fill_pattern(config.gt_pattern, id, wild);
    if (gt != entry.path() && fs::is_regular_file(gt)) rec.ground_truth = gt;
    found.emplace(id, std::move(rec));
  }
  if (found.empty()) {
    throw ConfigError("no cases matching '" + config.image_pattern + "' under " +
                      config.dataset_root.string());
  }
  std::vector<CaseRecord> out;
  out.reserve(found.size());
  for (auto& [_, rec] : found) out.push_back(std::move(rec));
  return out;
}

RoiResult extract_roi(const Volume& image, const LabelMap* gt, const std::string& case_id,
                      const PipelineConfig& config) {
  const Volume coarse = downsample_linear(image, config.roi.factors);
  std::optional<LabelMap> coarse_ref;
  if (gt != nullptr) coarse_ref = binarize(downsample_nearest(*gt, config.roi.factors));
  SegmentContext ctx{case_id, "coarse", coarse_ref ? &*coarse_ref : nullptr, config.labels};
  const LabelMap mask = coarse_segment(coarse, config.coarse_backend, ctx);

  RoiResult out{{}, Volume{}, false};
  Index3 c{};
  try {
    c = centroid(mask);
  } catch (const EmptyMaskError&) {
    warn("case " + case_id + ": coarse mask is empty, cropping around the grid centre");
    c = geometric_center(mask.dims());
    out.center_fallback = true;
  }
  out.box = crop_box_from_coarse_centroid(c, config.roi, image.dims());
  out.cropped = crop_with_padding(image, out.box);
  return out;
}

CaseResult run_case(const CaseRecord& record, const PipelineConfig& config) {
  CaseResult result;
  result.case_id = record.id;
  std::string stage = "load";
  Stopwatch total;
  try {
    const Volume image = read_volume(record.image);
    std::optional<LabelMap> gt;
    if (record.ground_truth) {
      gt = read_labels(*record.ground_truth, config.labels);
      require_same_geometry(image, *gt, "ground truth vs image");
    }

    Stopwatch sw;
    stage = "roi";
    RoiResult roi = extract_roi(image, gt ? &*gt : nullptr, record.id, config);
    result.crop_box = roi.box;
    result.center_fallback = roi.center_fallback;
    result.timings.roi = sw.lap();

    stage = "clahe";
    Volume equalised = std::move(roi.cropped);
    if (config.clahe_enabled) {
      equalised = clahe3d(equalised, config.clahe);
      result.timings.clahe = sw.lap();
    } else {
      sw.lap();
    }

    stage = "segmentation";
    std::optional<LabelMap> fine_ref;
    if (gt) fine_ref = crop_with_padding(*gt, roi.box);
    SegmentContext ctx{record.id, "fine", fine_ref ? &*fine_ref : nullptr, config.labels};
    LabelMap labels = segment(equalised, config.fine_backend, ctx);
    result.timings.segmentation = sw.lap();

    stage = "postprocess";
    if (config.postprocess_enabled) {
      const auto order = config.class_order_values();
      labels = postprocess(labels, order);
      result.timings.postprocess = sw.lap();
    } else {
      sw.lap();
    }

    stage = "paste_back";
    LabelMap full = paste_back(labels, roi.box, image.dims(), image.spacing());
    full = upsample_nearest(full, image.dims(), image.spacing());
    require_same_geometry(full, image, "prediction vs image");

    if (gt) {
      stage = "evaluate";
      result.metrics = evaluate_case(record.id, full, *gt, config.labels);
    }
    result.prediction = std::move(full);
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.failed_stage = stage;
    result.error = e.what();
  }
  result.timings.total = total.lap();
  if (result.metrics) result.metrics->timings = result.timings;
  return result;
}

DatasetResult run_dataset(const PipelineConfig& config) {
  config.validate();
  const auto cases = discover_cases(config);
  fs::create_directories(config.output_dir / "cases");
  if (config.write_predictions) fs::create_directories(config.output_dir / "predictions");

  DatasetResult out;
  out.cases.resize(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      CaseResult r = run_case(cases[i], config);
      if (r.ok && config.write_predictions) {
        try {
          write_volume(*r.prediction,
                       config.output_dir / "predictions" / (r.case_id + ".nii.gz"));
        } catch (const std::exception& e) {
          r.ok = false;
          r.failed_stage = "write";
          r.error = e.what();
        }
      }
      r.prediction.reset();
      if (!r.ok) warn("case " + r.case_id + " failed at " + r.failed_stage + ": " + r.error);
      write_case_report(config.output_dir, r);
      out.cases[i] = std::move(r);
    }
  };
  const int width = std::min<int>(config.workers, static_cast<int>(cases.size()));
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < width; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  out.failed = static_cast<std::size_t>(
      std::count_if(out.cases.begin(), out.cases.end(), [](const CaseResult& r) { return !r.ok; }));
  out.aggregate = write_dataset_reports(config.output_dir, out.cases);
  return out;
}

}  // namespace atriaseg
