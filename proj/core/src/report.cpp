#include "atriaseg/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "atriaseg/morphology.hpp"
#include "atriaseg/version.hpp"

namespace atriaseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

json summary_json(const Summary& s) {
  return {{"mean", s.mean},
          {"std", s.std},
          {"n", s.n},
          {"excluded", s.excluded},
          {"single_sample", s.single_sample()}};
}

DistanceStatus status_from(const std::string& s) {
  if (s == "defined") return DistanceStatus::kDefined;
  if (s == "pred_empty") return DistanceStatus::kPredEmpty;
  if (s == "gt_empty") return DistanceStatus::kGtEmpty;
  return DistanceStatus::kBothEmpty;
}

json timings_json(const StageTimings& t) {
  return {{"roi", t.roi},
          {"clahe", t.clahe},
          {"segmentation", t.segmentation},
          {"postprocess", t.postprocess},
          {"total", t.total}};
}

StageTimings timings_from(const json& j) {
  StageTimings t;
  if (!j.is_object()) return t;
  t.roi = j.value("roi", 0.0);
  t.clahe = j.value("clahe", 0.0);
  t.segmentation = j.value("segmentation", 0.0);
  t.postprocess = j.value("postprocess", 0.0);
  t.total = j.value("total", 0.0);
  return t;
}

}  // namespace

json metrics_json(const CaseMetrics& m) {
  json classes = json::array();
  for (const auto& c : m.classes) {
    classes.push_back({{"name", c.name},
                       {"label", c.label},
                       {"dice", c.dice},
                       {"intersection", c.counts.intersection},
                       {"pred_voxels", c.counts.pred},
                       {"gt_voxels", c.counts.gt},
                       {"hd95_mm", c.hd95.defined() ? json(c.hd95.mm) : json(nullptr)},
                       {"hd95_status", to_string(c.hd95.status)}});
  }
  json wall = nullptr;
  if (m.wall_thickness.defined) {
    wall = {{"mean", m.wall_thickness.mean},
            {"std", m.wall_thickness.std},
            {"max", m.wall_thickness.max},
            {"samples", m.wall_thickness.samples}};
  }
  return {{"classes", classes},
          {"wall_thickness_mm", wall},
          {"connectivity", kConnectivity},
          {"hd95_definition", kHd95Definition}};
}

CaseMetrics metrics_from_json(const json& doc) {
  CaseMetrics m;
  for (const auto& c : doc.at("classes")) {
    ClassMetrics cm;
    cm.name = c.at("name").get<std::string>();
    cm.label = c.at("label").get<std::uint8_t>();
    cm.dice = c.at("dice").get<double>();
    cm.counts = {c.value("intersection", std::uint64_t{0}), c.value("pred_voxels", std::uint64_t{0}),
                 c.value("gt_voxels", std::uint64_t{0})};
    cm.hd95.status = status_from(c.at("hd95_status").get<std::string>());
    if (cm.hd95.defined()) cm.hd95.mm = c.at("hd95_mm").get<double>();
    m.classes.push_back(std::move(cm));
  }
  if (const auto& w = doc.at("wall_thickness_mm"); w.is_object()) {
    m.wall_thickness = {true, w.at("mean").get<double>(), w.at("std").get<double>(),
                        w.at("max").get<double>(), w.at("samples").get<std::size_t>()};
  }
  return m;
}

json case_report(const CaseResult& r) {
  json j = {{"case", r.case_id},
            {"status", r.ok ? "ok" : "failed"},
            {"center_fallback", r.center_fallback},
            {"crop_box", nullptr},
            {"metrics", nullptr},
            {"timing_s", timings_json(r.timings)}};
  if (!r.ok) {
    j["failed_stage"] = r.failed_stage;
    j["error"] = r.error;
  }
  if (r.crop_box) {
    j["crop_box"] = {{"origin", {r.crop_box->origin.x, r.crop_box->origin.y, r.crop_box->origin.z}},
                     {"size", {r.crop_box->size.nx, r.crop_box->size.ny, r.crop_box->size.nz}}};
  }
  if (r.metrics) j["metrics"] = metrics_json(*r.metrics);
  return j;
}

CaseResult case_from_report(const json& doc) {
  CaseResult r;
  try {
    r.case_id = doc.at("case").get<std::string>();
    r.ok = doc.at("status").get<std::string>() == "ok";
    r.failed_stage = doc.value("failed_stage", std::string());
    r.error = doc.value("error", std::string());
    r.center_fallback = doc.value("center_fallback", false);
    if (const auto& b = doc.at("crop_box"); b.is_object()) {
      const auto o = b.at("origin").get<std::vector<int>>();
      const auto s = b.at("size").get<std::vector<int>>();
      if (o.size() != 3 || s.size() != 3) throw ConfigError("crop_box needs three entries");
      r.crop_box = CropBox{{o[0], o[1], o[2]}, {s[0], s[1], s[2]}};
    }
    if (const auto& m = doc.at("metrics"); m.is_object()) {
      r.metrics = metrics_from_json(m);
      r.metrics->case_id = r.case_id;
    }
    r.timings = timings_from(doc.value("timing_s", json::object()));
    if (r.metrics) r.metrics->timings = r.timings;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed case report: ") + e.what());
  }
  return r;
}

json aggregate_json(const std::optional<AggregateMetrics>& aggregate,
                    std::span<const CaseResult> cases) {
  json failed = json::array();
  std::size_t evaluated = 0;
  for (const auto& r : cases) {
    if (!r.ok) failed.push_back({{"case", r.case_id}, {"stage", r.failed_stage}, {"error", r.error}});
    if (r.metrics) ++evaluated;
  }
  json classes = json::array();
  if (aggregate) {
    for (const auto& c : aggregate->classes) {
      classes.push_back({{"name", c.name},
                         {"label", c.label},
                         {"dice", summary_json(c.dice)},
                         {"hd95_mm", summary_json(c.hd95)}});
    }
  }
  return {{"version", version()},
          {"cases", cases.size()},
          {"succeeded", cases.size() - failed.size()},
          {"evaluated", evaluated},
          {"failed", failed},
          {"classes", classes},
          {"connectivity", kConnectivity},
          {"hd95_definition", kHd95Definition}};
}

std::string aggregate_csv(const std::optional<AggregateMetrics>& aggregate) {
  std::string out = "class,label,metric,mean,std,n,excluded\n";
  if (!aggregate) return out;
  for (const auto& c : aggregate->classes) {
    auto row = [&](const char* metric, const Summary& s) {
      out += c.name + "," + std::to_string(c.label) + "," + metric + "," + num(s.mean) + "," +
             num(s.std) + "," + std::to_string(s.n) + "," + std::to_string(s.excluded) + "\n";
    };
    row("dsc", c.dice);
    row("hd95_mm", c.hd95);
  }
  return out;
}

std::string boxplot_csv(std::span<const CaseResult> cases) {
  std::string out = "case,class,label,dsc,hd95_mm\n";
  for (const auto& r : cases) {
    if (!r.metrics) continue;
    for (const auto& c : r.metrics->classes) {
      out += r.case_id + "," + c.name + "," + std::to_string(c.label) + "," + num(c.dice) + "," +
             (c.hd95.defined() ? num(c.hd95.mm) : std::string()) + "\n";
    }
  }
  return out;
}

std::string timings_csv(std::span<const CaseResult> cases) {
  std::string out = "case,status,roi_s,clahe_s,segmentation_s,postprocess_s,total_s\n";
  for (const auto& r : cases) {
    const auto& t = r.timings;
    out += r.case_id + "," + (r.ok ? "ok" : "failed") + "," + num(t.roi) + "," + num(t.clahe) +
           "," + num(t.segmentation) + "," + num(t.postprocess) + "," + num(t.total) + "\n";
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw Error("cannot write " + path.string());
}

void write_case_report(const fs::path& output_dir, const CaseResult& result) {
  fs::create_directories(output_dir / "cases");
  write_text(output_dir / "cases" / (result.case_id + ".json"), case_report(result).dump(2) + "\n");
}

std::optional<AggregateMetrics> write_dataset_reports(const fs::path& output_dir,
                                                      std::span<const CaseResult> cases) {
  std::vector<CaseMetrics> metrics;
  for (const auto& r : cases) {
    if (r.metrics) metrics.push_back(*r.metrics);
  }
  std::optional<AggregateMetrics> agg;
  if (!metrics.empty()) agg = aggregate(metrics);
  fs::create_directories(output_dir);
  write_text(output_dir / "aggregate.json", aggregate_json(agg, cases).dump(2) + "\n");
  write_text(output_dir / "aggregate.csv", aggregate_csv(agg));
  write_text(output_dir / "boxplot.csv", boxplot_csv(cases));
  write_text(output_dir / "timings.csv", timings_csv(cases));
  return agg;
}

std::vector<CaseResult> read_case_reports(const fs::path& output_dir) {
  const fs::path dir = output_dir / "cases";
  if (!fs::is_directory(dir)) throw ConfigError("no cases/ directory under " + output_dir.string());
  std::vector<CaseResult> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(entry.path().string() + ": " + e.what());
    }
    out.push_back(case_from_report(doc));
  }
  if (out.empty()) throw ConfigError("no case reports under " + dir.string());
  std::sort(out.begin(), out.end(),
            [](const CaseResult& a, const CaseResult& b) { return a.case_id < b.case_id; });
  return out;
}

}  // namespace atriaseg
