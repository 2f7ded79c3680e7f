#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "atriaseg/clahe.hpp"
#include "atriaseg/metrics.hpp"
#include "atriaseg/morphology.hpp"
#include "atriaseg/nifti.hpp"
#include "atriaseg/pipeline.hpp"
#include "atriaseg/report.hpp"
#include "atriaseg/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace atriaseg;

namespace {

constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

// Command-line settings layered over the config file.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> strings;
  std::optional<int> workers;
  std::vector<int> roi_box;
  std::vector<int> roi_factors;
  std::vector<int> clahe_tiles;
  std::optional<int> clahe_bins;
  std::optional<double> clahe_clip;
  std::optional<int> clahe_passes;
  std::optional<int> clahe_threads;
  bool no_clahe = false;
  bool no_postprocess = false;
  bool no_predictions = false;
  std::vector<std::string> class_order;
  std::vector<int> labels;
  std::string coarse_backend;
  std::string fine_backend;
  std::vector<std::string> sets;
};

void add_config_flags(CLI::App& cmd, ConfigFlags& f) {
  cmd.add_option("-c,--config", f.config_file, "JSON config file")->check(CLI::ExistingFile);
  for (const char* key : {"dataset_root", "output_dir", "image_pattern", "gt_pattern"}) {
    std::string flag = std::string("--") + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    cmd.add_option_function<std::string>(flag, [&f, key](const std::string& v) { f.strings[key] = v; });
  }
  cmd.add_option("-j,--workers", f.workers, "Cases processed in parallel");
  cmd.add_option("--roi-box", f.roi_box, "Crop box size X Y Z")->expected(3);
  cmd.add_option("--roi-factors", f.roi_factors, "Coarse downsampling factors X Y Z")->expected(3);
  cmd.add_option("--clahe-tiles", f.clahe_tiles, "CLAHE tiles per axis X Y Z")->expected(3);
  cmd.add_option("--clahe-bins", f.clahe_bins, "CLAHE histogram bins");
  cmd.add_option("--clahe-clip", f.clahe_clip, "CLAHE clip limit as a fraction of tile voxels");
  cmd.add_option("--clahe-passes", f.clahe_passes, "CLAHE redistribution passes");
  cmd.add_option("--clahe-threads", f.clahe_threads, "CLAHE threads (0 = all cores)");
  cmd.add_flag("--no-clahe", f.no_clahe, "Skip CLAHE");
  cmd.add_flag("--no-postprocess", f.no_postprocess, "Skip post-processing");
  cmd.add_flag("--no-predictions", f.no_predictions, "Do not write predicted masks");
  cmd.add_option("--class-order", f.class_order, "Largest-component order, e.g. wall ra la");
  cmd.add_option("--labels", f.labels, "Label values for wall, RA and LA")->expected(3);
  cmd.add_option("--coarse-backend", f.coarse_backend, "Backend kind or JSON object");
  cmd.add_option("--fine-backend", f.fine_backend, "Backend kind or JSON object");
  cmd.add_option("--set", f.sets, "Override any config key: dotted.key=JSON");
}

json backend_arg(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') {
    try {
      return json::parse(arg);
    } catch (const json::parse_error& e) {
      throw ConfigError("backend argument is not valid JSON: " + std::string(e.what()));
    }
  }
  return {{"kind", arg}};
}

void set_dotted(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string value = assignment.substr(eq + 1);
  json* node = &doc;
  std::string path = assignment.substr(0, eq);
  for (std::size_t dot; (dot = path.find('.')) != std::string::npos; path = path.substr(dot + 1)) {
    node = &(*node)[path.substr(0, dot)];
    if (!node->is_object()) *node = json::object();
  }
  try {
    (*node)[path] = json::parse(value);
  } catch (const json::parse_error&) {
    (*node)[path] = value;
  }
}

PipelineConfig resolve_config(const ConfigFlags& f) {
  json doc = config_to_json(f.config_file.empty() ? PipelineConfig{} : load_config(f.config_file));
  for (const auto& [key, value] : f.strings) doc[key] = value;
  if (f.workers) doc["workers"] = *f.workers;
  if (!f.roi_box.empty()) doc["roi"]["box"] = f.roi_box;
  if (!f.roi_factors.empty()) doc["roi"]["factors"] = f.roi_factors;
  if (!f.clahe_tiles.empty()) doc["clahe"]["tiles"] = f.clahe_tiles;
  if (f.clahe_bins) doc["clahe"]["bins"] = *f.clahe_bins;
  if (f.clahe_clip) doc["clahe"]["clip_fraction"] = *f.clahe_clip;
  if (f.clahe_passes) doc["clahe"]["max_passes"] = *f.clahe_passes;
  if (f.clahe_threads) doc["clahe"]["threads"] = *f.clahe_threads;
  if (f.no_clahe) doc["clahe"]["enabled"] = false;
  if (f.no_postprocess) doc["postprocess"]["enabled"] = false;
  if (f.no_predictions) doc["write_predictions"] = false;
  if (!f.class_order.empty()) doc["postprocess"]["order"] = f.class_order;
  if (!f.labels.empty()) doc["labels"] = {{"wall", f.labels[0]}, {"ra", f.labels[1]}, {"la", f.labels[2]}};
  if (!f.coarse_backend.empty()) doc["coarse_backend"] = backend_arg(f.coarse_backend);
  if (!f.fine_backend.empty()) doc["fine_backend"] = backend_arg(f.fine_backend);
  for (const auto& s : f.sets) set_dotted(doc, s);
  PipelineConfig c = config_from_json(doc);
  c.validate();
  return c;
}

void print_summary(const std::vector<CaseResult>& cases, const std::optional<AggregateMetrics>& agg) {
  std::size_t failed = 0;
  for (const auto& r : cases) failed += !r.ok;
  std::cout << cases.size() << " cases, " << failed << " failed\n";
  if (!agg) return;
  for (const auto& c : agg->classes) {
    std::cout << "  " << c.name << ": DSC " << c.dice.mean << " +/- " << c.dice.std << ", HD95 "
              << c.hd95.mean << " +/- " << c.hd95.std << " mm (n=" << c.hd95.n << ")\n";
  }
}

int cmd_run(const ConfigFlags& f) {
  const PipelineConfig c = resolve_config(f);
  const DatasetResult d = run_dataset(c);
  print_summary(d.cases, d.aggregate);
  std::cout << "reports written to " << c.output_dir.string() << '\n';
  return d.exit_code();
}

int cmd_preprocess(const ConfigFlags& f) {
  const PipelineConfig c = resolve_config(f);
  const auto cases = discover_cases(c);
  const fs::path out = c.output_dir / "preprocessed";
  fs::create_directories(out);
  int failed = 0;
  for (const auto& rec : cases) {
    std::string stage = "load";
    try {
      const Volume image = read_volume(rec.image);
      std::optional<LabelMap> gt;
      if (rec.ground_truth) gt = read_labels(*rec.ground_truth, c.labels);
      stage = "roi";
      RoiResult roi = extract_roi(image, gt ? &*gt : nullptr, rec.id, c);
      stage = "clahe";
      Volume v = c.clahe_enabled ? clahe3d(roi.cropped, c.clahe) : std::move(roi.cropped);
      stage = "write";
      write_volume(v, out / (rec.id + ".nii.gz"));
      const json box = {{"case", rec.id},
                        {"center_fallback", roi.center_fallback},
                        {"crop_box",
                         {{"origin", {roi.box.origin.x, roi.box.origin.y, roi.box.origin.z}},
                          {"size", {roi.box.size.nx, roi.box.size.ny, roi.box.size.nz}}}}};
      write_text(out / (rec.id + ".json"), box.dump(2) + "\n");
    } catch (const std::exception& e) {
      ++failed;
      std::cerr << "case " << rec.id << " failed at " << stage << ": " << e.what() << '\n';
    }
  }
  std::cout << cases.size() << " cases, " << failed << " failed; volumes in " << out.string() << '\n';
  return failed == 0 ? 0 : kExitPartial;
}

int cmd_postprocess(const std::vector<std::string>& inputs, const std::string& out_dir,
                    const std::vector<std::string>& order, const std::vector<int>& labels) {
  LabelEncoding enc;
  if (!labels.empty()) {
    for (const int v : labels) {
      if (v < 1 || v > 255) throw ConfigError("label values must lie in 1..255");
    }
    enc = {static_cast<std::uint8_t>(labels[0]), static_cast<std::uint8_t>(labels[1]),
           static_cast<std::uint8_t>(labels[2])};
  }
  enc.validate();
  std::vector<std::uint8_t> values;
  for (const auto& name : order) values.push_back(enc.value_of(name));

  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && (name.ends_with(".nii") || name.ends_with(".nii.gz"))) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(in)) {
      files.emplace_back(in);
    } else {
      throw ConfigError("no such input: " + in);
    }
  }
  if (files.empty()) throw ConfigError("no label files to post-process");
  fs::create_directories(out_dir);
  int failed = 0;
  for (const auto& p : files) {
    try {
      write_volume(postprocess(read_labels(p, enc), values), fs::path(out_dir) / p.filename());
    } catch (const std::exception& e) {
      ++failed;
      std::cerr << p.string() << ": " << e.what() << '\n';
    }
  }
  std::cout << files.size() << " masks, " << failed << " failed; written to " << out_dir << '\n';
  return failed == 0 ? 0 : kExitPartial;
}

int cmd_evaluate(const ConfigFlags& f, const std::string& predictions) {
  const PipelineConfig c = resolve_config(f);
  if (!fs::is_directory(predictions)) throw ConfigError("predictions directory not found: " + predictions);
  std::vector<CaseResult> results;
  for (const auto& rec : discover_cases(c)) {
    if (!rec.ground_truth) continue;
    CaseResult r;
    r.case_id = rec.id;
    try {
      const LabelMap pred = read_labels(fs::path(predictions) / (rec.id + ".nii.gz"), c.labels);
      const LabelMap gt = read_labels(*rec.ground_truth, c.labels);
      r.metrics = evaluate_case(rec.id, pred, gt, c.labels);
      r.ok = true;
    } catch (const std::exception& e) {
      r.failed_stage = "evaluate";
      r.error = e.what();
      std::cerr << "case " << rec.id << " failed: " << e.what() << '\n';
    }
    write_case_report(c.output_dir, r);
    results.push_back(std::move(r));
  }
  if (results.empty()) throw ConfigError("no cases with ground truth under " + c.dataset_root.string());
  const auto agg = write_dataset_reports(c.output_dir, results);
  print_summary(results, agg);
  const bool any_failed = std::any_of(results.begin(), results.end(), [](const CaseResult& r) { return !r.ok; });
  return any_failed ? kExitPartial : 0;
}

int cmd_report(const std::string& dir) {
  const auto cases = read_case_reports(dir);
  const auto agg = write_dataset_reports(dir, cases);
  print_summary(cases, agg);
  const bool any_failed = std::any_of(cases.begin(), cases.end(), [](const CaseResult& r) { return !r.ok; });
  return any_failed ? kExitPartial : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage atrial LGE-MRI segmentation pipeline"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  ConfigFlags run_flags, pre_flags, eval_flags;
  auto* run = app.add_subcommand("run", "Run the full pipeline over a dataset");
  add_config_flags(*run, run_flags);

  auto* pre = app.add_subcommand("preprocess", "Crop and equalise each case (stages A-B)");
  add_config_flags(*pre, pre_flags);

  std::vector<std::string> pp_inputs, pp_order = {"wall", "ra", "la"};
  std::vector<int> pp_labels;
  std::string pp_out;
  auto* pp = app.add_subcommand("postprocess", "Largest components and hole filling on label maps");
  pp->add_option("inputs", pp_inputs, "Label files or directories")->required();
  pp->add_option("-o,--output", pp_out, "Output directory")->required();
  pp->add_option("--class-order", pp_order, "Largest-component order");
  pp->add_option("--labels", pp_labels, "Label values for wall, RA and LA")->expected(3);

  std::string predictions;
  auto* eval = app.add_subcommand("evaluate", "Score existing predictions against ground truth");
  add_config_flags(*eval, eval_flags);
  eval->add_option("-p,--predictions", predictions, "Directory of {case}.nii.gz predictions")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Re-aggregate per-case reports in an output directory");
  report->add_option("dir", report_dir, "Output directory holding cases/*.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*pre) return cmd_preprocess(pre_flags);
    if (*pp) return cmd_postprocess(pp_inputs, pp_out, pp_order, pp_labels);
    if (*eval) return cmd_evaluate(eval_flags, predictions);
    if (*report) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPartial;
  }
  return 0;
}
