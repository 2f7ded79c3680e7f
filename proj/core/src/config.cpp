#include <fstream>
#include <set>

#include "atriaseg/pipeline.hpp"

namespace atriaseg {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::array<int, 3> triple(const json& obj, const char* key, const std::string& where) {
  const auto v = get<std::vector<int>>(obj, key, where);
  if (v.size() != 3) throw ConfigError(where + "." + key + " must have three entries");
  return {v[0], v[1], v[2]};
}

std::uint8_t label_value(const json& obj, const char* key, const std::string& where) {
  const int v = get<int>(obj, key, where);
  if (v < 1 || v > 255) throw ConfigError(where + "." + key + " must lie in 1..255");
  return static_cast<std::uint8_t>(v);
}

}  // namespace

std::vector<std::uint8_t> PipelineConfig::class_order_values() const {
  std::vector<std::uint8_t> out;
  for (const auto& name : class_order) out.push_back(labels.value_of(name));
  return out;
}

void PipelineConfig::validate() const {
  labels.validate();
  roi.validate();
  clahe.validate(roi.box);
  (void)class_order_values();
  coarse_backend.validate();
  fine_backend.validate();
  if (workers < 1) throw ConfigError("worker count must be >= 1");
  if (image_pattern.find("{case}") == std::string::npos) {
    throw ConfigError("image pattern must contain {case}");
  }
  if (gt_pattern.find("{case}") == std::string::npos) {
    throw ConfigError("ground-truth pattern must contain {case}");
  }
}

BackendSpec backend_from_json(const json& doc) {
  const std::string where = "backend";
  if (!doc.is_object() || !doc.contains("kind")) throw ConfigError("backend needs a 'kind'");
  const auto kind = get<std::string>(doc, "kind", where);
  BackendSpec spec;
  if (kind == "oracle") {
    reject_unknown(doc, {"kind", "source", "directory", "pattern"}, "oracle backend");
    OracleBackend o;
    const auto source = doc.value("source", std::string(doc.contains("directory") ? "files" : "ground_truth"));
    if (source == "ground_truth") {
      o.from_ground_truth = true;
    } else if (source == "files") {
      o.from_ground_truth = false;
      o.directory = get<std::string>(doc, "directory", where);
    } else {
      throw ConfigError("oracle source must be 'ground_truth' or 'files'");
    }
    if (doc.contains("pattern")) o.pattern = get<std::string>(doc, "pattern", where);
    spec.settings = o;
  } else if (kind == "threshold") {
    reject_unknown(doc, {"kind", "percentile", "label", "keep_largest"}, "threshold backend");
    ThresholdBackend t;
    if (doc.contains("percentile")) t.percentile = get<double>(doc, "percentile", where);
    if (doc.contains("label")) t.label = label_value(doc, "label", where);
    if (doc.contains("keep_largest")) t.keep_largest = get<bool>(doc, "keep_largest", where);
    spec.settings = t;
  } else if (kind == "external") {
    reject_unknown(doc, {"kind", "command", "temp_dir", "timeout_s"}, "external backend");
    ExternalBackend e;
    e.command = get<std::string>(doc, "command", where);
    if (doc.contains("temp_dir")) e.temp_dir = get<std::string>(doc, "temp_dir", where);
    if (doc.contains("timeout_s")) e.timeout_s = get<double>(doc, "timeout_s", where);
    spec.settings = e;
  } else {
    throw ConfigError("unknown backend kind '" + kind + "'");
  }
  return spec;
}

PipelineConfig config_from_json(const json& doc, PipelineConfig c) {
  reject_unknown(doc,
                 {"dataset_root", "image_pattern", "gt_pattern", "output_dir", "workers",
                  "write_predictions", "roi", "clahe", "postprocess", "labels", "coarse_backend",
                  "fine_backend"},
                 "config");
  const std::string where = "config";
  if (doc.contains("dataset_root")) c.dataset_root = get<std::string>(doc, "dataset_root", where);
  if (doc.contains("image_pattern")) c.image_pattern = get<std::string>(doc, "image_pattern", where);
  if (doc.contains("gt_pattern")) c.gt_pattern = get<std::string>(doc, "gt_pattern", where);
  if (doc.contains("output_dir")) c.output_dir = get<std::string>(doc, "output_dir", where);
  if (doc.contains("workers")) c.workers = get<int>(doc, "workers", where);
  if (doc.contains("write_predictions")) {
    c.write_predictions = get<bool>(doc, "write_predictions", where);
  }
  if (doc.contains("roi")) {
    const auto& r = doc["roi"];
    reject_unknown(r, {"box", "factors"}, "roi");
    if (r.contains("box")) {
      const auto b = triple(r, "box", "roi");
      c.roi.box = {b[0], b[1], b[2]};
    }
    if (r.contains("factors")) {
      const auto f = triple(r, "factors", "roi");
      c.roi.factors = {f[0], f[1], f[2]};
    }
  }
  if (doc.contains("clahe")) {
    const auto& k = doc["clahe"];
    reject_unknown(k, {"enabled", "tiles", "bins", "clip_fraction", "max_passes", "threads"}, "clahe");
    if (k.contains("enabled")) c.clahe_enabled = get<bool>(k, "enabled", "clahe");
    if (k.contains("tiles")) c.clahe.tiles = triple(k, "tiles", "clahe");
    if (k.contains("bins")) c.clahe.bins = get<int>(k, "bins", "clahe");
    if (k.contains("clip_fraction")) c.clahe.clip_fraction = get<double>(k, "clip_fraction", "clahe");
    if (k.contains("max_passes")) c.clahe.max_passes = get<int>(k, "max_passes", "clahe");
    if (k.contains("threads")) c.clahe.threads = get<int>(k, "threads", "clahe");
  }
  if (doc.contains("postprocess")) {
    const auto& p = doc["postprocess"];
    reject_unknown(p, {"enabled", "order"}, "postprocess");
    if (p.contains("enabled")) c.postprocess_enabled = get<bool>(p, "enabled", "postprocess");
    if (p.contains("order")) c.class_order = get<std::vector<std::string>>(p, "order", "postprocess");
  }
  if (doc.contains("labels")) {
    const auto& l = doc["labels"];
    reject_unknown(l, {"wall", "ra", "la"}, "labels");
    if (l.contains("wall")) c.labels.wall = label_value(l, "wall", "labels");
    if (l.contains("ra")) c.labels.ra = label_value(l, "ra", "labels");
    if (l.contains("la")) c.labels.la = label_value(l, "la", "labels");
  }
  if (doc.contains("coarse_backend")) c.coarse_backend = backend_from_json(doc["coarse_backend"]);
  if (doc.contains("fine_backend")) c.fine_backend = backend_from_json(doc["fine_backend"]);
  return c;
}

namespace {

json backend_to_json(const BackendSpec& spec) {
  json j;
  if (const auto* o = std::get_if<OracleBackend>(&spec.settings)) {
    j = {{"kind", "oracle"}, {"source", o->from_ground_truth ? "ground_truth" : "files"}};
    if (!o->from_ground_truth) {
      j["directory"] = o->directory.string();
      j["pattern"] = o->pattern;
    }
  } else if (const auto* t = std::get_if<ThresholdBackend>(&spec.settings)) {
    j = {{"kind", "threshold"},
         {"percentile", t->percentile},
         {"label", t->label},
         {"keep_largest", t->keep_largest}};
  } else if (const auto* e = std::get_if<ExternalBackend>(&spec.settings)) {
    j = {{"kind", "external"},
         {"command", e->command},
         {"temp_dir", e->temp_dir.string()},
         {"timeout_s", e->timeout_s}};
  }
  return j;
}

}  // namespace

json config_to_json(const PipelineConfig& c) {
  return {
      {"dataset_root", c.dataset_root.string()},
      {"image_pattern", c.image_pattern},
      {"gt_pattern", c.gt_pattern},
      {"output_dir", c.output_dir.string()},
      {"workers", c.workers},
      {"write_predictions", c.write_predictions},
      {"roi",
       {{"box", {c.roi.box.nx, c.roi.box.ny, c.roi.box.nz}},
        {"factors", {c.roi.factors.fx, c.roi.factors.fy, c.roi.factors.fz}}}},
      {"clahe",
       {{"enabled", c.clahe_enabled},
        {"tiles", c.clahe.tiles},
        {"bins", c.clahe.bins},
        {"clip_fraction", c.clahe.clip_fraction},
        {"max_passes", c.clahe.max_passes},
        {"threads", c.clahe.threads}}},
      {"postprocess", {{"enabled", c.postprocess_enabled}, {"order", c.class_order}}},
      {"labels", {{"wall", c.labels.wall}, {"ra", c.labels.ra}, {"la", c.labels.la}}},
      {"coarse_backend", backend_to_json(c.coarse_backend)},
      {"fine_backend", backend_to_json(c.fine_backend)},
  };
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace atriaseg
