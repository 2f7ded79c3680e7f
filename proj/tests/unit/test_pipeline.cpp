#include <gtest/gtest.h>

#include <fstream>

#include "atriaseg/morphology.hpp"
#include "atriaseg/nifti.hpp"
#include "atriaseg/pipeline.hpp"
#include "atriaseg/report.hpp"
#include "phantom.hpp"
#include "scratch.hpp"

using namespace atriaseg;
using atriaseg::testing::PhantomSpec;
using atriaseg::testing::ScratchDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void touch(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  write_volume(make_volume({2, 2, 2}, {1, 1, 1}, 0.0f), p);
}

PhantomSpec small_spec() {
  PhantomSpec s;
  s.dims = {200, 200, 24};
  return s;
}

PipelineConfig small_config(const std::filesystem::path& root, const std::filesystem::path& out) {
  PipelineConfig c;
  c.dataset_root = root;
  c.output_dir = out;
  c.roi.box = {160, 160, 24};
  return c;
}

}  // namespace

TEST(Phantom, GroundTruthIsPostprocessInvariant) {
  const auto ph = atriaseg::testing::make_phantom(small_spec());
  const std::vector<std::uint8_t> order = {1, 2, 3};
  EXPECT_EQ(postprocess(ph.labels, order), ph.labels);
  for (std::uint8_t cls = 1; cls <= 3; ++cls) EXPECT_EQ(label_components(ph.labels, cls).count(), 1u);
}

TEST(Discover, SortedWithOptionalGroundTruth) {
  ScratchDir root;
  for (const char* id : {"b02", "a01", "c03"}) touch(root / (std::string(id) + "/" + id + ".nii.gz"));
  touch(root / "a01/a01_gt.nii.gz");
  touch(root / "c03/c03_gt.nii.gz");
  PipelineConfig c;
  c.dataset_root = root.path();
  const auto cases = discover_cases(c);
  ASSERT_EQ(cases.size(), 3u);
  EXPECT_EQ(cases[0].id, "a01");
  EXPECT_EQ(cases[1].id, "b02");
  EXPECT_EQ(cases[2].id, "c03");
  EXPECT_TRUE(cases[0].ground_truth.has_value());
  EXPECT_FALSE(cases[1].ground_truth.has_value());
  EXPECT_EQ(*cases[2].ground_truth, root / "c03/c03_gt.nii.gz");
}

TEST(Discover, GroundTruthFileIsNotACase) {
  ScratchDir root;
  touch(root / "img_x1.nii.gz");
  touch(root / "gt_x1.nii.gz");
  PipelineConfig c;
  c.dataset_root = root.path();
  c.image_pattern = "img_{case}.nii.gz";
  c.gt_pattern = "gt_{case}.nii.gz";
  const auto cases = discover_cases(c);
  ASSERT_EQ(cases.size(), 1u);
  EXPECT_EQ(cases[0].id, "x1");
  EXPECT_TRUE(cases[0].ground_truth.has_value());
}

TEST(Discover, WildcardsCarryIntoGroundTruthPattern) {
  ScratchDir root;
  touch(root / "siteA/p1_lge.nii.gz");
  touch(root / "siteA/p1_label.nii.gz");
  PipelineConfig c;
  c.dataset_root = root.path();
  c.image_pattern = "*/{case}_lge.nii.gz";
  c.gt_pattern = "*/{case}_label.nii.gz";
  const auto cases = discover_cases(c);
  ASSERT_EQ(cases.size(), 1u);
  EXPECT_EQ(cases[0].id, "p1");
  EXPECT_EQ(*cases[0].ground_truth, root / "siteA/p1_label.nii.gz");
}

TEST(Discover, DuplicateIdsNamed) {
  ScratchDir root;
  touch(root / "s1/dup.nii.gz");
  touch(root / "s2/dup.nii.gz");
  PipelineConfig c;
  c.dataset_root = root.path();
  c.image_pattern = "*/{case}.nii.gz";
  try {
    discover_cases(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'dup'"), std::string::npos);
  }
}

TEST(Discover, Errors) {
  ScratchDir root;
  PipelineConfig c;
  c.dataset_root = root / "missing";
  EXPECT_THROW(discover_cases(c), ConfigError);
  c.dataset_root = root.path();
  EXPECT_THROW(discover_cases(c), ConfigError);
}

TEST(Config, JsonRoundTripAndOverrides) {
  const auto doc = nlohmann::json::parse(R"({
    "dataset_root": "data",
    "workers": 3,
    "roi": {"box": [160, 160, 24], "factors": [2, 2, 1]},
    "clahe": {"enabled": false, "tiles": [4, 4, 2], "clip_fraction": 0.02},
    "postprocess": {"order": ["la", "ra", "wall"]},
    "labels": {"wall": 10, "ra": 20, "la": 30},
    "coarse_backend": {"kind": "threshold", "percentile": 85},
    "fine_backend": {"kind": "external", "command": "seg {input} {output}", "timeout_s": 5}
  })");
  const PipelineConfig c = config_from_json(doc);
  EXPECT_EQ(c.workers, 3);
  EXPECT_EQ(c.roi.box, (Dims{160, 160, 24}));
  EXPECT_EQ(c.roi.factors, (Factors{2, 2, 1}));
  EXPECT_FALSE(c.clahe_enabled);
  EXPECT_EQ(c.clahe.tiles, (std::array<int, 3>{4, 4, 2}));
  EXPECT_EQ(c.class_order_values(), (std::vector<std::uint8_t>{30, 20, 10}));
  EXPECT_STREQ(c.coarse_backend.kind(), "threshold");
  EXPECT_EQ(std::get<ThresholdBackend>(c.coarse_backend.settings).percentile, 85.0);
  EXPECT_EQ(std::get<ExternalBackend>(c.fine_backend.settings).timeout_s, 5.0);
  EXPECT_NO_THROW(c.validate());

  const PipelineConfig again = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Config, RejectsBadDocuments) {
  using nlohmann::json;
  EXPECT_THROW(config_from_json(json::parse(R"({"bogus": 1})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"roi": {"box": [1, 2]}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"workers": "many"})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"fine_backend": {"kind": "magic"}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"labels": {"wall": 0}})")), ConfigError);

  PipelineConfig c;
  c.workers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.class_order = {"wall", "lv"};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.clahe.tiles = {8, 8, 64};
  EXPECT_THROW(c.validate(), ConfigError);
  ScratchDir dir;
  EXPECT_THROW(load_config(dir / "none.json"), ConfigError);
}

TEST(RunCase, OracleIdentityOnPhantom) {
  ScratchDir root;
  atriaseg::testing::write_phantom_dataset(root.path(), 1, small_spec());
  const PipelineConfig c = small_config(root.path(), root / "out");
  const auto cases = discover_cases(c);
  ASSERT_EQ(cases.size(), 1u);
  const CaseResult r = run_case(cases[0], c);
  ASSERT_TRUE(r.ok) << r.failed_stage << ": " << r.error;
  ASSERT_TRUE(r.metrics.has_value());
  for (const auto& k : r.metrics->classes) {
    EXPECT_EQ(k.dice, 1.0) << k.name;
    EXPECT_EQ(k.hd95.mm, 0.0) << k.name;
  }
  const LabelMap gt = read_labels(*cases[0].ground_truth);
  EXPECT_EQ(*r.prediction, gt);
  EXPECT_EQ(r.crop_box->size, (Dims{160, 160, 24}));
  EXPECT_GT(r.timings.total, 0.0);
}

TEST(RunCase, AblationFlagsSkipStages) {
  ScratchDir root;
  atriaseg::testing::write_phantom_dataset(root.path(), 1, small_spec());
  PipelineConfig c = small_config(root.path(), root / "out");
  c.clahe_enabled = false;
  c.postprocess_enabled = false;
  const CaseResult r = run_case(discover_cases(c)[0], c);
  ASSERT_TRUE(r.ok) << r.error;
  EXPECT_EQ(r.timings.clahe, 0.0);
  EXPECT_EQ(r.timings.postprocess, 0.0);
  for (const auto& k : r.metrics->classes) EXPECT_EQ(k.dice, 1.0);
}

TEST(RunCase, EmptyCoarseMaskFallsBackToCentre) {
  ScratchDir root;
  atriaseg::testing::write_phantom_dataset(root.path(), 1, small_spec());
  PipelineConfig c = small_config(root.path(), root / "out");
  OracleBackend o;
  o.from_ground_truth = false;
  o.directory = root / "coarse";
  std::filesystem::create_directories(o.directory);
  write_volume(LabelMap({50, 50, 12}, {2.5, 2.5, 5.0}, 0), o.directory / "case01.nii.gz");
  c.coarse_backend = {o};
  const CaseResult r = run_case(discover_cases(c)[0], c);
  ASSERT_TRUE(r.ok) << r.error;
  EXPECT_TRUE(r.center_fallback);
  // Coarse centre (25, 25, 6) maps to full (101, 101, 12).
  EXPECT_EQ(r.crop_box->origin, (Index3{101 - 80, 101 - 80, 12 - 12}));
}

TEST(RunCase, StageFailuresAreReported) {
  ScratchDir root;
  atriaseg::testing::write_phantom_dataset(root.path(), 1, small_spec());
  PipelineConfig c = small_config(root.path(), root / "out");
  c.fine_backend = {ExternalBackend{"exit 9 # {input} {output}", root.path(), 10.0}};
  const CaseResult r = run_case(discover_cases(c)[0], c);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.failed_stage, "segmentation");
  EXPECT_NE(r.error.find("status 9"), std::string::npos);

  const CaseResult missing = run_case({"ghost", root / "ghost.nii.gz", std::nullopt}, c);
  EXPECT_FALSE(missing.ok);
  EXPECT_EQ(missing.failed_stage, "load");
}

TEST(RunCase, ThresholdSmokeOnThinWallPhantom) {
  ScratchDir root;
  PhantomSpec s = small_spec();
  s.wall_mm = 0.625;
  atriaseg::testing::write_phantom_dataset(root.path(), 1, s);
  PipelineConfig c = small_config(root.path(), root / "out");
  c.coarse_backend = {ThresholdBackend{}};
  c.fine_backend = {ThresholdBackend{}};
  const DatasetResult d = run_dataset(c);
  ASSERT_EQ(d.exit_code(), 0) << d.cases[0].error;
  const auto report = nlohmann::json::parse(slurp(root / "out/cases/case01.json"));
  EXPECT_EQ(report["status"], "ok");
  ASSERT_TRUE(report["metrics"].is_object());
  EXPECT_EQ(report["metrics"]["classes"].size(), 3u);
  for (const char* key : {"roi", "clahe", "segmentation", "postprocess", "total"}) {
    EXPECT_TRUE(report["timing_s"].contains(key)) << key;
  }
  for (const char* f : {"aggregate.json", "aggregate.csv", "boxplot.csv", "timings.csv", "predictions/case01.nii.gz"}) {
    EXPECT_TRUE(std::filesystem::exists(root / "out" / f)) << f;
  }
}

TEST(RunDataset, TwoCaseOracleAggregate) {
  ScratchDir root;
  atriaseg::testing::write_phantom_dataset(root.path(), 2, small_spec());
  PipelineConfig c = small_config(root.path(), root / "out");
  c.workers = 2;
  const DatasetResult d = run_dataset(c);
  EXPECT_EQ(d.exit_code(), 0);
  ASSERT_TRUE(d.aggregate.has_value());
  for (const auto& k : d.aggregate->classes) {
    EXPECT_EQ(k.dice.mean, 1.0);
    EXPECT_EQ(k.dice.std, 0.0);
    EXPECT_EQ(k.dice.n, 2u);
  }
  const LabelMap pred = read_labels(root / "out/predictions/case01.nii.gz");
  EXPECT_EQ(pred, read_labels(root / "case01/case01_gt.nii.gz"));
}

TEST(RunDataset, PartialFailureStillAggregates) {
  ScratchDir root;
  atriaseg::testing::write_phantom_dataset(root.path(), 2, small_spec());
  PipelineConfig c = small_config(root.path(), root / "out");
  // Stored predictions exist for case01 only.
  OracleBackend o;
  o.from_ground_truth = false;
  o.directory = root / "fine";
  o.pattern = "{case}.nii.gz";
  std::filesystem::create_directories(o.directory);
  {
    const PipelineConfig probe = small_config(root.path(), root / "probe");
    const auto cases = discover_cases(probe);
    const CaseResult r = run_case(cases[0], probe);
    ASSERT_TRUE(r.ok);
    write_volume(crop_with_padding(*r.prediction, *r.crop_box), o.directory / "case01.nii.gz");
  }
  c.fine_backend = {o};
  const DatasetResult d = run_dataset(c);
  EXPECT_EQ(d.exit_code(), 1);
  EXPECT_EQ(d.failed, 1u);
  EXPECT_FALSE(d.cases[1].ok);
  ASSERT_TRUE(d.aggregate.has_value());
  EXPECT_EQ(d.aggregate->cases, 1u);
  const auto agg = nlohmann::json::parse(slurp(root / "out/aggregate.json"));
  ASSERT_EQ(agg["failed"].size(), 1u);
  EXPECT_EQ(agg["failed"][0]["case"], "case02");
  EXPECT_EQ(agg["succeeded"], 1);
}

TEST(RunDataset, AllFailedIsNonzero) {
  ScratchDir root;
  atriaseg::testing::write_phantom_dataset(root.path(), 1, small_spec());
  PipelineConfig c = small_config(root.path(), root / "out");
  c.fine_backend = {ExternalBackend{"exit 1 # {input} {output}", root.path(), 10.0}};
  const DatasetResult d = run_dataset(c);
  EXPECT_EQ(d.exit_code(), 1);
  EXPECT_FALSE(d.aggregate.has_value());
}

TEST(RunDataset, RerunIsByteIdentical) {
  ScratchDir root;
  atriaseg::testing::write_phantom_dataset(root.path(), 2, small_spec());
  PipelineConfig a = small_config(root.path(), root / "a");
  PipelineConfig b = small_config(root.path(), root / "b");
  b.workers = 2;
  b.clahe.threads = 3;
  run_dataset(a);
  run_dataset(b);
  for (const char* f : {"aggregate.json", "aggregate.csv", "boxplot.csv", "predictions/case01.nii.gz",
                        "predictions/case02.nii.gz"}) {
    EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
  }
  for (const char* f : {"cases/case01.json", "cases/case02.json"}) {
    auto ja = nlohmann::json::parse(slurp(root / "a" / f));
    auto jb = nlohmann::json::parse(slurp(root / "b" / f));
    ja.erase("timing_s");
    jb.erase("timing_s");
    EXPECT_EQ(ja.dump(), jb.dump()) << f;
  }
}
