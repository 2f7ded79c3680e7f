#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "atriaseg/distance.hpp"
#include "atriaseg/metrics.hpp"
#include "oracles.hpp"

using namespace atriaseg;

namespace {

const Spacing kLge{0.625, 0.625, 2.5};

LabelMap slab(int thickness, int margin = 2) {
  LabelMap m({10, 10, thickness + 2 * margin}, {1, 1, 1}, 0);
  for (int z = margin; z < margin + thickness; ++z)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) m.at(x, y, z) = 1;
  return m;
}

LabelMap shifted(const LabelMap& m, Index3 t, Dims d) {
  LabelMap out(d, m.spacing(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Index3 p = m.index(i);
    out.at(p.x + t.x, p.y + t.y, p.z + t.z) = m[i];
  }
  return out;
}

}  // namespace

TEST(Dice, Examples) {
  LabelMap a({4, 4, 4}, {1, 1, 1}, 0);
  a.at(1, 1, 1) = 2;
  a.at(2, 1, 1) = 2;
  EXPECT_EQ(dice(a, a, 2), 1.0);
  LabelMap b({4, 4, 4}, {1, 1, 1}, 0);
  b.at(0, 3, 3) = 2;
  b.at(1, 3, 3) = 2;
  EXPECT_EQ(dice(a, b, 2), 0.0);
  EXPECT_EQ(dice(a, b, 3), 1.0);
  const LabelMap empty({4, 4, 4}, {1, 1, 1}, 0);
  EXPECT_EQ(dice(a, empty, 2), 0.0);

  LabelMap p({10, 1, 1}, {1, 1, 1}, std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0, 0, 0, 0, 0});
  LabelMap g({10, 1, 1}, {1, 1, 1}, std::vector<std::uint8_t>{0, 1, 1, 1, 1, 1, 1, 0, 0, 0});
  const DiceCounts c = dice_counts(p, g, 1);
  EXPECT_EQ(c.intersection, 3u);
  EXPECT_EQ(c.pred, 4u);
  EXPECT_EQ(c.gt, 6u);
  EXPECT_DOUBLE_EQ(c.value(), 0.6);
  EXPECT_THROW(dice(p, a, 1), GeometryError);
}

TEST(Dice, MatchesCountingOracleAndIsSymmetric) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const Dims d{std::uniform_int_distribution<int>(1, 16)(rng), std::uniform_int_distribution<int>(1, 16)(rng),
                 std::uniform_int_distribution<int>(1, 16)(rng)};
    const LabelMap p = oracle::random_labels(rng, d, 0.5, 3);
    const LabelMap g = oracle::random_labels(rng, d, 0.5, 3);
    for (std::uint8_t cls = 1; cls <= 3; ++cls) {
      std::uint64_t inter = 0, np = 0, ng = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        np += p[i] == cls;
        ng += g[i] == cls;
        inter += p[i] == cls && g[i] == cls;
      }
      const DiceCounts c = dice_counts(p, g, cls);
      ASSERT_EQ(c.intersection, inter);
      ASSERT_EQ(c.pred, np);
      ASSERT_EQ(c.gt, ng);
      ASSERT_EQ(dice(p, g, cls), dice(g, p, cls));
      const double v = dice(p, g, cls);
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Dice, InvariantUnderSharedPermutation) {
  std::mt19937_64 rng(2);
  const LabelMap p = oracle::random_labels(rng, {9, 9, 9}, 0.5, 3);
  const LabelMap g = oracle::random_labels(rng, {9, 9, 9}, 0.5, 3);
  std::vector<std::size_t> perm(p.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  LabelMap pp = p, gg = g;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pp[i] = p[perm[i]];
    gg[i] = g[perm[i]];
  }
  for (std::uint8_t cls = 1; cls <= 3; ++cls) EXPECT_EQ(dice(p, g, cls), dice(pp, gg, cls));
}

TEST(Surface, Examples) {
  LabelMap one({5, 5, 5}, {1, 1, 1}, 0);
  one.at(2, 2, 2) = 1;
  EXPECT_EQ(surface_voxels(one, 1), (std::vector<Index3>{{2, 2, 2}}));
  EXPECT_TRUE(surface_voxels(one, 2).empty());

  LabelMap cube({10, 10, 10}, {1, 1, 1}, 0);
  for (int z = 3; z < 7; ++z)
    for (int y = 3; y < 7; ++y)
      for (int x = 3; x < 7; ++x) cube.at(x, y, z) = 3;
  const auto s = surface_voxels(cube, 3);
  EXPECT_EQ(s.size(), 56u);
  EXPECT_EQ(s, oracle::surface(cube, 3));

  // The grid border counts as outside.
  const LabelMap full({3, 3, 3}, {1, 1, 1}, 1);
  EXPECT_EQ(surface_voxels(full, 1).size(), 26u);
}

TEST(Hd95, Examples) {
  std::mt19937_64 rng(3);
  const LabelMap m = oracle::random_labels(rng, {8, 8, 8}, 0.3, 3, kLge);
  for (std::uint8_t cls = 1; cls <= 3; ++cls) {
    const SurfaceDistance d = hd95(m, m, cls, kLge);
    EXPECT_TRUE(d.defined());
    EXPECT_EQ(d.mm, 0.0);
  }
  LabelMap a({4, 4, 6}, kLge, 0);
  LabelMap b({4, 4, 6}, kLge, 0);
  a.at(1, 1, 1) = 1;
  b.at(1, 1, 3) = 1;
  const SurfaceDistance d = hd95(a, b, 1, kLge);
  EXPECT_TRUE(d.defined());
  EXPECT_EQ(d.mm, 5.0);
}

TEST(Hd95, UndefinedCasesAreDistinct) {
  LabelMap a({4, 4, 4}, {1, 1, 1}, 0);
  const LabelMap e({4, 4, 4}, {1, 1, 1}, 0);
  a.at(0, 0, 0) = 2;
  EXPECT_EQ(hd95(e, e, 2, {1, 1, 1}).status, DistanceStatus::kBothEmpty);
  EXPECT_EQ(hd95(e, a, 2, {1, 1, 1}).status, DistanceStatus::kPredEmpty);
  EXPECT_EQ(hd95(a, e, 2, {1, 1, 1}).status, DistanceStatus::kGtEmpty);
  EXPECT_STREQ(to_string(DistanceStatus::kPredEmpty), "pred_empty");
}

TEST(Hd95, NearestRankPercentile) {
  std::vector<double> v = {5, 1, 4, 2, 3};
  EXPECT_EQ(nearest_rank_percentile(v, 95), 5.0);
  v = {5, 1, 4, 2, 3};
  EXPECT_EQ(nearest_rank_percentile(v, 40), 2.0);
  std::vector<double> twenty(20);
  std::iota(twenty.begin(), twenty.end(), 1.0);
  EXPECT_EQ(nearest_rank_percentile(twenty, 95), 19.0);
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  EXPECT_EQ(nearest_rank_percentile(hundred, 95), 95.0);
  EXPECT_EQ(nearest_rank_percentile(hundred, 100), 100.0);
}

TEST(Hd95, MatchesAllPairsOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const Dims d{std::uniform_int_distribution<int>(1, 12)(rng), std::uniform_int_distribution<int>(1, 12)(rng),
                 std::uniform_int_distribution<int>(1, 12)(rng)};
    const Spacing s = trial % 2 ? kLge : Spacing{1.0, 0.7, 1.9};
    const LabelMap p = oracle::random_labels(rng, d, std::uniform_real_distribution<double>(0.01, 0.6)(rng), 3, s);
    const LabelMap g = oracle::random_labels(rng, d, std::uniform_real_distribution<double>(0.01, 0.6)(rng), 3, s);
    for (std::uint8_t cls = 1; cls <= 3; ++cls) {
      const double ref = oracle::all_pairs_hd(p, g, cls, s, 95);
      const SurfaceDistance got = hd95(p, g, cls, s);
      if (std::isnan(ref)) {
        ASSERT_FALSE(got.defined());
        continue;
      }
      ASSERT_TRUE(got.defined());
      ASSERT_NEAR(got.mm, ref, 1e-9);
      ASSERT_EQ(got.mm, hd95(g, p, cls, s).mm);
    }
  }
}

TEST(Hd95, BoundedByHausdorffAndMonotoneInPercentile) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const LabelMap p = oracle::random_labels(rng, {10, 10, 6}, 0.2, 3, kLge);
    const LabelMap g = oracle::random_labels(rng, {10, 10, 6}, 0.2, 3, kLge);
    for (std::uint8_t cls = 1; cls <= 3; ++cls) {
      double prev = std::numeric_limits<double>::infinity();
      for (const double pct : {100.0, 95.0, 80.0, 50.0, 10.0}) {
        const SurfaceDistance d = hausdorff_percentile(p, g, cls, kLge, pct);
        if (!d.defined()) break;
        ASSERT_LE(d.mm, prev);
        prev = d.mm;
      }
      const SurfaceDistance h100 = hausdorff_percentile(p, g, cls, kLge, 100.0);
      if (h100.defined()) ASSERT_LE(hd95(p, g, cls, kLge).mm, h100.mm);
    }
  }
}

TEST(Hd95, InvariantUnderSharedTranslation) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const LabelMap p = oracle::random_labels(rng, {6, 6, 6}, 0.3, 3, kLge);
    const LabelMap g = oracle::random_labels(rng, {6, 6, 6}, 0.3, 3, kLge);
    const Index3 t{std::uniform_int_distribution<int>(1, 4)(rng), std::uniform_int_distribution<int>(1, 4)(rng),
                   std::uniform_int_distribution<int>(1, 4)(rng)};
    // Padding on every side keeps the grid border from touching either shape.
    const Dims big{12, 12, 12};
    const LabelMap p1 = shifted(p, {1, 1, 1}, big);
    const LabelMap g1 = shifted(g, {1, 1, 1}, big);
    const LabelMap p2 = shifted(p, t, big);
    const LabelMap g2 = shifted(g, t, big);
    for (std::uint8_t cls = 1; cls <= 3; ++cls) {
      ASSERT_EQ(hd95(p1, g1, cls, kLge).mm, hd95(p2, g2, cls, kLge).mm);
    }
  }
}

TEST(Distance, MatchesBruteForceExactly) {
  // Dyadic spacings make every squared distance exact in double, so equal
  // distances compare bit-equal whichever nearest site is chosen.
  const Spacing spacings[] = {{1, 1, 1}, kLge, {0.5, 1.25, 3.0}};
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const Dims d{std::uniform_int_distribution<int>(1, 12)(rng), std::uniform_int_distribution<int>(1, 12)(rng),
                 std::uniform_int_distribution<int>(1, 12)(rng)};
    const Spacing s = spacings[trial % 3];
    const LabelMap sites = oracle::random_labels(rng, d, std::uniform_real_distribution<double>(0.001, 0.5)(rng), 1, s);
    const DistanceField f = distance_transform(d, s, sites.data());
    const auto ref = oracle::brute_force_edt(sites, s);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ASSERT_EQ(f.distance_mm[i], ref[i]) << "trial " << trial << " voxel " << i;
      if (std::isinf(ref[i])) {
        ASSERT_EQ(f.nearest[i], -1);
      } else {
        ASSERT_EQ(sites[static_cast<std::size_t>(f.nearest[i])], 1);
      }
    }
  }
}

TEST(Distance, MatchesBruteForceOnNonDyadicSpacing) {
  // Ties such as 3 * 0.3 vs 0.9 round differently; allow a few ulps.
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Dims d{std::uniform_int_distribution<int>(1, 12)(rng), std::uniform_int_distribution<int>(1, 12)(rng),
                 std::uniform_int_distribution<int>(1, 12)(rng)};
    const Spacing s{0.3, 1.7, 0.9};
    const LabelMap sites = oracle::random_labels(rng, d, std::uniform_real_distribution<double>(0.001, 0.5)(rng), 1, s);
    const DistanceField f = distance_transform(d, s, sites.data());
    const auto ref = oracle::brute_force_edt(sites, s);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (std::isinf(ref[i])) {
        ASSERT_TRUE(std::isinf(f.distance_mm[i]));
      } else {
        ASSERT_NEAR(f.distance_mm[i], ref[i], 1e-12 * (1.0 + ref[i]));
      }
    }
  }
}

TEST(Distance, NoSites) {
  const LabelMap none({3, 3, 3}, {1, 1, 1}, 0);
  const DistanceField f = distance_transform(none.dims(), none.spacing(), none.data());
  for (std::size_t i = 0; i < none.size(); ++i) {
    EXPECT_TRUE(std::isinf(f.distance_mm[i]));
    EXPECT_EQ(f.nearest[i], -1);
  }
}

TEST(WallThickness, SlabCalibration) {
  for (const int t : {1, 3, 5, 9}) {
    const ThicknessStats s = wall_thickness(slab(t), 1, {1, 1, 1});
    ASSERT_TRUE(s.defined);
    EXPECT_NEAR(s.mean, t, 1e-12) << "thickness " << t;
    EXPECT_EQ(s.std, 0.0);
  }
  for (const int t : {2, 4, 6}) {
    const ThicknessStats s = wall_thickness(slab(t), 1, {1, 1, 1});
    EXPECT_NEAR(s.mean, t, 1.0) << "thickness " << t;
  }
}

TEST(WallThickness, SheetSamplesAreHalfVoxelDistances) {
  // A one-voxel sheet: each voxel is one centre-spacing from the nearest
  // non-wall centre, i.e. half a voxel from the wall face.
  const LabelMap s = slab(1);
  const auto d = oracle::brute_force_edt([&] {
    LabelMap sites = s;
    for (auto& v : sites.data()) v = v != 1;
    return sites;
  }(), {1, 1, 1});
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] == 1) ASSERT_EQ(d[i], 1.0);
  EXPECT_EQ(wall_thickness(s, 1, {1, 1, 1}).mean, 1.0);
}

TEST(WallThickness, AnisotropicSlab) {
  // Five voxels along z at 2.5 mm.
  LabelMap m({6, 6, 9}, kLge, 0);
  for (int z = 2; z < 7; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) m.at(x, y, z) = 1;
  EXPECT_NEAR(wall_thickness(m, 1, kLge).mean, 12.5, 1e-12);
}

TEST(WallThickness, InvariantUnderPadding) {
  std::mt19937_64 rng(23);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Dims d{std::uniform_int_distribution<int>(1, 10)(rng), std::uniform_int_distribution<int>(1, 10)(rng),
                 std::uniform_int_distribution<int>(1, 10)(rng)};
    LabelMap m = oracle::blobby(rng, d);
    m = LabelMap(d, kLge, std::vector<std::uint8_t>(m.data().begin(), m.data().end()));
    // Grid-edge wall voxels would become interior after padding and could
    // gain samples, so keep the border clear.
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Index3 p = m.index(i);
      if (p.x == 0 || p.y == 0 || p.z == 0 || p.x == d.nx - 1 || p.y == d.ny - 1 || p.z == d.nz - 1) m[i] = 0;
    }
    const Index3 t{std::uniform_int_distribution<int>(0, 4)(rng), std::uniform_int_distribution<int>(0, 4)(rng),
                   std::uniform_int_distribution<int>(0, 4)(rng)};
    // Pad with background (a site) and with a foreign class (also a site).
    for (const std::uint8_t pad : {0, 2}) {
      LabelMap big({d.nx + 8, d.ny + 8, d.nz + 8}, kLge, pad);
      for (std::size_t i = 0; i < m.size(); ++i) {
        const Index3 p = m.index(i);
        big.at(p.x + t.x, p.y + t.y, p.z + t.z) = m[i];
      }
      const ThicknessStats a = wall_thickness(m, 1, kLge);
      const ThicknessStats b = wall_thickness(big, 1, kLge);
      ASSERT_EQ(a.defined, b.defined) << "trial " << trial;
      if (!a.defined) continue;
      ++compared;
      ASSERT_EQ(a.samples, b.samples) << "trial " << trial;
      ASSERT_EQ(a.mean, b.mean) << "trial " << trial;
      ASSERT_EQ(a.max, b.max) << "trial " << trial;
    }
  }
  EXPECT_GT(compared, 150);
}

TEST(WallThickness, AbsentWallIsUndefined) {
  const LabelMap m({4, 4, 4}, {1, 1, 1}, 2);
  EXPECT_FALSE(wall_thickness(m, 1, {1, 1, 1}).defined);
}

TEST(Aggregate, Examples) {
  const std::vector<double> one = {0.83};
  const Summary s1 = summarize(one);
  EXPECT_EQ(s1.mean, 0.83);
  EXPECT_EQ(s1.std, 0.0);
  EXPECT_TRUE(s1.single_sample());
  const std::vector<double> two = {0.8, 1.0};
  const Summary s2 = summarize(two);
  EXPECT_NEAR(s2.mean, 0.9, 1e-15);
  EXPECT_NEAR(s2.std, std::sqrt(0.02), 1e-15);
  EXPECT_THROW(aggregate(std::span<const CaseMetrics>{}), ConfigError);
}

TEST(Aggregate, UndefinedHd95IsExcludedAndCounted) {
  std::vector<CaseMetrics> cases(3);
  for (int i = 0; i < 3; ++i) {
    ClassMetrics c;
    c.name = "la";
    c.label = 3;
    c.dice = 0.7 + 0.1 * i;
    c.hd95 = {i == 1 ? DistanceStatus::kPredEmpty : DistanceStatus::kDefined, 2.0 * (i + 1)};
    cases[static_cast<std::size_t>(i)].case_id = "c" + std::to_string(i);
    cases[static_cast<std::size_t>(i)].classes.push_back(c);
  }
  const AggregateMetrics a = aggregate(cases);
  ASSERT_EQ(a.classes.size(), 1u);
  EXPECT_EQ(a.cases, 3u);
  EXPECT_EQ(a.classes[0].dice.n, 3u);
  EXPECT_NEAR(a.classes[0].dice.mean, 0.8, 1e-12);
  EXPECT_EQ(a.classes[0].hd95.n, 2u);
  EXPECT_EQ(a.classes[0].hd95.excluded, 1u);
  EXPECT_NEAR(a.classes[0].hd95.mean, 4.0, 1e-12);
}

TEST(EvaluateCase, IdentityScoresPerfectly) {
  std::mt19937_64 rng(9);
  const LabelMap m = oracle::random_labels(rng, {10, 10, 6}, 0.5, 3, kLge);
  const CaseMetrics c = evaluate_case("x", m, m, {});
  ASSERT_EQ(c.classes.size(), 3u);
  for (const auto& k : c.classes) {
    EXPECT_EQ(k.dice, 1.0);
    EXPECT_TRUE(k.hd95.defined());
    EXPECT_EQ(k.hd95.mm, 0.0);
  }
  EXPECT_EQ(c.classes[0].name, "wall");
  EXPECT_TRUE(c.wall_thickness.defined);
}
