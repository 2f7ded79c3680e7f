#include <benchmark/benchmark.h>

#include <random>

#include "atriaseg/clahe.hpp"
#include "atriaseg/metrics.hpp"
#include "atriaseg/morphology.hpp"
#include "atriaseg/resample.hpp"

using namespace atriaseg;

namespace {

const Spacing kSpacing{0.625, 0.625, 2.5};

// Two overlapping ellipsoids with a shell, plus scattered speckle.
LabelMap atria(Dims d, std::uint64_t seed) {
  LabelMap m(d, kSpacing, 0);
  const double cx = d.nx / 2.0, cy = d.ny / 2.0, cz = d.nz / 2.0;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        auto r = [&](double ox, double rx, double ry, double rz) {
          const double a = (x - cx - ox) / rx, b = (y - cy) / ry, c = (z - cz) / rz;
          return a * a + b * b + c * c;
        };
        const double la = r(d.nx * 0.12, d.nx * 0.1, d.ny * 0.09, d.nz * 0.3);
        const double ra = r(-d.nx * 0.12, d.nx * 0.1, d.ny * 0.08, d.nz * 0.28);
        if (la < 1.0) m.at(x, y, z) = 3;
        else if (ra < 1.0) m.at(x, y, z) = 2;
        else if (la < 1.3 || ra < 1.3) m.at(x, y, z) = 1;
      }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> at(0, m.size() - 1);
  std::uniform_int_distribution<int> lab(0, 3);
  for (std::size_t i = 0; i < m.size() / 500; ++i) m[at(rng)] = static_cast<std::uint8_t>(lab(rng));
  return m;
}

Volume image_from(const LabelMap& labels, std::uint64_t seed) {
  static constexpr float kLevel[] = {40.0f, 320.0f, 210.0f, 230.0f};
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 12.0f);
  Volume v(labels.dims(), labels.spacing());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(0.0f, kLevel[labels[i]] + noise(rng));
  return v;
}

void BM_Clahe(benchmark::State& state) {
  const Volume v = image_from(atria({320, 320, 44}, 1), 2);
  ClaheParams p;
  p.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(clahe3d(v, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.size()));
}
BENCHMARK(BM_Clahe)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_Postprocess(benchmark::State& state) {
  const LabelMap m = atria({320, 320, 44}, 3);
  const std::vector<std::uint8_t> order = {1, 2, 3};
  for (auto _ : state) benchmark::DoNotOptimize(postprocess(m, order));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_Postprocess)->Unit(benchmark::kMillisecond);

void BM_Hd95(benchmark::State& state) {
  const LabelMap gt = atria({640, 640, 44}, 4);
  const LabelMap pred = atria({640, 640, 44}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(hd95(pred, gt, static_cast<std::uint8_t>(state.range(0)), kSpacing));
}
BENCHMARK(BM_Hd95)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_WallThickness(benchmark::State& state) {
  const LabelMap m = atria({320, 320, 44}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(wall_thickness(m, 1, kSpacing));
}
BENCHMARK(BM_WallThickness)->Unit(benchmark::kMillisecond);

void BM_DownsampleLinear(benchmark::State& state) {
  const Volume v = image_from(atria({640, 640, 44}, 7), 8);
  for (auto _ : state) benchmark::DoNotOptimize(downsample_linear(v, {4, 4, 2}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.size()));
}
BENCHMARK(BM_DownsampleLinear)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
