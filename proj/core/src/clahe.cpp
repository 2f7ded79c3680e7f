#include "atriaseg/clahe.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atriaseg/parallel.hpp"

namespace atriaseg {
namespace {

struct Tap {
  int t0;
  int t1;
  double w;
};

std::vector<Tap> axis_taps(const AxisTiling& axis, int n) {
  std::vector<Tap> taps(static_cast<std::size_t>(n));
  const int last = axis.count() - 1;
  int i = 0;
  for (int c = 0; c < n; ++c) {
    Tap& tap = taps[static_cast<std::size_t>(c)];
    if (last == 0 || c <= axis.center.front()) {
      tap = {0, 0, 0.0};
    } else if (c >= axis.center.back()) {
      tap = {last, last, 0.0};
    } else {
      while (axis.center[static_cast<std::size_t>(i + 1)] <= c) ++i;
      const double c0 = axis.center[static_cast<std::size_t>(i)];
      const double c1 = axis.center[static_cast<std::size_t>(i + 1)];
      tap = {i, i + 1, (c - c0) / (c1 - c0)};
    }
  }
  return taps;
}

}  // namespace

void ClaheParams::validate(Dims dims) const {
  for (int axis = 0; axis < 3; ++axis) {
    const int t = tiles[static_cast<std::size_t>(axis)];
    if (t < 1) throw ConfigError("CLAHE tiles per axis must be >= 1");
    if (t > dims[axis]) {
      throw ConfigError("CLAHE requests " + std::to_string(t) + " tiles on an axis of " +
                        std::to_string(dims[axis]) + " voxels");
    }
  }
  if (bins < 2) throw ConfigError("CLAHE bin count must be >= 2");
  if (!(clip_fraction > 0.0 && clip_fraction <= 1.0)) {
    throw ConfigError("CLAHE clip fraction must lie in (0, 1]");
  }
  if (max_passes < 0) throw ConfigError("CLAHE redistribution passes must be >= 0");
}

TileGrid build_tile_grid(Dims dims, const ClaheParams& params) {
  params.validate(dims);
  TileGrid grid;
  grid.bins = params.bins;
  for (int axis = 0; axis < 3; ++axis) {
    const int n = dims[axis];
    const int t = params.tiles[static_cast<std::size_t>(axis)];
    const int base = n / t;
    AxisTiling& a = grid.axes[static_cast<std::size_t>(axis)];
    for (int i = 0; i < t; ++i) {
      const int start = i * base;
      const int size = i + 1 == t ? n - start : base;
      a.start.push_back(start);
      a.size.push_back(size);
      a.center.push_back(start + (size - 1) / 2.0);
    }
  }
  return grid;
}

ClippedHistogram clip_and_redistribute(std::span<const std::uint64_t> hist,
                                       std::uint64_t clip_limit, int max_passes) {
  ClippedHistogram out{{hist.begin(), hist.end()}, 0};
  auto& h = out.counts;
  const std::size_t n = h.size();
  if (n == 0) return out;
  clip_limit = std::max<std::uint64_t>(clip_limit, 1);

  std::uint64_t excess = 0;
  for (auto& c : h) {
    if (c > clip_limit) {
      excess += c - clip_limit;
      c = clip_limit;
    }
  }

  std::vector<std::size_t> room;
  for (int pass = 0; pass < max_passes && excess > 0; ++pass) {
    room.clear();
    for (std::size_t b = 0; b < n; ++b) {
      if (h[b] < clip_limit) room.push_back(b);
    }
    if (room.empty()) break;
    const std::uint64_t inc = excess / room.size();
    if (inc > 0) {
      for (const std::size_t b : room) {
        const std::uint64_t add = std::min(inc, clip_limit - h[b]);
        h[b] += add;
        excess -= add;
      }
    }
    if (excess > 0 && excess < room.size()) {
      const std::size_t step = std::max<std::size_t>(1, room.size() / excess);
      for (std::size_t i = 0; i < room.size() && excess > 0; i += step) {
        auto& c = h[room[i]];
        if (c < clip_limit) {
          ++c;
          --excess;
        }
      }
    }
  }

  if (excess > 0) {
    out.residual = excess;
    const std::uint64_t each = excess / n;
    const std::uint64_t rest = excess % n;
    for (auto& c : h) c += each;
    for (std::uint64_t j = 0; j < rest; ++j) h[static_cast<std::size_t>(j * n / rest)] += 1;
  }
  return out;
}

std::vector<double> mapping_from_hist(std::span<const std::uint64_t> hist) {
  std::uint64_t total = 0;
  for (const auto c : hist) total += c;
  if (total == 0) throw ConfigError("cannot build an intensity mapping from an empty histogram");
  std::vector<double> mapping(hist.size());
  std::uint64_t running = 0;
  for (std::size_t b = 0; b < hist.size(); ++b) {
    running += hist[b];
    mapping[b] = static_cast<double>(running) / static_cast<double>(total);
  }
  return mapping;
}

std::uint64_t clip_limit_for(std::size_t tile_voxels, double clip_fraction) {
  const auto limit = static_cast<std::uint64_t>(std::floor(clip_fraction * static_cast<double>(tile_voxels)));
  return std::max<std::uint64_t>(limit, 1);
}

TileGrid clahe_tiles(const Volume& vol, const ClaheParams& params) {
  TileGrid grid = build_tile_grid(vol.dims(), params);
  const auto [lo, hi] = intensity_range(vol);
  const std::size_t bins = static_cast<std::size_t>(params.bins);
  grid.mappings.assign(grid.tile_count() * bins, 0.0);
  const double range_lo = lo;
  const double range_hi = hi;

  parallel_for(grid.tile_count(), params.threads, [&](std::size_t tile) {
    const int nx = grid.axes[0].count();
    const int ny = grid.axes[1].count();
    const int tx = static_cast<int>(tile % static_cast<std::size_t>(nx));
    const int ty = static_cast<int>((tile / static_cast<std::size_t>(nx)) % static_cast<std::size_t>(ny));
    const int tz = static_cast<int>(tile / (static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)));
    const auto& ax = grid.axes[0];
    const auto& ay = grid.axes[1];
    const auto& az = grid.axes[2];

    std::vector<std::uint64_t> hist(bins, 0);
    const int x0 = ax.start[static_cast<std::size_t>(tx)];
    const int x1 = x0 + ax.size[static_cast<std::size_t>(tx)];
    for (int z = az.start[static_cast<std::size_t>(tz)];
         z < az.start[static_cast<std::size_t>(tz)] + az.size[static_cast<std::size_t>(tz)]; ++z) {
      for (int y = ay.start[static_cast<std::size_t>(ty)];
           y < ay.start[static_cast<std::size_t>(ty)] + ay.size[static_cast<std::size_t>(ty)]; ++y) {
        const std::size_t row = vol.offset(0, y, z);
        for (int x = x0; x < x1; ++x) {
          ++hist[static_cast<std::size_t>(
              intensity_bin(vol[row + static_cast<std::size_t>(x)], range_lo, range_hi, params.bins))];
        }
      }
    }
    const std::size_t voxels = static_cast<std::size_t>(ax.size[static_cast<std::size_t>(tx)]) *
                               static_cast<std::size_t>(ay.size[static_cast<std::size_t>(ty)]) *
                               static_cast<std::size_t>(az.size[static_cast<std::size_t>(tz)]);
    const auto clipped = clip_and_redistribute(
        hist, clip_limit_for(voxels, params.clip_fraction), params.max_passes);
    const auto mapping = mapping_from_hist(clipped.counts);
    std::copy(mapping.begin(), mapping.end(),
              grid.mappings.begin() + static_cast<std::ptrdiff_t>(tile * bins));
  });
  return grid;
}

Volume clahe3d(const Volume& vol, const ClaheParams& params) {
  params.validate(vol.dims());
  const auto [lo, hi] = intensity_range(vol);
  if (!(lo < hi)) return vol;

  const TileGrid grid = clahe_tiles(vol, params);
  const Dims& d = vol.dims();
  const auto tx = axis_taps(grid.axes[0], d.nx);
  const auto ty = axis_taps(grid.axes[1], d.ny);
  const auto tz = axis_taps(grid.axes[2], d.nz);
  const double range_lo = lo;
  const double range_hi = hi;
  const auto bins = static_cast<std::size_t>(grid.bins);

  Volume out(d, vol.spacing());
  parallel_for(static_cast<std::size_t>(d.nz), params.threads, [&](std::size_t zi) {
    const auto z = static_cast<int>(zi);
    const Tap& cz = tz[zi];
    for (int y = 0; y < d.ny; ++y) {
      const Tap& cy = ty[static_cast<std::size_t>(y)];
      const double* m00 = grid.mappings.data() + grid.tile_index(0, cy.t0, cz.t0) * bins;
      const double* m01 = grid.mappings.data() + grid.tile_index(0, cy.t1, cz.t0) * bins;
      const double* m10 = grid.mappings.data() + grid.tile_index(0, cy.t0, cz.t1) * bins;
      const double* m11 = grid.mappings.data() + grid.tile_index(0, cy.t1, cz.t1) * bins;
      std::size_t o = vol.offset(0, y, z);
      for (int x = 0; x < d.nx; ++x, ++o) {
        const Tap& cx = tx[static_cast<std::size_t>(x)];
        const auto b = static_cast<std::size_t>(intensity_bin(vol[o], range_lo, range_hi, grid.bins));
        const std::size_t a0 = static_cast<std::size_t>(cx.t0) * bins + b;
        const std::size_t a1 = static_cast<std::size_t>(cx.t1) * bins + b;
        const double v00 = m00[a0] + cx.w * (m00[a1] - m00[a0]);
        const double v01 = m01[a0] + cx.w * (m01[a1] - m01[a0]);
        const double v10 = m10[a0] + cx.w * (m10[a1] - m10[a0]);
        const double v11 = m11[a0] + cx.w * (m11[a1] - m11[a0]);
        const double v0 = v00 + cy.w * (v01 - v00);
        const double v1 = v10 + cy.w * (v11 - v10);
        const double m = v0 + cz.w * (v1 - v0);
        const double mapped = std::clamp(range_lo + m * (range_hi - range_lo), range_lo, range_hi);
        out[o] = static_cast<float>(mapped);
      }
    }
  });
  return out;
}

}  // namespace atriaseg
