#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "atriaseg/volume.hpp"

namespace atriaseg {

struct ClaheParams {
  /// Tiles along x, y, z. Eight per axis gives tiles one eighth of each
  /// dimension.
  std::array<int, 3> tiles{8, 8, 8};
  int bins = 256;
  /// Per-bin cap as a fraction of the tile voxel count.
  double clip_fraction = 0.01;
  int max_passes = 5;
  /// Worker threads; 0 = hardware concurrency. Output does not depend on it.
  int threads = 1;

  /// Throws ConfigError when the parameters do not fit `dims`.
  void validate(Dims dims) const;
};

struct AxisTiling {
  std::vector<int> start;
  std::vector<int> size;
  std::vector<double> center;

  int count() const { return static_cast<int>(start.size()); }
};

/// Tile partition of a grid plus, once filled by clahe_tiles(), one
/// intensity mapping per tile.
struct TileGrid {
  std::array<AxisTiling, 3> axes;
  int bins = 0;
  /// tile_count() tables of `bins` entries in [0, 1], tile x fastest.
  std::vector<double> mappings;

  std::size_t tile_count() const {
    return static_cast<std::size_t>(axes[0].count()) * static_cast<std::size_t>(axes[1].count()) *
           static_cast<std::size_t>(axes[2].count());
  }
  std::size_t tile_index(int tx, int ty, int tz) const {
    return (static_cast<std::size_t>(tz) * static_cast<std::size_t>(axes[1].count()) +
            static_cast<std::size_t>(ty)) *
               static_cast<std::size_t>(axes[0].count()) +
           static_cast<std::size_t>(tx);
  }
  std::span<const double> mapping(std::size_t tile) const {
    return std::span<const double>(mappings).subspan(tile * static_cast<std::size_t>(bins),
                                                     static_cast<std::size_t>(bins));
  }
};

/// Splits each axis into tiles of floor(n / t) voxels, the last tile taking
/// the remainder. Centres sit at tile midpoints. Mappings are left empty.
TileGrid build_tile_grid(Dims dims, const ClaheParams& params);

struct ClippedHistogram {
  std::vector<std::uint64_t> counts;
  /// Mass that found no bin under the limit and was spread over all bins
  /// regardless of it.
  std::uint64_t residual = 0;
};

/// Caps every bin at `clip_limit` and hands the excess back uniformly, only
/// to bins with room, for up to `max_passes` passes. Whatever still remains
/// is spread over all bins ignoring the limit. Total mass is preserved.
ClippedHistogram clip_and_redistribute(std::span<const std::uint64_t> hist,
                                       std::uint64_t clip_limit, int max_passes = 5);

/// Normalised cumulative histogram: mapping[b] = sum(hist[0..b]) / total.
std::vector<double> mapping_from_hist(std::span<const std::uint64_t> hist);

/// max(1, floor(clip_fraction * tile_voxels)).
std::uint64_t clip_limit_for(std::size_t tile_voxels, double clip_fraction);

/// Bin of intensity v over [lo, hi] split into `bins` equal bins.
inline int intensity_bin(float v, double lo, double hi, int bins) {
  const double t = (static_cast<double>(v) - lo) / (hi - lo) * bins;
  const int b = static_cast<int>(t);
  return b < 0 ? 0 : (b >= bins ? bins - 1 : b);
}

/// Tile grid with per-tile clipped-CDF mappings of `vol`, binned over the
/// global intensity range.
TileGrid clahe_tiles(const Volume& vol, const ClaheParams& params);

/// Contrast limited adaptive histogram equalisation. Each voxel maps through
/// the trilinear blend of the mappings of its (up to) eight surrounding tile
/// centres, clamped at the outermost centres, and is rescaled to the input
/// range. Constant volumes are returned unchanged.
Volume clahe3d(const Volume& vol, const ClaheParams& params = {});

}  // namespace atriaseg
