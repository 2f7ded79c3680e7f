#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atriaseg/volume.hpp"

namespace atriaseg {

/// Face connectivity; the only neighbourhood the post-processing uses.
inline constexpr int kConnectivity = 6;

struct Components {
  Dims dims{};
  /// Per-voxel component id, 0 for background. Ids start at 1 and are
  /// numbered by first appearance in x-fastest scan order.
  std::vector<std::uint32_t> ids;
  /// sizes[id - 1] is the voxel count of component `id`.
  std::vector<std::size_t> sizes;

  std::size_t count() const { return sizes.size(); }
};

/// 6-connected components of the nonzero voxels of `mask`.
Components label_components(const LabelMap& mask);

/// 6-connected components of the voxels equal to `cls`.
Components label_components(const LabelMap& labels, std::uint8_t cls);

/// Sets every voxel of `cls` outside its largest component to background.
/// Ties go to the lowest component id.
LabelMap keep_largest_component(const LabelMap& labels, std::uint8_t cls);

/// Greyscale hole filling: morphological reconstruction by erosion from a
/// marker equal to the input on the grid border and the input maximum
/// elsewhere. Every voxel ends at the lowest value over which it can be
/// reached from the border, so enclosed basins rise to their spill level.
LabelMap fill_holes_greyscale(const LabelMap& labels);

/// keep_largest_component for each class in `class_order`, then one
/// fill_holes_greyscale.
LabelMap postprocess(const LabelMap& labels, std::span<const std::uint8_t> class_order);

}  // namespace atriaseg
