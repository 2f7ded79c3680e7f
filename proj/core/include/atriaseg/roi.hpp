#pragma once

#include "atriaseg/resample.hpp"
#include "atriaseg/volume.hpp"

namespace atriaseg {

struct RoiParams {
  Dims box{320, 320, 44};
  Factors factors{4, 4, 2};

  void validate() const;
};

/// Axis-aligned box in a source grid. The origin may be negative and the box
/// may overrun the grid; those voxels read as padding.
struct CropBox {
  Index3 origin{};
  Dims size{};

  bool overlaps(Dims grid) const;
  friend bool operator==(const CropBox&, const CropBox&) = default;
};

/// 1 wherever the input is nonzero.
LabelMap binarize(const LabelMap& labels);

/// Mean foreground index per axis, rounded half-up. Throws EmptyMaskError
/// when the mask has no foreground.
Index3 centroid(const LabelMap& mask);

/// Centre voxel of a grid, (n - 1) / 2 rounded half-up per axis.
Index3 geometric_center(Dims dims);

/// Maps a centroid on the downsampled grid to the full grid as
/// floor(c * f + (f - 1) / 2) and centres a params.box sized box on it.
CropBox crop_box_from_coarse_centroid(Index3 coarse, const RoiParams& params, Dims full);

/// Extracts `box`, filling voxels outside the source with 0. Throws
/// GeometryError if the box misses the grid entirely.
Volume crop_with_padding(const Volume& vol, const CropBox& box);
LabelMap crop_with_padding(const LabelMap& labels, const CropBox& box);

/// Inverse of crop_with_padding: places `cropped` at `box` in an all
/// background grid of `full` dims. Padding voxels are discarded.
LabelMap paste_back(const LabelMap& cropped, const CropBox& box, Dims full, Spacing full_spacing);

}  // namespace atriaseg
