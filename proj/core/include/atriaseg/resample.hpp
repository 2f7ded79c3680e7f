#pragma once

#include "atriaseg/volume.hpp"

namespace atriaseg {

/// Integer reduction factor per axis.
struct Factors {
  int fx = 1;
  int fy = 1;
  int fz = 1;

  int operator[](int axis) const { return axis == 0 ? fx : axis == 1 ? fy : fz; }
  friend bool operator==(const Factors&, const Factors&) = default;
};

// All resampling uses pixel-centre alignment: output index t along an axis
// maps to source coordinate s = (t + 0.5) * scale - 0.5, clamped to the
// source grid. Output dims of the downsamplers are floor(n / f).

/// Trilinear downsampling. Output spacing is the source spacing times f.
Volume downsample_linear(const Volume& vol, Factors f);

/// Nearest-neighbour downsampling; each output voxel copies the label at
/// round-half-up(s).
LabelMap downsample_nearest(const LabelMap& labels, Factors f);

/// Nearest-neighbour resize to `target`. The per-axis scale is
/// target_spacing / source_spacing, so target == source geometry is the
/// identity.
LabelMap upsample_nearest(const LabelMap& labels, Dims target, Spacing target_spacing);

/// Output dims of a downsample by `f`; throws ConfigError for f < 1 or f > n.
Dims downsampled_dims(Dims src, Factors f);

}  // namespace atriaseg
