#include "atriaseg/roi.hpp"

#include <algorithm>
#include <array>
#include <cstdint>

namespace atriaseg {
namespace {

struct Span1 {
  int lo;  // first in-grid source index
  int hi;  // one past last
};

Span1 overlap(int origin, int size, int n) {
  return {std::max(origin, 0), std::min(origin + size, n)};
}

template <typename T>
Grid<T> crop_impl(const Grid<T>& src, const CropBox& box) {
  if (!box.size.valid()) throw GeometryError("crop box size must be >= 1 on every axis");
  if (!box.overlaps(src.dims())) throw GeometryError("crop box lies entirely outside the grid");
  Grid<T> out(box.size, src.spacing(), T{0});
  const Span1 sx = overlap(box.origin.x, box.size.nx, src.dims().nx);
  const Span1 sy = overlap(box.origin.y, box.size.ny, src.dims().ny);
  const Span1 sz = overlap(box.origin.z, box.size.nz, src.dims().nz);
  for (int z = sz.lo; z < sz.hi; ++z) {
    for (int y = sy.lo; y < sy.hi; ++y) {
      const auto first = src.data().begin() + static_cast<std::ptrdiff_t>(src.offset(sx.lo, y, z));
      std::copy(first, first + (sx.hi - sx.lo),
                out.data().begin() + static_cast<std::ptrdiff_t>(out.offset(
                                         sx.lo - box.origin.x, y - box.origin.y, z - box.origin.z)));
    }
  }
  return out;
}

}  // namespace

void RoiParams::validate() const {
  if (!box.valid()) throw ConfigError("ROI box must be >= 1 on every axis");
  if (factors.fx < 1 || factors.fy < 1 || factors.fz < 1) {
    throw ConfigError("ROI downsample factors must be >= 1");
  }
}

bool CropBox::overlaps(Dims grid) const {
  for (int axis = 0; axis < 3; ++axis) {
    const Span1 s = overlap(origin[axis], size[axis], grid[axis]);
    if (s.lo >= s.hi) return false;
  }
  return true;
}

LabelMap binarize(const LabelMap& labels) {
  LabelMap out(labels.dims(), labels.spacing());
  std::transform(labels.data().begin(), labels.data().end(), out.data().begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v > 0 ? 1 : 0); });
  return out;
}

Index3 centroid(const LabelMap& mask) {
  std::array<std::uint64_t, 3> sum{};
  std::uint64_t count = 0;
  const Dims& d = mask.dims();
  std::size_t i = 0;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x, ++i) {
        if (mask[i] == 0) continue;
        sum[0] += static_cast<std::uint64_t>(x);
        sum[1] += static_cast<std::uint64_t>(y);
        sum[2] += static_cast<std::uint64_t>(z);
        ++count;
      }
    }
  }
  if (count == 0) throw EmptyMaskError("centroid of an empty mask");
  // floor(sum / count + 1/2) in exact integer arithmetic.
  auto round_mean = [count](std::uint64_t s) {
    return static_cast<int>((2 * s + count) / (2 * count));
  };
  return {round_mean(sum[0]), round_mean(sum[1]), round_mean(sum[2])};
}

Index3 geometric_center(Dims dims) { return {dims.nx / 2, dims.ny / 2, dims.nz / 2}; }

CropBox crop_box_from_coarse_centroid(Index3 coarse, const RoiParams& params, Dims full) {
  params.validate();
  CropBox box;
  box.size = params.box;
  std::array<int, 3> origin{};
  for (int axis = 0; axis < 3; ++axis) {
    const int f = params.factors[axis];
    const int c_full = coarse[axis] * f + (f - 1) / 2;
    origin[static_cast<std::size_t>(axis)] = c_full - params.box[axis] / 2;
  }
  box.origin = {origin[0], origin[1], origin[2]};
  if (!box.overlaps(full)) throw GeometryError("crop box derived from centroid misses the grid");
  return box;
}

Volume crop_with_padding(const Volume& vol, const CropBox& box) { return crop_impl(vol, box); }

LabelMap crop_with_padding(const LabelMap& labels, const CropBox& box) {
  return crop_impl(labels, box);
}

LabelMap paste_back(const LabelMap& cropped, const CropBox& box, Dims full, Spacing full_spacing) {
  if (cropped.dims() != box.size) {
    throw GeometryError("paste_back: cropped map dims differ from crop box size");
  }
  LabelMap out(full, full_spacing, 0);
  if (!box.overlaps(full)) return out;
  const Span1 sx = overlap(box.origin.x, box.size.nx, full.nx);
  const Span1 sy = overlap(box.origin.y, box.size.ny, full.ny);
  const Span1 sz = overlap(box.origin.z, box.size.nz, full.nz);
  for (int z = sz.lo; z < sz.hi; ++z) {
    for (int y = sy.lo; y < sy.hi; ++y) {
      const auto first = cropped.data().begin() +
                         static_cast<std::ptrdiff_t>(cropped.offset(
                             sx.lo - box.origin.x, y - box.origin.y, z - box.origin.z));
      std::copy(first, first + (sx.hi - sx.lo),
                out.data().begin() + static_cast<std::ptrdiff_t>(out.offset(sx.lo, y, z)));
    }
  }
  return out;
}

}  // namespace atriaseg
