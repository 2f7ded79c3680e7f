#include "atriaseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace atriaseg {

bool Spacing::valid() const {
  return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dz) && dx > 0.0 &&
         dy > 0.0 && dz > 0.0;
}

bool same_spacing(const Spacing& a, const Spacing& b) {
  auto close = [](double p, double q) {
    return std::abs(p - q) <= 1e-5 * std::max(std::abs(p), std::abs(q));
  };
  return close(a.dx, b.dx) && close(a.dy, b.dy) && close(a.dz, b.dz);
}

template <typename T>
void Grid<T>::validate_geometry(const Dims& dims, const Spacing& spacing) {
  if (!dims.valid()) {
    throw GeometryError("dims must be >= 1 on every axis, got " + std::to_string(dims.nx) +
                        "x" + std::to_string(dims.ny) + "x" + std::to_string(dims.nz));
  }
  if (!spacing.valid()) {
    throw GeometryError("spacing must be finite and > 0 on every axis");
  }
}

template class Grid<float>;
template class Grid<std::uint8_t>;
template class Grid<std::uint32_t>;

Volume make_volume(Dims dims, Spacing spacing, float fill) {
  return Volume(dims, spacing, fill);
}

IntensityRange intensity_range(const Volume& vol) {
  const auto [lo, hi] = std::minmax_element(vol.data().begin(), vol.data().end());
  return {*lo, *hi};
}

}  // namespace atriaseg
