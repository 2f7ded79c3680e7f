#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "atriaseg/error.hpp"

namespace atriaseg {

/// Millimetres per voxel along x, y, z.
struct Spacing {
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;

  bool valid() const;
  double operator[](int axis) const { return axis == 0 ? dx : axis == 1 ? dy : dz; }
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Voxel counts along x, y, z.
struct Dims {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  bool valid() const { return nx >= 1 && ny >= 1 && nz >= 1; }
  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  int operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Signed voxel index triple.
struct Index3 {
  int x = 0;
  int y = 0;
  int z = 0;

  int operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  friend bool operator==(const Index3&, const Index3&) = default;
};

/// Linear offset of (x, y, z) with x fastest and z slowest.
inline std::size_t flatten(const Dims& d, int x, int y, int z) {
  return (static_cast<std::size_t>(z) * static_cast<std::size_t>(d.ny) +
          static_cast<std::size_t>(y)) *
             static_cast<std::size_t>(d.nx) +
         static_cast<std::size_t>(x);
}

inline Index3 unflatten(const Dims& d, std::size_t off) {
  const auto nx = static_cast<std::size_t>(d.nx);
  const auto ny = static_cast<std::size_t>(d.ny);
  return {static_cast<int>(off % nx), static_cast<int>((off / nx) % ny),
          static_cast<int>(off / (nx * ny))};
}

/// Spacings compare equal up to a relative 1e-5, which absorbs float32
/// header round trips.
bool same_spacing(const Spacing& a, const Spacing& b);

/// Dense 3D grid in one contiguous buffer, x fastest and z slowest:
/// offset(x, y, z) = (z * ny + y) * nx + x.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(Dims dims, Spacing spacing, T fill = T{}) : dims_(dims), spacing_(spacing) {
    validate_geometry(dims, spacing);
    data_.assign(dims.count(), fill);
  }
  Grid(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_geometry(dims, spacing);
    if (data_.size() != dims.count()) {
      throw GeometryError("grid payload has " + std::to_string(data_.size()) +
                          " voxels, dims require " + std::to_string(dims.count()));
    }
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  std::size_t offset(int x, int y, int z) const { return flatten(dims_, x, y, z); }
  std::size_t offset(Index3 i) const { return offset(i.x, i.y, i.z); }

  Index3 index(std::size_t off) const { return unflatten(dims_, off); }

  bool contains(Index3 i) const {
    return i.x >= 0 && i.y >= 0 && i.z >= 0 && i.x < dims_.nx && i.y < dims_.ny &&
           i.z < dims_.nz;
  }

  const T& at(int x, int y, int z) const { return data_[offset(x, y, z)]; }
  T& at(int x, int y, int z) { return data_[offset(x, y, z)]; }

  template <typename U>
  bool same_geometry(const Grid<U>& other) const {
    return dims_ == other.dims() && same_spacing(spacing_, other.spacing());
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static void validate_geometry(const Dims& dims, const Spacing& spacing);

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_ = std::vector<T>(1);
};

extern template class Grid<float>;
extern template class Grid<std::uint8_t>;
extern template class Grid<std::uint32_t>;

using Volume = Grid<float>;
using LabelMap = Grid<std::uint8_t>;

Volume make_volume(Dims dims, Spacing spacing, float fill);

struct IntensityRange {
  float min = 0.0f;
  float max = 0.0f;
};

IntensityRange intensity_range(const Volume& vol);

/// Throws GeometryError naming `what` when the two grids differ in dims or
/// spacing.
template <typename A, typename B>
void require_same_geometry(const Grid<A>& a, const Grid<B>& b, std::string_view what) {
  if (!a.same_geometry(b)) {
    throw GeometryError(std::string(what) + ": grid geometry mismatch");
  }
}

}  // namespace atriaseg
