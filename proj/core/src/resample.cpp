#include "atriaseg/resample.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace atriaseg {
namespace {

struct LinearTap {
  int i0;
  int i1;
  double w;
};

std::vector<LinearTap> linear_taps(int n_out, int n_src, double scale) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(n_out));
  for (int t = 0; t < n_out; ++t) {
    const double s = std::clamp((t + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, n_src - 1);
    taps[static_cast<std::size_t>(t)] = {i0, i1, s - i0};
  }
  return taps;
}

std::vector<int> nearest_taps(int n_out, int n_src, double scale) {
  std::vector<int> taps(static_cast<std::size_t>(n_out));
  for (int t = 0; t < n_out; ++t) {
    const double s = (t + 0.5) * scale - 0.5;
    const auto r = static_cast<int>(std::floor(s + 0.5));
    taps[static_cast<std::size_t>(t)] = std::clamp(r, 0, n_src - 1);
  }
  return taps;
}

LabelMap gather(const LabelMap& src, Dims out_dims, Spacing out_spacing,
                const std::array<std::vector<int>, 3>& taps) {
  LabelMap out(out_dims, out_spacing);
  std::size_t o = 0;
  for (int z = 0; z < out_dims.nz; ++z) {
    for (int y = 0; y < out_dims.ny; ++y) {
      const std::size_t row = src.offset(0, taps[1][static_cast<std::size_t>(y)],
                                         taps[2][static_cast<std::size_t>(z)]);
      for (int x = 0; x < out_dims.nx; ++x) {
        out[o++] = src[row + static_cast<std::size_t>(taps[0][static_cast<std::size_t>(x)])];
      }
    }
  }
  return out;
}

Spacing scaled(const Spacing& s, Factors f) { return {s.dx * f.fx, s.dy * f.fy, s.dz * f.fz}; }

}  // namespace

Dims downsampled_dims(Dims src, Factors f) {
  static constexpr const char* kAxis[] = {"x", "y", "z"};
  for (int axis = 0; axis < 3; ++axis) {
    if (f[axis] < 1) {
      throw ConfigError(std::string("downsample factor along ") + kAxis[axis] + " must be >= 1");
    }
    if (f[axis] > src[axis]) {
      throw ConfigError(std::string("downsample factor along ") + kAxis[axis] + " (" +
                        std::to_string(f[axis]) + ") exceeds dimension " +
                        std::to_string(src[axis]));
    }
  }
  return {src.nx / f.fx, src.ny / f.fy, src.nz / f.fz};
}

Volume downsample_linear(const Volume& vol, Factors f) {
  const Dims out_dims = downsampled_dims(vol.dims(), f);
  const auto tx = linear_taps(out_dims.nx, vol.dims().nx, f.fx);
  const auto ty = linear_taps(out_dims.ny, vol.dims().ny, f.fy);
  const auto tz = linear_taps(out_dims.nz, vol.dims().nz, f.fz);

  Volume out(out_dims, scaled(vol.spacing(), f));
  std::size_t o = 0;
  for (const auto& cz : tz) {
    for (const auto& cy : ty) {
      const std::size_t r00 = vol.offset(0, cy.i0, cz.i0);
      const std::size_t r01 = vol.offset(0, cy.i1, cz.i0);
      const std::size_t r10 = vol.offset(0, cy.i0, cz.i1);
      const std::size_t r11 = vol.offset(0, cy.i1, cz.i1);
      for (const auto& cx : tx) {
        auto lerp_x = [&](std::size_t row) {
          const double a = vol[row + static_cast<std::size_t>(cx.i0)];
          const double b = vol[row + static_cast<std::size_t>(cx.i1)];
          return a + cx.w * (b - a);
        };
        const double c0 = lerp_x(r00) + cy.w * (lerp_x(r01) - lerp_x(r00));
        const double c1 = lerp_x(r10) + cy.w * (lerp_x(r11) - lerp_x(r10));
        out[o++] = static_cast<float>(c0 + cz.w * (c1 - c0));
      }
    }
  }
  return out;
}

LabelMap downsample_nearest(const LabelMap& labels, Factors f) {
  const Dims out_dims = downsampled_dims(labels.dims(), f);
  return gather(labels, out_dims, scaled(labels.spacing(), f),
                {nearest_taps(out_dims.nx, labels.dims().nx, f.fx),
                 nearest_taps(out_dims.ny, labels.dims().ny, f.fy),
                 nearest_taps(out_dims.nz, labels.dims().nz, f.fz)});
}

LabelMap upsample_nearest(const LabelMap& labels, Dims target, Spacing target_spacing) {
  if (!target.valid()) throw ConfigError("upsample target dims must be >= 1");
  if (!target_spacing.valid()) throw ConfigError("upsample target spacing must be > 0");
  const Spacing& src = labels.spacing();
  return gather(labels, target, target_spacing,
                {nearest_taps(target.nx, labels.dims().nx, target_spacing.dx / src.dx),
                 nearest_taps(target.ny, labels.dims().ny, target_spacing.dy / src.dy),
                 nearest_taps(target.nz, labels.dims().nz, target_spacing.dz / src.dz)});
}

}  // namespace atriaseg
