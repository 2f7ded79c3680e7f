#include "atriaseg/distance.hpp"

#include <cmath>

namespace atriaseg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-dimensional squared-distance lower envelope over a strided line.
// f[q] holds the squared distance carried in from earlier axes; feat[q] the
// site that produced it. Results overwrite both.
class Envelope {
 public:
  explicit Envelope(int n)
      : f_(static_cast<std::size_t>(n)),
        feat_(static_cast<std::size_t>(n)),
        v_(static_cast<std::size_t>(n)),
        z_(static_cast<std::size_t>(n) + 1) {}

  void run(double* f, std::int64_t* feat, int n, std::size_t stride, double spacing) {
    for (int q = 0; q < n; ++q) {
      f_[static_cast<std::size_t>(q)] = f[static_cast<std::size_t>(q) * stride];
      feat_[static_cast<std::size_t>(q)] = feat[static_cast<std::size_t>(q) * stride];
    }
    const double s2 = spacing * spacing;
    int k = -1;
    for (int q = 0; q < n; ++q) {
      const double fq = f_[static_cast<std::size_t>(q)];
      if (fq == kInf) continue;
      if (k < 0) {
        k = 0;
        v_[0] = q;
        z_[0] = -kInf;
        z_[1] = kInf;
        continue;
      }
      auto intersect = [&](int p) {
        const double fp = f_[static_cast<std::size_t>(p)];
        return ((fq - fp) / s2 + (static_cast<double>(q) * q - static_cast<double>(p) * p)) /
               (2.0 * (q - p));
      };
      // z_[0] is -inf, so the scan always stops at k == 0.
      double s = intersect(v_[static_cast<std::size_t>(k)]);
      while (s <= z_[static_cast<std::size_t>(k)]) {
        --k;
        s = intersect(v_[static_cast<std::size_t>(k)]);
      }
      ++k;
      v_[static_cast<std::size_t>(k)] = q;
      z_[static_cast<std::size_t>(k)] = s;
      z_[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) return;  // no sites on this line: leave +inf
    int j = 0;
    for (int q = 0; q < n; ++q) {
      while (z_[static_cast<std::size_t>(j) + 1] < q) ++j;
      const int p = v_[static_cast<std::size_t>(j)];
      const double dq = (q - p) * spacing;
      f[static_cast<std::size_t>(q) * stride] = dq * dq + f_[static_cast<std::size_t>(p)];
      feat[static_cast<std::size_t>(q) * stride] = feat_[static_cast<std::size_t>(p)];
    }
  }

 private:
  std::vector<double> f_;
  std::vector<std::int64_t> feat_;
  std::vector<int> v_;
  std::vector<double> z_;
};

}  // namespace

DistanceField distance_transform(Dims dims, Spacing spacing, std::span<const std::uint8_t> sites) {
  if (sites.size() != dims.count()) throw GeometryError("distance_transform: site mask size mismatch");
  DistanceField out;
  out.dims = dims;
  out.spacing = spacing;
  const std::size_t n = dims.count();
  std::vector<double> sq(n);
  out.nearest.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (sites[i] != 0) {
      sq[i] = 0.0;
      out.nearest[i] = static_cast<std::int64_t>(i);
    } else {
      sq[i] = kInf;
    }
  }

  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(dims.nx);
  const std::size_t sz = sy * static_cast<std::size_t>(dims.ny);

  {
    Envelope env(dims.nx);
    for (int z = 0; z < dims.nz; ++z) {
      for (int y = 0; y < dims.ny; ++y) {
        const std::size_t base = flatten(dims, 0, y, z);
        env.run(sq.data() + base, out.nearest.data() + base, dims.nx, sx, spacing.dx);
      }
    }
  }
  {
    Envelope env(dims.ny);
    for (int z = 0; z < dims.nz; ++z) {
      for (int x = 0; x < dims.nx; ++x) {
        const std::size_t base = flatten(dims, x, 0, z);
        env.run(sq.data() + base, out.nearest.data() + base, dims.ny, sy, spacing.dy);
      }
    }
  }
  {
    Envelope env(dims.nz);
    for (int y = 0; y < dims.ny; ++y) {
      for (int x = 0; x < dims.nx; ++x) {
        const std::size_t base = flatten(dims, x, y, 0);
        env.run(sq.data() + base, out.nearest.data() + base, dims.nz, sz, spacing.dz);
      }
    }
  }

  out.distance_mm.assign(n, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t site = out.nearest[i];
    if (site < 0) continue;
    const Index3 a = unflatten(dims, i);
    const Index3 b = unflatten(dims, static_cast<std::size_t>(site));
    out.distance_mm[i] = displacement_mm(a.x - b.x, a.y - b.y, a.z - b.z, spacing);
  }
  return out;
}

}  // namespace atriaseg
