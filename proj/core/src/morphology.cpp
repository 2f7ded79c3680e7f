#include "atriaseg/morphology.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace atriaseg {
namespace {

class DisjointSet {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

// Two-pass union-find labelling over the voxels where in(v) holds.
template <typename Pred>
Components label_where(const LabelMap& labels, Pred&& in) {
  const Dims& d = labels.dims();
  Components out;
  out.dims = d;
  out.ids.assign(labels.size(), 0);
  if (labels.size() == 0) return out;

  constexpr std::uint32_t kNone = 0xFFFFFFFFu;
  std::vector<std::uint32_t> prov(labels.size(), kNone);
  DisjointSet sets;
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(d.nx);
  const std::size_t sz = sy * static_cast<std::size_t>(d.ny);

  std::size_t i = 0;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x, ++i) {
        if (!in(labels[i])) continue;
        std::uint32_t p = kNone;
        auto join = [&](std::size_t j) {
          if (prov[j] == kNone) return;
          if (p == kNone) {
            p = prov[j];
          } else {
            sets.unite(p, prov[j]);
          }
        };
        if (x > 0) join(i - sx);
        if (y > 0) join(i - sy);
        if (z > 0) join(i - sz);
        prov[i] = p == kNone ? sets.make() : p;
      }
    }
  }

  // Renumber roots by first appearance in scan order.
  std::vector<std::uint32_t> final_id(sets.size(), 0);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (prov[v] == kNone) continue;
    const std::uint32_t root = sets.find(prov[v]);
    if (final_id[root] == 0) {
      out.sizes.push_back(0);
      final_id[root] = static_cast<std::uint32_t>(out.sizes.size());
    }
    const std::uint32_t id = final_id[root];
    out.ids[v] = id;
    ++out.sizes[id - 1];
  }
  return out;
}

}  // namespace

Components label_components(const LabelMap& mask) {
  return label_where(mask, [](std::uint8_t v) { return v != 0; });
}

Components label_components(const LabelMap& labels, std::uint8_t cls) {
  return label_where(labels, [cls](std::uint8_t v) { return v == cls; });
}

LabelMap keep_largest_component(const LabelMap& labels, std::uint8_t cls) {
  const Components comps = label_components(labels, cls);
  if (comps.count() <= 1) return labels;
  const auto largest = static_cast<std::uint32_t>(
      std::max_element(comps.sizes.begin(), comps.sizes.end()) - comps.sizes.begin() + 1);
  LabelMap out = labels;
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (comps.ids[v] != 0 && comps.ids[v] != largest) out[v] = 0;
  }
  return out;
}

LabelMap fill_holes_greyscale(const LabelMap& labels) {
  // Priority flood from the border: a voxel's result is the minimum over
  // border paths of the maximum input along the path. Levels are processed
  // in increasing order with one bucket per value.
  const Dims& d = labels.dims();
  LabelMap out(d, labels.spacing(), 0);
  std::vector<std::uint8_t> seen(labels.size(), 0);
  std::array<std::vector<std::uint32_t>, 256> buckets;

  auto push = [&](std::size_t v, std::uint8_t level) {
    seen[v] = 1;
    out[v] = level;
    buckets[level].push_back(static_cast<std::uint32_t>(v));
  };

  std::size_t i = 0;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x, ++i) {
        const bool border = x == 0 || y == 0 || z == 0 || x == d.nx - 1 || y == d.ny - 1 ||
                            z == d.nz - 1;
        if (border) push(i, labels[i]);
      }
    }
  }

  const std::size_t sy = static_cast<std::size_t>(d.nx);
  const std::size_t sz = sy * static_cast<std::size_t>(d.ny);
  for (int level = 0; level < 256; ++level) {
    auto& bucket = buckets[static_cast<std::size_t>(level)];
    for (std::size_t k = 0; k < bucket.size(); ++k) {
      const std::size_t v = bucket[k];
      const Index3 p = labels.index(v);
      auto visit = [&](std::size_t n) {
        if (seen[n]) return;
        push(n, std::max(labels[n], static_cast<std::uint8_t>(level)));
      };
      if (p.x > 0) visit(v - 1);
      if (p.x + 1 < d.nx) visit(v + 1);
      if (p.y > 0) visit(v - sy);
      if (p.y + 1 < d.ny) visit(v + sy);
      if (p.z > 0) visit(v - sz);
      if (p.z + 1 < d.nz) visit(v + sz);
    }
    bucket.clear();
    bucket.shrink_to_fit();
  }
  return out;
}

LabelMap postprocess(const LabelMap& labels, std::span<const std::uint8_t> class_order) {
  LabelMap out = labels;
  for (const std::uint8_t cls : class_order) out = keep_largest_component(out, cls);
  return fill_holes_greyscale(out);
}

}  // namespace atriaseg
