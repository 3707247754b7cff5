#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "haptic/cloud.hpp"
#include "haptic/error.hpp"
#include "haptic/geometry.hpp"

namespace haptic {

/// Regular grid of `dims` voxels with edge `spacing`; voxel (0,0,0) has its
/// min corner at `origin`.
struct LatticeConfig {
  std::array<int, 3> dims{300, 300, 300};
  double spacing = 1.0 / 300.0;
  Point3 origin{-0.5, -0.5, -0.5};

  static constexpr int kMaxDim = (1 << 21) - 1;

  void validate() const {
    for (int d : dims)
      if (d < 1 || d > kMaxDim) throw ConfigError("lattice dims must be in [1, 2^21-1]");
    if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ConfigError("lattice spacing must be > 0");
    if (!is_finite(origin)) throw ConfigError("lattice origin must be finite");
  }

  Point3 world_max() const {
    return {origin.x + dims[0] * spacing, origin.y + dims[1] * spacing, origin.z + dims[2] * spacing};
  }
  Bounds world_box() const { return {origin, world_max()}; }

  friend bool operator==(const LatticeConfig&, const LatticeConfig&) = default;
};

struct VoxelIndex {
  int i = 0;
  int j = 0;
  int k = 0;

  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(i) << 42) | (static_cast<std::uint64_t>(j) << 21) |
           static_cast<std::uint64_t>(k);
  }
  friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

struct ActiveVoxel {
  VoxelIndex index;
  Point3 mean;
  std::size_t count = 0;
};

namespace detail {
struct KeyHash {
  std::size_t operator()(std::uint64_t x) const noexcept {
    // splitmix64 finalizer
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return static_cast<std::size_t>(x);
  }
};
}  // namespace detail

/// Sparse set of active voxels, each holding the mean of the points binned
/// into it. Immutable once built; share it freely across threads.
class VoxelLattice {
 public:
  VoxelLattice(LatticeConfig config, std::vector<ActiveVoxel> voxels, std::size_t discarded)
      : config_(config), voxels_(std::move(voxels)), discarded_(discarded) {
    std::sort(voxels_.begin(), voxels_.end(),
              [](const ActiveVoxel& a, const ActiveVoxel& b) { return a.index < b.index; });
    lookup_.reserve(voxels_.size() * 2);
    for (std::size_t n = 0; n < voxels_.size(); ++n)
      lookup_.emplace(voxels_[n].index.key(), static_cast<std::uint32_t>(n));
  }

  const LatticeConfig& config() const { return config_; }
  /// Active voxels in lexicographic index order.
  std::span<const ActiveVoxel> voxels() const { return voxels_; }
  std::size_t size() const { return voxels_.size(); }
  bool empty() const { return voxels_.empty(); }
  std::size_t discarded() const { return discarded_; }

  const ActiveVoxel* find(const VoxelIndex& v) const {
    const auto it = lookup_.find(v.key());
    return it == lookup_.end() ? nullptr : &voxels_[it->second];
  }

  Bounds box_of(const VoxelIndex& v) const { return voxel_box(config_, v); }

  static Bounds voxel_box(const LatticeConfig& c, const VoxelIndex& v) {
    const Point3 lo{c.origin.x + v.i * c.spacing, c.origin.y + v.j * c.spacing,
                    c.origin.z + v.k * c.spacing};
    const Point3 hi{c.origin.x + (v.i + 1) * c.spacing, c.origin.y + (v.j + 1) * c.spacing,
                    c.origin.z + (v.k + 1) * c.spacing};
    return {lo, hi};
  }

  /// Voxel containing `p`, or nothing when `p` lies outside the world box.
  /// Points on a max face fall into the last voxel of that axis.
  static std::optional<VoxelIndex> voxel_of(const LatticeConfig& c, const Point3& p) {
    if (!c.world_box().contains(p)) return std::nullopt;
    auto axis = [&](double v, double o, int dim) {
      const auto i = static_cast<long long>(std::floor((v - o) / c.spacing));
      return static_cast<int>(std::clamp<long long>(i, 0, dim - 1));
    };
    return VoxelIndex{axis(p.x, c.origin.x, c.dims[0]), axis(p.y, c.origin.y, c.dims[1]),
                      axis(p.z, c.origin.z, c.dims[2])};
  }

  /// Calls `fn(const ActiveVoxel&)` for every active voxel whose box overlaps
  /// the axis-aligned box [lo, hi]; visit order is deterministic.
  template <class Fn>
  void for_each_in_box(const Point3& lo, const Point3& hi, Fn&& fn) const {
    if (voxels_.empty()) return;
    constexpr double kEdge = 1e-9;  // voxel units; absorbs rounding at faces
    auto range = [&](double a, double b, double o, int dim, int& first, int& last) {
      const double fa = std::floor((a - o) / config_.spacing - kEdge);
      const double fb = std::floor((b - o) / config_.spacing + kEdge);
      if (fb < 0.0 || fa > dim - 1) return false;
      first = static_cast<int>(std::max(fa, 0.0));
      last = static_cast<int>(std::min(fb, static_cast<double>(dim - 1)));
      return first <= last;
    };
    int i0, i1, j0, j1, k0, k1;
    if (!range(lo.x, hi.x, config_.origin.x, config_.dims[0], i0, i1) ||
        !range(lo.y, hi.y, config_.origin.y, config_.dims[1], j0, j1) ||
        !range(lo.z, hi.z, config_.origin.z, config_.dims[2], k0, k1))
      return;
    const auto cells = static_cast<double>(i1 - i0 + 1) * (j1 - j0 + 1) * (k1 - k0 + 1);
    if (cells > static_cast<double>(voxels_.size())) {
      for (const auto& v : voxels_)
        if (v.index.i >= i0 && v.index.i <= i1 && v.index.j >= j0 && v.index.j <= j1 &&
            v.index.k >= k0 && v.index.k <= k1)
          fn(v);
      return;
    }
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j)
        for (int k = k0; k <= k1; ++k)
          if (const auto* v = find({i, j, k})) fn(*v);
  }

  /// Calls `fn(const Point3&)` for every mean strictly inside the sphere.
  template <class Fn>
  void for_each_mean_in_sphere(const Point3& center, double radius, Fn&& fn) const {
    const Vec3 r{radius, radius, radius};
    const double r2 = radius * radius;
    for_each_in_box(center - r, center + r, [&](const ActiveVoxel& v) {
      if (norm2(v.mean - center) < r2) fn(v.mean);
    });
  }

 private:
  LatticeConfig config_;
  std::vector<ActiveVoxel> voxels_;
  std::unordered_map<std::uint64_t, std::uint32_t, detail::KeyHash> lookup_;
  std::size_t discarded_ = 0;
};

/// Bins every point into its voxel and keeps the per-voxel mean. Points
/// outside the lattice are dropped and counted in `discarded()`.
inline VoxelLattice resample_to_lattice(const PointCloud& cloud, const LatticeConfig& config) {
  config.validate();
  struct Accum {
    VoxelIndex index;
    Vec3 sum;
    std::size_t count = 0;
  };
  std::unordered_map<std::uint64_t, Accum, detail::KeyHash> bins;
  bins.reserve(cloud.size());
  std::size_t discarded = 0;
  for (const auto& p : cloud.points()) {
    const auto idx = VoxelLattice::voxel_of(config, p);
    if (!idx) {
      ++discarded;
      continue;
    }
    auto& a = bins[idx->key()];
    a.index = *idx;
    a.sum += p;
    ++a.count;
  }
  if (bins.empty()) throw EmptyLatticeError();

  std::vector<ActiveVoxel> voxels;
  voxels.reserve(bins.size());
  for (const auto& [key, a] : bins) {
    Point3 mean = a.sum / static_cast<double>(a.count);
    // Rounding in the sum can leave the mean an ulp outside its own box.
    const Bounds box = VoxelLattice::voxel_box(config, a.index);
    mean = {std::clamp(mean.x, box.min.x, box.max.x), std::clamp(mean.y, box.min.y, box.max.y),
            std::clamp(mean.z, box.min.z, box.max.z)};
    voxels.push_back({a.index, mean, a.count});
  }
  return VoxelLattice(config, std::move(voxels), discarded);
}

/// Active-voxel means at distance strictly less than `radius` from `center`.
inline std::vector<Point3> query_points_in_sphere(const VoxelLattice& lattice, const Point3& center,
                                                  double radius) {
  if (!(radius > 0.0)) throw GeometryError("query radius must be > 0");
  std::vector<Point3> out;
  lattice.for_each_mean_in_sphere(center, radius, [&](const Point3& p) { out.push_back(p); });
  return out;
}

inline std::size_t active_voxel_count(const VoxelLattice& lattice) { return lattice.size(); }

/// Up to `k` active-voxel means nearest to `center`, searched by expanding
/// cubic shells of voxels and never farther than `max_distance`. Ties are
/// broken by voxel index so the result is deterministic.
inline std::vector<Point3> nearest_means(const VoxelLattice& lattice, const Point3& center,
                                         std::size_t k, double max_distance) {
  struct Candidate {
    double d2;
    VoxelIndex index;
    Point3 mean;
  };
  std::vector<Candidate> found;
  if (k == 0 || lattice.empty()) return {};
  const auto& c = lattice.config();
  const double s = c.spacing;
  const VoxelIndex home{static_cast<int>(std::floor((center.x - c.origin.x) / s)),
                        static_cast<int>(std::floor((center.y - c.origin.y) / s)),
                        static_cast<int>(std::floor((center.z - c.origin.z) / s))};
  const double max_d2 = max_distance * max_distance;
  const int max_shell = static_cast<int>(std::ceil(max_distance / s)) + 1;

  auto visit = [&](int i, int j, int kk) {
    if (i < 0 || j < 0 || kk < 0 || i >= c.dims[0] || j >= c.dims[1] || kk >= c.dims[2]) return;
    if (const auto* v = lattice.find({i, j, kk})) {
      const double d2 = norm2(v->mean - center);
      if (d2 <= max_d2) found.push_back({d2, v->index, v->mean});
    }
  };
  auto by_distance = [](const Candidate& a, const Candidate& b) {
    return a.d2 != b.d2 ? a.d2 < b.d2 : a.index < b.index;
  };

  for (int shell = 0; shell <= max_shell; ++shell) {
    // Skip shells that cannot intersect the lattice at all.
    const bool outside = home.i + shell < 0 || home.j + shell < 0 || home.k + shell < 0 ||
                         home.i - shell >= c.dims[0] || home.j - shell >= c.dims[1] ||
                         home.k - shell >= c.dims[2];
    if (!outside) {
      for (int di = -shell; di <= shell; ++di)
        for (int dj = -shell; dj <= shell; ++dj) {
          const bool face = std::abs(di) == shell || std::abs(dj) == shell;
          if (face) {
            for (int dk = -shell; dk <= shell; ++dk) visit(home.i + di, home.j + dj, home.k + dk);
          } else {
            visit(home.i + di, home.j + dj, home.k - shell);
            if (shell) visit(home.i + di, home.j + dj, home.k + shell);
          }
        }
    }
    // Anything not yet visited is at least `shell` whole voxels away.
    if (found.size() >= k) {
      std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k - 1), found.end(),
                       by_distance);
      const double settled = shell * s;
      if (found[k - 1].d2 <= settled * settled) break;
    }
  }
  std::sort(found.begin(), found.end(), by_distance);
  if (found.size() > k) found.resize(k);
  std::vector<Point3> out;
  out.reserve(found.size());
  for (const auto& f : found) out.push_back(f.mean);
  return out;
}

/// Deterministic preview: every n-th active mean so at most `limit` remain.
inline std::vector<Point3> decimated_means(const VoxelLattice& lattice, std::size_t limit) {
  std::vector<Point3> out;
  if (limit == 0 || lattice.empty()) return out;
  const std::size_t stride = (lattice.size() + limit - 1) / limit;
  for (std::size_t n = 0; n < lattice.size(); n += stride) out.push_back(lattice.voxels()[n].mean);
  return out;
}

}  // namespace haptic
