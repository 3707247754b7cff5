#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "haptic/config.hpp"
#include "haptic/lattice.hpp"

namespace haptic::test {

/// Lattice whose voxel centers sit on multiples of `spacing`, `cells` voxels per
/// axis, centered on the origin.
inline LatticeConfig centered_lattice(double spacing, int cells = 200) {
  LatticeConfig c;
  c.dims = {cells, cells, cells};
  c.spacing = spacing;
  const double h = (cells / 2 + 0.5) * spacing;
  c.origin = {-h, -h, -h};
  return c;
}

/// Square grid in the plane z = `z`, (2n+1)^2 points.
inline PointCloud grid_plane(double spacing, int n, double z = 0.0) {
  std::vector<Point3> pts;
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j) pts.push_back({i * spacing, j * spacing, z});
  return PointCloud(std::move(pts));
}

inline std::shared_ptr<const VoxelLattice> share(VoxelLattice l) {
  return std::make_shared<const VoxelLattice>(std::move(l));
}

/// Engine config whose proxy radius stays in [0.9 r, r] over a plane of
/// spacing r/4.
inline EngineConfig plane_config(double r, double spacing) {
  EngineConfig cfg;
  cfg.lattice = centered_lattice(spacing);
  cfg.density.r1 = 0.9 * r;
  cfg.density.r2 = r;
  cfg.density.beta = 100.0;
  cfg.density.recompute_threshold = spacing / 2;
  cfg.initial_radius = r;
  return cfg;
}

inline std::vector<Point3> random_points(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point3> out(n);
  for (auto& p : out) p = {u(rng), u(rng), u(rng)};
  return out;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("haptic_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace haptic::test
