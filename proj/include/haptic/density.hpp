#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>

#include "haptic/error.hpp"
#include "haptic/geometry.hpp"
#include "haptic/lattice.hpp"

namespace haptic {

/// Parameters of the adaptive proxy radius r = clamp(beta * b, r1, r2).
struct DensityConfig {
  double beta = 2.5;
  double r1 = 1.5 / 300.0;
  double r2 = 10.0 / 300.0;
  int neighborhood_k = 32;
  /// Proxy travel that triggers a fresh estimate.
  double recompute_threshold = 0.5 / 300.0;

  static DensityConfig for_spacing(double spacing) {
    DensityConfig c;
    c.r1 = 1.5 * spacing;
    c.r2 = 10.0 * spacing;
    c.recompute_threshold = 0.5 * spacing;
    return c;
  }

  /// Neighbors farther than this from the proxy never enter the estimate.
  double search_radius() const { return 2.0 * r2; }

  void validate() const {
    if (!(r1 > 0.0) || !(r2 > r1)) throw ConfigError("density radii must satisfy 0 < r1 < r2");
    if (!(beta > 0.0)) throw ConfigError("density beta must be > 0");
    if (neighborhood_k < 2) throw ConfigError("density neighborhood_k must be >= 2");
    if (!(recompute_threshold >= 0.0)) throw ConfigError("density recompute threshold must be >= 0");
  }

  friend bool operator==(const DensityConfig&, const DensityConfig&) = default;
};

struct ScatterEstimate {
  double sigma_hat = 0.0;
  std::size_t n = 0;
};

/// sqrt of the mean per-axis (population) variance about the centroid.
/// Single pass, Welford update. Returns nothing for fewer than two points.
inline std::optional<ScatterEstimate> scatter_of(std::span<const Point3> points) {
  if (points.size() < 2) return std::nullopt;
  Vec3 mean{};
  Vec3 m2{};
  std::size_t n = 0;
  for (const auto& p : points) {
    ++n;
    const Vec3 d = p - mean;
    mean += d / static_cast<double>(n);
    const Vec3 d2 = p - mean;
    m2 += Vec3{d.x * d2.x, d.y * d2.y, d.z * d2.z};
  }
  const double var = (m2.x + m2.y + m2.z) / (3.0 * static_cast<double>(n));
  return ScatterEstimate{std::sqrt(std::max(var, 0.0)), n};
}

/// Scatter of the `k` active means nearest to `center` within `max_distance`.
inline std::optional<ScatterEstimate> local_std_dev(const VoxelLattice& lattice, const Point3& center,
                                                    int k, double max_distance) {
  if (k < 2) throw ConfigError("neighborhood size must be >= 2");
  const auto neighbors = nearest_means(lattice, center, static_cast<std::size_t>(k), max_distance);
  return scatter_of(neighbors);
}

/// Normal-reference (Silverman) bandwidth for a Gaussian kernel.
inline double bandwidth(double sigma_hat, std::size_t n) {
  return 1.06 * sigma_hat * std::pow(static_cast<double>(n), -0.2);
}

inline double adaptive_radius(double b, const DensityConfig& config) {
  return std::clamp(config.beta * b, config.r1, config.r2);
}

inline double gaussian_kernel(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

/// Univariate Gaussian KDE evaluated at `x`. Diagnostic only; never on the
/// haptic path.
inline double kernel_density(double x, std::span<const double> samples, double b) {
  if (!(b > 0.0)) throw GeometryError("kernel bandwidth must be > 0");
  if (samples.empty()) throw GeometryError("kernel density needs samples");
  double sum = 0.0;
  for (double xi : samples) sum += gaussian_kernel((x - xi) / b);
  return sum / (static_cast<double>(samples.size()) * b);
}

}  // namespace haptic
