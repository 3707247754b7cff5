#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "haptic/cloud.hpp"
#include "haptic/error.hpp"
#include "haptic/geometry.hpp"
#include "haptic/trace.hpp"

namespace haptic {

struct SphereSpec {
  Point3 center{};
  double radius = 0.025;
  std::size_t sample_count = 50000;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("sphere radius must be > 0");
    if (sample_count < 100) throw ConfigError("sphere needs at least 100 samples");
    if (!is_finite(center)) throw ConfigError("sphere center must be finite");
  }
};

namespace detail {
/// Uniform in [0, 1) from the top 53 bits; independent of the standard
/// library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
}  // namespace detail

/// Fibonacci-spiral samples on the sphere surface, rotated by a seeded random
/// rotation. Same spec, same cloud.
inline PointCloud synth_sphere_cloud(const SphereSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  // Random unit quaternion (Shoemake).
  const double u1 = detail::unit_uniform(rng), u2 = detail::unit_uniform(rng),
               u3 = detail::unit_uniform(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double qw = a * std::sin(2.0 * std::numbers::pi * u2), qx = a * std::cos(2.0 * std::numbers::pi * u2);
  const double qy = b * std::sin(2.0 * std::numbers::pi * u3), qz = b * std::cos(2.0 * std::numbers::pi * u3);
  Mat3 rot;
  rot.m[0] = {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw)};
  rot.m[1] = {2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw)};
  rot.m[2] = {2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy)};

  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const auto n = static_cast<double>(spec.sample_count);
  std::vector<Point3> points;
  points.reserve(spec.sample_count);
  for (std::size_t i = 0; i < spec.sample_count; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    Vec3 u = rot * Vec3{r * std::cos(phi), r * std::sin(phi), z};
    u = u / norm(u);
    points.push_back(spec.center + u * spec.radius);
  }
  return PointCloud(std::move(points));
}

/// Closed-form penalty force for a HIP inside the analytic sphere:
/// K (R - d) along the outward radial direction; zero outside. Nothing when
/// the HIP sits exactly at the center.
inline std::optional<Vec3> ideal_sphere_force(const Point3& hip, const SphereSpec& spec, double stiffness) {
  const Vec3 radial = hip - spec.center;
  const double d = norm(radial);
  if (d >= spec.radius) return Vec3{};
  if (d < 1e-15) return std::nullopt;
  return radial * (stiffness * (spec.radius - d) / d);
}

struct TraceComparison {
  double rms_rel_err = 0.0;
  double max_rel_err = 0.0;
  std::size_t ticks_compared = 0;
};

/// Relative force error |rendered - ideal| / |ideal| over ticks whose ideal
/// magnitude exceeds `threshold_fraction` of the largest ideal magnitude in
/// the trace. Throws NoContactError when no tick qualifies.
inline TraceComparison compare_traces(std::span<const Snapshot> rendered, const SphereSpec& spec,
                                      double stiffness, double threshold_fraction = 0.01) {
  std::vector<Vec3> ideal(rendered.size());
  double peak = 0.0;
  for (std::size_t n = 0; n < rendered.size(); ++n) {
    ideal[n] = ideal_sphere_force(rendered[n].hip, spec, stiffness).value_or(Vec3{});
    peak = std::max(peak, norm(ideal[n]));
  }
  TraceComparison out;
  if (!(peak > 0.0)) throw NoContactError();
  const double cutoff = threshold_fraction * peak;
  double sum_sq = 0.0;
  for (std::size_t n = 0; n < rendered.size(); ++n) {
    const double mag = norm(ideal[n]);
    if (!(mag > cutoff)) continue;
    const double rel = norm(rendered[n].force - ideal[n]) / mag;
    sum_sq += rel * rel;
    out.max_rel_err = std::max(out.max_rel_err, rel);
    ++out.ticks_compared;
  }
  if (out.ticks_compared == 0) throw NoContactError();
  out.rms_rel_err = std::sqrt(sum_sq / static_cast<double>(out.ticks_compared));
  return out;
}

}  // namespace haptic
