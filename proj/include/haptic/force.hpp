#pragma once

#include <algorithm>
#include <cmath>

#include "haptic/error.hpp"
#include "haptic/geometry.hpp"

namespace haptic {

struct ForceParams {
  double stiffness = 300.0;  // N/m

  void validate() const {
    if (!(stiffness > 0.0) || !std::isfinite(stiffness)) throw ConfigError("stiffness must be > 0");
  }
  friend bool operator==(const ForceParams&, const ForceParams&) = default;
};

struct FrictionParams {
  double mu_s = 0.0;
  double mu_d = 0.0;
  bool enabled = false;

  void validate() const {
    if (!(mu_d >= 0.0) || !(mu_s >= mu_d) || !std::isfinite(mu_s))
      throw ConfigError("friction coefficients must satisfy 0 <= mu_d <= mu_s");
  }
  friend bool operator==(const FrictionParams&, const FrictionParams&) = default;
};

struct ForceSample {
  Vec3 force{};
  Vec3 depth{};
  double friction_scale = 1.0;
  bool stuck = false;
};

/// (|v_h| - r_p) along v_h once the HIP is farther than one proxy radius
/// from the proxy center, zero otherwise.
inline Vec3 penetration_depth(const Vec3& v_h, double r_p) {
  const double len = norm(v_h);
  if (!(len >= r_p) || len == 0.0) return {};
  return v_h * ((len - r_p) / len);
}

inline Vec3 reaction_force(const Vec3& depth, const ForceParams& params) {
  return depth * -params.stiffness;
}

struct FrictionScale {
  double scale = 1.0;
  bool stuck = false;
};

/// Coulomb friction folded into the tangential step size.
///
/// alpha is the angle between the spring force K*v_h and the inward surface
/// normal -n_hat. Static hold when |f_t| < mu_s |f_n|; otherwise the step is
/// scaled by 1 - mu_d cot(alpha), clamped to [0, 1] so friction can slow the
/// proxy but never reverse it.
inline FrictionScale compute_friction_scale(const Vec3& v_h, const Vec3& n_hat,
                                            const FrictionParams& params, double stiffness) {
  if (!params.enabled) return {1.0, false};
  const Vec3 f_h = v_h * stiffness;
  const double f_mag = norm(f_h);
  if (f_mag == 0.0) return {0.0, true};
  const double f_n = dot(f_h, -n_hat);  // |f_h| cos(alpha)
  const double f_t = norm(f_h + n_hat * f_n);  // |f_h| sin(alpha)
  constexpr double kParallel = 1e-12;
  if (f_t <= kParallel * f_mag) return {0.0, true};
  if (f_t < params.mu_s * f_n) return {0.0, true};
  const double cot_alpha = std::max(f_n, 0.0) / f_t;
  return {std::clamp(1.0 - params.mu_d * cot_alpha, 0.0, 1.0), false};
}

}  // namespace haptic
