#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string_view>

#include "haptic/error.hpp"
#include "haptic/geometry.hpp"
#include "haptic/lattice.hpp"

namespace haptic {

enum class TangentMode { PaperLiteral, Orthogonalized };

/// When the tangential update applies. Sign: whenever the HIP is behind the
/// sensed surface (v_n . v_h < 0). SignAndZeta: additionally only once
/// |v_n| > zeta; shallower contact falls through to the latch step.
enum class PenetrationRule { Sign, SignAndZeta };

enum class Contact { Free, Surface, Penetrating };

inline std::string_view to_string(Contact c) {
  switch (c) {
    case Contact::Free: return "free";
    case Contact::Surface: return "surface";
    case Contact::Penetrating: return "penetrating";
  }
  return "free";
}

inline std::optional<Contact> contact_from_string(std::string_view s) {
  if (s == "free") return Contact::Free;
  if (s == "surface") return Contact::Surface;
  if (s == "penetrating") return Contact::Penetrating;
  return std::nullopt;
}

struct ProxyParams {
  double k_n = 0.064;        // normal push-out gain
  double k_h = 0.002;        // withdrawal / latch gain toward the HIP
  double delta = 0.000008;   // tangential step gain
  double zeta_factor = 0.05; // contact threshold as a fraction of the radius
  TangentMode tangent_mode = TangentMode::PaperLiteral;
  PenetrationRule penetration_rule = PenetrationRule::Sign;
  double max_step_factor = 0.5;  // per-tick displacement cap, in radii

  double zeta(double radius) const { return zeta_factor * radius; }

  void validate() const {
    auto unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!unit(k_n) || !unit(k_h) || !unit(delta))
      throw ConfigError("proxy gains k_n, k_h, delta must lie in (0, 1)");
    if (!(zeta_factor > 0.0)) throw ConfigError("zeta_factor must be > 0");
    if (!(max_step_factor > 0.0)) throw ConfigError("max_step_factor must be > 0");
  }
  friend bool operator==(const ProxyParams&, const ProxyParams&) = default;
};

struct ProxyState {
  Point3 center{};
  double radius = 0.01;
  Contact contact = Contact::Free;
  Vec3 v_n{};  // sinking normal
  Vec3 v_h{};  // proxy -> HIP
  Vec3 v_t{};  // tangent
  std::optional<Vec3> n_hat;
};

struct Hip {
  Point3 position{};
};

/// Radial overshoot of `p` inside the proxy: (r - |c - p|) (c - p)/|c - p|.
/// Nothing when `p` coincides with the center (direction undefined).
inline std::optional<Vec3> compute_overshoot(const Point3& center, double radius, const Point3& p) {
  const Vec3 d = center - p;
  const double len = norm(d);
  if (len < 1e-12) return std::nullopt;
  return d * ((radius - len) / len);
}

inline Vec3 compute_sinking_normal(const Point3& center, double radius,
                                   std::span<const Point3> enclosed) {
  Vec3 v_n{};
  for (const auto& p : enclosed)
    if (const auto d = compute_overshoot(center, radius, p)) v_n += *d;
  return v_n;
}

/// PaperLiteral:   v_t = v_h - (v_n . v_h) n_hat
/// Orthogonalized: v_t = v_h - (n_hat . v_h) n_hat
/// The literal form is only tangent when |v_n| = 1. Nothing when v_n = 0.
inline std::optional<Vec3> compute_tangent(const Vec3& v_n, const Vec3& v_h, TangentMode mode) {
  const double len = norm(v_n);
  if (!(len > 0.0)) return std::nullopt;
  const Vec3 n_hat = v_n / len;
  const double along = mode == TangentMode::PaperLiteral ? dot(v_n, v_h) : dot(n_hat, v_h);
  return v_h - n_hat * along;
}

/// Everything one tick needs to know about the proxy's surroundings.
struct ContactProbe {
  Vec3 v_h{};
  Vec3 v_n{};
  std::optional<Vec3> n_hat;
  std::size_t enclosed = 0;

  /// HIP lies behind the locally estimated surface.
  bool penetrating() const { return n_hat.has_value() && dot(v_n, v_h) < 0.0; }
};

inline ContactProbe probe_contact(const VoxelLattice& lattice, const Point3& center, double radius,
                                  const Point3& hip) {
  ContactProbe probe;
  probe.v_h = hip - center;
  lattice.for_each_mean_in_sphere(center, radius, [&](const Point3& p) {
    ++probe.enclosed;
    if (const auto d = compute_overshoot(center, radius, p)) probe.v_n += *d;
  });
  const double len = norm(probe.v_n);
  if (len > 0.0) probe.n_hat = probe.v_n / len;
  return probe;
}

/// One tick of the proxy state machine given a fresh probe.
///
/// Rules, checked in order (s is the friction scale):
///   v_n.v_h < 0                  -> Penetrating: c += s delta v_t + k_n v_n
///   |v_n| > zeta                 -> Surface:     c += k_n v_n
///   otherwise                    -> Free:        c += k_h v_h
/// Under PenetrationRule::SignAndZeta the first rule also needs |v_n| > zeta,
/// and a shallow penetrating tick takes the Free step; s then scales the
/// tangential part of that step so a stuck proxy cannot creep sideways.
/// Displacement is capped at max_step_factor * radius.
inline ProxyState advance_proxy(const ProxyState& state, const ContactProbe& probe,
                                const ProxyParams& params, double friction_scale) {
  ProxyState next = state;
  next.v_h = probe.v_h;
  next.v_n = probe.v_n;
  next.n_hat = probe.n_hat;
  next.v_t = {};

  const bool deep = norm(probe.v_n) > params.zeta(state.radius);
  const bool gated = params.penetration_rule == PenetrationRule::SignAndZeta;
  Vec3 step;
  if (probe.penetrating() && (deep || !gated)) {
    next.contact = Contact::Penetrating;
    next.v_t = *compute_tangent(probe.v_n, probe.v_h, params.tangent_mode);
    step = next.v_t * (friction_scale * params.delta) + probe.v_n * params.k_n;
  } else if (deep && !probe.penetrating()) {
    next.contact = Contact::Surface;
    step = probe.v_n * params.k_n;
  } else {
    next.contact = Contact::Free;
    if (friction_scale != 1.0 && probe.penetrating()) {
      const Vec3 normal_part = *probe.n_hat * dot(*probe.n_hat, probe.v_h);
      step = (normal_part + (probe.v_h - normal_part) * friction_scale) * params.k_h;
    } else {
      step = probe.v_h * params.k_h;
    }
  }

  const double cap = params.max_step_factor * state.radius;
  const double step_len = norm(step);
  if (step_len > cap) step *= cap / step_len;
  next.center = state.center + step;
  return next;
}

inline ProxyState proxy_step(const ProxyState& state, const Hip& hip, const VoxelLattice& lattice,
                             const ProxyParams& params, double friction_scale) {
  return advance_proxy(state, probe_contact(lattice, state.center, state.radius, hip.position), params,
                       friction_scale);
}

}  // namespace haptic
