#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "haptic/config.hpp"
#include "haptic/error.hpp"
#include "haptic/oracle.hpp"
#include "haptic/session.hpp"

namespace haptic {

/// Press recipe for the analytic-sphere run, in ticks and fractions of R.
struct PressRecipe {
  std::int64_t hold_ticks = 500;
  std::int64_t approach_ticks = 3000;
  int aim_rounds = 3;
  std::int64_t aim_ticks = 12000;
  std::int64_t calibration_ticks = 500;
  std::int64_t lift_ticks = 1000;
  std::int64_t rest_ticks = 500;
  std::int64_t ramp_ticks = 4000;
  std::int64_t dwell_ticks = 2000;
  std::int64_t withdraw_ticks = 2000;
  double depth_fraction = 0.3;
  Vec3 direction{0.3, 0.5, 0.8};
};

struct ValidationReport {
  double scale = 1.0;
  double sphere_radius = 0.0;
  double contact_radius = 0.0;  // mean proxy surface distance while resting on the sphere
  double spacing = 0.0;
  std::size_t active_voxels = 0;
  double free_radius = 0.0;
  double contact_proxy_radius = 0.0;
  TraceComparison errors;       // against the sphere the proxy rests on
  TraceComparison uncorrected;  // against the nominal radius
  double rms_bound = 0.0;
  double max_bound = 0.0;
  double elapsed_s = 0.0;
  std::vector<Snapshot> trace;
  std::size_t scored_from = 0;  // first trace index of the press

  double standoff() const { return sphere_radius - contact_radius; }
  bool rms_ok() const { return errors.rms_rel_err <= rms_bound; }
  bool max_ok() const { return errors.max_rel_err <= max_bound; }
};

inline nlohmann::ordered_json to_json(const ValidationReport& r) {
  nlohmann::ordered_json j;
  j["rms_rel_err"] = r.errors.rms_rel_err;
  j["max_rel_err"] = r.errors.max_rel_err;
  j["ticks_compared"] = r.errors.ticks_compared;
  j["rms_bound"] = r.rms_bound;
  j["max_bound"] = r.max_bound;
  j["passed"] = r.rms_ok();
  j["max_within_bound"] = r.max_ok();
  j["scale"] = r.scale;
  j["sphere_radius_m"] = r.sphere_radius;
  j["contact_radius_m"] = r.contact_radius;
  j["standoff_m"] = r.standoff();
  j["uncorrected"] = {{"rms_rel_err", r.uncorrected.rms_rel_err},
                      {"max_rel_err", r.uncorrected.max_rel_err},
                      {"ticks_compared", r.uncorrected.ticks_compared}};
  j["lattice_spacing_m"] = r.spacing;
  j["active_voxels"] = r.active_voxels;
  j["proxy_radius_free_m"] = r.free_radius;
  j["proxy_radius_contact_m"] = r.contact_proxy_radius;
  j["ticks"] = r.trace.size();
  j["scored_from_tick"] = r.scored_from;
  j["elapsed_s"] = r.elapsed_s;
  return j;
}

/// Renders a pressed analytic sphere and scores the forces.
///
/// The sphere (R = 0.025 m times `scale`) sits at the center of a lattice with
/// the configured dims spanning `validation.workspace_m`; density radii follow
/// that spacing. The HIP approaches along `direction`, then a few times is
/// re-aimed along the resting proxy's radial line and pushed to full depth so
/// the proxy seats among the samples. The mean proxy surface distance over
/// the last seating window is the contact radius. The HIP then lifts to it
/// and the scored press starts there; the oracle sphere uses the contact
/// radius. Friction is off.
inline ValidationReport run_sphere_validation(const EngineConfig& base, double scale,
                                              const PressRecipe& recipe = {}) {
  base.validate();
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("scale must be finite and > 0");
  const auto started = std::chrono::steady_clock::now();
  const ValidationConfig& v = base.validation;

  SphereSpec nominal;
  nominal.sample_count = v.sample_count;
  nominal.seed = v.seed;
  const PointCloud cloud = apply_transform(synth_sphere_cloud(nominal), AffineTransform::scaling(scale));
  nominal.radius *= scale;
  const double R = nominal.radius;

  EngineConfig cfg = base;
  cfg.transforms.clear();
  cfg.friction.enabled = false;
  const int cells = *std::max_element(cfg.lattice.dims.begin(), cfg.lattice.dims.end());
  cfg.lattice.spacing = v.workspace_m / static_cast<double>(cells);
  const double half = 0.5 * v.workspace_m;
  cfg.lattice.origin = {-half, -half, -half};
  const DensityConfig derived = DensityConfig::for_spacing(cfg.lattice.spacing);
  cfg.density.r1 = derived.r1;
  cfg.density.r2 = derived.r2;
  cfg.density.recompute_threshold = derived.recompute_threshold;
  cfg.initial_radius.reset();
  if (!(R + 2.0 * cfg.density.r2 < half)) throw ConfigError("sphere does not fit the validation workspace");

  auto lattice = std::make_shared<const VoxelLattice>(resample_to_lattice(cloud, cfg.lattice));

  ValidationReport out;
  out.scale = scale;
  out.sphere_radius = R;
  out.spacing = cfg.lattice.spacing;
  out.active_voxels = lattice->size();
  out.rms_bound = v.rms_bound;
  out.max_bound = v.max_bound;

  Vec3 dir = recipe.direction / norm(recipe.direction);
  const double standoff_start = R + 2.0 * cfg.density.r2;
  std::int64_t t = recipe.hold_ticks + recipe.approach_ticks;
  World world = make_world(cfg, lattice,
                           HipSource::scripted(ScriptedTrajectory(
                               {{0, dir * standoff_start}, {recipe.hold_ticks, dir * standoff_start}, {t, dir * R}})));
  out.free_radius = world.proxy.radius;
  auto& trace = out.trace;
  for (std::int64_t n = 0; n < t; ++n) trace.push_back(step_once(world, n).snapshot);

  const double depth = recipe.depth_fraction * R;
  double contact = 0.0;
  for (int round = 0; round < recipe.aim_rounds; ++round) {
    const double c = norm(world.proxy.center);
    if (c < 1e-12) throw Error("proxy collapsed onto the sphere center");
    dir = world.proxy.center / c;
    world.hip = HipSource::scripted(ScriptedTrajectory({{t, dir * R}, {t + recipe.lift_ticks, dir * (R - depth)}}));
    double sum = 0.0;
    std::int64_t count = 0;
    for (const std::int64_t end = t + recipe.aim_ticks; t < end; ++t) {
      const Snapshot s = step_once(world, t).snapshot;
      if (end - t <= recipe.calibration_ticks) {
        sum += norm(s.proxy_center) - s.proxy_radius;
        ++count;
      }
      trace.push_back(s);
    }
    contact = sum / static_cast<double>(count);
  }
  out.contact_radius = contact;
  out.contact_proxy_radius = world.proxy.radius;

  const std::int64_t t0 = t;
  out.scored_from = trace.size();
  const std::int64_t t1 = t0 + recipe.lift_ticks;
  const std::int64_t t2 = t1 + recipe.rest_ticks;
  const std::int64_t t3 = t2 + recipe.ramp_ticks;
  const std::int64_t t4 = t3 + recipe.dwell_ticks;
  const std::int64_t t5 = t4 + recipe.ramp_ticks;
  const std::int64_t t6 = t5 + recipe.withdraw_ticks;
  world.hip = HipSource::scripted(ScriptedTrajectory({{t0, dir * (R - depth)},
                                                      {t1, dir * contact},
                                                      {t2, dir * contact},
                                                      {t3, dir * (contact - depth)},
                                                      {t4, dir * (contact - depth)},
                                                      {t5, dir * contact},
                                                      {t6, dir * standoff_start}}));
  for (; t <= t6; ++t) trace.push_back(step_once(world, t).snapshot);

  SphereSpec resting = nominal;
  resting.radius = contact;
  const double K = cfg.force.stiffness;
  const std::span<const Snapshot> press(trace.begin() + static_cast<std::ptrdiff_t>(out.scored_from), trace.end());
  out.errors = compare_traces(press, resting, K, v.force_threshold_fraction);
  out.uncorrected = compare_traces(press, nominal, K, v.force_threshold_fraction);
  out.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace haptic
