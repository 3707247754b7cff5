#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "haptic/density.hpp"
#include "haptic/error.hpp"
#include "haptic/force.hpp"
#include "haptic/geometry.hpp"
#include "haptic/lattice.hpp"
#include "haptic/proxy.hpp"
#include "haptic/session.hpp"

namespace haptic {

/// One step of the object placement pipeline.
struct ScaleOp {
  Vec3 factors{1.0, 1.0, 1.0};
};
struct RotateOp {
  Vec3 axis{0.0, 0.0, 1.0};
  double angle_deg = 0.0;
};
struct TranslateOp {
  Vec3 offset{};
};
using TransformOp = std::variant<ScaleOp, RotateOp, TranslateOp>;

inline AffineTransform to_affine(const TransformOp& op) {
  return std::visit(
      [](const auto& o) -> AffineTransform {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, ScaleOp>)
          return AffineTransform::scaling(o.factors.x, o.factors.y, o.factors.z);
        else if constexpr (std::is_same_v<T, RotateOp>)
          return AffineTransform::rotation(o.axis, o.angle_deg * std::numbers::pi / 180.0);
        else
          return AffineTransform::translate(o.offset);
      },
      op);
}

/// Ops are applied left to right.
inline AffineTransform compose(const std::vector<TransformOp>& ops) {
  AffineTransform t;
  for (const auto& op : ops) t = t.then(to_affine(op));
  return t;
}

/// Tolerances and sampling of the analytic-sphere validation run.
struct ValidationConfig {
  double rms_bound = 0.02;
  double max_bound = 0.05;
  std::size_t sample_count = 50000;
  std::uint64_t seed = 7;
  double force_threshold_fraction = 0.01;
  /// Edge of the cubic device workspace the validation lattice spans.
  double workspace_m = 0.1;

  void validate() const {
    if (!(rms_bound >= 0.0) || !(max_bound >= 0.0)) throw ConfigError("validation bounds must be >= 0");
    if (sample_count < 100) throw ConfigError("validation sample_count must be >= 100");
    if (!(force_threshold_fraction >= 0.0 && force_threshold_fraction < 1.0))
      throw ConfigError("force_threshold_fraction must be in [0, 1)");
    if (!(workspace_m > 0.0) || !std::isfinite(workspace_m)) throw ConfigError("validation workspace_m must be > 0");
  }
};

struct EngineConfig {
  LatticeConfig lattice;
  std::vector<TransformOp> transforms;
  ProxyParams proxy;
  /// Radius before the first density estimate; r2 when unset.
  std::optional<double> initial_radius;
  DensityConfig density = DensityConfig::for_spacing(LatticeConfig{}.spacing);
  ForceParams force;
  FrictionParams friction;
  SessionConfig session;
  ValidationConfig validation;

  double start_radius() const { return initial_radius.value_or(density.r2); }

  void validate() const {
    lattice.validate();
    for (const auto& op : transforms) (void)to_affine(op);
    proxy.validate();
    density.validate();
    force.validate();
    friction.validate();
    session.validate();
    validation.validate();
    if (initial_radius && !(*initial_radius > 0.0)) throw ConfigError("initial_radius_m must be > 0");
  }
};

namespace detail {

using nlohmann::json;

/// Reads keys out of one JSON object and rejects any it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  void read_vec(const std::string& key, Vec3& out) {
    std::optional<std::vector<double>> v;
    read_opt(key, v);
    if (!v) return;
    if (v->size() != 3) throw ConfigError(path_ + "." + key + " must have 3 elements");
    out = {(*v)[0], (*v)[1], (*v)[2]};
  }

  template <class T>
  void read_opt(const std::string& key, std::optional<T>& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    T v{};
    read(key, v);
    out = v;
  }

  const json& child(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown key " + path_ + "." + it.key());
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline TransformOp parse_transform_op(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  TransformOp op;
  int kinds = 0;
  if (r.has("scale")) {
    ++kinds;
    const json& s = r.child("scale");
    ScaleOp so;
    if (s.is_number()) {
      const double v = s.get<double>();
      so.factors = {v, v, v};
    } else if (s.is_array() && s.size() == 3) {
      so.factors = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    } else {
      throw ConfigError(path + ".scale must be a number or 3-array");
    }
    op = so;
  }
  if (r.has("rotate_axis") || r.has("angle_deg")) {
    ++kinds;
    RotateOp ro;
    r.read_vec("rotate_axis", ro.axis);
    r.read("angle_deg", ro.angle_deg);
    op = ro;
  }
  if (r.has("translate_m")) {
    ++kinds;
    TranslateOp to;
    r.read_vec("translate_m", to.offset);
    op = to;
  }
  r.finish();
  if (kinds != 1) throw ConfigError(path + " must hold exactly one of scale, rotate_axis/angle_deg, translate_m");
  try {
    (void)to_affine(op);
  } catch (const GeometryError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return op;
}

inline std::vector<TransformOp> parse_transform_ops(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + " must be an array");
  std::vector<TransformOp> ops;
  for (std::size_t n = 0; n < j.size(); ++n)
    ops.push_back(parse_transform_op(j[n], path + "[" + std::to_string(n) + "]"));
  return ops;
}

inline nlohmann::ordered_json transform_op_to_json(const TransformOp& op) {
  nlohmann::ordered_json j;
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, ScaleOp>)
          j["scale"] = {o.factors.x, o.factors.y, o.factors.z};
        else if constexpr (std::is_same_v<T, RotateOp>) {
          j["rotate_axis"] = {o.axis.x, o.axis.y, o.axis.z};
          j["angle_deg"] = o.angle_deg;
        } else
          j["translate_m"] = {o.offset.x, o.offset.y, o.offset.z};
      },
      op);
  return j;
}

}  // namespace detail

/// Parses an engine config. Missing keys keep their defaults; density radii
/// default to multiples of the lattice spacing (r1 = 1.5, r2 = 10, recompute
/// threshold = 0.5 voxels).
inline EngineConfig parse_engine_config(const nlohmann::json& root) {
  using detail::ObjectReader;
  EngineConfig cfg;
  ObjectReader top(root, "config");

  if (top.has("lattice")) {
    ObjectReader r(top.child("lattice"), "lattice");
    std::optional<std::vector<int>> dims;
    r.read_opt("dims", dims);
    if (dims) {
      if (dims->size() != 3) throw ConfigError("lattice.dims must have 3 elements");
      cfg.lattice.dims = {(*dims)[0], (*dims)[1], (*dims)[2]};
    }
    r.read("spacing_m", cfg.lattice.spacing);
    r.read_vec("origin_m", cfg.lattice.origin);
    r.finish();
  }
  if (top.has("transforms")) cfg.transforms = detail::parse_transform_ops(top.child("transforms"), "transforms");

  if (top.has("proxy")) {
    ObjectReader r(top.child("proxy"), "proxy");
    r.read("k_n", cfg.proxy.k_n);
    r.read("k_h", cfg.proxy.k_h);
    r.read("delta", cfg.proxy.delta);
    r.read("zeta_factor", cfg.proxy.zeta_factor);
    r.read("max_step_factor", cfg.proxy.max_step_factor);
    std::optional<std::string> mode;
    r.read_opt("tangent_mode", mode);
    if (mode) {
      if (*mode == "paper_literal")
        cfg.proxy.tangent_mode = TangentMode::PaperLiteral;
      else if (*mode == "orthogonalized")
        cfg.proxy.tangent_mode = TangentMode::Orthogonalized;
      else
        throw ConfigError("proxy.tangent_mode must be paper_literal or orthogonalized");
    }
    std::optional<std::string> rule;
    r.read_opt("penetration_rule", rule);
    if (rule) {
      if (*rule == "sign")
        cfg.proxy.penetration_rule = PenetrationRule::Sign;
      else if (*rule == "sign_and_zeta")
        cfg.proxy.penetration_rule = PenetrationRule::SignAndZeta;
      else
        throw ConfigError("proxy.penetration_rule must be sign or sign_and_zeta");
    }
    r.read_opt("initial_radius_m", cfg.initial_radius);
    r.finish();
  }

  cfg.density = DensityConfig::for_spacing(cfg.lattice.spacing);
  if (top.has("density")) {
    ObjectReader r(top.child("density"), "density");
    r.read("beta", cfg.density.beta);
    r.read("r1_m", cfg.density.r1);
    r.read("r2_m", cfg.density.r2);
    r.read("neighborhood_k", cfg.density.neighborhood_k);
    r.read("recompute_threshold_m", cfg.density.recompute_threshold);
    r.finish();
  }
  if (top.has("force")) {
    ObjectReader r(top.child("force"), "force");
    r.read("stiffness_n_per_m", cfg.force.stiffness);
    r.finish();
  }
  if (top.has("friction")) {
    ObjectReader r(top.child("friction"), "friction");
    r.read("enabled", cfg.friction.enabled);
    r.read("mu_s", cfg.friction.mu_s);
    r.read("mu_d", cfg.friction.mu_d);
    r.finish();
  }
  if (top.has("session")) {
    ObjectReader r(top.child("session"), "session");
    r.read("rate_hz", cfg.session.rate_hz);
    r.read("max_ticks", cfg.session.max_ticks);
    r.read("snapshot_decimation", cfg.session.snapshot_decimation);
    std::optional<std::string> mode;
    r.read_opt("mode", mode);
    if (mode) {
      if (*mode == "realtime")
        cfg.session.mode = LoopMode::Realtime;
      else if (*mode == "as_fast_as_possible")
        cfg.session.mode = LoopMode::AsFastAsPossible;
      else
        throw ConfigError("session.mode must be realtime or as_fast_as_possible");
    }
    r.finish();
  }
  if (top.has("validation")) {
    ObjectReader r(top.child("validation"), "validation");
    r.read("rms_bound", cfg.validation.rms_bound);
    r.read("max_bound", cfg.validation.max_bound);
    r.read("sample_count", cfg.validation.sample_count);
    r.read("seed", cfg.validation.seed);
    r.read("force_threshold_fraction", cfg.validation.force_threshold_fraction);
    r.read("workspace_m", cfg.validation.workspace_m);
    r.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

inline EngineConfig parse_engine_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_engine_config(j);
}

inline EngineConfig load_engine_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_engine_config(ss.str());
}

/// Every effective value, so reloading the output reproduces the run.
inline nlohmann::ordered_json to_json(const EngineConfig& c) {
  nlohmann::ordered_json j;
  j["lattice"] = {{"dims", c.lattice.dims},
                  {"spacing_m", c.lattice.spacing},
                  {"origin_m", {c.lattice.origin.x, c.lattice.origin.y, c.lattice.origin.z}}};
  j["transforms"] = nlohmann::ordered_json::array();
  for (const auto& op : c.transforms) j["transforms"].push_back(detail::transform_op_to_json(op));
  j["proxy"] = {{"k_n", c.proxy.k_n},
                {"k_h", c.proxy.k_h},
                {"delta", c.proxy.delta},
                {"zeta_factor", c.proxy.zeta_factor},
                {"max_step_factor", c.proxy.max_step_factor},
                {"tangent_mode",
                 c.proxy.tangent_mode == TangentMode::PaperLiteral ? "paper_literal" : "orthogonalized"},
                {"penetration_rule", c.proxy.penetration_rule == PenetrationRule::Sign ? "sign" : "sign_and_zeta"}};
  if (c.initial_radius) j["proxy"]["initial_radius_m"] = *c.initial_radius;
  j["density"] = {{"beta", c.density.beta},
                  {"r1_m", c.density.r1},
                  {"r2_m", c.density.r2},
                  {"neighborhood_k", c.density.neighborhood_k},
                  {"recompute_threshold_m", c.density.recompute_threshold}};
  j["force"] = {{"stiffness_n_per_m", c.force.stiffness}};
  j["friction"] = {{"enabled", c.friction.enabled}, {"mu_s", c.friction.mu_s}, {"mu_d", c.friction.mu_d}};
  j["session"] = {{"rate_hz", c.session.rate_hz},
                  {"max_ticks", c.session.max_ticks},
                  {"mode", c.session.mode == LoopMode::Realtime ? "realtime" : "as_fast_as_possible"},
                  {"snapshot_decimation", c.session.snapshot_decimation}};
  j["validation"] = {{"rms_bound", c.validation.rms_bound},
                     {"max_bound", c.validation.max_bound},
                     {"sample_count", c.validation.sample_count},
                     {"seed", c.validation.seed},
                     {"force_threshold_fraction", c.validation.force_threshold_fraction},
                     {"workspace_m", c.validation.workspace_m}};
  return j;
}

/// Object placement: transform the raw cloud, then mean-filter it onto the
/// lattice. Always a full rebuild.
inline VoxelLattice build_lattice(const PointCloud& raw, const LatticeConfig& lattice,
                                  const std::vector<TransformOp>& ops) {
  if (ops.empty()) return resample_to_lattice(raw, lattice);
  return resample_to_lattice(apply_transform(raw, compose(ops)), lattice);
}

/// A world ready to run: proxy starts collocated with the first HIP sample.
inline World make_world(const EngineConfig& cfg, std::shared_ptr<const VoxelLattice> lattice, HipSource hip) {
  World w{std::move(lattice), {}, cfg.proxy, cfg.density, cfg.force, cfg.friction, std::move(hip), {}, 0.0};
  w.proxy.center = w.hip.at(0);
  w.proxy.radius = cfg.start_radius();
  return w;
}

}  // namespace haptic
