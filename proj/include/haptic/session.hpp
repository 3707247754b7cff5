#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "haptic/cloud.hpp"
#include "haptic/density.hpp"
#include "haptic/error.hpp"
#include "haptic/force.hpp"
#include "haptic/geometry.hpp"
#include "haptic/lattice.hpp"
#include "haptic/proxy.hpp"
#include "haptic/trace.hpp"

namespace haptic {

struct Keyframe {
  std::int64_t tick = 0;
  Point3 position{};
};

/// Piecewise-linear HIP path. Before the first keyframe the HIP sits at the
/// first position, after the last it holds the last one.
class ScriptedTrajectory {
 public:
  explicit ScriptedTrajectory(std::vector<Keyframe> keys) : keys_(std::move(keys)) {
    if (keys_.empty()) throw ConfigError("trajectory needs at least one keyframe");
    for (std::size_t n = 0; n < keys_.size(); ++n) {
      if (!is_finite(keys_[n].position)) throw ConfigError("trajectory positions must be finite");
      if (n && keys_[n].tick <= keys_[n - 1].tick)
        throw ConfigError("trajectory ticks must be strictly increasing");
    }
  }

  Point3 position_at(std::int64_t tick) const {
    if (tick <= keys_.front().tick) return keys_.front().position;
    if (tick >= keys_.back().tick) return keys_.back().position;
    const auto hi = std::upper_bound(keys_.begin(), keys_.end(), tick,
                                     [](std::int64_t t, const Keyframe& k) { return t < k.tick; });
    const auto lo = hi - 1;
    if (lo->tick == tick) return lo->position;
    const double f = static_cast<double>(tick - lo->tick) / static_cast<double>(hi->tick - lo->tick);
    return lo->position + (hi->position - lo->position) * f;
  }

  const std::vector<Keyframe>& keyframes() const { return keys_; }
  std::int64_t last_tick() const { return keys_.back().tick; }

 private:
  std::vector<Keyframe> keys_;
};

/// Reads "tick,x,y,z" rows; a non-numeric first row is taken as a header.
inline ScriptedTrajectory load_trajectory_csv(std::istream& in) {
  std::vector<Keyframe> keys;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      fields.push_back(detail::trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (keys.empty() && line_no == 1 && !fields.empty() && fields[0] == "tick") continue;
    if (fields.size() != 4) throw ParseError("expected 'tick,x,y,z'", line_no);
    std::int64_t tick = 0;
    const auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), tick);
    if (ec != std::errc{} || p != fields[0].data() + fields[0].size())
      throw ParseError("invalid tick '" + std::string(fields[0]) + "'", line_no);
    keys.push_back({tick,
                    {detail::parse_coordinate(fields[1], line_no), detail::parse_coordinate(fields[2], line_no),
                     detail::parse_coordinate(fields[3], line_no)}});
  }
  try {
    return ScriptedTrajectory(std::move(keys));
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), 0);
  }
}

/// Latest-value-wins cell for one writer and one reader. A sequence lock over
/// atomic components, so the reader never sees a torn position.
class HipMailbox {
 public:
  explicit HipMailbox(Point3 initial = {}) { store(initial); }

  void store(const Point3& p) {
    const auto s = seq_.load(std::memory_order_relaxed);
    seq_.store(s + 1, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_release);
    x_.store(p.x, std::memory_order_relaxed);
    y_.store(p.y, std::memory_order_relaxed);
    z_.store(p.z, std::memory_order_relaxed);
    seq_.store(s + 2, std::memory_order_release);
  }

  Point3 load() const {
    for (;;) {
      const auto s0 = seq_.load(std::memory_order_acquire);
      if (s0 & 1U) continue;
      const Point3 p{x_.load(std::memory_order_relaxed), y_.load(std::memory_order_relaxed),
                     z_.load(std::memory_order_relaxed)};
      std::atomic_thread_fence(std::memory_order_acquire);
      if (seq_.load(std::memory_order_relaxed) == s0) return p;
    }
  }

 private:
  std::atomic<std::uint64_t> seq_{0};
  std::atomic<double> x_{0.0}, y_{0.0}, z_{0.0};
};

class HipSource {
 public:
  static HipSource scripted(ScriptedTrajectory t) { return HipSource(std::move(t)); }
  static HipSource live(std::shared_ptr<HipMailbox> m) { return HipSource(std::move(m)); }

  Point3 at(std::int64_t tick) const {
    if (const auto* t = std::get_if<ScriptedTrajectory>(&source_)) return t->position_at(tick);
    return std::get<std::shared_ptr<HipMailbox>>(source_)->load();
  }
  bool is_live() const { return std::holds_alternative<std::shared_ptr<HipMailbox>>(source_); }

 private:
  explicit HipSource(ScriptedTrajectory t) : source_(std::move(t)) {}
  explicit HipSource(std::shared_ptr<HipMailbox> m) : source_(std::move(m)) {}
  std::variant<ScriptedTrajectory, std::shared_ptr<HipMailbox>> source_;
};

/// Mutable simulation state. Owned by exactly one loop thread.
struct World {
  std::shared_ptr<const VoxelLattice> lattice;
  ProxyState proxy;
  ProxyParams proxy_params;
  DensityConfig density;
  ForceParams force;
  FrictionParams friction;
  HipSource hip;

  // Radius estimation bookkeeping.
  std::optional<Point3> estimated_at;
  double sigma_hat = 0.0;

  void replace_lattice(std::shared_ptr<const VoxelLattice> next) {
    lattice = std::move(next);
    estimated_at.reset();
  }
};

struct TickResult {
  ProxyState proxy;
  ForceSample force;
  Snapshot snapshot;
  std::chrono::nanoseconds normal_time{0};  // neighborhood query + sinking normal
};

/// Re-estimates the proxy radius when the proxy has travelled far enough or
/// the lattice changed. Keeps the old radius when too few neighbors exist.
inline void update_radius(World& world) {
  const Point3& c = world.proxy.center;
  if (world.estimated_at && norm(c - *world.estimated_at) <= world.density.recompute_threshold) return;
  world.estimated_at = c;
  const auto est = local_std_dev(*world.lattice, c, world.density.neighborhood_k,
                                 world.density.search_radius());
  if (!est) return;
  world.sigma_hat = est->sigma_hat;
  world.proxy.radius = adaptive_radius(bandwidth(est->sigma_hat, est->n), world.density);
}

/// One haptic tick: read HIP, adapt radius, probe contact, friction, move
/// the proxy, render force.
inline TickResult step_once(World& world, std::int64_t tick) {
  const Point3 hip = world.hip.at(tick);
  update_radius(world);

  const auto t0 = std::chrono::steady_clock::now();
  const ContactProbe probe = probe_contact(*world.lattice, world.proxy.center, world.proxy.radius, hip);
  const auto t1 = std::chrono::steady_clock::now();

  FrictionScale friction{1.0, false};
  if (world.friction.enabled && probe.penetrating())
    friction = compute_friction_scale(probe.v_h, *probe.n_hat, world.friction, world.force.stiffness);

  world.proxy = advance_proxy(world.proxy, probe, world.proxy_params, friction.scale);

  // Force is fed back only once the proxy has touched the cloud.
  ForceSample sample;
  sample.friction_scale = friction.scale;
  sample.stuck = friction.stuck;
  if (probe.penetrating()) {
    sample.depth = penetration_depth(hip - world.proxy.center, world.proxy.radius);
    sample.force = reaction_force(sample.depth, world.force);
  }

  Snapshot snap;
  snap.tick = tick;
  snap.hip = hip;
  snap.proxy_center = world.proxy.center;
  snap.proxy_radius = world.proxy.radius;
  snap.contact = world.proxy.contact;
  snap.force = sample.force;
  snap.depth_mag = norm(sample.depth);
  snap.friction_scale = sample.friction_scale;
  snap.sigma_hat = world.sigma_hat;
  return {world.proxy, sample, snap, t1 - t0};
}

enum class LoopMode { Realtime, AsFastAsPossible };

struct SessionConfig {
  int rate_hz = 1000;
  std::int64_t max_ticks = 10000;
  LoopMode mode = LoopMode::AsFastAsPossible;
  int snapshot_decimation = 1;

  void validate() const {
    if (rate_hz < 1) throw ConfigError("rate_hz must be >= 1");
    if (max_ticks < 0) throw ConfigError("max_ticks must be >= 0");
    if (snapshot_decimation < 1) throw ConfigError("snapshot_decimation must be >= 1");
  }
  std::chrono::nanoseconds period() const { return std::chrono::nanoseconds(1'000'000'000LL / rate_hz); }
  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

/// Per-tick compute time, pacing sleep excluded.
struct TimingStats {
  std::int64_t ticks = 0;
  double mean_us = 0.0;
  double p99_us = 0.0;
  double max_us = 0.0;
  std::int64_t overruns = 0;  // ticks whose compute exceeded the period
  double normal_mean_us = 0.0;
};

class TimingRecorder {
 public:
  explicit TimingRecorder(std::chrono::nanoseconds budget, std::size_t expected = 0) : budget_(budget) {
    samples_.reserve(expected);
  }

  void record(std::chrono::nanoseconds tick, std::chrono::nanoseconds normal) {
    samples_.push_back(static_cast<double>(tick.count()) / 1e3);
    normal_sum_us_ += static_cast<double>(normal.count()) / 1e3;
    if (tick > budget_) ++overruns_;
  }

  TimingStats finish() const {
    TimingStats s;
    s.ticks = static_cast<std::int64_t>(samples_.size());
    s.overruns = overruns_;
    if (samples_.empty()) return s;
    std::vector<double> sorted = samples_;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    const auto n = sorted.size();
    s.mean_us = sum / static_cast<double>(n);
    const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
    s.p99_us = sorted[std::max<std::size_t>(rank, 1) - 1];
    s.max_us = sorted.back();
    s.normal_mean_us = normal_sum_us_ / static_cast<double>(n);
    return s;
  }

 private:
  std::chrono::nanoseconds budget_;
  std::vector<double> samples_;
  std::int64_t overruns_ = 0;
  double normal_sum_us_ = 0.0;
};

struct RunResult {
  std::vector<Snapshot> trace;
  TimingStats stats;
};

/// Runs `max_ticks` ticks. Realtime mode paces against absolute deadlines on
/// the monotonic clock; overruns are counted, never fatal. Every
/// `snapshot_decimation`-th tick is kept, plus the final one.
inline RunResult run_loop(const SessionConfig& config, World& world) {
  config.validate();
  if (!world.lattice) throw ConfigError("world has no lattice");
  RunResult out;
  TimingRecorder timing(config.period(), static_cast<std::size_t>(config.max_ticks));
  out.trace.reserve(static_cast<std::size_t>(config.max_ticks / config.snapshot_decimation + 1));

  using clock = std::chrono::steady_clock;
  auto deadline = clock::now() + config.period();
  for (std::int64_t tick = 0; tick < config.max_ticks; ++tick) {
    const auto start = clock::now();
    TickResult r = step_once(world, tick);
    timing.record(clock::now() - start, r.normal_time);
    if (tick % config.snapshot_decimation == 0 || tick + 1 == config.max_ticks)
      out.trace.push_back(r.snapshot);
    if (config.mode == LoopMode::Realtime) {
      std::this_thread::sleep_until(deadline);
      deadline += config.period();
    }
  }
  out.stats = timing.finish();
  return out;
}

}  // namespace haptic
