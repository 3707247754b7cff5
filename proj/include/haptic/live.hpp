#pragma once

#include <atomic>
#include <cmath>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "haptic/cloud.hpp"
#include "haptic/config.hpp"
#include "haptic/error.hpp"
#include "haptic/lattice.hpp"
#include "haptic/session.hpp"

namespace haptic {

/// Fixed-capacity FIFO that discards its oldest element when full.
template <class T>
class DropOldestQueue {
 public:
  explicit DropOldestQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  /// Returns true if an element had to be dropped.
  bool push(T value) {
    std::lock_guard lock(mutex_);
    bool dropped = false;
    if (items_.size() == capacity_) {
      items_.pop_front();
      ++dropped_;
      dropped = true;
    }
    items_.push_back(std::move(value));
    return dropped;
  }

  std::optional<T> pop() {
    std::lock_guard lock(mutex_);
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::deque<T> items_;
  std::uint64_t dropped_ = 0;
};

/// Snapshot as streamed to viewers.
struct WireSnapshot {
  Snapshot snapshot;
  std::optional<Vec3> normal;
  std::uint64_t generation = 0;  // lattice the tick ran against
};

struct LatticeView {
  std::shared_ptr<const VoxelLattice> lattice;
  std::uint64_t generation = 0;
  std::vector<TransformOp> transforms;
};

struct SetFriction {
  FrictionParams params;
};
struct ResetProxy {};
using ControlCommand = std::variant<SetFriction, ResetProxy>;

struct LiveCallbacks {
  std::function<void(const WireSnapshot&)> on_snapshot;
  std::function<void(const LatticeView&)> on_lattice;
  std::function<void(const std::string&)> on_error;
};

/// A realtime session driven by a live HIP mailbox.
///
/// The loop thread owns the world. Commands are queued and applied between
/// ticks; transforms are rebuilt on a worker thread and the finished lattice
/// is swapped in by the loop. Callbacks must not block: snapshot and lattice
/// callbacks run on the loop thread, error callbacks on the worker.
class LiveSession {
 public:
  static constexpr double kMaxPublishHz = 60.0;

  LiveSession(EngineConfig config, PointCloud raw, LiveCallbacks callbacks = {})
      : config_(std::move(config)),
        raw_(std::move(raw)),
        callbacks_(std::move(callbacks)),
        mailbox_(std::make_shared<HipMailbox>()) {
    config_.validate();
    auto lattice = std::make_shared<const VoxelLattice>(build_lattice(raw_, config_.lattice, config_.transforms));
    view_ = {lattice, 1, config_.transforms};
    const Point3 start = config_.lattice.origin + 0.5 * (config_.lattice.world_max() - config_.lattice.origin);
    mailbox_->store(start);
    world_.emplace(make_world(config_, lattice, HipSource::live(mailbox_)));
    const double rate = static_cast<double>(config_.session.rate_hz);
    publish_every_ = static_cast<std::int64_t>(std::ceil(rate / kMaxPublishHz));
  }

  ~LiveSession() { stop(); }
  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  void start() {
    if (running_.exchange(true)) return;
    stopping_ = false;
    rebuilder_ = std::thread([this] { rebuild_loop(); });
    loop_ = std::thread([this] { tick_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    stopping_ = true;
    {
      std::lock_guard lock(rebuild_mutex_);
      rebuild_cv_.notify_all();
    }
    if (loop_.joinable()) loop_.join();
    if (rebuilder_.joinable()) rebuilder_.join();
  }

  bool running() const { return running_; }

  /// Throws ConfigError for a non-finite position.
  void set_hip(const Point3& p) {
    if (!is_finite(p)) throw ConfigError("hip position must be finite");
    mailbox_->store(p);
  }

  /// Validates the ops before queueing; the rebuild runs asynchronously.
  void set_transform(std::vector<TransformOp> ops) {
    (void)compose(ops);
    std::lock_guard lock(rebuild_mutex_);
    pending_ops_ = std::move(ops);
    rebuild_cv_.notify_one();
  }

  void set_friction(const FrictionParams& p) {
    p.validate();
    post(SetFriction{p});
  }

  void reset() { post(ResetProxy{}); }

  LatticeView lattice_view() const {
    std::lock_guard lock(view_mutex_);
    return view_;
  }

  const EngineConfig& config() const { return config_; }
  std::int64_t ticks() const { return ticks_; }
  std::int64_t overruns() const { return overruns_; }
  std::int64_t publish_every() const { return publish_every_; }

 private:
  void post(ControlCommand c) {
    std::lock_guard lock(control_mutex_);
    control_.push_back(std::move(c));
  }

  void report(const std::string& message) {
    if (callbacks_.on_error) callbacks_.on_error(message);
  }

  void apply(World& w, const ControlCommand& c) {
    if (const auto* f = std::get_if<SetFriction>(&c)) {
      w.friction = f->params;
    } else if (std::holds_alternative<ResetProxy>(c)) {
      w.friction = config_.friction;
      w.proxy = ProxyState{};
      w.proxy.center = w.hip.at(0);
      w.proxy.radius = config_.start_radius();
      w.estimated_at.reset();
      w.sigma_hat = 0.0;
    }
  }

  void drain_control(World& w) {
    std::vector<ControlCommand> batch;
    std::optional<LatticeView> ready;
    {
      std::unique_lock lock(control_mutex_, std::try_to_lock);
      if (!lock.owns_lock()) return;
      batch.swap(control_);
      ready.swap(ready_);
    }
    if (ready) {
      w.replace_lattice(ready->lattice);
      {
        std::lock_guard lock(view_mutex_);
        view_ = *ready;
      }
      generation_ = ready->generation;
      if (callbacks_.on_lattice) callbacks_.on_lattice(*ready);
    }
    for (const auto& c : batch) apply(w, c);
  }

  void tick_loop() {
    World& w = *world_;
    using clock = std::chrono::steady_clock;
    const auto period = config_.session.period();
    auto deadline = clock::now() + period;
    generation_ = lattice_view().generation;
    while (!stopping_) {
      drain_control(w);
      const auto start = clock::now();
      const TickResult r = step_once(w, ticks_);
      if (clock::now() - start > period) ++overruns_;
      if (ticks_ % publish_every_ == 0 && callbacks_.on_snapshot)
        callbacks_.on_snapshot({r.snapshot, r.proxy.n_hat, generation_});
      ++ticks_;
      std::this_thread::sleep_until(deadline);
      deadline += period;
      // After a long stall, resume pacing from now instead of bursting.
      if (clock::now() > deadline + 10 * period) deadline = clock::now() + period;
    }
  }

  void rebuild_loop() {
    for (;;) {
      std::vector<TransformOp> ops;
      {
        std::unique_lock lock(rebuild_mutex_);
        rebuild_cv_.wait(lock, [this] { return stopping_ || pending_ops_.has_value(); });
        if (stopping_) return;
        ops = std::move(*pending_ops_);
        pending_ops_.reset();
      }
      try {
        auto lattice = std::make_shared<const VoxelLattice>(build_lattice(raw_, config_.lattice, ops));
        std::lock_guard lock(control_mutex_);
        ready_ = LatticeView{std::move(lattice), ++built_, std::move(ops)};
      } catch (const Error& e) {
        report(std::string("transform rejected: ") + e.what());
      }
    }
  }

  EngineConfig config_;
  PointCloud raw_;
  LiveCallbacks callbacks_;
  std::shared_ptr<HipMailbox> mailbox_;
  std::optional<World> world_;
  std::int64_t publish_every_ = 1;

  mutable std::mutex view_mutex_;
  LatticeView view_;

  std::mutex control_mutex_;
  std::vector<ControlCommand> control_;
  std::optional<LatticeView> ready_;

  std::mutex rebuild_mutex_;
  std::condition_variable rebuild_cv_;
  std::optional<std::vector<TransformOp>> pending_ops_;
  std::uint64_t built_ = 1;

  std::atomic<bool> running_{false};
  std::atomic<bool> stopping_{false};
  std::atomic<std::int64_t> ticks_{0};
  std::atomic<std::int64_t> overruns_{0};
  std::uint64_t generation_ = 0;
  std::thread loop_;
  std::thread rebuilder_;
};

}  // namespace haptic
