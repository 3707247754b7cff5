#pragma once

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <json.hpp>  // nlohmann/json, vendored
#include <spdlog/spdlog.h>

#include "haptic/bridge.hpp"
#include "haptic/cloud.hpp"
#include "haptic/config.hpp"
#include "haptic/error.hpp"
#include "haptic/live.hpp"
#include "haptic/session.hpp"
#include "haptic/trace.hpp"
#include "haptic/validation.hpp"

namespace haptic::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kRuntimeError = 2, kToleranceFailure = 3 };

struct Options {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> cloud;
  std::optional<std::filesystem::path> trajectory;
  std::optional<std::filesystem::path> out;
  double scale = 1.0;
  std::optional<std::int64_t> ticks;
  std::string bind = "127.0.0.1:8765";
};

namespace detail {

inline void require_file(const std::optional<std::filesystem::path>& path, const char* what) {
  if (!path) throw ConfigError(std::string("missing --") + what);
  if (!std::filesystem::is_regular_file(*path)) throw ConfigError("no such file: " + path->string());
}

inline EngineConfig load_config(const Options& o) {
  if (!o.config) return EngineConfig{};
  require_file(o.config, "config");
  return load_engine_config(*o.config);
}

inline ScriptedTrajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory file '" + path.string() + "'", 0);
  try {
    return load_trajectory_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

inline std::shared_ptr<const VoxelLattice> load_lattice(const Options& o, const EngineConfig& cfg) {
  require_file(o.cloud, "cloud");
  const PointCloud raw = load_cloud_file(*o.cloud);
  spdlog::info("loaded {} points from {}", raw.size(), o.cloud->string());
  auto lattice = std::make_shared<const VoxelLattice>(build_lattice(raw, cfg.lattice, cfg.transforms));
  spdlog::info("lattice: {} active voxels, {} points outside", lattice->size(), lattice->discarded());
  return lattice;
}

inline TraceFormat format_for(const std::filesystem::path& p) {
  return p.extension() == ".jsonl" ? TraceFormat::Jsonl : TraceFormat::Csv;
}

/// Writes via `fn(stream)` to `path`, or to `fallback` when no path is given.
template <class Fn>
void emit(const std::optional<std::filesystem::path>& path, std::ostream& fallback, Fn&& fn) {
  if (!path) return fn(fallback);
  std::ofstream file(*path, std::ios::binary);
  if (!file) throw Error("cannot write " + path->string());
  fn(file);
  file.flush();
  if (!file) throw Error("failed writing " + path->string());
}

inline nlohmann::ordered_json to_json(const TimingStats& s) {
  return {{"ticks", s.ticks},       {"mean_us", s.mean_us},   {"p99_us", s.p99_us},
          {"max_us", s.max_us},     {"overruns", s.overruns}, {"normal_mean_us", s.normal_mean_us}};
}

/// HIP path for benchmarking when none is given: corner to corner through
/// the active means' bounding box.
inline ScriptedTrajectory diagonal_sweep(const VoxelLattice& lattice, std::int64_t ticks) {
  Point3 lo = lattice.voxels().front().mean, hi = lo;
  for (const auto& v : lattice.voxels()) {
    lo = {std::min(lo.x, v.mean.x), std::min(lo.y, v.mean.y), std::min(lo.z, v.mean.z)};
    hi = {std::max(hi.x, v.mean.x), std::max(hi.y, v.mean.y), std::max(hi.z, v.mean.z)};
  }
  return ScriptedTrajectory({{0, lo}, {std::max<std::int64_t>(ticks - 1, 1), hi}});
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const EmptyCloudError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const BindError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace detail

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    EngineConfig cfg = detail::load_config(o);
    detail::require_file(o.trajectory, "trajectory");
    if (!o.out) throw ConfigError("missing --out");
    if (o.ticks) cfg.session.max_ticks = *o.ticks;
    cfg.validate();
    const auto trajectory = detail::load_trajectory(*o.trajectory);
    auto lattice = detail::load_lattice(o, cfg);
    World world = make_world(cfg, std::move(lattice), HipSource::scripted(trajectory));
    const RunResult result = run_loop(cfg.session, world);
    detail::emit(o.out, out, [&](std::ostream& s) { write_trace(result.trace, detail::format_for(*o.out), s); });
    spdlog::info("wrote {} snapshots to {}", result.trace.size(), o.out->string());
    return int{kOk};
  });
}

inline int cmd_validate_sphere(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const EngineConfig cfg = detail::load_config(o);
    const ValidationReport report = run_sphere_validation(cfg, o.scale);
    const auto text = to_json(report).dump(2);
    if (o.out) detail::emit(o.out, out, [&](std::ostream& s) { s << text << '\n'; });
    out << text << '\n';
    if (!report.rms_ok()) {
      err << "rms relative error " << report.errors.rms_rel_err << " exceeds bound " << report.rms_bound << '\n';
      return int{kToleranceFailure};
    }
    return int{kOk};
  });
}

inline int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    EngineConfig cfg = detail::load_config(o);
    if (o.ticks) cfg.session.max_ticks = *o.ticks;
    cfg.session.mode = LoopMode::AsFastAsPossible;
    cfg.validate();
    auto lattice = detail::load_lattice(o, cfg);
    std::optional<ScriptedTrajectory> path;
    if (o.trajectory) {
      detail::require_file(o.trajectory, "trajectory");
      path = detail::load_trajectory(*o.trajectory);
    } else {
      path = detail::diagonal_sweep(*lattice, cfg.session.max_ticks);
    }
    const std::size_t active = lattice->size();
    World world = make_world(cfg, std::move(lattice), HipSource::scripted(*path));
    const RunResult result = run_loop(cfg.session, world);
    auto j = detail::to_json(result.stats);
    j["active_voxels"] = active;
    out << j.dump() << '\n';
    return int{kOk};
  });
}

inline int cmd_resample_info(const Options& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const EngineConfig cfg = detail::load_config(o);
    detail::require_file(o.cloud, "cloud");
    const PointCloud raw = load_cloud_file(*o.cloud);
    const VoxelLattice lattice = build_lattice(raw, cfg.lattice, cfg.transforms);
    std::size_t max_count = 0;
    for (const auto& v : lattice.voxels()) max_count = std::max<std::size_t>(max_count, v.count);
    const auto& lc = lattice.config();
    const double cells = static_cast<double>(lc.dims[0]) * lc.dims[1] * lc.dims[2];
    nlohmann::ordered_json j;
    j["points"] = raw.size();
    j["active_voxels"] = lattice.size();
    j["discarded"] = lattice.discarded();
    j["occupancy"] = static_cast<double>(lattice.size()) / cells;
    j["mean_points_per_voxel"] =
        static_cast<double>(raw.size() - lattice.discarded()) / static_cast<double>(lattice.size());
    j["max_points_per_voxel"] = max_count;
    j["dims"] = {lc.dims[0], lc.dims[1], lc.dims[2]};
    j["spacing_m"] = lc.spacing;
    out << j.dump(2) << '\n';
    return int{kOk};
  });
}

/// Runs until SIGINT/SIGTERM or until `stop` becomes true.
inline int cmd_serve(const Options& o, std::ostream& out, std::ostream& err,
                     const std::atomic<bool>* stop = nullptr) {
  return detail::guarded(err, [&] {
    const EngineConfig cfg = detail::load_config(o);
    detail::require_file(o.cloud, "cloud");
    const auto endpoint = parse_bind_address(o.bind);
    PointCloud raw = load_cloud_file(*o.cloud);

    boost::asio::io_context io;
    BridgeServer server(io, endpoint);
    LiveSession session(cfg, std::move(raw), server.callbacks());
    server.attach(session);
    server.start();
    session.start();

    const auto shutdown = [&] {
      session.stop();
      server.stop();
      io.stop();
    };
    boost::asio::signal_set signals(io, SIGINT, SIGTERM);
    signals.async_wait([&](const boost::system::error_code& ec, int) {
      if (!ec) shutdown();
    });
    std::optional<boost::asio::steady_timer> poll;
    std::function<void()> watch;
    if (stop) {
      poll.emplace(io);
      watch = [&] {
        poll->expires_after(std::chrono::milliseconds(20));
        poll->async_wait([&](const boost::system::error_code& ec) {
          if (ec) return;
          if (stop->load()) return shutdown();
          watch();
        });
      };
      watch();
    }
    const auto bound = server.local_endpoint();
    out << "listening on ws://" << bound.address().to_string() << ":" << bound.port() << '\n' << std::flush;
    spdlog::info("serving {} active voxels", session.lattice_view().lattice->size());
    io.run();
    session.stop();
    spdlog::info("stopped after {} ticks, {} overruns", session.ticks(), session.overruns());
    return int{kOk};
  });
}

/// Maps ENGINE_LOG (trace, debug, info, warn, error, off) onto spdlog.
inline void configure_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("ENGINE_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace haptic::cli
