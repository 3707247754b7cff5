#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <sstream>
#include <thread>

#include "haptic/config.hpp"
#include "haptic/session.hpp"
#include "haptic/trace.hpp"
#include "support.hpp"

using namespace haptic;

namespace {

constexpr double kR = 0.004;
constexpr double kS = kR / 4;

struct Plane {
  EngineConfig cfg = test::plane_config(kR, kS);
  PointCloud raw = test::grid_plane(kS, 40);
  std::shared_ptr<const VoxelLattice> lattice = test::share(resample_to_lattice(raw, cfg.lattice));
};

ScriptedTrajectory approach_press_slide() {
  return ScriptedTrajectory({{0, {0.0003, 0.0002, 3 * kR}},
                             {1000, {0.0003, 0.0002, -kR}},
                             {2000, {0.0003, 0.0002, -kR}},
                             {4000, {0.01, 0.0002, -kR}}});
}

// Contact state expected from the raw plane samples alone.
Contact classify(const PointCloud& raw, const Point3& center, double radius, const Point3& hip,
                 const ProxyParams& params) {
  Vec3 v_n{};
  for (const auto& p : raw.points()) {
    const Vec3 d = center - p;
    const double len = norm(d);
    if (len < radius && len > 1e-12) v_n += d * ((radius - len) / len);
  }
  const Vec3 v_h = hip - center;
  const double zeta = params.zeta(radius);
  const bool behind = dot(v_n, v_h) < 0.0;
  if (params.penetration_rule == PenetrationRule::Sign && behind) return Contact::Penetrating;
  if (norm(v_n) > zeta) return behind ? Contact::Penetrating : Contact::Surface;
  return Contact::Free;
}

Snapshot sample(std::int64_t tick) {
  Snapshot s;
  s.tick = tick;
  s.hip = {0.1 * tick, -0.25, 1.0 / 3.0};
  s.proxy_center = {1e-9, 2.5e-300, -7.0};
  s.proxy_radius = 0.0123456789;
  s.contact = tick % 2 ? Contact::Penetrating : Contact::Surface;
  s.force = {-0.5, 0.0, 3.0e10};
  s.depth_mag = 0.002;
  s.friction_scale = 0.8;
  s.sigma_hat = 0.00123;
  return s;
}

}  // namespace

TEST(ScriptedTrajectory, InterpolatesAndHolds) {
  const ScriptedTrajectory t({{10, {0, 0, 0}}, {20, {1, 2, 3}}, {30, {1, 2, 5}}});
  EXPECT_EQ(t.position_at(0), (Point3{0, 0, 0}));
  EXPECT_EQ(t.position_at(15), (Point3{0.5, 1, 1.5}));
  EXPECT_EQ(t.position_at(20), (Point3{1, 2, 3}));
  EXPECT_EQ(t.position_at(25), (Point3{1, 2, 4}));
  EXPECT_EQ(t.position_at(99), (Point3{1, 2, 5}));
}

TEST(ScriptedTrajectory, RejectsBadKeyframes) {
  EXPECT_THROW(ScriptedTrajectory({}), ConfigError);
  EXPECT_THROW(ScriptedTrajectory({{5, {}}, {5, {}}}), ConfigError);
  EXPECT_THROW(ScriptedTrajectory({{5, {}}, {3, {}}}), ConfigError);
}

TEST(ScriptedTrajectory, CsvParsing) {
  std::istringstream ok("tick,x,y,z\n0,0,0,0.1\n# pause\n\n100, 0.01, 0, -0.002\n");
  const auto t = load_trajectory_csv(ok);
  ASSERT_EQ(t.keyframes().size(), 2u);
  EXPECT_EQ(t.last_tick(), 100);
  EXPECT_EQ(t.position_at(100), (Point3{0.01, 0, -0.002}));

  std::istringstream short_row("0,0,0,0\n10,1,2\n");
  try {
    load_trajectory_csv(short_row);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad_tick("0,0,0,0\n1.5,1,2,3\n");
  EXPECT_THROW(load_trajectory_csv(bad_tick), ParseError);
  std::istringstream unordered("10,0,0,0\n5,1,2,3\n");
  EXPECT_THROW(load_trajectory_csv(unordered), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(load_trajectory_csv(empty), ParseError);
}

TEST(HipMailbox, ReaderNeverSeesTornPosition) {
  auto box = std::make_shared<HipMailbox>(Point3{0, 0, 0});
  std::atomic<bool> done{false};
  std::thread writer([&] {
    for (int n = 1; n <= 200000; ++n) {
      const double v = n;
      box->store({v, 2 * v, 3 * v});
    }
    done = true;
  });
  std::size_t reads = 0;
  double last = 0.0;
  while (!done || reads < 1000) {
    const Point3 p = box->load();
    ASSERT_EQ(p.y, 2 * p.x);
    ASSERT_EQ(p.z, 3 * p.x);
    ASSERT_GE(p.x, last);
    last = p.x;
    ++reads;
  }
  writer.join();
  EXPECT_EQ(box->load().x, 200000.0);
}

TEST(StepOnce, StationaryInFreeSpace) {
  Plane plane;
  World w = make_world(plane.cfg, plane.lattice, HipSource::scripted(ScriptedTrajectory(std::vector<Keyframe>{{0, {0, 0, 0.05}}})));
  for (int t = 0; t < 10; ++t) {
    const auto r = step_once(w, t);
    EXPECT_EQ(r.snapshot.force, (Vec3{}));
    EXPECT_EQ(r.snapshot.contact, Contact::Free);
    EXPECT_EQ(r.snapshot.proxy_center, (Point3{0, 0, 0.05}));
  }
}

TEST(StepOnce, ContactStatesMatchBruteForcePlane) {
  Plane plane;
  World w = make_world(plane.cfg, plane.lattice, HipSource::scripted(approach_press_slide()));
  for (int t = 0; t < 4000; ++t) {
    const Point3 before = w.proxy.center;
    update_radius(w);
    const double radius = w.proxy.radius;
    const auto r = step_once(w, t);
    ASSERT_EQ(r.snapshot.contact, classify(plane.raw, before, radius, r.snapshot.hip, w.proxy_params)) << t;
  }
}

TEST(StepOnce, ApproachPressSlideShowsFreeSurfacePenetrating) {
  Plane plane;
  World w = make_world(plane.cfg, plane.lattice, HipSource::scripted(approach_press_slide()));
  std::vector<Contact> sequence{Contact::Free};
  for (int t = 0; t < 4000; ++t) {
    const Contact c = step_once(w, t).snapshot.contact;
    if (c != sequence.back()) sequence.push_back(c);
  }
  auto first = [&](Contact c) { return std::find(sequence.begin(), sequence.end(), c); };
  ASSERT_NE(first(Contact::Surface), sequence.end()) << "no Surface tick in the trace";
  ASSERT_NE(first(Contact::Penetrating), sequence.end());
  EXPECT_LT(first(Contact::Free), first(Contact::Surface));
  EXPECT_LT(first(Contact::Surface), first(Contact::Penetrating));
}

TEST(StepOnce, ForceOnlyWhenPenetrating) {
  Plane plane;
  World w = make_world(plane.cfg, plane.lattice, HipSource::scripted(approach_press_slide()));
  bool pressed = false;
  for (int t = 0; t < 4000; ++t) {
    const auto r = step_once(w, t);
    if (r.snapshot.contact != Contact::Penetrating) {
      EXPECT_EQ(r.snapshot.force, (Vec3{})) << t;
    } else if (norm(r.snapshot.force) > 0.0) {
      pressed = true;
      EXPECT_GT(r.snapshot.force.z, 0.0) << t;
    }
  }
  EXPECT_TRUE(pressed);
}

TEST(RunLoop, ZeroTicks) {
  Plane plane;
  World w = make_world(plane.cfg, plane.lattice, HipSource::scripted(approach_press_slide()));
  SessionConfig sc;
  sc.max_ticks = 0;
  const auto r = run_loop(sc, w);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.stats.ticks, 0);
  EXPECT_EQ(r.stats.mean_us, 0.0);
  EXPECT_EQ(r.stats.p99_us, 0.0);
  EXPECT_EQ(r.stats.max_us, 0.0);
  EXPECT_EQ(r.stats.overruns, 0);
}

TEST(RunLoop, RealtimePacing) {
  Plane plane;
  World w = make_world(plane.cfg, plane.lattice, HipSource::scripted(approach_press_slide()));
  SessionConfig sc;
  sc.mode = LoopMode::Realtime;
  sc.rate_hz = 1000;
  sc.max_ticks = 2000;
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_loop(sc, w);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_NEAR(wall, 2.0, 0.1);
  EXPECT_EQ(r.stats.ticks, 2000);
  EXPECT_LE(r.stats.max_us, 1e6 * wall);
}

TEST(RunLoop, DecimationKeepsFinalTick) {
  Plane plane;
  for (int k : {1, 3, 7, 1000, 5000}) {
    World w = make_world(plane.cfg, plane.lattice, HipSource::scripted(approach_press_slide()));
    SessionConfig sc;
    sc.max_ticks = 1001;
    sc.snapshot_decimation = k;
    const auto r = run_loop(sc, w);
    ASSERT_FALSE(r.trace.empty());
    EXPECT_EQ(r.trace.back().tick, 1000) << k;
    EXPECT_EQ(r.trace.front().tick, 0);
    for (std::size_t n = 0; n + 1 < r.trace.size(); ++n) EXPECT_EQ(r.trace[n].tick % k, 0);
    EXPECT_EQ(r.stats.ticks, 1001);
  }
}

TEST(RunLoop, StatsOrdered) {
  Plane plane;
  World w = make_world(plane.cfg, plane.lattice, HipSource::scripted(approach_press_slide()));
  SessionConfig sc;
  sc.max_ticks = 3000;
  const auto r = run_loop(sc, w);
  EXPECT_GT(r.stats.mean_us, 0.0);
  EXPECT_LE(r.stats.p99_us, r.stats.max_us);
  EXPECT_LE(r.stats.normal_mean_us, r.stats.mean_us);
}

TEST(TimingRecorder, OverrunsCountedExactly) {
  using std::chrono::microseconds;
  TimingRecorder rec(microseconds(1000));
  const int durations[] = {10, 999, 1000, 1001, 5000, 20, 1500};
  for (int d : durations) rec.record(microseconds(d), microseconds(1));
  const auto s = rec.finish();
  EXPECT_EQ(s.ticks, 7);
  EXPECT_EQ(s.overruns, 3);
  EXPECT_DOUBLE_EQ(s.max_us, 5000.0);
  EXPECT_DOUBLE_EQ(s.p99_us, 5000.0);
  EXPECT_NEAR(s.mean_us, (10 + 999 + 1000 + 1001 + 5000 + 20 + 1500) / 7.0, 1e-9);
  EXPECT_DOUBLE_EQ(s.normal_mean_us, 1.0);
}

TEST(TimingRecorder, NinetyNinthPercentileIsNearestRank) {
  using std::chrono::microseconds;
  TimingRecorder rec(microseconds(1000));
  for (int d = 200; d >= 1; --d) rec.record(microseconds(d), microseconds(0));
  const auto s = rec.finish();
  EXPECT_DOUBLE_EQ(s.p99_us, 198.0);
  EXPECT_DOUBLE_EQ(s.mean_us, 100.5);
}

TEST(SessionConfigValidation, Invariants) {
  SessionConfig sc;
  EXPECT_NO_THROW(sc.validate());
  sc.rate_hz = 0;
  EXPECT_THROW(sc.validate(), ConfigError);
  sc = SessionConfig{};
  sc.snapshot_decimation = 0;
  EXPECT_THROW(sc.validate(), ConfigError);
  sc = SessionConfig{};
  sc.max_ticks = -1;
  EXPECT_THROW(sc.validate(), ConfigError);
}

TEST(WriteTrace, EmptyCsvIsHeaderOnly) {
  std::ostringstream out;
  write_trace({}, TraceFormat::Csv, out);
  EXPECT_EQ(out.str(),
            "tick,hip_x,hip_y,hip_z,proxy_x,proxy_y,proxy_z,radius,contact,force_x,force_y,force_z,depth,"
            "friction_scale,sigma_hat\n");
}

TEST(WriteTrace, OneSnapshotTwoLines) {
  std::ostringstream out;
  const std::vector<Snapshot> one{sample(4)};
  write_trace(one, TraceFormat::Csv, out);
  const auto text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_NE(text.find("\n4,0.4,-0.25,"), std::string::npos);
  EXPECT_NE(text.find(",surface,"), std::string::npos);
}

TEST(WriteTrace, JsonlRoundTrip) {
  std::vector<Snapshot> trace;
  for (int t = 0; t < 25; ++t) trace.push_back(sample(t));
  std::stringstream io;
  write_trace(trace, TraceFormat::Jsonl, io);
  EXPECT_EQ(read_trace_jsonl(io), trace);
}

TEST(WriteTrace, JsonlRejectsGarbage) {
  std::istringstream in(to_json(sample(1)).dump() + "\n{not json\n");
  try {
    read_trace_jsonl(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(WriteTrace, SinkFailurePropagates) {
  std::ostringstream out;
  out.setstate(std::ios::badbit);
  const std::vector<Snapshot> one{sample(0)};
  EXPECT_THROW(write_trace(one, TraceFormat::Csv, out), Error);
}

TEST(Determinism, IdenticalRunsGiveIdenticalTraces) {
  Plane plane;
  plane.cfg.friction = {0.3, 0.2, true};
  auto run = [&] {
    World w = make_world(plane.cfg, plane.lattice, HipSource::scripted(approach_press_slide()));
    SessionConfig sc;
    sc.max_ticks = 4000;
    std::ostringstream csv;
    write_trace(run_loop(sc, w).trace, TraceFormat::Csv, csv);
    return csv.str();
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_NE(a.find("penetrating"), std::string::npos);
}
