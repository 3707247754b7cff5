#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "haptic/config.hpp"
#include "haptic/proxy.hpp"
#include "haptic/session.hpp"
#include "support.hpp"

using namespace haptic;

namespace {

constexpr double kR = 0.004;
constexpr double kS = kR / 4;

struct Wall {
  EngineConfig cfg = test::plane_config(kR, kS);
  std::shared_ptr<const VoxelLattice> lattice =
      test::share(resample_to_lattice(test::grid_plane(kS, 40), cfg.lattice));

  World world(std::vector<Keyframe> keys, Point3 start) const {
    World w = make_world(cfg, lattice, HipSource::scripted(ScriptedTrajectory(std::move(keys))));
    w.proxy.center = start;
    return w;
  }
};

VoxelLattice single_point(const Point3& p) {
  return resample_to_lattice(PointCloud({p}), test::centered_lattice(0.001, 100));
}

}  // namespace

TEST(Overshoot, HandEvaluated) {
  EXPECT_EQ(*compute_overshoot({0, 0, 0}, 1.0, {0.5, 0, 0}), (Vec3{-0.5, 0, 0}));
  const Vec3 d = *compute_overshoot({0, 0, 0}, 0.1, {0, 0.05, 0});
  EXPECT_NEAR(d.x, 0.0, 1e-15);
  EXPECT_NEAR(d.y, -0.05, 1e-15);
  EXPECT_NEAR(d.z, 0.0, 1e-15);
}

TEST(Overshoot, ZeroOnTheBoundary) { EXPECT_EQ(*compute_overshoot({0, 0, 0}, 1.0, {0, 0, 1}), (Vec3{})); }

TEST(Overshoot, DegeneratePointHasNoDirection) {
  EXPECT_FALSE(compute_overshoot({1, 1, 1}, 1.0, {1, 1, 1}).has_value());
}

TEST(Overshoot, MagnitudeWithinRadiusAndPointsToCenter) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const Point3 c{0.1, -0.2, 0.3};
  for (int n = 0; n < 200; ++n) {
    const Point3 p = c + Vec3{u(rng), u(rng), u(rng)};
    if (norm(p - c) >= 0.8) continue;
    const Vec3 d = *compute_overshoot(c, 0.8, p);
    EXPECT_GT(norm(d), 0.0);
    EXPECT_LE(norm(d), 0.8);
    EXPECT_GT(dot(d, c - p), 0.0);
  }
}

TEST(SinkingNormal, EmptyIsZero) { EXPECT_EQ(compute_sinking_normal({0, 0, 0}, 1.0, {}), (Vec3{})); }

TEST(SinkingNormal, SymmetricPairCancelsSideways) {
  const std::vector<Point3> pts{{0.5, 0.1, 0}, {0.5, -0.1, 0}};
  const Vec3 v = compute_sinking_normal({0, 0, 0}, 1.0, pts);
  EXPECT_LT(v.x, 0.0);
  EXPECT_NEAR(v.y, 0.0, 1e-12);
  EXPECT_EQ(v.z, 0.0);
}

TEST(SinkingNormal, SumOfIndividualOvershoots) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  const Point3 c{0.01, 0.02, 0.03};
  std::vector<Point3> pts;
  while (pts.size() < 3) {
    const Point3 p = c + Vec3{u(rng), u(rng), u(rng)};
    if (norm(p - c) < 0.05) pts.push_back(p);
  }
  Vec3 expected{};
  for (const auto& p : pts) {
    const Vec3 d = c - p;
    expected += d * ((0.05 - norm(d)) / norm(d));
  }
  const Vec3 got = compute_sinking_normal(c, 0.05, pts);
  EXPECT_NEAR(got.x, expected.x, 1e-15);
  EXPECT_NEAR(got.y, expected.y, 1e-15);
  EXPECT_NEAR(got.z, expected.z, 1e-15);
}

TEST(SinkingNormal, SkipsDegeneratePoint) {
  const std::vector<Point3> pts{{0, 0, 0}, {0.5, 0, 0}};
  EXPECT_EQ(compute_sinking_normal({0, 0, 0}, 1.0, pts), (Vec3{-0.5, 0, 0}));
}

TEST(Tangent, HandEvaluatedBothModes) {
  EXPECT_EQ(*compute_tangent({0, 2, 0}, {1, -1, 0}, TangentMode::PaperLiteral), (Vec3{1, 1, 0}));
  EXPECT_EQ(*compute_tangent({0, 2, 0}, {1, -1, 0}, TangentMode::Orthogonalized), (Vec3{1, 0, 0}));
}

TEST(Tangent, ParallelIsZeroWhenOrthogonalized) {
  const Vec3 t = *compute_tangent({0, 0, 3}, {0, 0, -5}, TangentMode::Orthogonalized);
  EXPECT_EQ(t, (Vec3{}));
}

TEST(Tangent, UndefinedForZeroNormal) {
  EXPECT_FALSE(compute_tangent({}, {1, 0, 0}, TangentMode::PaperLiteral).has_value());
}

TEST(TangentProperty, EachModeKeepsItsOwnInvariant) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int n = 0; n < 500; ++n) {
    const Vec3 v_n{u(rng), u(rng), u(rng)};
    const Vec3 v_h{u(rng), u(rng), u(rng)};
    if (norm(v_n) < 1e-3) continue;
    const Vec3 n_hat = v_n / norm(v_n);
    const Vec3 ortho = *compute_tangent(v_n, v_h, TangentMode::Orthogonalized);
    EXPECT_NEAR(dot(ortho, n_hat), 0.0, 1e-10);
    const Vec3 literal = *compute_tangent(v_n, v_h, TangentMode::PaperLiteral);
    EXPECT_NEAR(dot(literal, n_hat), dot(n_hat, v_h) * (1.0 - norm(v_n)), 1e-12);
  }
}

TEST(ProxyStep, FreeSpaceCollocatedIsFixedPoint) {
  const auto l = single_point({0.04, 0.04, 0.04});
  ProxyState s;
  s.center = {0.01, 0.0, -0.02};
  s.radius = 0.003;
  const ProxyState next = proxy_step(s, {s.center}, l, ProxyParams{}, 1.0);
  EXPECT_EQ(next.center, s.center);
  EXPECT_EQ(next.contact, Contact::Free);
  EXPECT_EQ(next.v_n, (Vec3{}));
  EXPECT_FALSE(next.n_hat.has_value());
}

TEST(ProxyStep, SurfaceMovesByNormalGain) {
  const Point3 p{0, 0, -0.005};
  const auto l = single_point(p);
  ProxyState s;
  s.radius = 0.01;
  const ProxyParams params;
  const ProxyState next = proxy_step(s, {{0, 0, 0.001}}, l, params, 1.0);
  const Vec3 v_n = *compute_overshoot(s.center, s.radius, l.voxels()[0].mean);
  EXPECT_EQ(next.contact, Contact::Surface);
  EXPECT_EQ(next.center, s.center + v_n * 0.064);
  EXPECT_EQ(params.k_n, 0.064);
}

TEST(ProxyStep, PenetratingAddsTangentialSlide) {
  const auto l = single_point({0, 0, -0.005});
  ProxyState s;
  s.radius = 0.01;
  const ProxyParams params;
  const Point3 hip{0.004, 0.0, -0.02};
  const ProxyState next = proxy_step(s, {hip}, l, params, 1.0);
  const Vec3 v_n = *compute_overshoot(s.center, s.radius, l.voxels()[0].mean);
  const Vec3 v_t = *compute_tangent(v_n, hip - s.center, TangentMode::PaperLiteral);
  EXPECT_EQ(next.contact, Contact::Penetrating);
  EXPECT_EQ(next.v_t, v_t);
  EXPECT_EQ(next.center, s.center + (v_t * params.delta + v_n * params.k_n));
  const ProxyState stuck = proxy_step(s, {hip}, l, params, 0.0);
  EXPECT_EQ(stuck.center, s.center + v_n * params.k_n);
}

TEST(ProxyStep, FreeMovesByLatchGain) {
  const auto l = single_point({0.04, 0.04, 0.04});
  ProxyState s;
  s.radius = 0.003;
  const Point3 hip{0.001, 0.002, 0.0};
  const ProxyState next = proxy_step(s, {hip}, l, ProxyParams{}, 1.0);
  EXPECT_EQ(next.contact, Contact::Free);
  EXPECT_EQ(next.center, s.center + hip * 0.002);
}

TEST(ProxyStep, ShallowPenetrationUnderZetaGateTakesLatchStep) {
  // Point 0.0001 deep into a 0.01 proxy: |v_n| = 1e-4 < zeta = 5e-4.
  const auto l = single_point({0, 0, -0.0099});
  ProxyState s;
  s.radius = 0.01;
  ProxyParams params;
  const Point3 hip{0, 0, -0.02};
  const Vec3 v_n = *compute_overshoot(s.center, s.radius, l.voxels()[0].mean);
  ASSERT_LT(norm(v_n), params.zeta(s.radius));

  EXPECT_EQ(proxy_step(s, {hip}, l, params, 1.0).contact, Contact::Penetrating);
  params.penetration_rule = PenetrationRule::SignAndZeta;
  const ProxyState gated = proxy_step(s, {hip}, l, params, 1.0);
  EXPECT_EQ(gated.contact, Contact::Free);
  EXPECT_EQ(gated.center, s.center + (hip - s.center) * params.k_h);
}

TEST(ProxyStep, DisplacementIsCapped) {
  const auto l = single_point({0.04, 0.04, 0.04});
  ProxyState s;
  s.radius = 0.001;
  ProxyParams params;
  params.k_h = 0.5;
  const ProxyState next = proxy_step(s, {{1.0, 0, 0}}, l, params, 1.0);
  EXPECT_NEAR(norm(next.center - s.center), params.max_step_factor * s.radius, 1e-15);
}

TEST(ProxyProperty, SinglePointPushOutIncreasesDistance) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.009, 0.009);
  const auto cfg = test::centered_lattice(0.0005, 100);
  for (int n = 0; n < 200; ++n) {
    const Point3 p{u(rng), u(rng), u(rng)};
    const auto l = resample_to_lattice(PointCloud({p}), cfg);
    const Point3 mean = l.voxels()[0].mean;
    if (norm(mean) >= 0.009 || norm(mean) < 1e-4) continue;
    ProxyState s;
    s.radius = 0.01;
    const ProxyState next = proxy_step(s, {s.center}, l, ProxyParams{}, 1.0);
    ASSERT_EQ(next.contact, Contact::Surface);
    EXPECT_GT(norm(next.center - mean), norm(s.center - mean));
  }
}

TEST(ProxyProperty, NormalIsUnitWhenDefined) {
  std::mt19937_64 rng(8);
  const auto cfg = test::centered_lattice(0.001, 100);
  const auto l = resample_to_lattice(PointCloud(test::random_points(rng, 400, -0.02, 0.02)), cfg);
  std::uniform_real_distribution<double> u(-0.03, 0.03);
  for (int n = 0; n < 300; ++n) {
    ProxyState s;
    s.center = {u(rng), u(rng), u(rng)};
    s.radius = 0.004;
    const Point3 hip{u(rng), u(rng), u(rng)};
    const ProxyState next = proxy_step(s, {hip}, l, ProxyParams{}, 1.0);
    EXPECT_EQ(next.v_h, hip - s.center);
    EXPECT_EQ(next.n_hat.has_value(), norm(next.v_n) > 0.0);
    if (next.n_hat) EXPECT_NEAR(norm(*next.n_hat), 1.0, 1e-12);
  }
}

TEST(ProxyProperty, StepIsBitDeterministic) {
  std::mt19937_64 rng(15);
  const auto cfg = test::centered_lattice(0.001, 100);
  const auto l = resample_to_lattice(PointCloud(test::random_points(rng, 400, -0.02, 0.02)), cfg);
  ProxyState s;
  s.center = {0.001, -0.002, 0.003};
  s.radius = 0.006;
  for (auto mode : {TangentMode::PaperLiteral, TangentMode::Orthogonalized}) {
    ProxyParams params;
    params.tangent_mode = mode;
    const ProxyState a = proxy_step(s, {{0.01, 0.0, -0.01}}, l, params, 0.7);
    const ProxyState b = proxy_step(s, {{0.01, 0.0, -0.01}}, l, params, 0.7);
    EXPECT_EQ(a.center, b.center);
    EXPECT_EQ(a.v_t, b.v_t);
    EXPECT_EQ(a.contact, b.contact);
  }
}

TEST(WallConvergence, StaticHipInsideWall) {
  const Wall wall;
  const Point3 hip{0.0003, 0.0002, -2 * kR};
  World w = wall.world({{0, hip}}, {0.0003, 0.0002, 1.5 * kR});
  Point3 previous = w.proxy.center;
  double last_step = 0.0;
  for (int t = 0; t < 5000; ++t) {
    step_once(w, t);
    last_step = norm(w.proxy.center - previous);
    previous = w.proxy.center;
  }
  EXPECT_LT(last_step, 1e-7);
  EXPECT_LT(dot(w.proxy.v_n, w.proxy.v_h), 0.0);
  EXPECT_EQ(w.proxy.contact, Contact::Penetrating);
}

TEST(WallConvergence, SinkingBoundOnDensePlane) {
  const Wall wall;
  for (const Point3 xy : {Point3{0.0003, 0.0002, 0}, Point3{0, 0, 0}, Point3{kS / 2, kS / 2, 0}}) {
    World w = wall.world({{0, xy + Vec3{0, 0, -2 * kR}}}, xy + Vec3{0, 0, 1.5 * kR});
    for (int t = 0; t < 5000; ++t) step_once(w, t);
    const double zeta = w.proxy_params.zeta(w.proxy.radius);
    EXPECT_GE(w.proxy.center.z, w.proxy.radius - 2 * zeta);
    EXPECT_LE(w.proxy.center.z, w.proxy.radius + 2 * zeta);
  }
}

TEST(WallConvergence, DistanceToHipNonIncreasingWhileSliding) {
  const Wall wall;
  const Point3 a{0.0003, 0.0002, -2 * kR};
  for (double offset : {0.1, 0.5, 1.0, 3.0}) {
    const Point3 b = a + Vec3{offset * kR, 0, 0};
    World w = wall.world({{0, a}, {3000, a}, {3001, b}}, a + Vec3{0, 0, 3.5 * kR});
    for (int t = 0; t <= 3001; ++t) step_once(w, t);
    int penetrating = 0;
    double previous = 0.0;
    for (int t = 3002; t < 8000; ++t) {
      step_once(w, t);
      ASSERT_EQ(w.proxy.contact, Contact::Penetrating) << "tick " << t;
      const double d = norm(w.proxy.v_h);
      if (++penetrating > 50) EXPECT_LE(d, previous) << "offset " << offset << " tick " << t;
      previous = d;
    }
  }
}
