#include <cmath>
#include <numbers>

#include "doctest.h"
#include "traylab/errors.hpp"
#include "traylab/physics.hpp"

using namespace traylab;

namespace {

const PhysicsParams kBottle{0.1, 0.2, 0.3, 5.7, 20.0};
const PhysicsParams kMartini{0.4, 0.3, 0.5, 6.0, 10.0};
const PhysicsParams kWine{0.6, 0.1, 0.2, 3.0, 4.0};

SceneLayout three_objects() {
  return {{{1, ObjectClass::bottle, {1, 3}, Color::red},
           {2, ObjectClass::martini_glass, {1, 2}, Color::blue},
           {3, ObjectClass::wine_glass, {1, 1}, Color::green}}};
}

ClassParamMap three_params() {
  return {{ObjectClass::bottle, kBottle}, {ObjectClass::martini_glass, kMartini}, {ObjectClass::wine_glass, kWine}};
}

SceneSpec pushed_scene(double speed) {
  return build_scene(three_objects(), three_params(), Vec2{-speed, -speed});
}

Trajectory line(int id, std::vector<Point3> pts) { return {id, ObjectClass::bottle, std::move(pts)}; }

}  // namespace

TEST_CASE("zero pusher velocity leaves everything but time unchanged") {
  const SceneSpec spec = pushed_scene(0.0);
  const SimConfig cfg;
  const SimState s0 = initial_state(spec);
  SimState s = s0;
  for (int k = 0; k < 50; ++k) s = step(s, spec, cfg);
  CHECK(s.time == doctest::Approx(0.5));
  s.time = s0.time;
  CHECK(s == s0);
}

TEST_CASE("first contact happens at the closed-form step") {
  const double s0 = 4.8 * std::numbers::sqrt2;
  const SceneSpec spec = pushed_scene(4.8);
  const SimConfig cfg;
  const double a = spec.tray.ground_friction * cfg.gravity;
  const double gap = std::hypot(3.0, 3.0) - (spec.tray.radius + spec.pusher.radius);
  int expected = 0;
  for (int n = 1; n < 1000; ++n) {
    const double traveled = n * cfg.dt * s0 - a * cfg.dt * cfg.dt * n * (n + 1) / 2.0;
    if (traveled >= gap) {
      expected = n;
      break;
    }
  }
  REQUIRE(expected > 0);
  SimState s = initial_state(spec);
  int first = 0;
  for (int n = 1; n <= cfg.n_steps && first == 0; ++n) {
    s = step(s, spec, cfg);
    if (s.impacted) first = n;
  }
  CHECK(first == expected);
  CHECK(s.impact_direction.x == doctest::Approx(-std::numbers::sqrt2 / 2.0));
  CHECK(s.impact_direction.y == doctest::Approx(-std::numbers::sqrt2 / 2.0));
}

TEST_CASE("inelastic impact conserves momentum along the line of centers") {
  const SceneSpec spec = pushed_scene(4.8);
  const SimConfig cfg;
  SimState prev = initial_state(spec);
  SimState s = prev;
  while (!s.impacted) {
    prev = s;
    s = step(s, spec, cfg);
  }
  const double mt = spec.tray.mass + 20.0 + 10.0 + 4.0;
  const double mp = spec.pusher.mass;
  // Speed just before contact, after this step's deceleration.
  const double vp = norm(prev.pusher_velocity) - spec.tray.ground_friction * cfg.gravity * cfg.dt;
  const double v_common = mp * vp / (mp + mt);
  CHECK(norm(s.tray_velocity) == doctest::Approx(v_common).epsilon(1e-12));
  CHECK(norm(s.pusher_velocity) == doctest::Approx(v_common).epsilon(1e-12));
}

TEST_CASE("tray speed never increases after the impact and the pusher never penetrates") {
  for (double speed : {2.0, 3.5, 4.8, 6.0}) {
    const SceneSpec spec = pushed_scene(speed);
    const SimConfig cfg;
    SimState s = initial_state(spec);
    double last_speed = -1.0;
    for (int k = 0; k < cfg.n_steps; ++k) {
      s = step(s, spec, cfg);
      CHECK(norm(s.tray_position - s.pusher_position) >= spec.tray.radius + spec.pusher.radius - 1e-9);
      if (s.impacted) {
        const double v = norm(s.tray_velocity);
        if (last_speed >= 0.0) CHECK(v <= last_speed + 1e-12);
        last_speed = v;
      }
    }
  }
}

TEST_CASE("center of gravity height is h cos(tilt)") {
  const SceneSpec spec = pushed_scene(4.8);
  const SimResult r = run_simulation(spec, SimConfig{});
  for (std::size_t i = 0; i < spec.instances.size(); ++i) {
    const double h = class_info(spec.instances[i].cls).cog_height;
    const Point3 p = center_of_gravity(r.final_state, spec, i);
    CHECK(p.z == doctest::Approx(h * std::cos(r.final_state.objects[i].tilt)));
  }
  const Point3 start = r.trajectories.objects[0].points.front();
  CHECK(start.x == doctest::Approx(-0.9));
  CHECK(start.y == doctest::Approx(-0.9));
  CHECK(start.z == doctest::Approx(1.1));
}

TEST_CASE("simulation is deterministic and has n_steps + 1 samples") {
  const SceneSpec spec = pushed_scene(5.0);
  const SimConfig cfg;
  const SimResult a = run_simulation(spec, cfg);
  const SimResult b = run_simulation(spec, cfg);
  CHECK(a.trajectories == b.trajectories);
  CHECK(a.stability == b.stability);
  for (const auto& t : a.trajectories.objects) CHECK(t.points.size() == 201);
}

TEST_CASE("a toppled object stays toppled") {
  const SceneSpec spec = pushed_scene(6.0);
  const SimConfig cfg;
  SimState s = initial_state(spec);
  std::vector<bool> was(spec.instances.size(), false);
  bool any = false;
  for (int k = 0; k < 400; ++k) {
    s = step(s, spec, cfg);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      if (was[i]) CHECK(s.objects[i].toppled);
      was[i] = s.objects[i].toppled;
      any = any || was[i];
    }
  }
  CHECK(any);
}

TEST_CASE("stability uses a strict tilt threshold and the tray boundary") {
  SceneSpec spec = pushed_scene(0.0);
  SimState s = initial_state(spec);
  const double deg = std::numbers::pi / 180.0;
  s.objects[0].tilt = 30.0 * deg;
  s.objects[1].tilt = 45.0 * deg;
  s.objects[2].tilt = -50.0 * deg;
  auto r = stability_report(s, spec, 45.0);
  CHECK(r.stable.at(1));
  CHECK_FALSE(r.stable.at(2));
  CHECK_FALSE(r.stable.at(3));
  s.objects[0].off_tray = true;
  r = stability_report(s, spec, 45.0);
  CHECK_FALSE(r.stable.at(1));
}

TEST_CASE("raising the threshold never makes an object less stable") {
  const SimResult r = run_simulation(pushed_scene(5.5), SimConfig{});
  const SceneSpec spec = pushed_scene(5.5);
  for (double lo = 10.0; lo < 80.0; lo += 5.0) {
    const auto a = stability_report(r.final_state, spec, lo);
    const auto b = stability_report(r.final_state, spec, lo + 5.0);
    for (const auto& [id, stable] : a.stable) {
      if (stable) CHECK(b.stable.at(id));
    }
  }
}

TEST_CASE("trajectory error is the stacked norm at every stride-th sample") {
  TrajectorySet ref{{line(1, {{0, 0, 0}, {9, 9, 9}, {0, 0, 0}}), line(2, {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}})}};
  TrajectorySet pred{{line(1, {{3, 0, 0}, {0, 0, 0}, {0, 4, 0}}), line(2, {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}})}};
  const TrajectoryError e = trajectory_error(pred, ref, 2);
  CHECK(e.per_object.at(1) == doctest::Approx(5.0));
  CHECK(e.per_object.at(2) == 0.0);
  CHECK(e.mean == doctest::Approx(2.5));
}

TEST_CASE("trajectory error mean over objects") {
  TrajectorySet ref{{line(1, {{0, 0, 0}}), line(2, {{0, 0, 0}})}};
  TrajectorySet pred{{line(2, {{0, 0, 3}}), line(1, {{1, 0, 0}})}};
  const TrajectoryError e = trajectory_error(pred, ref, 20);
  CHECK(e.per_object.at(1) == 1.0);
  CHECK(e.per_object.at(2) == 3.0);
  CHECK(e.mean == 2.0);
}

TEST_CASE("trajectory error rejects mismatched inputs") {
  TrajectorySet ref{{line(1, {{0, 0, 0}})}};
  CHECK_THROWS_AS(trajectory_error(ref, ref, 0), StructuralError);
  CHECK_THROWS_AS(trajectory_error(TrajectorySet{{line(2, {{0, 0, 0}})}}, ref, 1), StructuralError);
  CHECK_THROWS_AS(trajectory_error(TrajectorySet{{line(1, {{0, 0, 0}, {0, 0, 0}})}}, ref, 1), StructuralError);
  CHECK_THROWS_AS(trajectory_error(TrajectorySet{}, ref, 1), StructuralError);
}

TEST_CASE("scenes need parameters for every class and valid values") {
  ClassParamMap partial{{ObjectClass::bottle, kBottle}};
  CHECK_THROWS_AS(build_scene(three_objects(), partial, {}), StructuralError);
  ClassParamMap bad = three_params();
  bad[ObjectClass::bottle].sliding_friction = 0.0;
  CHECK_THROWS_AS(validate(build_scene(three_objects(), bad, {})), StructuralError);
  CHECK_NOTHROW(validate(build_scene(three_objects(), three_params(), {})));
}

TEST_CASE("a faster push disturbs objects more") {
  const SimResult slow = run_simulation(pushed_scene(2.0), SimConfig{});
  const SimResult fast = run_simulation(pushed_scene(6.0), SimConfig{});
  double slow_tilt = 0.0, fast_tilt = 0.0;
  for (const auto& o : slow.final_state.objects) slow_tilt = std::max(slow_tilt, std::abs(o.tilt));
  for (const auto& o : fast.final_state.objects) fast_tilt = std::max(fast_tilt, std::abs(o.tilt));
  CHECK(fast_tilt >= slow_tilt);
  CHECK(norm(fast.final_state.tray_position) > norm(slow.final_state.tray_position));
}
