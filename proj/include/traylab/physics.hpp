#pragma once

// Deterministic pusher / tray / objects simulator.
//
// The model is staged rather than a general contact solver:
//   1. The pusher slides toward the tray, decelerating under ground friction.
//   2. At first rim contact a 1-D collision along the pusher->tray-center line
//      transfers momentum to the tray (effective mass = tray + all objects).
//   3. The tray then decelerates under ground friction until it stops.
//   4. Each object base is friction-coupled to the tray: when the acceleration
//      needed to follow the tray exceeds mu*g, the base slips at mu*g.
//   5. Each object tilts as a damped, sprung inverted pendulum about its base
//      edge, driven by the base acceleration along the impact direction.
//   6. Base discs collide pairwise (positional separation + inelastic impulse).
//   7. A base that leaves the tray disc is marked off-tray and is unstable.
//
// Every function here is pure over value types.

#include <cstddef>
#include <map>
#include <vector>

#include "traylab/catalog.hpp"

namespace traylab {

struct TraySpec {
  double radius = 1.8;
  double cog_height = 0.05;
  double ground_friction = 0.1;
  double mass = 0.5;
};

struct PusherSpec {
  Vec2 start{3.0, 3.0};
  double height = 0.05;
  double mass = 20.0;
  double radius = 0.25;
  Vec2 velocity{};
};

struct InstanceSpec {
  int id = 0;
  ObjectClass cls = ObjectClass::bottle;
  GridCell cell;
  Color color = Color::purple;
  PhysicsParams physics;
};

struct SceneSpec {
  TraySpec tray;
  PusherSpec pusher;
  std::vector<InstanceSpec> instances;
};

/// Throws StructuralError for duplicate cells/colors/ids or invalid params.
void validate(const SceneSpec& spec);

/// Builds a scene from a layout and per-class parameters. Classes missing
/// from `params` are a StructuralError.
SceneSpec build_scene(const SceneLayout& layout, const ClassParamMap& params, Vec2 pusher_velocity,
                      Vec2 pusher_start = {3.0, 3.0});

struct SimConfig {
  double dt = 0.01;
  int n_steps = 200;
  double gravity = 9.81;
  double tilt_threshold_deg = 45.0;
  double restitution = 0.0;  // pusher-tray
  int sample_stride = 20;
};

struct ObjectState {
  Vec2 base_offset;    // relative to the tray center
  Vec2 base_velocity;  // absolute
  double tilt = 0.0;   // signed, about the axis normal to the impact direction
  double tilt_rate = 0.0;
  bool toppled = false;
  bool off_tray = false;
  bool operator==(const ObjectState&) const = default;
};

struct SimState {
  double time = 0.0;
  Vec2 pusher_position;
  Vec2 pusher_velocity;
  Vec2 tray_position;
  Vec2 tray_velocity;
  bool impacted = false;
  Vec2 impact_direction;  // unit vector pusher -> tray center at first contact
  std::vector<ObjectState> objects;
  bool operator==(const SimState&) const = default;
};

SimState initial_state(const SceneSpec& spec);

/// Advances one time step with semi-implicit Euler.
SimState step(const SimState& state, const SceneSpec& spec, const SimConfig& config);

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
  bool operator==(const Point3&) const = default;
};

/// World-frame center of gravity of instance `index`; z = cog_height * cos(tilt).
Point3 center_of_gravity(const SimState& state, const SceneSpec& spec, std::size_t index);

struct Trajectory {
  int object_id = 0;
  ObjectClass cls = ObjectClass::bottle;
  std::vector<Point3> points;
  bool operator==(const Trajectory&) const = default;
};

/// One trajectory per instance, in scene order; each has n_steps + 1 samples.
struct TrajectorySet {
  std::vector<Trajectory> objects;
  bool operator==(const TrajectorySet&) const = default;
  const Trajectory* find(int object_id) const;
};

struct StabilityReport {
  std::map<int, bool> stable;  // object id -> upright and on the tray
  bool operator==(const StabilityReport&) const = default;
};

/// Stable iff |tilt| < alpha (strict) and the object is still on the tray.
StabilityReport stability_report(const SimState& final_state, const SceneSpec& spec, double alpha_deg);

struct SimResult {
  TrajectorySet trajectories;
  SimState final_state;
  StabilityReport stability;
};

SimResult run_simulation(const SceneSpec& spec, const SimConfig& config);

struct TrajectoryError {
  std::map<int, double> per_object;
  double mean = 0.0;
};

/// Per object: Euclidean norm of the stacked (x, y, z) differences at every
/// `stride`-th sample (starting at 0). Mean is over objects.
TrajectoryError trajectory_error(const TrajectorySet& predicted, const TrajectorySet& reference, int stride);

}  // namespace traylab
