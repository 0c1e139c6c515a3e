#include "traylab/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "traylab/errors.hpp"

namespace traylab {
namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

// Removes up to `speed_loss` of speed along the current direction of motion.
Vec2 decelerate(Vec2 velocity, double speed_loss) {
  const double speed = norm(velocity);
  if (speed <= speed_loss) return {};
  return velocity * (1.0 - speed_loss / speed);
}

double total_mass(const SceneSpec& spec) {
  double m = spec.tray.mass;
  for (const auto& inst : spec.instances) m += inst.physics.mass;
  return m;
}

void resolve_pusher_contact(SimState& s, const SceneSpec& spec, const SimConfig& config) {
  const double contact = spec.tray.radius + spec.pusher.radius;
  const Vec2 delta = s.tray_position - s.pusher_position;
  const double dist = norm(delta);
  if (dist > contact) return;

  const Vec2 n = dist > 0.0 ? delta / dist : (s.impacted ? s.impact_direction : Vec2{-1.0, 0.0});
  const double vp = dot(s.pusher_velocity, n);
  const double vt = dot(s.tray_velocity, n);

  if (!s.impacted) {
    if (vp > vt) {
      const double mp = spec.pusher.mass;
      const double mt = total_mass(spec);
      const double e = config.restitution;
      const double new_vp = (mp * vp + mt * vt + mt * e * (vt - vp)) / (mp + mt);
      const double new_vt = (mp * vp + mt * vt + mp * e * (vp - vt)) / (mp + mt);
      s.pusher_velocity += n * (new_vp - vp);
      s.tray_velocity += n * (new_vt - vt);
      s.impacted = true;
      s.impact_direction = n;
    }
  } else if (vp > vt) {
    // Later contacts are absorbed by the rim: the pusher loses its closing
    // speed and the tray is not re-accelerated.
    s.pusher_velocity -= n * (vp - vt);
  }
  s.pusher_position = s.tray_position - n * contact;
}

// Pairwise base-disc contacts among objects at the same level (all on the
// tray, or all on the ground). Adds each impulse to `base_accel`.
void resolve_object_contacts(SimState& s, const SceneSpec& spec, std::vector<Vec2>& base_accel, double dt) {
  const std::size_t n = s.objects.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ObjectState& a = s.objects[i];
      ObjectState& b = s.objects[j];
      if (a.off_tray != b.off_tray) continue;
      const double ra = class_info(spec.instances[i].cls).base_radius;
      const double rb = class_info(spec.instances[j].cls).base_radius;
      const Vec2 d = b.base_offset - a.base_offset;
      const double dist = norm(d);
      const double min_dist = ra + rb;
      if (dist >= min_dist || dist <= 0.0) continue;

      const Vec2 nrm = d / dist;
      const double wa = 1.0 / spec.instances[i].physics.mass;
      const double wb = 1.0 / spec.instances[j].physics.mass;
      const double overlap = min_dist - dist;
      a.base_offset -= nrm * (overlap * wa / (wa + wb));
      b.base_offset += nrm * (overlap * wb / (wa + wb));

      const double closing = dot(b.base_velocity - a.base_velocity, nrm);
      if (closing < 0.0) {
        const double impulse = -closing / (wa + wb);
        a.base_velocity -= nrm * (impulse * wa);
        b.base_velocity += nrm * (impulse * wb);
        base_accel[i] -= nrm * (impulse * wa / dt);
        base_accel[j] += nrm * (impulse * wb / dt);
      }
    }
  }
}

// Response of a resting object to an impulsive change `dv` of the tray
// velocity along the tilt axis. If friction can hold the rear base edge the
// object pivots about it: angular momentum about the edge gives the tilt rate,
// and the edge (hence the base) moves with the tray. Otherwise it slides.
struct JerkResponse {
  bool pivots = false;
  double tilt_rate = 0.0;
};

JerkResponse jerk_response(const InstanceSpec& inst, double dv) {
  const ClassInfo& info = class_info(inst.cls);
  const double m = inst.physics.mass;
  const double h = info.cog_height;
  const double r = info.base_radius;
  const double a = inst.physics.armature;
  // Friction-to-normal impulse ratio the pivot needs.
  const double needed_mu = (a + m * r * r) / (m * h * r);
  if (inst.physics.sliding_friction < needed_mu) return {};
  return {true, -m * h * dv / (a + m * (h * h + r * r))};
}

void advance_tilt(ObjectState& o, const InstanceSpec& inst, double accel_along_axis, const SimConfig& config) {
  if (o.toppled || o.off_tray) return;

  const ClassInfo& info = class_info(inst.cls);
  const double m = inst.physics.mass;
  const double h = info.cog_height;
  const double r = info.base_radius;
  const double g = config.gravity;
  const double inertia = m * h * h + inst.physics.armature;

  // Pseudo-force of the accelerating base acts on the center of gravity.
  const double drive = -m * h * accel_along_axis * std::cos(o.tilt);

  double branch = 0.0;
  if (o.tilt == 0.0 && o.tilt_rate == 0.0) {
    // Resting flat: the base supplies any torque up to m*g*r.
    if (std::abs(drive) <= m * g * r) return;
    branch = drive > 0.0 ? 1.0 : -1.0;
  } else if (o.tilt != 0.0) {
    branch = o.tilt > 0.0 ? 1.0 : -1.0;
  } else {
    branch = o.tilt_rate > 0.0 ? 1.0 : -1.0;
  }

  const double gravity_torque = m * g * (h * std::sin(o.tilt) - branch * r * std::cos(o.tilt));
  const double accel =
      (drive + gravity_torque - inst.physics.damping * o.tilt_rate - inst.physics.stiffness * o.tilt) / inertia;

  const double rate = o.tilt_rate + accel * config.dt;
  const double tilt = o.tilt + rate * config.dt;

  if (tilt * branch <= 0.0) {
    // Fell back onto its base.
    o.tilt = 0.0;
    o.tilt_rate = 0.0;
  } else if (std::abs(tilt) >= kHalfPi) {
    o.tilt = branch * kHalfPi;
    o.tilt_rate = 0.0;
    o.toppled = true;
  } else {
    o.tilt = tilt;
    o.tilt_rate = rate;
  }
}

}  // namespace

void validate(const SceneSpec& spec) {
  std::set<int> ids;
  std::set<GridCell> cells;
  std::set<Color> colors;
  for (const auto& inst : spec.instances) {
    if (!is_valid(inst.cell)) throw StructuralError("instance " + std::to_string(inst.id) + " is off the grid");
    if (!ids.insert(inst.id).second) throw StructuralError("duplicate instance id " + std::to_string(inst.id));
    if (!cells.insert(inst.cell).second) {
      throw StructuralError("two instances share cell (" + row_token(inst.cell.row) + ", " +
                            column_token(inst.cell.column) + ")");
    }
    if (!colors.insert(inst.color).second) {
      throw StructuralError("two instances share color " + std::string(to_string(inst.color)));
    }
    if (!is_valid(inst.physics)) {
      throw StructuralError("instance " + std::to_string(inst.id) + " has out-of-range physics parameters");
    }
  }
}

SceneSpec build_scene(const SceneLayout& layout, const ClassParamMap& params, Vec2 pusher_velocity,
                      Vec2 pusher_start) {
  SceneSpec spec;
  spec.pusher.start = pusher_start;
  spec.pusher.velocity = pusher_velocity;
  spec.instances.reserve(layout.entries.size());
  for (const auto& e : layout.entries) {
    auto it = params.find(e.cls);
    if (it == params.end()) {
      throw StructuralError("no physics parameters for class " + std::string(to_string(e.cls)));
    }
    spec.instances.push_back({e.object_id, e.cls, e.cell, e.color, it->second});
  }
  return spec;
}

SimState initial_state(const SceneSpec& spec) {
  SimState s;
  s.pusher_position = spec.pusher.start;
  s.pusher_velocity = spec.pusher.velocity;
  s.objects.reserve(spec.instances.size());
  for (const auto& inst : spec.instances) {
    ObjectState o;
    o.base_offset = cell_position(inst.cell);
    s.objects.push_back(o);
  }
  return s;
}

SimState step(const SimState& state, const SceneSpec& spec, const SimConfig& config) {
  const double dt = config.dt;
  const double g = config.gravity;
  const double ground_loss = spec.tray.ground_friction * g * dt;

  SimState next = state;
  next.time = state.time + dt;

  // Pusher and tray. The pusher shares the tray's ground friction coefficient.
  next.pusher_velocity = decelerate(state.pusher_velocity, ground_loss);
  next.tray_velocity = decelerate(state.tray_velocity, ground_loss);
  next.pusher_position = state.pusher_position + next.pusher_velocity * dt;
  next.tray_position = state.tray_position + next.tray_velocity * dt;
  resolve_pusher_contact(next, spec, config);

  // Object bases. `base_accel` drives the tilt; a pivoting object's jerk is
  // applied as a tilt-rate kick instead.
  std::vector<Vec2> base_accel(state.objects.size());
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    const ObjectState& prev = state.objects[i];
    ObjectState& o = next.objects[i];
    const double friction_dv = spec.instances[i].physics.sliding_friction * g * dt;

    Vec2 velocity;
    bool kicked = false;
    if (prev.off_tray) {
      velocity = decelerate(prev.base_velocity, friction_dv);
    } else {
      const Vec2 needed = next.tray_velocity - prev.base_velocity;
      const double needed_dv = norm(needed);
      if (needed_dv <= friction_dv) {
        velocity = next.tray_velocity;
      } else if (const auto jerk = jerk_response(spec.instances[i], dot(needed, next.impact_direction));
                 next.impacted && !prev.toppled && jerk.pivots) {
        velocity = next.tray_velocity;
        o.tilt_rate += jerk.tilt_rate;
        kicked = true;
      } else {
        velocity = prev.base_velocity + needed * (friction_dv / needed_dv);
      }
    }
    base_accel[i] = kicked ? Vec2{} : (velocity - prev.base_velocity) / dt;
    o.base_velocity = velocity;
    o.base_offset = prev.base_offset + (velocity - next.tray_velocity) * dt;
  }

  resolve_object_contacts(next, spec, base_accel, dt);

  for (std::size_t i = 0; i < next.objects.size(); ++i) {
    ObjectState& o = next.objects[i];
    if (!o.off_tray && norm(o.base_offset) > spec.tray.radius) o.off_tray = true;
    const double along = next.impacted ? dot(base_accel[i], next.impact_direction) : 0.0;
    advance_tilt(o, spec.instances[i], along, config);
  }
  return next;
}

Point3 center_of_gravity(const SimState& state, const SceneSpec& spec, std::size_t index) {
  const ObjectState& o = state.objects[index];
  const double h = class_info(spec.instances[index].cls).cog_height;
  const Vec2 base = state.tray_position + o.base_offset;
  const double lean = h * std::sin(o.tilt);
  return {base.x + state.impact_direction.x * lean, base.y + state.impact_direction.y * lean,
          h * std::cos(o.tilt)};
}

const Trajectory* TrajectorySet::find(int object_id) const {
  auto it = std::find_if(objects.begin(), objects.end(), [&](const Trajectory& t) { return t.object_id == object_id; });
  return it == objects.end() ? nullptr : &*it;
}

StabilityReport stability_report(const SimState& final_state, const SceneSpec& spec, double alpha_deg) {
  const double alpha = alpha_deg * std::numbers::pi / 180.0;
  StabilityReport report;
  for (std::size_t i = 0; i < spec.instances.size(); ++i) {
    const ObjectState& o = final_state.objects[i];
    report.stable[spec.instances[i].id] = std::abs(o.tilt) < alpha && !o.off_tray;
  }
  return report;
}

SimResult run_simulation(const SceneSpec& spec, const SimConfig& config) {
  SimResult result;
  auto& trajectories = result.trajectories.objects;
  trajectories.resize(spec.instances.size());
  for (std::size_t i = 0; i < spec.instances.size(); ++i) {
    trajectories[i].object_id = spec.instances[i].id;
    trajectories[i].cls = spec.instances[i].cls;
    trajectories[i].points.reserve(static_cast<std::size_t>(config.n_steps) + 1);
  }

  SimState state = initial_state(spec);
  auto record = [&] {
    for (std::size_t i = 0; i < spec.instances.size(); ++i) {
      trajectories[i].points.push_back(center_of_gravity(state, spec, i));
    }
  };
  record();
  for (int k = 0; k < config.n_steps; ++k) {
    state = step(state, spec, config);
    record();
  }
  result.stability = stability_report(state, spec, config.tilt_threshold_deg);
  result.final_state = std::move(state);
  return result;
}

TrajectoryError trajectory_error(const TrajectorySet& predicted, const TrajectorySet& reference, int stride) {
  if (stride <= 0) throw StructuralError("trajectory stride must be positive");
  if (predicted.objects.size() != reference.objects.size()) {
    throw StructuralError("trajectory sets cover different numbers of objects");
  }
  TrajectoryError err;
  double sum = 0.0;
  for (const auto& ref : reference.objects) {
    const Trajectory* pred = predicted.find(ref.object_id);
    if (pred == nullptr) {
      throw StructuralError("predicted trajectories lack object " + std::to_string(ref.object_id));
    }
    if (pred->points.size() != ref.points.size()) {
      throw StructuralError("trajectory lengths differ for object " + std::to_string(ref.object_id));
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < ref.points.size(); k += static_cast<std::size_t>(stride)) {
      const double dx = pred->points[k].x - ref.points[k].x;
      const double dy = pred->points[k].y - ref.points[k].y;
      const double dz = pred->points[k].z - ref.points[k].z;
      sq += dx * dx + dy * dy + dz * dz;
    }
    const double e = std::sqrt(sq);
    err.per_object[ref.object_id] = e;
    sum += e;
  }
  err.mean = reference.objects.empty() ? 0.0 : sum / static_cast<double>(reference.objects.size());
  return err;
}

}  // namespace traylab
