#pragma once

// Scene programs: the python-like text the optimizers (in particular a
// language model) exchange with the simulator, e.g.
//
//   sim = SIMULATOR_MODEL()
//   sim.create_pusher('3.0 3.0 0.05')
//   physical_parameters_for_object_id_tray = { 'sliding-friction': 0.1, ... }
//   sim.create_tray(object_physics = physical_parameters_for_object_id_tray)
//   physical_parameters_for_object_id_1 = { ... }
//   sim.create_object(object_id=1, object_name='bottle',
//       object_location=('row_1', 'column_3'), object_color='orange',
//       object_physics=physical_parameters_for_object_id_1)
//
// The text is declarative. Nothing is executed: the parser recognizes the
// three create_* calls and dictionary assignments, and ignores everything else.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "traylab/catalog.hpp"
#include "traylab/physics.hpp"

namespace traylab {

/// An attribute key we do not interpret, kept with its literal source text.
struct ExtraAttribute {
  std::string key;
  std::string literal;
  bool operator==(const ExtraAttribute&) const = default;
};

struct PhysicsBlock {
  PhysicsParams params;
  std::vector<ExtraAttribute> extras;
  bool operator==(const PhysicsBlock&) const = default;
};

struct ObjectDecl {
  int object_id = 0;
  ObjectClass cls = ObjectClass::bottle;
  GridCell cell;
  Color color = Color::purple;
  PhysicsBlock physics;
  bool operator==(const ObjectDecl&) const = default;
};

PhysicsParams default_tray_physics();

struct SceneProgram {
  std::array<double, 3> pusher_start{3.0, 3.0, 0.05};
  PhysicsBlock tray{default_tray_physics(), {}};
  std::vector<ObjectDecl> declarations;  // ascending object_id
  bool operator==(const SceneProgram&) const = default;

  SceneLayout layout() const;
};

/// Program declaring `layout` with each instance carrying its class parameters.
SceneProgram make_program(const SceneLayout& layout, const ClassParamMap& params, Vec2 pusher_start = {3.0, 3.0});

/// Returns the body of the first fenced code block that contains a create_*
/// call, or the whole text if there is none.
std::string extract_program_text(std::string_view text);

/// Parses model output or a program file. Throws ParseError (never aborts)
/// on: missing create_tray, duplicate grid cell or object id, unknown class
/// or color, malformed location, unparseable attribute literal, undefined
/// physics dictionary. Non-fatal findings (e.g. repeated colors) are appended
/// to `warnings` when given.
SceneProgram parse_program(std::string_view text, std::vector<std::string>* warnings = nullptr);

/// Canonical text: pusher, tray block, then one dictionary + create_object per
/// declaration in object_id order.
std::string emit_program(const SceneProgram& program);

struct ClassParamsExtraction {
  ClassParamMap params;
  std::vector<std::string> warnings;
};

/// Simulator scene for a program: each instance keeps its own dictionary, the
/// tray takes its ground friction and mass from the tray dictionary.
SceneSpec program_scene(const SceneProgram& program, Vec2 pusher_velocity);

/// One parameter set per class; when instances of a class disagree the first
/// declaration wins and a warning is recorded.
ClassParamsExtraction extract_class_params(const SceneProgram& program);

}  // namespace traylab
