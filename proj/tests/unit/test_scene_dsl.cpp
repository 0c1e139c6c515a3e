#include "doctest.h"
#include "test_support.hpp"
#include "traylab/errors.hpp"
#include "traylab/rng.hpp"
#include "traylab/scene_dsl.hpp"

using namespace traylab;

namespace {

SceneLayout random_layout(Rng& rng) {
  std::vector<GridCell> cells;
  for (int r = 1; r <= 3; ++r)
    for (int c = 1; c <= 3; ++c) cells.push_back({r, c});
  std::vector<Color> colors(kPalette.begin(), kPalette.end());
  const int n = 1 + static_cast<int>(rng.below(9));
  SceneLayout layout;
  for (int i = 0; i < n; ++i) {
    std::swap(cells[i], cells[i + rng.below(cells.size() - i)]);
    std::swap(colors[i], colors[i + rng.below(colors.size() - i)]);
    layout.entries.push_back({i + 1, kFiveClasses[rng.below(5)], cells[i], colors[i]});
  }
  return layout;
}

PhysicsParams random_params(Rng& rng, ObjectClass cls) {
  return {rng.uniform(0.11, 1.0), rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99), rng.uniform(0.1, 9.9),
          class_info(cls).mass};
}

const char* kTwoObjects = R"(sim = SIMULATOR_MODEL()
sim.create_pusher('3.0 3.0 0.05')
tray = {'sliding-friction': 0.1, 'armature': 0.1, 'stiffness': 0.0, 'mass': 0.5, 'damping': 20}
sim.create_tray(object_physics = tray)
p1 = {'sliding-friction': 0.3, 'armature': 0.2, 'stiffness': 0.3, 'mass': 20.0, 'damping': 5.7}
sim.create_object(object_id=1, object_name='bottle', object_location=('row_1', 'column_3'), object_color='red', object_physics=p1)
p2 = {'sliding-friction': 0.5, 'armature': 0.2, 'stiffness': 0.3, 'mass': 4.0, 'damping': 1.0}
sim.create_object(object_id=2, object_name='wine_glass', object_location=('row_2', 'column_3'), object_color='blue', object_physics=p2)
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("the in-context example program parses") {
  const SceneProgram p = parse_program(test_support::slurp(test_support::data_dir() / "example_program.txt"));
  REQUIRE(p.declarations.size() == 1);
  const ObjectDecl& d = p.declarations[0];
  CHECK(d.object_id == 1);
  CHECK(d.cls == ObjectClass::bottle);
  CHECK(d.cell == GridCell{1, 3});
  CHECK(d.color == Color::orange);
  CHECK(d.physics.params.sliding_friction == 0.1);
  CHECK(d.physics.params.armature == 0.2);
  CHECK(d.physics.params.stiffness == 0.3);
  CHECK(d.physics.params.damping == 5.7);
  CHECK(d.physics.params.mass == 20.0);
  CHECK(p.tray.params.damping == 20.0);
  CHECK(p.tray.params.mass == 0.5);
  CHECK(p.pusher_start == std::array<double, 3>{3.0, 3.0, 0.05});
}

TEST_CASE("emit then parse is the identity on 100 random programs") {
  Rng rng(2024);
  for (int k = 0; k < 100; ++k) {
    const SceneLayout layout = random_layout(rng);
    ClassParamMap params;
    for (ObjectClass c : kFiveClasses) params[c] = random_params(rng, c);
    const SceneProgram program = make_program(layout, params);
    const std::string text = emit_program(program);
    const SceneProgram back = parse_program(text);
    CHECK(back == program);
    CHECK(back.layout() == layout);
    CHECK(emit_program(back) == text);
  }
}

TEST_CASE("fenced replies yield the code block") {
  const std::string reply = std::string("Sure, here it is.\n```python\n") + kTwoObjects + "```\nLet me know.";
  const SceneProgram p = parse_program(extract_program_text(reply));
  CHECK(p.declarations.size() == 2);
  CHECK(p.declarations[1].cls == ObjectClass::wine_glass);
  CHECK(extract_program_text("no fence here") == "no fence here");
  CHECK(extract_program_text("```\nprint(1)\n```\n```\nsim.create_tray(object_physics=t)\n```") ==
        "sim.create_tray(object_physics=t)\n");
}

TEST_CASE("malformed programs raise ParseError") {
  CHECK_THROWS_AS(parse_program("I cannot help with that."), ParseError);
  CHECK_THROWS_AS(parse_program(replace(kTwoObjects, "'row_2', 'column_3'", "'row_1', 'column_3'")), ParseError);
  CHECK_THROWS_AS(parse_program(replace(kTwoObjects, "object_id=2", "object_id=1")), ParseError);
  CHECK_THROWS_AS(parse_program(replace(kTwoObjects, "'wine_glass'", "'teapot'")), ParseError);
  CHECK_THROWS_AS(parse_program(replace(kTwoObjects, "'blue'", "'chartreuse'")), ParseError);
  CHECK_THROWS_AS(parse_program(replace(kTwoObjects, "'row_2'", "'row_7'")), ParseError);
  CHECK_THROWS_AS(parse_program(replace(kTwoObjects, "'damping': 1.0", "'damping': 1.0.0")), ParseError);
  CHECK_THROWS_AS(parse_program(replace(kTwoObjects, "object_physics=p2", "object_physics=p9")), ParseError);
  CHECK_THROWS_AS(parse_program(replace(kTwoObjects, "sim.create_tray(object_physics = tray)", "")), ParseError);
}

TEST_CASE("repeated colors are a warning, not an error") {
  std::vector<std::string> warnings;
  const SceneProgram p = parse_program(replace(kTwoObjects, "'blue'", "'red'"), &warnings);
  CHECK(p.declarations.size() == 2);
  CHECK(warnings.size() == 1);
}

TEST_CASE("unknown attributes survive a round trip") {
  const SceneProgram p = parse_program(replace(kTwoObjects, "'damping': 1.0}", "'damping': 1.0, 'friction-loss': 0.02}"));
  REQUIRE(p.declarations[1].physics.extras.size() == 1);
  CHECK(p.declarations[1].physics.extras[0].key == "friction-loss");
  CHECK(parse_program(emit_program(p)) == p);
}

TEST_CASE("class parameters: first declaration wins with a warning") {
  std::string text = kTwoObjects;
  text += "p3 = {'sliding-friction': 0.9, 'armature': 0.2, 'stiffness': 0.3, 'mass': 20.0, 'damping': 5.7}\n"
          "sim.create_object(object_id=3, object_name='bottle', object_location=('row_3', 'column_3'), "
          "object_color='green', object_physics=p3)\n";
  const ClassParamsExtraction e = extract_class_params(parse_program(text));
  CHECK(e.params.at(ObjectClass::bottle).sliding_friction == 0.3);
  CHECK(e.params.at(ObjectClass::wine_glass).sliding_friction == 0.5);
  CHECK(e.warnings.size() == 1);
}

TEST_CASE("program scenes take tray friction and mass from the tray block") {
  SceneProgram p = parse_program(kTwoObjects);
  p.tray.params.sliding_friction = 0.2;
  p.tray.params.mass = 1.5;
  p.pusher_start = {2.5, 3.5, 0.1};
  const SceneSpec s = program_scene(p, {-4.0, -4.0});
  CHECK(s.tray.ground_friction == 0.2);
  CHECK(s.tray.mass == 1.5);
  CHECK(s.pusher.start == Vec2{2.5, 3.5});
  CHECK(s.pusher.height == 0.1);
  CHECK(s.pusher.velocity == Vec2{-4.0, -4.0});
  REQUIRE(s.instances.size() == 2);
  CHECK(s.instances[0].physics.sliding_friction == 0.3);
  CHECK(s.instances[1].color == Color::blue);
}
