#include <cmath>
#include <numbers>
#include <regex>

#include "doctest.h"
#include "test_support.hpp"
#include "traylab/dataset.hpp"
#include "traylab/errors.hpp"
#include "traylab/rng.hpp"

using namespace traylab;
namespace fs = std::filesystem;

namespace {

DatasetConfig small(int n, std::uint64_t seed) {
  DatasetConfig c;
  c.n_problems = n;
  c.seed = seed;
  return c;
}

// Stability recomputed by stepping a scene assembled here from the layout.
std::vector<Color> oracle_answer(const ProblemInstance& p) {
  SceneSpec spec;
  spec.pusher.start = p.pusher_start;
  spec.pusher.velocity = p.task_pusher_velocity;
  for (const auto& e : p.task_layout.entries) {
    spec.instances.push_back({e.object_id, e.cls, e.cell, e.color, p.class_params.at(e.cls)});
  }
  SimState s = initial_state(spec);
  for (int k = 0; k < p.sim.n_steps; ++k) s = step(s, spec, p.sim);
  const double alpha = p.sim.tilt_threshold_deg * std::numbers::pi / 180.0;
  std::vector<Color> out;
  for (Color c : p.qa_candidates) {
    for (std::size_t i = 0; i < spec.instances.size(); ++i) {
      if (spec.instances[i].color != c) continue;
      if (std::abs(s.objects[i].tilt) < alpha && !s.objects[i].off_tray) out.push_back(c);
    }
  }
  return out;
}

bool on_tenth_grid(double v) { return std::abs(v * 10.0 - std::round(v * 10.0)) < 1e-9; }

}  // namespace

TEST_CASE("generated problems carry catalog masses and well-formed layouts") {
  for (const auto& p : generate_dataset(small(20, 1))) {
    for (const auto& [cls, params] : p.class_params) {
      CHECK(params.mass == class_info(cls).mass);
      const ParamRanges r;
      CHECK(r.sliding_friction.contains(params.sliding_friction));
      CHECK(r.armature.contains(params.armature));
      CHECK(r.stiffness.contains(params.stiffness));
      CHECK(r.damping.contains(params.damping));
    }
    CHECK_NOTHROW(validate_layout(p.task_layout));
    CHECK_NOTHROW(validate_layout(p.aux_layout));
    CHECK(p.task_layout.entries.size() >= 5);
    CHECK(p.task_layout.entries.size() <= 9);
    CHECK(classes_in(p.aux_layout) == classes_in(p.task_layout));
    CHECK(p.aux_layout.entries.size() == classes_in(p.task_layout).size());
    CHECK(p.aux_pusher_velocity == Vec2{-4.8, -4.8});
    CHECK(p.task_pusher_velocity.x >= -7.0);
    CHECK(p.task_pusher_velocity.x <= -3.0);
    CHECK(on_tenth_grid(p.task_pusher_velocity.x));
    CHECK(on_tenth_grid(p.task_pusher_velocity.y));
    CHECK(p.qa_candidates.size() == 5);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const auto a = generate_dataset(small(5, 99));
  const auto b = generate_dataset(small(5, 99));
  CHECK(a == b);
  const auto c = generate_dataset(small(5, 100));
  CHECK_FALSE(a == c);
  CHECK(a[3] == generate_problem(derive_seed(99, 3), small(5, 99), "problem_003"));
  CHECK(a[3].id == "problem_003");
}

TEST_CASE("answers agree with an independent stepping oracle") {
  for (const auto& p : generate_dataset(small(15, 5))) CHECK(oracle_answer(p) == p.qa_answer);
}

TEST_CASE("reference trajectories match a fresh auxiliary simulation") {
  for (const auto& p : generate_dataset(small(5, 6))) {
    const SimResult r = run_simulation(aux_scene(p, p.class_params), p.sim);
    CHECK(r.trajectories == p.aux_trajectories);
  }
}

TEST_CASE("persist and load round-trip exactly") {
  const fs::path dir = test_support::scratch_dir("dataset_roundtrip");
  const auto problems = generate_dataset(small(3, 12));
  for (const auto& p : problems) persist(p, dir / p.id);
  CHECK(load_dataset(dir) == problems);
  for (const char* f : {"problem.json", "aux_trajectories.txt", "aux_program.txt", "task_program.txt", "top_down.png"}) {
    CHECK(fs::exists(dir / "problem_000" / f));
  }
}

TEST_CASE("trajectory text has one line per object with 11 samples") {
  const ProblemInstance p = generate_problem(4, small(1, 0), "problem_000");
  const std::string text = format_trajectories(p.aux_trajectories, 20);
  std::istringstream lines(text);
  std::string line;
  std::size_t n = 0;
  const std::regex tuple(R"(\((-?\d+\.\d), (-?\d+\.\d), (-?\d+\.\d)\))");
  while (std::getline(lines, line)) {
    const auto& t = p.aux_trajectories.objects[n];
    CHECK(line.rfind(std::string(to_string(t.cls)) + "_motion_trajectory (x, y, z) = [", 0) == 0);
    CHECK(std::distance(std::sregex_iterator(line.begin(), line.end(), tuple), std::sregex_iterator()) == 11);
    ++n;
  }
  CHECK(n == p.aux_trajectories.objects.size());
  CHECK_THROWS_AS(format_trajectories(TrajectorySet{}, 20), StructuralError);
}

TEST_CASE("the checked-in fixture dataset regenerates identically") {
  const auto stored = load_dataset(test_support::data_dir() / "dataset");
  REQUIRE(stored.size() == 2);
  CHECK(generate_dataset(small(2, 7)) == stored);
  const fs::path dir = test_support::scratch_dir("dataset_fixture");
  for (const auto& p : stored) persist(p, dir / p.id);
  for (const char* f : {"problem.json", "aux_trajectories.txt", "aux_program.txt", "task_program.txt", "top_down.png"}) {
    CHECK(test_support::slurp(dir / "problem_001" / f) ==
          test_support::slurp(test_support::data_dir() / "dataset" / "problem_001" / f));
  }
}

TEST_CASE("corrupt problem files raise IoError") {
  CHECK_THROWS_AS(problem_from_json("{not json"), IoError);
  CHECK_THROWS_AS(problem_from_json("{}"), IoError);
  CHECK_THROWS_AS(load_problem("/nonexistent/traylab"), IoError);
}

TEST_CASE("invalid configs are rejected") {
  DatasetConfig c = small(1, 0);
  c.min_instances = 10;
  CHECK_THROWS_AS(validate(c), StructuralError);
  c = small(1, 0);
  c.n_candidates = 9;
  CHECK_THROWS_AS(validate(c), StructuralError);
}

TEST_CASE("layout json accepts both shapes") {
  const ProblemInstance p = generate_problem(8, small(1, 0), "x");
  const std::string text = layout_to_json(p.task_layout);
  CHECK(layout_from_json(text, "a") == p.task_layout);
  CHECK(layout_from_json("{\"layout\": " + text + "}", "b") == p.task_layout);
  CHECK_THROWS_AS(layout_from_json("[{\"object_id\": 1}]", "c"), IoError);
}
