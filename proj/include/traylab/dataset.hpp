#pragma once

// Problem generation and on-disk persistence.
//
// A problem directory holds:
//   problem.json          the full ProblemInstance (schema below)
//   aux_trajectories.txt  reference trajectories of the auxiliary scene, text form
//   aux_program.txt       auxiliary scene with ground-truth parameters
//   task_program.txt      task scene with ground-truth parameters
//   top_down.png          first frame of the task scene
//
// problem.json:
//   id                    string
//   classes               class names the problem was generated over
//   class_params          {class: {sliding_friction, armature, stiffness, damping, mass}}
//   task_layout, aux_layout
//                         [{object_id, class, row, column, color}]
//   pusher_start          [x, y]
//   task_pusher_velocity, aux_pusher_velocity
//                         [vx, vy]
//   qa_candidates, qa_answer
//                         color names, palette order
//   sim                   {dt, n_steps, gravity, tilt_threshold_deg, restitution, sample_stride}
//   aux_trajectories      [{object_id, class, points: [[x, y, z], ...]}] at full precision

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "traylab/catalog.hpp"
#include "traylab/physics.hpp"

namespace traylab {

struct ProblemInstance {
  std::string id;
  std::vector<ObjectClass> classes;
  ClassParamMap class_params;
  SceneLayout task_layout;
  SceneLayout aux_layout;
  Vec2 pusher_start{3.0, 3.0};
  Vec2 task_pusher_velocity;
  Vec2 aux_pusher_velocity{-4.8, -4.8};
  std::vector<Color> qa_candidates;
  std::vector<Color> qa_answer;
  SimConfig sim;
  TrajectorySet aux_trajectories;

  bool operator==(const ProblemInstance&) const;
};

struct DatasetConfig {
  int n_problems = 100;
  std::vector<ObjectClass> classes{kThreeClasses.begin(), kThreeClasses.end()};
  std::uint64_t seed = 0;
  ParamRanges ranges;
  int min_instances = 5;
  int max_instances = 9;
  Bound velocity{-7.0, -3.0};
  Vec2 aux_velocity{-4.8, -4.8};
  int n_candidates = 5;
  SimConfig sim;
};

/// Throws StructuralError when the config cannot produce valid problems.
void validate(const DatasetConfig& config);

/// Deterministic in (seed, config). Runs both scenes to fill in the answer
/// and the auxiliary reference trajectories.
ProblemInstance generate_problem(std::uint64_t seed, const DatasetConfig& config, const std::string& id);

/// Problem i uses seed derive_seed(config.seed, i) and id "problem_NNN".
/// Problems are generated in parallel; the result is independent of thread count.
std::vector<ProblemInstance> generate_dataset(const DatasetConfig& config);

struct GroundTruth {
  std::vector<Color> qa_answer;
  TrajectorySet aux_trajectories;
};

GroundTruth compute_ground_truth(const ProblemInstance& problem);

SceneSpec task_scene(const ProblemInstance& problem, const ClassParamMap& params);
SceneSpec aux_scene(const ProblemInstance& problem, const ClassParamMap& params);

/// One line per object: `<class>_motion_trajectory (x, y, z) = [(x, y, z), ...]`,
/// every `stride`-th sample at one decimal. Throws on an empty set.
std::string format_trajectories(const TrajectorySet& trajectories, int stride);

std::string problem_to_json(const ProblemInstance& problem);
ProblemInstance problem_from_json(const std::string& text, const std::string& source = "problem.json");

/// Array of {object_id, class, row, column, color}. The reader also accepts
/// an object with a "layout" array.
std::string layout_to_json(const SceneLayout& layout);
SceneLayout layout_from_json(const std::string& text, const std::string& source);

/// Whole-file helpers that throw IoError.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Writes the problem directory `dir` (created if needed).
void persist(const ProblemInstance& problem, const std::filesystem::path& dir);
ProblemInstance load_problem(const std::filesystem::path& dir);

/// Every immediate subdirectory of `root` holding a problem.json, sorted by name.
std::vector<ProblemInstance> load_dataset(const std::filesystem::path& root);

}  // namespace traylab
