#pragma once

// The two estimation phases, question answering, and a per-problem driver.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traylab/dataset.hpp"
#include "traylab/optimizers.hpp"
#include "traylab/prompts.hpp"
#include "traylab/proposers.hpp"

namespace traylab {

struct PipelineConfig {
  int phase1_max_steps = 30;
  double phase1_epsilon = 0.1;  // stop when the mean trajectory error is below this
  int phase2_max_steps = 5;
  double phase2_psnr_threshold = 45.0;
  FeedbackMode feedback_mode = FeedbackMode::full_trace;
  bool noise_injection = false;
  bool misplaced_from_images = false;  // default: compare layouts symbolically
  ParamRanges ranges;
  std::uint64_t seed = 0;
};

/// Throws StructuralError for nonpositive step caps or negative thresholds.
void validate(const PipelineConfig& config);

/// Parameter space over the classes of the problem's auxiliary scene.
ParamSpace param_space(const ProblemInstance& problem, const ParamRanges& ranges = {});

/// Simulates the auxiliary scene with `params` and scores it against the reference.
TracePoint evaluate_params(const ProblemInstance& problem, const ParamSpace& space, const ParamVector& params);

/// ê_k = e_k + e_min * ζ_k / 4, with ζ_k ~ N(0, 1) drawn in ascending object-id order.
std::map<int, double> inject_feedback_noise(const std::map<int, double>& errors, Rng& rng);
/// Same formula with the ζ values given in ascending object-id order.
std::map<int, double> inject_feedback_noise(const std::map<int, double>& errors, std::span<const double> zeta);

struct Phase1Step {
  int iteration = 0;  // 1-based
  bool skipped = false;
  std::string skip_reason;
  std::vector<std::size_t> points;  // trace indices evaluated in this iteration
};

struct Phase1Result {
  ClassParamMap params;  // best point of the trace
  OptTrace trace;        // true errors
  std::vector<std::string> programs;  // per trace point, empty when not model-generated
  std::vector<Phase1Step> steps;
  double best_error = 0.0;
  bool converged = false;
};

/// Each optimizer step is one iteration: a failed step is skipped but still
/// counts. Stops after the first iteration whose best mean error is below
/// epsilon, or after phase1_max_steps. Throws OptimizerStepError when every
/// iteration was skipped.
Phase1Result run_phase1(const ProblemInstance& problem, Optimizer& optimizer, const PipelineConfig& config, Rng& rng);

struct Phase2Result {
  SceneLayout layout;  // best-PSNR attempt (earliest on ties)
  std::vector<Phase2Attempt> attempts;
  std::vector<int> attempt_iteration;  // 1-based iteration of each attempt
  std::optional<std::size_t> best_index;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Proposes, renders and scores up to phase2_max_steps layouts; stops once
/// the PSNR reaches the threshold.
Phase2Result run_phase2(const ProblemInstance& problem, LayoutProposer& proposer, const PipelineConfig& config, Rng& rng);

struct QATask {
  Vec2 pusher_velocity;
  Vec2 pusher_start{3.0, 3.0};
  std::vector<Color> candidates;
  std::vector<Color> answer;
};

QATask qa_task(const ProblemInstance& problem);

/// Stable instances of `layout` under the task push, intersected with the
/// candidates (palette order). A candidate missing from the layout counts as
/// unstable; a class without parameters uses the middle of the ranges. Both
/// add a warning.
std::vector<Color> answer_question(const SceneLayout& layout, const ClassParamMap& params, const QATask& qa,
                                   const SimConfig& sim, std::vector<std::string>* warnings = nullptr);

struct ProblemRun {
  std::string id;
  Phase1Result phase1;
  Phase2Result phase2;
  std::vector<Color> predicted;
  std::vector<Color> truth;
  double iou = 0.0;
  std::vector<std::string> warnings;
};

ProblemRun run_problem(const ProblemInstance& problem, Optimizer& optimizer, LayoutProposer& proposer,
                       const PipelineConfig& config, Rng& rng);

/// Phase-1 results file: one row per trace point.
/// Columns: iteration, point, total_error, best_so_far, then per-object errors.
std::string phase1_results_csv(const Phase1Result& result);
/// {class: {sliding_friction, armature, stiffness, damping, mass}, ...}, indented JSON.
std::string params_json(const ClassParamMap& params);
ClassParamMap params_from_json(const std::string& text, const std::string& source);

}  // namespace traylab
