#pragma once

// Prompt assembly for both phases. The wording lives in template files under
// assets/prompts/<version>, embedded at build time; slots are `{{name}}`.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "traylab/catalog.hpp"
#include "traylab/dataset.hpp"
#include "traylab/llm_client.hpp"

namespace traylab {

enum class FeedbackMode { full_trace, last_only };

std::string to_string(FeedbackMode mode);
std::optional<FeedbackMode> parse_feedback_mode(std::string_view text);

namespace prompts {

inline constexpr std::string_view kVersion = "v1";

using Slots = std::map<std::string, std::string, std::less<>>;

/// Throws StructuralError for an unknown template name.
std::string_view get(std::string_view name);
std::vector<std::string> names();

/// Substitutes every `{{slot}}`. A slot with no value is a StructuralError;
/// unused values are ignored.
std::string render(std::string_view tmpl, const Slots& values);

}  // namespace prompts

/// Parameters of the in-context example program, one set per class.
const ClassParamMap& example_class_params();

/// `{'sliding-friction': 0.3, 'armature': 0.2, 'stiffness': 0.4, 'mass': 20.0, 'damping': 6.5}`
std::string physics_dict_literal(const PhysicsParams& params);

/// Python set literal in the given order: `{'purple', 'cyan'}`; `{}` when empty.
std::string color_set_literal(std::span<const Color> colors);

// ---------------------------------------------------------------------------
// Phase 1

struct Phase1Context {
  std::vector<ObjectClass> classes;
  std::string example_program;
  std::string example_trajectories;
  std::string problem_trajectories;
  std::map<int, ObjectClass> objects;  // auxiliary object id -> class
  double sample_interval_s = 0.2;
  ParamRanges ranges;
};

/// The example is the problem's auxiliary scene with example_class_params();
/// its trajectories are simulated here.
Phase1Context make_phase1_context(const ProblemInstance& problem, ParamRanges ranges = {});

struct Phase1Attempt {
  ClassParamMap params;
  std::map<int, double> per_object_error;
  double total_error = 0.0;
};

/// One user message. With attempts, each is a feedback block (all of them in
/// full_trace mode, only the last in last_only mode) followed by the refine request.
std::vector<Message> build_phase1_messages(const Phase1Context& context, std::span<const Phase1Attempt> attempts,
                                           FeedbackMode mode = FeedbackMode::full_trace);

// ---------------------------------------------------------------------------
// Phase 2

struct Phase2Context {
  std::vector<ObjectClass> classes;
  std::string example_program;
  std::vector<std::uint8_t> example_png;
  std::vector<std::uint8_t> task_png;
  ClassParamMap class_params;
};

/// A fixed nine-object example over the problem's classes, rendered with
/// render_top_down; `params` supplies the physics lines and example code.
Phase2Context make_phase2_context(const ProblemInstance& problem, const ClassParamMap& params);

/// Layout of the Phase-2 in-context example for the given classes.
SceneLayout phase2_example_layout(std::span<const ObjectClass> classes);

struct Phase2Attempt {
  SceneLayout layout;
  std::string program;
  std::vector<Color> misplaced;
  double psnr = 0.0;
};

/// One user message: intro text and example code, example image, task text,
/// task image, then the class attribute lines and one block per attempt.
std::vector<Message> build_phase2_messages(const Phase2Context& context, std::span<const Phase2Attempt> attempts);

/// Corrective follow-up after an unusable reply.
Message retry_message(std::string_view reason);

}  // namespace traylab
