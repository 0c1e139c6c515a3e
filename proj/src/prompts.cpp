#include "traylab/prompts.hpp"

#include "traylab/errors.hpp"
#include "traylab/format.hpp"
#include "traylab/physics.hpp"
#include "traylab/render.hpp"
#include "traylab/scene_dsl.hpp"

namespace traylab {

namespace prompts::detail {
const std::map<std::string, std::string_view, std::less<>>& template_table();
}  // namespace prompts::detail

std::string to_string(FeedbackMode mode) { return mode == FeedbackMode::last_only ? "last-only" : "full-trace"; }

std::optional<FeedbackMode> parse_feedback_mode(std::string_view text) {
  if (text == "full-trace" || text == "full_trace") return FeedbackMode::full_trace;
  if (text == "last-only" || text == "last_only") return FeedbackMode::last_only;
  return std::nullopt;
}

namespace prompts {

std::string_view get(std::string_view name) {
  const auto& table = detail::template_table();
  const auto it = table.find(name);
  if (it == table.end()) throw StructuralError("unknown prompt template '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : detail::template_table()) out.push_back(name);
  return out;
}

std::string render(std::string_view tmpl, const Slots& values) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw StructuralError("prompt template has an unclosed slot");
    const std::string_view slot = tmpl.substr(open + 2, close - open - 2);
    const auto it = values.find(slot);
    if (it == values.end()) throw StructuralError("prompt slot '" + std::string(slot) + "' has no value");
    out.append(tmpl.substr(pos, open - pos));
    out += it->second;
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace prompts

const ClassParamMap& example_class_params() {
  static const ClassParamMap params = [] {
    ClassParamMap m;
    auto put = [&](ObjectClass cls, double f, double a, double s, double d) {
      m[cls] = {f, a, s, d, class_info(cls).mass};
    };
    put(ObjectClass::bottle, 0.1, 0.2, 0.3, 5.7);
    put(ObjectClass::martini_glass, 0.4, 0.3, 0.5, 6.0);
    put(ObjectClass::wine_glass, 0.6, 0.1, 0.2, 3.0);
    put(ObjectClass::flute_glass, 0.3, 0.4, 0.6, 4.5);
    put(ObjectClass::champagne_glass, 0.5, 0.2, 0.7, 7.2);
    return m;
  }();
  return params;
}

std::string physics_dict_literal(const PhysicsParams& p) {
  return "{'sliding-friction': " + format_number(p.sliding_friction) + ", 'armature': " + format_number(p.armature) +
         ", 'stiffness': " + format_number(p.stiffness) + ", 'mass': " + format_number(p.mass) +
         ", 'damping': " + format_number(p.damping) + "}";
}

std::string color_set_literal(std::span<const Color> colors) {
  std::string out = "{";
  for (std::size_t i = 0; i < colors.size(); ++i) {
    if (i > 0) out += ", ";
    out += "'" + std::string(to_string(colors[i])) + "'";
  }
  return out + "}";
}

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

std::string bound_text(std::string_view key, const Bound& b) {
  return "'" + std::string(key) + "' in " + (b.lo_open ? "(" : "[") + format_number(b.lo) + ", " + format_number(b.hi) +
         (b.hi_open ? ")" : "]");
}

std::string scene_description(const std::map<int, ObjectClass>& objects, std::span<const ObjectClass> classes) {
  const TraySpec tray;
  std::vector<std::string> names;
  for (const auto& [id, cls] : objects) names.push_back("a " + std::string(to_string(cls)));
  std::vector<std::string> geometry;
  for (ObjectClass cls : classes) {
    const ClassInfo& info = class_info(cls);
    geometry.push_back(std::string(info.name) + " " + format_number(info.base_radius) + " and " +
                       format_number(info.cog_height));
  }
  return "A tray of radius " + format_number(tray.radius) + " carries " + std::to_string(objects.size()) +
         " objects (" + join(names, ", ") + "). The center of gravity of the tray is " +
         format_number(tray.cog_height) + " above the ground, and the tray slides on the ground with friction " +
         format_number(tray.ground_friction) +
         " and no spin or roll friction. Base radius and center-of-gravity height by class: " + join(geometry, "; ") +
         ". A pusher hits the tray, which then slides along with the objects on it.";
}

}  // namespace

Phase1Context make_phase1_context(const ProblemInstance& problem, ParamRanges ranges) {
  Phase1Context ctx;
  ctx.classes = classes_in(problem.aux_layout);
  ctx.ranges = ranges;
  for (const auto& e : problem.aux_layout.entries) ctx.objects[e.object_id] = e.cls;

  ClassParamMap example;
  for (ObjectClass cls : ctx.classes) example[cls] = example_class_params().at(cls);
  ctx.example_program = emit_program(make_program(problem.aux_layout, example, problem.pusher_start));
  const SimResult sim = run_simulation(aux_scene(problem, example), problem.sim);
  ctx.example_trajectories = format_trajectories(sim.trajectories, problem.sim.sample_stride);
  ctx.problem_trajectories = format_trajectories(problem.aux_trajectories, problem.sim.sample_stride);
  ctx.sample_interval_s = problem.sim.dt * problem.sim.sample_stride;
  return ctx;
}

std::vector<Message> build_phase1_messages(const Phase1Context& ctx, std::span<const Phase1Attempt> attempts,
                                           FeedbackMode mode) {
  std::vector<std::string> masses;
  for (ObjectClass cls : ctx.classes) {
    masses.push_back(std::string(to_string(cls)) + " " + format_number(class_info(cls).mass));
  }
  const std::string ranges = join({bound_text("sliding-friction", ctx.ranges.sliding_friction),
                                   bound_text("armature", ctx.ranges.armature),
                                   bound_text("stiffness", ctx.ranges.stiffness),
                                   bound_text("damping", ctx.ranges.damping)},
                                  ", ");
  std::string text = prompts::render(prompts::get("phase1_intro"),
                                     {{"scene_description", scene_description(ctx.objects, ctx.classes)},
                                      {"example_program", ctx.example_program},
                                      {"sample_interval", format_trimmed(ctx.sample_interval_s, 3)},
                                      {"example_trajectories", ctx.example_trajectories},
                                      {"problem_trajectories", ctx.problem_trajectories},
                                      {"ranges", ranges},
                                      {"masses", join(masses, ", ")}});

  const std::size_t first = mode == FeedbackMode::last_only && !attempts.empty() ? attempts.size() - 1 : 0;
  for (std::size_t i = first; i < attempts.size(); ++i) {
    const Phase1Attempt& a = attempts[i];
    std::string params;
    for (const auto& [cls, p] : a.params) {
      params += "physical_parameters_for_" + std::string(to_string(cls)) + " = " + physics_dict_literal(p) + "\n";
    }
    std::string errors;
    for (const auto& [id, e] : a.per_object_error) {
      const auto it = ctx.objects.find(id);
      const std::string name = it == ctx.objects.end() ? "object" : std::string(to_string(it->second));
      errors += name + " (object_id=" + std::to_string(id) + ") trajectory error: " + format_trimmed(e, 2) + "\n";
    }
    if (!params.empty()) params.pop_back();
    if (!errors.empty()) errors.pop_back();
    text += prompts::render(prompts::get("phase1_attempt"), {{"index", std::to_string(i + 1)},
                                                             {"parameters", params},
                                                             {"errors", errors},
                                                             {"total_error", format_trimmed(a.total_error, 2)}});
  }
  if (!attempts.empty()) text += prompts::render(prompts::get("phase1_refine"), {});
  return {Message::text("user", std::move(text))};
}

SceneLayout phase2_example_layout(std::span<const ObjectClass> classes) {
  if (classes.empty()) throw StructuralError("the example layout needs at least one class");
  SceneLayout layout;
  for (int i = 0; i < 9; ++i) {
    layout.entries.push_back({i + 1, classes[static_cast<std::size_t>(i) % classes.size()], {i / 3 + 1, i % 3 + 1},
                              kPalette[static_cast<std::size_t>(i * 3 % 10)]});
  }
  return layout;
}

Phase2Context make_phase2_context(const ProblemInstance& problem, const ClassParamMap& params) {
  Phase2Context ctx;
  ctx.classes = problem.classes;
  for (ObjectClass cls : ctx.classes) {
    const auto it = params.find(cls);
    if (it == params.end()) throw StructuralError("Phase-2 context lacks parameters for " + std::string(to_string(cls)));
    ctx.class_params[cls] = it->second;
  }
  const SceneLayout example = phase2_example_layout(ctx.classes);
  ctx.example_program = emit_program(make_program(example, ctx.class_params, problem.pusher_start));
  ctx.example_png = encode_png(render_top_down(example));
  ctx.task_png = encode_png(render_top_down(problem.task_layout));
  return ctx;
}

std::vector<Message> build_phase2_messages(const Phase2Context& ctx, std::span<const Phase2Attempt> attempts) {
  std::vector<std::string> classes;
  for (ObjectClass cls : ctx.classes) classes.emplace_back(to_string(cls));
  std::vector<std::string> colors;
  for (Color c : kPalette) colors.emplace_back(to_string(c));

  Message m;
  m.role = "user";
  m.parts.push_back({prompts::render(prompts::get("phase2_intro"), {{"classes", "{" + join(classes, ", ") + "}"},
                                                                   {"colors", "{" + join(colors, ", ") + "}"},
                                                                   {"example_program", ctx.example_program}}),
                     std::nullopt});
  m.parts.push_back({{}, png_part(ctx.example_png)});
  m.parts.push_back({prompts::render(prompts::get("phase2_task"), {}), std::nullopt});
  m.parts.push_back({{}, png_part(ctx.task_png)});

  std::string text;
  for (const auto& [cls, p] : ctx.class_params) {
    text += std::string(to_string(cls)) + ": " + physics_dict_literal(p) + "\n";
  }
  for (std::size_t i = 0; i < attempts.size(); ++i) {
    const Phase2Attempt& a = attempts[i];
    std::string program = a.program;
    while (!program.empty() && program.back() == '\n') program.pop_back();
    text += prompts::render(prompts::get("phase2_attempt"), {{"index", std::to_string(i + 1)},
                                                             {"program", program},
                                                             {"misplaced", color_set_literal(a.misplaced)},
                                                             {"psnr", format_fixed(a.psnr, 1)}});
  }
  if (!attempts.empty()) text += prompts::render(prompts::get("phase2_refine"), {});
  m.parts.push_back({std::move(text), std::nullopt});
  return {std::move(m)};
}

Message retry_message(std::string_view reason) {
  return Message::text("user", prompts::render(prompts::get("retry"), {{"reason", std::string(reason)}}));
}

}  // namespace traylab
