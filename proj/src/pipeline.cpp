#include "traylab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"
#include "traylab/errors.hpp"
#include "traylab/evaluation.hpp"
#include "traylab/format.hpp"
#include "traylab/kernels.hpp"
#include "traylab/render.hpp"

namespace traylab {

using nlohmann::json;

void validate(const PipelineConfig& c) {
  if (c.phase1_max_steps < 1) throw StructuralError("phase1_max_steps must be at least 1");
  if (c.phase2_max_steps < 1) throw StructuralError("phase2_max_steps must be at least 1");
  if (!(c.phase1_epsilon >= 0.0)) throw StructuralError("phase1_epsilon must be nonnegative");
  if (!(c.phase2_psnr_threshold >= 0.0)) throw StructuralError("phase2_psnr_threshold must be nonnegative");
}

ParamSpace param_space(const ProblemInstance& problem, const ParamRanges& ranges) {
  return ParamSpace(classes_in(problem.aux_layout), ranges);
}

namespace {

TracePoint to_trace_point(ParamVector params, const TrajectorySet& predicted, const ProblemInstance& problem) {
  const TrajectoryError err = trajectory_error(predicted, problem.aux_trajectories, problem.sim.sample_stride);
  return {std::move(params), err.per_object, err.mean};
}

double mean_of(const std::map<int, double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [id, v] : values) sum += v;
  return sum / static_cast<double>(values.size());
}

PhysicsParams midpoint_params(const ParamRanges& r, ObjectClass cls) {
  auto mid = [](const Bound& b) { return std::round((b.lo + b.hi) * 5.0) / 10.0; };
  return {mid(r.sliding_friction), mid(r.armature), mid(r.stiffness), mid(r.damping), class_info(cls).mass};
}

}  // namespace

TracePoint evaluate_params(const ProblemInstance& problem, const ParamSpace& space, const ParamVector& params) {
  const SimResult sim = run_simulation(aux_scene(problem, space.unflatten(params)), problem.sim);
  return to_trace_point(params, sim.trajectories, problem);
}

std::map<int, double> inject_feedback_noise(const std::map<int, double>& errors, std::span<const double> zeta) {
  if (zeta.size() != errors.size()) throw StructuralError("noise needs one value per object");
  if (errors.empty()) return {};
  double e_min = std::numeric_limits<double>::infinity();
  for (const auto& [id, e] : errors) e_min = std::min(e_min, e);
  std::map<int, double> out;
  std::size_t i = 0;
  for (const auto& [id, e] : errors) out[id] = e + e_min * zeta[i++] / 4.0;
  return out;
}

std::map<int, double> inject_feedback_noise(const std::map<int, double>& errors, Rng& rng) {
  std::vector<double> zeta(errors.size());
  for (auto& z : zeta) z = rng.normal();
  return inject_feedback_noise(errors, zeta);
}

Phase1Result run_phase1(const ProblemInstance& problem, Optimizer& optimizer, const PipelineConfig& config, Rng& rng) {
  validate(config);
  const ParamSpace space = param_space(problem, config.ranges);
  Rng noise_rng(derive_seed(config.seed, 0x6e6f697365ULL));

  Phase1Result result;
  OptTrace feedback;
  for (int it = 1; it <= config.phase1_max_steps; ++it) {
    Phase1Step step;
    step.iteration = it;
    std::vector<Proposal> proposals;
    try {
      proposals = optimizer.propose(feedback, rng);
      if (proposals.empty()) throw OptimizerStepError("the optimizer returned no proposal");
    } catch (const OptimizerStepError& e) {
      step.skipped = true;
      step.skip_reason = e.what();
      result.steps.push_back(std::move(step));
      continue;
    }

    std::vector<SceneSpec> scenes;
    scenes.reserve(proposals.size());
    for (auto& p : proposals) {
      p.params = space.clamp(std::move(p.params));
      scenes.push_back(aux_scene(problem, space.unflatten(p.params)));
    }
    const std::vector<SimResult> sims = kernels::simulate_batch(scenes, problem.sim);

    std::vector<TracePoint> observed;
    double step_best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < proposals.size(); ++i) {
      TracePoint point = to_trace_point(proposals[i].params, sims[i].trajectories, problem);
      step_best = std::min(step_best, point.total_error);
      TracePoint shown = point;
      if (config.noise_injection) {
        shown.per_object_error = inject_feedback_noise(point.per_object_error, noise_rng);
        shown.total_error = mean_of(shown.per_object_error);
      }
      step.points.push_back(result.trace.size());
      result.trace.append(std::move(point));
      result.programs.push_back(std::move(proposals[i].program_text));
      feedback.append(shown);
      observed.push_back(std::move(shown));
    }
    optimizer.observe(observed);
    result.steps.push_back(std::move(step));
    if (step_best < config.phase1_epsilon) {
      result.converged = true;
      break;
    }
  }
  if (result.trace.empty()) {
    throw OptimizerStepError("all " + std::to_string(result.steps.size()) + " Phase-1 iterations were skipped");
  }
  result.params = space.unflatten(result.trace.best().params);
  result.best_error = result.trace.best().total_error;
  return result;
}

Phase2Result run_phase2(const ProblemInstance& problem, LayoutProposer& proposer, const PipelineConfig& config,
                        Rng& rng) {
  validate(config);
  const Raster target = render_top_down(problem.task_layout);
  Phase2Result result;
  for (int it = 1; it <= config.phase2_max_steps; ++it) {
    result.iterations = it;
    LayoutProposal proposal;
    try {
      proposal = proposer.propose(result.attempts, rng);
      validate_layout(proposal.layout);
    } catch (const OptimizerStepError& e) {
      result.warnings.push_back("iteration " + std::to_string(it) + " skipped: " + e.what());
      continue;
    } catch (const StructuralError& e) {
      result.warnings.push_back("iteration " + std::to_string(it) + " skipped: " + e.what());
      continue;
    }
    const Raster image = render_top_down(proposal.layout);
    Phase2Attempt attempt;
    attempt.psnr = psnr(image, target);
    attempt.misplaced = config.misplaced_from_images ? misplaced_colors_from_images(image, target)
                                                     : misplaced_colors(proposal.layout, problem.task_layout);
    attempt.layout = std::move(proposal.layout);
    attempt.program = std::move(proposal.program_text);
    if (!result.best_index || attempt.psnr > result.attempts[*result.best_index].psnr) {
      result.best_index = result.attempts.size();
    }
    const bool done = attempt.psnr >= config.phase2_psnr_threshold;
    result.attempts.push_back(std::move(attempt));
    result.attempt_iteration.push_back(it);
    if (done) {
      result.converged = true;
      break;
    }
  }
  if (result.best_index) {
    result.layout = result.attempts[*result.best_index].layout;
  } else {
    result.warnings.push_back("no Phase-2 iteration produced a layout");
  }
  return result;
}

QATask qa_task(const ProblemInstance& problem) {
  return {problem.task_pusher_velocity, problem.pusher_start, problem.qa_candidates, problem.qa_answer};
}

std::vector<Color> answer_question(const SceneLayout& layout, const ClassParamMap& params, const QATask& qa,
                                   const SimConfig& sim, std::vector<std::string>* warnings) {
  auto warn = [&](std::string message) {
    if (warnings) warnings->push_back(std::move(message));
  };
  ClassParamMap full = params;
  for (ObjectClass cls : classes_in(layout)) {
    if (!full.count(cls)) {
      warn("no parameters for " + std::string(to_string(cls)) + "; using the middle of the ranges");
      full[cls] = midpoint_params(ParamRanges{}, cls);
    }
  }
  std::vector<Color> out;
  std::map<int, bool> stable;
  if (!layout.entries.empty()) {
    stable = run_simulation(build_scene(layout, full, qa.pusher_velocity, qa.pusher_start), sim)
                 .stability.stable;
  }
  for (Color c : qa.candidates) {
    const LayoutEntry* e = layout.find(c);
    if (!e) {
      warn("candidate " + std::string(to_string(c)) + " is not in the layout; judged unstable");
      continue;
    }
    if (stable.at(e->object_id)) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ProblemRun run_problem(const ProblemInstance& problem, Optimizer& optimizer, LayoutProposer& proposer,
                       const PipelineConfig& config, Rng& rng) {
  ProblemRun run;
  run.id = problem.id;
  run.phase1 = run_phase1(problem, optimizer, config, rng);
  run.phase2 = run_phase2(problem, proposer, config, rng);
  run.warnings = run.phase2.warnings;
  const QATask qa = qa_task(problem);
  run.predicted = answer_question(run.phase2.layout, run.phase1.params, qa, problem.sim, &run.warnings);
  run.truth = qa.answer;
  run.iou = iou(run.predicted, run.truth);
  return run;
}

std::string phase1_results_csv(const Phase1Result& result) {
  std::set<int> ids;
  for (const auto& p : result.trace.points()) {
    for (const auto& [id, e] : p.per_object_error) ids.insert(id);
  }
  std::string out = "iteration,point,total_error,best_so_far";
  for (int id : ids) out += ",error_object_" + std::to_string(id);
  out += "\n";
  double best = std::numeric_limits<double>::infinity();
  for (const auto& step : result.steps) {
    for (std::size_t idx : step.points) {
      const TracePoint& p = result.trace[idx];
      best = std::min(best, p.total_error);
      out += std::to_string(step.iteration) + "," + std::to_string(idx + 1) + "," + format_fixed(p.total_error, 6) +
             "," + format_fixed(best, 6);
      for (int id : ids) {
        const auto it = p.per_object_error.find(id);
        out += "," + (it == p.per_object_error.end() ? std::string() : format_fixed(it->second, 6));
      }
      out += "\n";
    }
  }
  return out;
}

std::string params_json(const ClassParamMap& params) {
  json j = json::object();
  for (const auto& [cls, p] : params) {
    j[std::string(to_string(cls))] = {{"sliding_friction", p.sliding_friction},
                                      {"armature", p.armature},
                                      {"stiffness", p.stiffness},
                                      {"damping", p.damping},
                                      {"mass", p.mass}};
  }
  return j.dump(1) + "\n";
}

ClassParamMap params_from_json(const std::string& text, const std::string& source) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw IoError(source, "expected a JSON object of class parameters");
  ClassParamMap out;
  for (const auto& [name, v] : j.items()) {
    const auto cls = parse_object_class(name);
    if (!cls) throw IoError(source, "unknown class '" + name + "'");
    try {
      out[*cls] = {v.at("sliding_friction").get<double>(), v.at("armature").get<double>(),
                   v.at("stiffness").get<double>(), v.at("damping").get<double>(), v.at("mass").get<double>()};
    } catch (const json::exception& e) {
      throw IoError(source, "class '" + name + "': " + e.what());
    }
  }
  return out;
}

}  // namespace traylab
