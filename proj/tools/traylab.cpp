// traylab: command-line front end to the workbench.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "traylab/dataset.hpp"
#include "traylab/errors.hpp"
#include "traylab/evaluation.hpp"
#include "traylab/format.hpp"
#include "traylab/kernels.hpp"
#include "traylab/llm_client.hpp"
#include "traylab/pipeline.hpp"
#include "traylab/prompts.hpp"
#include "traylab/proposers.hpp"
#include "traylab/render.hpp"
#include "traylab/scene_dsl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace traylab;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Common {
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string config;
  std::string out;
};

struct LlmOptions {
  std::string mode = "replay";
  std::string transcript;
  std::string endpoint = ClientConfig{}.endpoint;
  std::string model = ClientConfig{}.model;
  std::string api_key_env = ClientConfig{}.api_key_env;
  double temperature = 0.0;
  bool no_temperature = false;
  double timeout = ClientConfig{}.timeout_s;
  int max_retries = ClientConfig{}.max_retries;
  int max_in_flight = ClientConfig{}.max_in_flight;
};

void add_common(CLI::App* cmd, Common& c, bool with_out, bool out_required = false) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "Worker threads across problems (0: OpenMP default)");
  cmd->add_option("--config", c.config, "JSON file of option values; command-line flags win");
  if (with_out) {
    auto* o = cmd->add_option("--out", c.out, "Output directory");
    if (out_required) o->required();
  }
}

void add_llm(CLI::App* cmd, LlmOptions& o, bool with_mode) {
  if (with_mode) {
    cmd->add_option("--mode", o.mode, "Client mode")->check(CLI::IsMember({"live", "record", "replay"}))->capture_default_str();
  }
  cmd->add_option("--transcript", o.transcript, "Transcript file (read in replay mode, appended in record mode)");
  cmd->add_option("--endpoint", o.endpoint, "Chat-completions URL")->capture_default_str();
  cmd->add_option("--model", o.model, "Model name")->capture_default_str();
  cmd->add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key")->capture_default_str();
  cmd->add_option("--temperature", o.temperature, "Sampling temperature")->capture_default_str();
  cmd->add_flag("--no-temperature", o.no_temperature, "Omit the temperature field from requests");
  cmd->add_option("--timeout", o.timeout, "Request timeout in seconds")->capture_default_str();
  cmd->add_option("--max-retries", o.max_retries, "Retries on 429 and 5xx responses")->capture_default_str();
  cmd->add_option("--max-in-flight", o.max_in_flight, "Concurrent requests")->capture_default_str();
}

std::shared_ptr<LlmClient> make_client(const LlmOptions& o, std::uint64_t seed) {
  ClientConfig c;
  c.mode = *parse_client_mode(o.mode);
  c.transcript = o.transcript;
  c.endpoint = o.endpoint;
  c.model = o.model;
  c.api_key_env = o.api_key_env;
  c.temperature = o.no_temperature ? std::nullopt : std::optional<double>(o.temperature);
  c.timeout_s = o.timeout;
  c.max_retries = o.max_retries;
  c.max_in_flight = o.max_in_flight;
  c.jitter_seed = seed;
  if (c.mode != ClientMode::live && c.transcript.empty()) {
    throw StructuralError("--transcript is required in " + o.mode + " mode");
  }
  return std::make_shared<LlmClient>(c);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
}

std::string colors_text(const std::vector<Color>& colors) { return color_set_literal(colors); }

json colors_json(const std::vector<Color>& colors) {
  json out = json::array();
  for (Color c : colors) out.push_back(to_string(c));
  return out;
}

std::vector<Color> colors_from_json(const json& j, const std::string& source) {
  if (!j.is_array()) throw IoError(source, "answer must be an array of color names");
  std::vector<Color> out;
  for (const auto& v : j) {
    const auto c = v.is_string() ? parse_color(v.get<std::string>()) : std::nullopt;
    if (!c) throw IoError(source, "unknown color " + v.dump());
    out.push_back(*c);
  }
  return out;
}

std::string phase2_attempts_csv(const Phase2Result& r) {
  std::string out = "iteration,psnr,best_psnr,misplaced\n";
  double best = 0.0;
  for (std::size_t i = 0; i < r.attempts.size(); ++i) {
    best = std::max(best, r.attempts[i].psnr);
    std::string names;
    for (Color c : r.attempts[i].misplaced) names += (names.empty() ? "" : " ") + std::string(to_string(c));
    out += std::to_string(r.attempt_iteration[i]) + "," + format_fixed(r.attempts[i].psnr, 6) + "," +
           format_fixed(best, 6) + "," + names + "\n";
  }
  return out;
}

std::vector<double> trace_errors(const Phase1Result& r) {
  std::vector<double> v;
  for (const auto& p : r.trace.points()) v.push_back(p.total_error);
  return v;
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const std::vector<std::string>& args,
                    const Common& common, const json& extra) {
  json m = {{"tool", "traylab"},
            {"version", kVersion},
            {"prompt_version", std::string(prompts::kVersion)},
            {"subcommand", subcommand},
            {"arguments", args},
            {"seed", common.seed},
            {"config", common.config}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_text(dir / "manifest.json", m.dump(1) + "\n");
}

/// Expands `--config FILE` into explicit flags placed right after the
/// subcommand, so that later command-line flags take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.empty()) return args;
  const json cfg = json::parse(read_text(*path), nullptr, false);
  if (cfg.is_discarded() || !cfg.is_object()) throw IoError(*path, "config must be a JSON object");
  std::vector<std::string> injected;
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) injected.push_back(flag);
    } else if (value.is_array()) {
      injected.push_back(flag);
      for (const auto& v : value) injected.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else if (value.is_string()) {
      injected.insert(injected.end(), {flag, value.get<std::string>()});
    } else if (value.is_number()) {
      injected.insert(injected.end(), {flag, value.dump()});
    } else {
      throw IoError(*path, "unsupported value for '" + key + "'");
    }
  }
  std::vector<std::string> out{args.front()};
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

void apply_jobs(const Common& c) {
  if (c.jobs > 0) kernels::set_threads(c.jobs);
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse_error";
  if (dynamic_cast<const IoError*>(&e)) return "io_error";
  if (dynamic_cast<const ReplayMissError*>(&e)) return "replay_miss";
  if (dynamic_cast<const TransportError*>(&e)) return "transport_error";
  if (dynamic_cast<const OptimizerStepError*>(&e)) return "optimizer_step_error";
  if (dynamic_cast<const StructuralError*>(&e)) return "structural_error";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal_error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traylab: physics-parameter and layout estimation workbench for tray-impact scenes", "traylab"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", kVersion);

  Common common;
  LlmOptions llm;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a dataset of problems");
  int gen_n = 100;
  int gen_classes = 3;
  add_common(gen, common, true, true);
  gen->add_option("--n", gen_n, "Number of problems")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--classes", gen_classes, "Object classes per problem")->check(CLI::IsMember({3, 5}))->capture_default_str();

  // sim
  auto* sim = app.add_subcommand("sim", "Simulate one scene program and print trajectories and stability");
  std::string sim_program;
  std::vector<double> sim_velocity{-4.8, -4.8};
  SimConfig sim_config;
  add_common(sim, common, false);
  sim->add_option("--program", sim_program, "Scene program file")->required()->check(CLI::ExistingFile);
  sim->add_option("--velocity", sim_velocity, "Pusher velocity vx vy")->expected(2)->capture_default_str();
  sim->add_option("--stride", sim_config.sample_stride, "Print every n-th sample")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--steps", sim_config.n_steps, "Simulation steps")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--dt", sim_config.dt, "Time step in seconds")->check(CLI::PositiveNumber)->capture_default_str();

  // phase1
  auto* p1 = app.add_subcommand("phase1", "Estimate per-class physics parameters from the auxiliary trajectories");
  std::string p1_problem, p1_optimizer = "llm", p1_script, p1_feedback = "full-trace";
  PipelineConfig pipe;
  std::size_t p1_lambda = 0, p1_batch = 1;
  add_common(p1, common, true, true);
  add_llm(p1, llm, true);
  p1->add_option("--problem", p1_problem, "Problem directory")->required()->check(CLI::ExistingDirectory);
  p1->add_option("--optimizer", p1_optimizer, "Optimizer")
      ->check(CLI::IsMember({"llm", "cmaes", "bo", "random", "scripted"}))
      ->capture_default_str();
  p1->add_option("--script", p1_script, "JSON list of class-parameter maps (scripted optimizer)")->check(CLI::ExistingFile);
  p1->add_option("--max-steps", pipe.phase1_max_steps, "Iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  p1->add_option("--epsilon", pipe.phase1_epsilon, "Stop when the mean error is below this")->capture_default_str();
  p1->add_option("--feedback-mode", p1_feedback, "Attempts shown to the model")
      ->check(CLI::IsMember({"full-trace", "last-only"}))
      ->capture_default_str();
  p1->add_flag("--noise", pipe.noise_injection, "Perturb the errors fed back to the optimizer");
  p1->add_option("--lambda", p1_lambda, "CMA-ES population (0: default)");
  p1->add_option("--batch", p1_batch, "Random-search samples per iteration")->capture_default_str();

  // phase2
  auto* p2 = app.add_subcommand("phase2", "Infer the task layout from its top-down image");
  std::string p2_problem, p2_params, p2_proposer = "llm";
  add_common(p2, common, true, true);
  add_llm(p2, llm, true);
  p2->add_option("--problem", p2_problem, "Problem directory")->required()->check(CLI::ExistingDirectory);
  p2->add_option("--params", p2_params, "Class parameters JSON (default: the problem's ground truth)")->check(CLI::ExistingFile);
  p2->add_option("--proposer", p2_proposer, "Layout proposer")->check(CLI::IsMember({"llm", "corrector"}))->capture_default_str();
  p2->add_option("--max-steps", pipe.phase2_max_steps, "Iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  p2->add_option("--psnr", pipe.phase2_psnr_threshold, "Stop once PSNR reaches this (dB)")->capture_default_str();
  p2->add_flag("--from-images", pipe.misplaced_from_images, "Detect misplaced colors from the images alone");

  // answer
  auto* ans = app.add_subcommand("answer", "Answer the stability question for a layout and parameters");
  std::string ans_problem, ans_params, ans_layout;
  add_common(ans, common, true);
  ans->add_option("--problem", ans_problem, "Problem directory")->required()->check(CLI::ExistingDirectory);
  ans->add_option("--params", ans_params, "Class parameters JSON (default: ground truth)")->check(CLI::ExistingFile);
  ans->add_option("--layout", ans_layout, "Layout JSON (default: ground truth)")->check(CLI::ExistingFile);

  // eval
  auto* ev = app.add_subcommand("eval", "Score predictions against a dataset");
  std::string ev_dataset, ev_predictions;
  add_common(ev, common, true);
  ev->add_option("--dataset", ev_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--predictions", ev_predictions, "JSON lines {id, answer, layout?}")->required()->check(CLI::ExistingFile);

  // replay
  auto* rp = app.add_subcommand("replay", "Run the full pipeline with the model replayed from a transcript");
  std::string rp_dataset, rp_problem, rp_feedback = "full-trace", rp_proposer = "llm";
  add_common(rp, common, true, true);
  add_llm(rp, llm, false);
  rp->add_option("--dataset", rp_dataset, "Dataset directory")->check(CLI::ExistingDirectory);
  rp->add_option("--problem", rp_problem, "Single problem directory")->check(CLI::ExistingDirectory);
  rp->add_option("--feedback-mode", rp_feedback, "Attempts shown to the model")
      ->check(CLI::IsMember({"full-trace", "last-only"}))
      ->capture_default_str();
  rp->add_option("--layout-proposer", rp_proposer, "Phase-2 proposer")
      ->check(CLI::IsMember({"llm", "corrector"}))
      ->capture_default_str();
  rp->add_option("--max-steps", pipe.phase1_max_steps, "Phase-1 iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  rp->add_option("--phase2-max-steps", pipe.phase2_max_steps, "Phase-2 iteration cap")->check(CLI::PositiveNumber)->capture_default_str();

  std::vector<std::string> args;
  try {
    std::vector<std::string> raw(argv + 1, argv + argc);
    args = expand_config(raw);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  try {
    apply_jobs(common);

    if (gen->parsed()) {
      DatasetConfig cfg;
      cfg.n_problems = gen_n;
      cfg.seed = common.seed;
      cfg.classes = gen_classes == 5 ? std::vector<ObjectClass>(kFiveClasses.begin(), kFiveClasses.end())
                                     : std::vector<ObjectClass>(kThreeClasses.begin(), kThreeClasses.end());
      const auto problems = generate_dataset(cfg);
      const fs::path out = common.out;
      ensure_dir(out);
      for (const auto& p : problems) persist(p, out / p.id);
      write_manifest(out, "gen", args, common, {{"dataset", common.out}, {"n_problems", gen_n}, {"classes", gen_classes}});
      std::cout << "wrote " << problems.size() << " problems to " << out.string() << "\n";
      return 0;
    }

    if (sim->parsed()) {
      const SceneProgram program = parse_program(extract_program_text(read_text(sim_program)));
      const SceneSpec scene = program_scene(program, {sim_velocity[0], sim_velocity[1]});
      const SimResult result = run_simulation(scene, sim_config);
      std::cout << format_trajectories(result.trajectories, sim_config.sample_stride);
      std::string stable = "stable = {";
      bool first = true;
      for (const auto& [id, s] : result.stability.stable) {
        stable += (first ? "" : ", ") + std::to_string(id) + ": " + (s ? "True" : "False");
        first = false;
      }
      std::cout << stable << "}\n";
      return 0;
    }

    if (p1->parsed()) {
      const ProblemInstance problem = load_problem(p1_problem);
      pipe.seed = common.seed;
      pipe.feedback_mode = *parse_feedback_mode(p1_feedback);
      const ParamSpace space = param_space(problem, pipe.ranges);
      std::unique_ptr<Optimizer> opt;
      std::shared_ptr<LlmClient> client;
      if (p1_optimizer == "llm") {
        client = make_client(llm, common.seed);
        opt = std::make_unique<LlmProposer>(space, client, make_phase1_context(problem, pipe.ranges),
                                            LlmProposerSettings{pipe.feedback_mode, 2});
      } else if (p1_optimizer == "cmaes") {
        opt = std::make_unique<CmaEsOptimizer>(space, p1_lambda);
      } else if (p1_optimizer == "bo") {
        opt = std::make_unique<GpBoOptimizer>(space);
      } else if (p1_optimizer == "random") {
        opt = std::make_unique<RandomSearch>(space, p1_batch);
      } else {
        if (p1_script.empty()) throw StructuralError("--script is required for the scripted optimizer");
        const json list = json::parse(read_text(p1_script), nullptr, false);
        if (list.is_discarded() || !list.is_array()) throw IoError(p1_script, "expected a JSON array");
        std::vector<ParamVector> script;
        for (const auto& entry : list) script.push_back(space.flatten(params_from_json(entry.dump(), p1_script)));
        opt = std::make_unique<ScriptedOptimizer>(space, script);
      }
      Rng rng(common.seed);
      const Phase1Result r = run_phase1(problem, *opt, pipe, rng);
      const fs::path out = common.out;
      ensure_dir(out);
      write_text(out / "phase1_params.json", params_json(r.params));
      write_text(out / "phase1_results.csv", phase1_results_csv(r));
      export_convergence(trace_errors(r), out / "convergence.csv");
      write_manifest(out, "phase1", args, common,
                     {{"problem", p1_problem},
                      {"optimizer", p1_optimizer},
                      {"mode", llm.mode},
                      {"transcript", llm.transcript},
                      {"network_calls", client ? client->network_calls() : 0}});
      int skipped = 0;
      for (const auto& s : r.steps) {
        if (s.skipped) {
          ++skipped;
          std::cerr << "warning: iteration " << s.iteration << " skipped: " << s.skip_reason << "\n";
        }
      }
      std::cout << "best error " << format_fixed(r.best_error, 6) << " after " << r.steps.size() << " iterations ("
                << skipped << " skipped, " << r.trace.size() << " evaluations)" << (r.converged ? ", converged" : "")
                << "\n";
      return 0;
    }

    if (p2->parsed()) {
      const ProblemInstance problem = load_problem(p2_problem);
      const ClassParamMap params = p2_params.empty() ? problem.class_params : params_from_json(read_text(p2_params), p2_params);
      pipe.seed = common.seed;
      std::unique_ptr<LayoutProposer> proposer;
      if (p2_proposer == "llm") {
        proposer = std::make_unique<LlmLayoutProposer>(make_client(llm, common.seed), make_phase2_context(problem, params));
      } else {
        proposer = std::make_unique<CorrectingLayoutProposer>(problem.task_layout, SceneLayout{});
      }
      Rng rng(common.seed);
      const Phase2Result r = run_phase2(problem, *proposer, pipe, rng);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      const fs::path out = common.out;
      ensure_dir(out);
      write_text(out / "phase2_layout.json", layout_to_json(r.layout));
      write_text(out / "phase2_attempts.csv", phase2_attempts_csv(r));
      write_png(render_top_down(r.layout), out / "phase2_top_down.png");
      write_manifest(out, "phase2", args, common,
                     {{"problem", p2_problem}, {"proposer", p2_proposer}, {"mode", llm.mode}, {"transcript", llm.transcript}});
      const double best = r.best_index ? r.attempts[*r.best_index].psnr : 0.0;
      std::cout << "best PSNR " << format_fixed(best, 1) << " dB after " << r.iterations << " iterations"
                << (r.converged ? ", converged" : "") << "\n";
      return 0;
    }

    if (ans->parsed()) {
      const ProblemInstance problem = load_problem(ans_problem);
      const ClassParamMap params = ans_params.empty() ? problem.class_params : params_from_json(read_text(ans_params), ans_params);
      const SceneLayout layout = ans_layout.empty() ? problem.task_layout : layout_from_json(read_text(ans_layout), ans_layout);
      std::vector<std::string> warnings;
      const QATask qa = qa_task(problem);
      const auto predicted = answer_question(layout, params, qa, problem.sim, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "answer = " << colors_text(predicted) << "\n"
                << "truth = " << colors_text(qa.answer) << "\n"
                << "iou = " << format_fixed(iou(predicted, qa.answer), 6) << "\n";
      if (!common.out.empty()) {
        ensure_dir(common.out);
        write_text(fs::path(common.out) / "answer.json",
                   json{{"id", problem.id}, {"answer", colors_json(predicted)}}.dump(1) + "\n");
        write_manifest(common.out, "answer", args, common, {{"problem", ans_problem}});
      }
      return 0;
    }

    if (ev->parsed()) {
      const auto problems = load_dataset(ev_dataset);
      std::map<std::string, PredictionRecord> by_id;
      const std::string text = read_text(ev_predictions);
      std::size_t line_no = 0, pos = 0;
      while (pos < text.size()) {
        ++line_no;
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = ev_predictions + ":" + std::to_string(line_no);
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("answer")) {
          throw IoError(where, "expected an object with 'id' and 'answer'");
        }
        PredictionRecord rec;
        rec.id = j["id"].get<std::string>();
        rec.answer = colors_from_json(j["answer"], where);
        if (j.contains("layout")) rec.layout = layout_from_json(j["layout"].dump(), where);
        by_id[rec.id] = std::move(rec);
      }
      std::vector<PredictionRecord> preds;
      std::vector<TruthRecord> truths;
      for (const auto& p : problems) {
        const auto it = by_id.find(p.id);
        if (it == by_id.end()) throw StructuralError("no prediction for problem " + p.id);
        preds.push_back(it->second);
        truths.push_back({p.id, p.qa_answer, p.task_layout});
      }
      if (by_id.size() != problems.size()) throw StructuralError("predictions name problems missing from the dataset");
      const EvaluationSummary s = evaluate(preds, truths);
      std::cout << "problems        " << s.problems << "\n"
                << "mean IoU        " << format_fixed(s.mean_iou, 4) << "\n"
                << "precise IoU     " << format_fixed(s.precise_iou_rate, 4) << "\n";
      json summary = {{"problems", s.problems}, {"mean_iou", s.mean_iou}, {"precise_iou_rate", s.precise_iou_rate}};
      if (s.layout) {
        std::cout << "C+L             " << format_fixed(s.layout->color_location, 4) << "\n"
                  << "L+T             " << format_fixed(s.layout->location_type, 4) << "\n"
                  << "C+L+T           " << format_fixed(s.layout->color_location_type, 4) << "\n";
        summary["layout"] = {{"color_location", s.layout->color_location},
                             {"location_type", s.layout->location_type},
                             {"color_location_type", s.layout->color_location_type}};
      }
      if (!common.out.empty()) {
        ensure_dir(common.out);
        write_text(fs::path(common.out) / "eval.json", summary.dump(1) + "\n");
        write_manifest(common.out, "eval", args, common, {{"dataset", ev_dataset}, {"predictions", ev_predictions}});
      }
      return 0;
    }

    if (rp->parsed()) {
      if (rp_dataset.empty() == rp_problem.empty()) throw StructuralError("give exactly one of --dataset and --problem");
      if (llm.transcript.empty()) throw StructuralError("--transcript is required");
      std::vector<ProblemInstance> problems;
      if (!rp_problem.empty()) {
        problems.push_back(load_problem(rp_problem));
      } else {
        problems = load_dataset(rp_dataset);
      }
      pipe.seed = common.seed;
      pipe.feedback_mode = *parse_feedback_mode(rp_feedback);
      LlmOptions replay = llm;
      replay.mode = "replay";
      const auto client = make_client(replay, common.seed);

      const fs::path out = common.out;
      ensure_dir(out / "convergence");
      std::vector<std::optional<ProblemRun>> runs(problems.size());
      std::vector<std::string> failures(problems.size());
      const auto n = static_cast<long>(problems.size());
#pragma omp parallel for schedule(dynamic)
      for (long i = 0; i < n; ++i) {
        const ProblemInstance& problem = problems[static_cast<std::size_t>(i)];
        try {
          Rng rng(derive_seed(common.seed, static_cast<std::uint64_t>(i)));
          ProblemRun run;
          run.id = problem.id;
          LlmProposer opt(param_space(problem, pipe.ranges), client, make_phase1_context(problem, pipe.ranges),
                          {pipe.feedback_mode, 2});
          run.phase1 = run_phase1(problem, opt, pipe, rng);
          std::unique_ptr<LayoutProposer> proposer;
          if (rp_proposer == "llm") {
            proposer = std::make_unique<LlmLayoutProposer>(client, make_phase2_context(problem, run.phase1.params));
          } else {
            proposer = std::make_unique<CorrectingLayoutProposer>(problem.task_layout, SceneLayout{});
          }
          run.phase2 = run_phase2(problem, *proposer, pipe, rng);
          run.warnings = run.phase2.warnings;
          const QATask qa = qa_task(problem);
          run.predicted = answer_question(run.phase2.layout, run.phase1.params, qa, problem.sim, &run.warnings);
          run.truth = qa.answer;
          run.iou = iou(run.predicted, run.truth);
          runs[static_cast<std::size_t>(i)] = std::move(run);
        } catch (const std::exception& e) {
          failures[static_cast<std::size_t>(i)] = error_kind(e) + ": " + e.what();
        }
      }
      for (std::size_t i = 0; i < problems.size(); ++i) {
        if (!failures[i].empty()) throw Error(problems[i].id + ": " + failures[i]);
      }

      std::string csv = "id,iou,phase1_best_error,phase1_iterations,phase2_best_psnr,phase2_iterations,predicted,truth\n";
      std::string predictions;
      std::vector<PredictionRecord> preds;
      std::vector<TruthRecord> truths;
      auto names = [](const std::vector<Color>& cs) {
        std::string s;
        for (Color c : cs) s += (s.empty() ? "" : " ") + std::string(to_string(c));
        return s;
      };
      for (std::size_t i = 0; i < problems.size(); ++i) {
        const ProblemRun& run = *runs[i];
        for (const auto& w : run.warnings) std::cerr << "warning: " << run.id << ": " << w << "\n";
        const double psnr_best = run.phase2.best_index ? run.phase2.attempts[*run.phase2.best_index].psnr : 0.0;
        csv += run.id + "," + format_fixed(run.iou, 6) + "," + format_fixed(run.phase1.best_error, 6) + "," +
               std::to_string(run.phase1.steps.size()) + "," + format_fixed(psnr_best, 6) + "," +
               std::to_string(run.phase2.iterations) + "," + names(run.predicted) + "," + names(run.truth) + "\n";
        predictions += json{{"id", run.id},
                            {"answer", colors_json(run.predicted)},
                            {"layout", json::parse(layout_to_json(run.phase2.layout))},
                            {"params", json::parse(params_json(run.phase1.params))}}
                           .dump() +
                       "\n";
        export_convergence(trace_errors(run.phase1), out / "convergence" / (run.id + ".csv"));
        preds.push_back({run.id, run.predicted, run.phase2.layout});
        truths.push_back({problems[i].id, problems[i].qa_answer, problems[i].task_layout});
      }
      write_text(out / "results.csv", csv);
      write_text(out / "predictions.jsonl", predictions);
      write_manifest(out, "replay", args, common,
                     {{"dataset", rp_dataset.empty() ? rp_problem : rp_dataset},
                      {"optimizer", "llm"},
                      {"mode", "replay"},
                      {"transcript", llm.transcript}});
      const EvaluationSummary s = evaluate(preds, truths);
      std::cout << "problems " << s.problems << ", mean IoU " << format_fixed(s.mean_iou, 4) << ", precise IoU "
                << format_fixed(s.precise_iou_rate, 4) << ", network calls " << client->network_calls() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }
  return 0;
}
