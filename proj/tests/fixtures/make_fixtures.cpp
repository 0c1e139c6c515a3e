// Regenerates the checked-in test data under tests/data:
//   dataset/                fixture problems (3 classes)
//   replay/transcript.jsonl hand-written model replies recorded against the fixture prompts
//   golden/                 frozen outputs compared by the tests
//
// Phase-1 replies carry five hand-written parameter sets; iteration 3 of
// problem_000 first gets a reply without code, which exercises the corrective
// retry. Phase-2 replies
// swap two objects, then give the correct layout.
//
// Usage: make_fixtures <tests/data directory>

#include <deque>
#include <filesystem>
#include <iostream>

#include "traylab/dataset.hpp"
#include "traylab/errors.hpp"
#include "traylab/llm_client.hpp"
#include "traylab/pipeline.hpp"
#include "traylab/proposers.hpp"
#include "traylab/scene_dsl.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace traylab;

namespace {

constexpr std::uint64_t kDatasetSeed = 7;
constexpr int kPhase1Steps = 5;

// friction, armature, stiffness, damping as written in the replies.
using Row = std::array<const char*, 4>;
struct Reply {
  Row bottle, martini, wine;
};

const std::vector<Reply> kTrace = {
    {{"0.2", "0.3", "0.4", "6.5"}, {"0.6", "0.5", "1.1", "9.0"}, {"0.8", "0.9", "1.0", "8.4"}},
    {{"0.25", "0.4", "0.5", "7.0"}, {"0.55", "0.6", "1.2", "8.5"}, {"0.75", "1.0", "0.9", "8.2"}},
    {{"0.23", "0.45", "0.55", "7.5"}, {"0.54", "0.65", "1.25", "8.3"}, {"0.72", "1.05", "0.95", "8.1"}},
    {{"0.22", "0.43", "0.53", "7.4"}, {"0.52", "0.62", "1.23", "8.1"}, {"0.71", "1.04", "0.94", "8.0"}},
    {{"0.21", "0.42", "0.54", "7.3"}, {"0.51", "0.61", "1.22", "8.0"}, {"0.73", "1.03", "0.96", "7.9"}},
};

std::string dict(const std::string& name, const Row& r, const char* mass) {
  return name + " = { \n             'sliding-friction': " + r[0] + ",\n             'armature': " + r[1] +
         ",\n             'stiffness': " + r[2] + ",\n             'mass': " + mass + ",\n             'damping': " +
         r[3] + "\n         }\n";
}

std::string phase1_reply(const Reply& reply) {
  std::string p = "Here is the updated program.\n\n```python\nsim = SIMULATOR_MODEL()\nsim.create_pusher('3.0 3.0 0.05')\n";
  p += dict("physical_parameters_for_object_id_tray", {"0.1", "0.1", "0.0", "20"}, "0.5");
  p += "sim.create_tray(object_physics = physical_parameters_for_object_id_tray)\n";
  const std::array<std::tuple<int, const char*, const char*, Row, const char*>, 3> objects{{
      {1, "bottle", "('row_1', 'column_3')", reply.bottle, "20.0"},
      {2, "martini_glass", "('row_1', 'column_2')", reply.martini, "10.0"},
      {3, "wine_glass", "('row_1', 'column_1')", reply.wine, "4.0"},
  }};
  for (const auto& [id, name, loc, row, mass] : objects) {
    const std::string var = "physical_parameters_for_object_id_" + std::to_string(id);
    p += dict(var, row, mass);
    p += "sim.create_object(object_id=" + std::to_string(id) + ", object_name='" + name + "', object_location=" + loc +
         ", object_color='orange', object_physics=" + var + ")\n";
  }
  p += "sim.create_scene()\nsim_out=sim.run_simulation()\ndel sim\n```\n";
  return p;
}

std::string chat_body(const std::string& text) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

class QueueTransport final : public Transport {
 public:
  void push(std::string text) { replies_.push_back(std::move(text)); }
  bool empty() const { return replies_.empty(); }
  HttpResponse post(const std::string&, const std::string&, const std::map<std::string, std::string>&, double) override {
    if (replies_.empty()) throw TransportError("fixture queue exhausted", 0);
    HttpResponse r{200, chat_body(replies_.front())};
    replies_.pop_front();
    return r;
  }

 private:
  std::deque<std::string> replies_;
};

std::shared_ptr<LlmClient> recording_client(const fs::path& transcript, std::shared_ptr<QueueTransport> t) {
  ClientConfig c;
  c.mode = ClientMode::record;
  c.transcript = transcript;
  auto client = std::make_shared<LlmClient>(c, t, [](double) {});
  client->set_clock([] { return std::string("2025-01-01T00:00:00Z"); });
  return client;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <tests/data directory>\n";
    return 1;
  }
  try {
    const fs::path data = argv[1];
    fs::remove_all(data / "dataset");
    fs::remove_all(data / "replay");
    fs::create_directories(data / "replay");
    fs::create_directories(data / "golden");

    DatasetConfig cfg;
    cfg.n_problems = 2;
    cfg.seed = kDatasetSeed;
    const auto problems = generate_dataset(cfg);
    for (const auto& p : problems) persist(p, data / "dataset" / p.id);

    const fs::path transcript = data / "replay" / "transcript.jsonl";
    PipelineConfig pipe;
    pipe.phase1_max_steps = kPhase1Steps;

    std::string replay_results = "id,phase1_best_error,phase2_iterations\n";
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const ProblemInstance& problem = problems[i];
      auto transport = std::make_shared<QueueTransport>();
      for (std::size_t k = 0; k < kTrace.size(); ++k) {
        if (i == 0 && k == 2) transport->push("I cannot help with that.");
        transport->push(phase1_reply(kTrace[k]));
      }
      auto client = recording_client(transcript, transport);
      LlmProposer opt(param_space(problem), client, make_phase1_context(problem), {});
      Rng rng(derive_seed(0, i));
      const Phase1Result r1 = run_phase1(problem, opt, pipe, rng);
      if (!transport->empty()) throw Error("unused Phase-1 replies for " + problem.id);

      SceneLayout wrong = problem.task_layout;
      std::swap(wrong.entries[0].cell, wrong.entries[1].cell);
      transport->push("```python\n" + emit_program(make_program(wrong, r1.params)) + "```\n");
      transport->push("```python\n" + emit_program(make_program(problem.task_layout, r1.params)) + "```\n");
      LlmLayoutProposer layouts(client, make_phase2_context(problem, r1.params));
      const Phase2Result r2 = run_phase2(problem, layouts, pipe, rng);
      if (!r2.converged || !transport->empty()) throw Error("Phase-2 fixture did not converge for " + problem.id);

      if (i == 0) {
        write_text(data / "golden" / "phase1_params.json", params_json(r1.params));
        write_text(data / "golden" / "phase1_results.csv", phase1_results_csv(r1));
      }
      std::cout << problem.id << ": best Phase-1 error " << r1.best_error << ", Phase-2 iterations " << r2.iterations
                << "\n";
    }

    const ProblemInstance& first = problems.front();
    const SceneProgram aux = parse_program(read_text(data / "dataset" / first.id / "aux_program.txt"));
    const SimResult sim = run_simulation(program_scene(aux, first.aux_pusher_velocity), SimConfig{});
    std::string golden = format_trajectories(sim.trajectories, 20);
    std::string stable = "stable = {";
    for (const auto& [id, s] : sim.stability.stable) {
      stable += (stable.size() > 10 ? ", " : "") + std::to_string(id) + ": " + (s ? "True" : "False");
    }
    write_text(data / "golden" / "sim_aux_problem_000.txt", golden + stable + "}\n");
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
