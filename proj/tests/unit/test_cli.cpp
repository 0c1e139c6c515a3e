#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"
#include "traylab/dataset.hpp"

using test_support::run;
using test_support::slurp;
namespace fs = std::filesystem;

namespace {

const std::string kCli = TRAYLAB_CLI;

std::string data(const std::string& rel) { return (test_support::data_dir() / rel).string(); }

std::string phase1_replay(const fs::path& out) {
  return kCli + " phase1 --optimizer llm --mode replay --transcript " + data("replay/transcript.jsonl") +
         " --problem " + data("dataset/problem_000") + " --max-steps 5 --out " + out.string();
}

}  // namespace

TEST_CASE("sim prints the golden trajectories and stability") {
  const auto r = run(kCli + " sim --program " + data("dataset/problem_000/aux_program.txt"));
  CHECK(r.exit_code == 0);
  CHECK(r.output == slurp(data("golden/sim_aux_problem_000.txt")));
}

TEST_CASE("eval on perfect predictions reports IoU 1") {
  const fs::path dir = test_support::scratch_dir("cli_eval");
  std::string lines;
  for (const auto& p : traylab::load_dataset(data("dataset"))) {
    nlohmann::json answer = nlohmann::json::array();
    for (auto c : p.qa_answer) answer.push_back(std::string(traylab::to_string(c)));
    lines += nlohmann::json{{"id", p.id}, {"answer", answer}, {"layout", nlohmann::json::parse(traylab::layout_to_json(p.task_layout))}}.dump() + "\n";
  }
  traylab::write_text(dir / "pred.jsonl", lines);
  const auto r = run(kCli + " eval --dataset " + data("dataset") + " --predictions " + (dir / "pred.jsonl").string() +
                     " --out " + (dir / "out").string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("mean IoU        1.0000") != std::string::npos);
  const auto summary = nlohmann::json::parse(slurp(dir / "out" / "eval.json"));
  CHECK(summary["mean_iou"] == 1.0);
  CHECK(summary["precise_iou_rate"] == 1.0);
}

TEST_CASE("phase1 replay reproduces the golden files") {
  const fs::path a = test_support::scratch_dir("cli_p1_a");
  const fs::path b = test_support::scratch_dir("cli_p1_b");
  REQUIRE(run(phase1_replay(a)).exit_code == 0);
  REQUIRE(run(phase1_replay(b)).exit_code == 0);
  for (const char* f : {"phase1_params.json", "phase1_results.csv"}) {
    CHECK(slurp(a / f) == slurp(data(std::string("golden/") + f)));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(slurp(a / "convergence.csv") == slurp(b / "convergence.csv"));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["subcommand"] == "phase1");
  CHECK(manifest["network_calls"] == 0);
}

TEST_CASE("a replay miss is a structured failure") {
  const fs::path out = test_support::scratch_dir("cli_miss");
  const std::string err = (out / "err.txt").string();
  const auto r = run(kCli + " phase1 --optimizer llm --mode replay --transcript " + data("replay/transcript.jsonl") +
                         " --problem " + data("dataset/problem_000") + " --max-steps 6 --out " + out.string(),
                     err);
  CHECK(r.exit_code == 2);
  const auto j = nlohmann::json::parse(slurp(err));
  CHECK(j["error"] == "replay_miss");
}

TEST_CASE("bad invocations exit nonzero") {
  CHECK(run(kCli).exit_code != 0);
  CHECK(run(kCli + " sim --program /nonexistent/program.txt").exit_code != 0);
  CHECK(run(kCli + " sim --program " + data("dataset/problem_000/aux_program.txt") + " --bogus").exit_code != 0);
  CHECK(run(kCli + " phase1 --problem " + data("dataset/problem_000") + " --optimizer annealing").exit_code != 0);
  CHECK(run(kCli + " frobnicate").exit_code != 0);
  const fs::path dir = test_support::scratch_dir("cli_bad");
  traylab::write_text(dir / "garbage.txt", "I cannot help with that.");
  const std::string err = (dir / "err.txt").string();
  CHECK(run(kCli + " sim --program " + (dir / "garbage.txt").string(), err).exit_code == 2);
  CHECK(nlohmann::json::parse(slurp(err))["error"] == "parse_error");
}

TEST_CASE("gen honors the seed and config files, with flags taking precedence") {
  const fs::path dir = test_support::scratch_dir("cli_gen");
  traylab::write_text(dir / "cfg.json", "{\"seed\": 7, \"n\": 1}");
  REQUIRE(run(kCli + " gen --config " + (dir / "cfg.json").string() + " --out " + (dir / "a").string()).exit_code == 0);
  REQUIRE(run(kCli + " gen --n 1 --seed 7 --out " + (dir / "b").string()).exit_code == 0);
  REQUIRE(run(kCli + " gen --config " + (dir / "cfg.json").string() + " --seed 8 --out " + (dir / "c").string()).exit_code == 0);
  const std::string a = slurp(dir / "a" / "problem_000" / "problem.json");
  CHECK(a == slurp(dir / "b" / "problem_000" / "problem.json"));
  CHECK(a == slurp(data("dataset/problem_000/problem.json")));
  CHECK(a != slurp(dir / "c" / "problem_000" / "problem.json"));
  CHECK_FALSE(fs::exists(dir / "a" / "problem_001"));
}

TEST_CASE("phase2, answer and cmaes phase1 run end to end") {
  const fs::path dir = test_support::scratch_dir("cli_e2e");
  const std::string problem = data("dataset/problem_000");
  REQUIRE(run(kCli + " phase1 --optimizer cmaes --max-steps 2 --problem " + problem + " --out " + (dir / "p1").string())
              .exit_code == 0);
  CHECK(fs::exists(dir / "p1" / "phase1_params.json"));
  REQUIRE(run(kCli + " phase2 --proposer corrector --problem " + problem + " --out " + (dir / "p2").string()).exit_code ==
          0);
  CHECK(traylab::layout_from_json(slurp(dir / "p2" / "phase2_layout.json"), "l") ==
        traylab::load_problem(problem).task_layout);
  const auto r = run(kCli + " answer --problem " + problem + " --layout " + (dir / "p2" / "phase2_layout.json").string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("answer = ") == 0);
}

TEST_CASE("replay subcommand runs the whole pipeline without network calls") {
  const fs::path out = test_support::scratch_dir("cli_replay");
  const auto r = run(kCli + " replay --transcript " + data("replay/transcript.jsonl") + " --dataset " +
                     data("dataset") + " --max-steps 5 --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("mean IoU 1.0000") != std::string::npos);
  CHECK(r.output.find("network calls 0") != std::string::npos);
  CHECK(fs::exists(out / "convergence" / "problem_001.csv"));
}
