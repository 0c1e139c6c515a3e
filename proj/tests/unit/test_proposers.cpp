#include <deque>

#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"
#include "traylab/errors.hpp"
#include "traylab/pipeline.hpp"
#include "traylab/proposers.hpp"
#include "traylab/render.hpp"

using namespace traylab;

namespace {

class QueueTransport final : public Transport {
 public:
  explicit QueueTransport(std::deque<std::string> replies) : replies_(std::move(replies)) {}
  HttpResponse post(const std::string&, const std::string& body, const std::map<std::string, std::string>&,
                    double) override {
    requests.push_back(nlohmann::json::parse(body));
    if (replies_.empty()) throw TransportError("queue exhausted", 400);
    const std::string text = replies_.front();
    replies_.pop_front();
    return {200, nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump()};
  }
  std::vector<nlohmann::json> requests;

 private:
  std::deque<std::string> replies_;
};

std::shared_ptr<LlmClient> live_client(std::shared_ptr<QueueTransport> t) {
  ClientConfig c;
  c.mode = ClientMode::live;
  return std::make_shared<LlmClient>(c, t, [](double) {});
}

const ProblemInstance& fixture_problem() {
  static const ProblemInstance p = load_problem(test_support::data_dir() / "dataset" / "problem_000");
  return p;
}

// Shaped like a first-round model answer: prose, then a python block.
const char* kFirstReply = R"(To better match the observed motion I lowered the bottle friction.

```python
sim = SIMULATOR_MODEL()
sim.create_pusher('3.0 3.0 0.05')
physical_parameters_for_object_id_tray = { 
             'sliding-friction': 0.1,
             'armature': 0.1,
             'stiffness': 0.0,
             'mass': 0.5,
             'damping': 20
         }
sim.create_tray(object_physics = physical_parameters_for_object_id_tray)
physical_parameters_for_object_id_1 = { 
             'sliding-friction': 0.2,
             'armature': 0.3,
             'stiffness': 0.4,
             'mass': 20.0,
             'damping': 6.5
         }
sim.create_object(object_id=1, object_name='bottle', object_location=('row_1', 'column_3'), object_color='orange', object_physics=physical_parameters_for_object_id_1)
physical_parameters_for_object_id_2 = { 
             'sliding-friction': 0.6,
             'armature': 0.5,
             'stiffness': 1.1,
             'mass': 10.0,
             'damping': 9.0
         }
sim.create_object(object_id=2, object_name='martini_glass', object_location=('row_1', 'column_2'), object_color='orange', object_physics=physical_parameters_for_object_id_2)
physical_parameters_for_object_id_3 = { 
             'sliding-friction': 0.04,
             'armature': 0.9,
             'stiffness': 1.0,
             'mass': 4.0,
             'damping': 12
         }
sim.create_object(object_id=3, object_name='wine_glass', object_location=('row_1', 'column_1'), object_color='orange', object_physics=physical_parameters_for_object_id_3)
sim.create_scene()
sim_out=sim.run_simulation()
del sim
```
)";

}  // namespace

TEST_CASE("a first-round reply becomes a snapped parameter vector") {
  const ProblemInstance& p = fixture_problem();
  auto t = std::make_shared<QueueTransport>(std::deque<std::string>{kFirstReply});
  LlmProposer opt(param_space(p), live_client(t), make_phase1_context(p));
  Rng rng(0);
  const auto props = opt.propose({}, rng);
  REQUIRE(props.size() == 1);
  const ClassParamMap params = param_space(p).unflatten(props[0].params);
  CHECK(params.at(ObjectClass::bottle).sliding_friction == 0.2);
  CHECK(params.at(ObjectClass::bottle).damping == 6.5);
  CHECK(params.at(ObjectClass::bottle).mass == 20.0);
  // Out-of-range values are pulled back inside the open ranges.
  CHECK(params.at(ObjectClass::martini_glass).stiffness == 0.9);
  CHECK(params.at(ObjectClass::wine_glass).sliding_friction == 0.2);
  CHECK(params.at(ObjectClass::wine_glass).stiffness == 0.9);
  CHECK(params.at(ObjectClass::wine_glass).damping == 9.9);
  CHECK(props[0].program_text == kFirstReply);
  REQUIRE(t->requests.size() == 1);
  CHECK(t->requests[0]["messages"].size() == 1);
}

TEST_CASE("a refusal is retried with a corrective message") {
  const ProblemInstance& p = fixture_problem();
  auto t = std::make_shared<QueueTransport>(std::deque<std::string>{"I cannot help with that.", kFirstReply});
  LlmProposer opt(param_space(p), live_client(t), make_phase1_context(p));
  Rng rng(0);
  CHECK(opt.propose({}, rng).size() == 1);
  REQUIRE(t->requests.size() == 2);
  const auto& msgs = t->requests[1]["messages"];
  REQUIRE(msgs.size() == 3);
  CHECK(msgs[1]["role"] == "assistant");
  CHECK(msgs[1]["content"][0]["text"] == "I cannot help with that.");
  CHECK(msgs[2]["role"] == "user");
}

TEST_CASE("three unusable replies fail the step") {
  const ProblemInstance& p = fixture_problem();
  auto t = std::make_shared<QueueTransport>(
      std::deque<std::string>{"I cannot help with that.", "Still no.", "```python\nprint(1)\n```", kFirstReply});
  LlmProposer opt(param_space(p), live_client(t), make_phase1_context(p));
  Rng rng(0);
  CHECK_THROWS_AS(opt.propose({}, rng), OptimizerStepError);
  CHECK(t->requests.size() == 3);
}

TEST_CASE("a program missing a class is rejected") {
  const ProblemInstance& p = fixture_problem();
  std::string partial = kFirstReply;
  partial = partial.substr(0, partial.find("physical_parameters_for_object_id_3"));
  partial += "```\n";
  auto t = std::make_shared<QueueTransport>(std::deque<std::string>{partial, partial, partial});
  LlmProposer opt(param_space(p), live_client(t), make_phase1_context(p));
  Rng rng(0);
  CHECK_THROWS_AS(opt.propose({}, rng), OptimizerStepError);
}

TEST_CASE("feedback reaches the next prompt") {
  const ProblemInstance& p = fixture_problem();
  auto t = std::make_shared<QueueTransport>(std::deque<std::string>{kFirstReply});
  LlmProposer opt(param_space(p), live_client(t), make_phase1_context(p));
  OptTrace trace;
  trace.append({param_space(p).flatten(p.class_params), {{1, 1.9}, {2, 0.4}, {3, 0.2}}, 0.83});
  Rng rng(0);
  opt.propose(trace, rng);
  const std::string text = t->requests[0]["messages"][0]["content"][0]["text"];
  CHECK(text.find("bottle (object_id=1) trajectory error: 1.9") != std::string::npos);
  CHECK(text.find("Error = 0.83") != std::string::npos);
}

TEST_CASE("the layout proposer reads layouts and rejects duplicate cells") {
  const ProblemInstance& p = fixture_problem();
  const std::string good = "```python\n" + emit_program(make_program(p.task_layout, p.class_params)) + "```\n";
  SceneLayout clash = p.task_layout;
  clash.entries[1].cell = clash.entries[0].cell;
  std::string bad = emit_program(make_program(p.task_layout, p.class_params));
  const std::string from = "('" + row_token(p.task_layout.entries[1].cell.row) + "', '" +
                           column_token(p.task_layout.entries[1].cell.column) + "')";
  const std::string to = "('" + row_token(p.task_layout.entries[0].cell.row) + "', '" +
                         column_token(p.task_layout.entries[0].cell.column) + "')";
  bad.replace(bad.find(from), from.size(), to);
  auto t = std::make_shared<QueueTransport>(std::deque<std::string>{bad, good});
  LlmLayoutProposer proposer(live_client(t), make_phase2_context(p, p.class_params));
  Rng rng(0);
  const LayoutProposal prop = proposer.propose({}, rng);
  CHECK(prop.layout == p.task_layout);
  CHECK(t->requests.size() == 2);
  CHECK(t->requests[0]["messages"][0]["content"][1]["type"] == "image_url");
}

TEST_CASE("the correcting proposer converges in two rounds") {
  const ProblemInstance& p = fixture_problem();
  SceneLayout start = p.task_layout;
  std::swap(start.entries[0].cell, start.entries[2].cell);
  start.entries[1].cls = start.entries[1].cls == ObjectClass::bottle ? ObjectClass::wine_glass : ObjectClass::bottle;
  CorrectingLayoutProposer proposer(p.task_layout, start);
  Rng rng(0);
  std::vector<Phase2Attempt> history;
  LayoutProposal first = proposer.propose(history, rng);
  CHECK(first.layout == normalized(start));
  history.push_back({first.layout, {}, misplaced_colors(first.layout, p.task_layout), 0.0});
  CHECK(history.back().misplaced.size() == 3);
  LayoutProposal second = proposer.propose(history, rng);
  CHECK(misplaced_colors(second.layout, p.task_layout).empty());
  CHECK_NOTHROW(validate_layout(second.layout));
}

TEST_CASE("scripted layouts follow the history length") {
  SceneLayout a{{{1, ObjectClass::bottle, {1, 1}, Color::red}}};
  SceneLayout b{{{1, ObjectClass::bottle, {2, 2}, Color::red}}};
  ScriptedLayoutProposer proposer({a, b});
  Rng rng(0);
  std::vector<Phase2Attempt> history;
  CHECK(proposer.propose(history, rng).layout == a);
  history.push_back({});
  CHECK(proposer.propose(history, rng).layout == b);
  history.push_back({});
  CHECK(proposer.propose(history, rng).layout == b);
}

TEST_CASE("normalized sorts by id") {
  SceneLayout l{{{2, ObjectClass::bottle, {1, 1}, Color::red}, {1, ObjectClass::bottle, {1, 2}, Color::blue}}};
  CHECK(normalized(l).entries[0].object_id == 1);
}
