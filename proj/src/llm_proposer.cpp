#include <algorithm>
#include <set>

#include "traylab/errors.hpp"
#include "traylab/proposers.hpp"

namespace traylab {

ParsedReply complete_program(LlmClient& client, std::vector<Message> messages, int max_retries,
                             const std::function<void(const SceneProgram&)>& accept) {
  std::string reason;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const std::string text = client.complete(messages);
    try {
      ParsedReply reply;
      reply.text = text;
      reply.program = parse_program(extract_program_text(text), &reply.warnings);
      if (accept) accept(reply.program);
      return reply;
    } catch (const ParseError& e) {
      reason = e.what();
    } catch (const StructuralError& e) {
      reason = e.what();
    }
    messages.push_back(Message::text("assistant", text));
    messages.push_back(retry_message(reason));
  }
  throw OptimizerStepError("no usable program after " + std::to_string(max_retries + 1) + " replies: " + reason);
}

LlmProposer::LlmProposer(ParamSpace space, std::shared_ptr<LlmClient> client, Phase1Context context,
                         LlmProposerSettings settings)
    : space_(std::move(space)), client_(std::move(client)), context_(std::move(context)), settings_(settings) {
  if (!client_) throw StructuralError("LLM proposer needs a client");
}

std::vector<Proposal> LlmProposer::propose(const OptTrace& feedback, Rng&) {
  std::vector<Phase1Attempt> attempts;
  for (const auto& p : feedback.points()) attempts.push_back({space_.unflatten(p.params), p.per_object_error, p.total_error});

  ClassParamMap params;
  const ParsedReply reply = complete_program(
      *client_, build_phase1_messages(context_, attempts, settings_.mode), settings_.max_retries,
      [&](const SceneProgram& program) {
        params = extract_class_params(program).params;
        for (ObjectClass cls : space_.classes()) {
          if (!params.count(cls)) throw StructuralError("the program declares no " + std::string(to_string(cls)));
        }
      });
  return {{space_.snap(space_.flatten(params)), reply.text}};
}

LlmLayoutProposer::LlmLayoutProposer(std::shared_ptr<LlmClient> client, Phase2Context context, int max_retries)
    : client_(std::move(client)), context_(std::move(context)), max_retries_(max_retries) {
  if (!client_) throw StructuralError("LLM layout proposer needs a client");
}

LayoutProposal LlmLayoutProposer::propose(std::span<const Phase2Attempt> history, Rng&) {
  const ParsedReply reply = complete_program(*client_, build_phase2_messages(context_, history), max_retries_,
                                             [](const SceneProgram& program) { validate_layout(program.layout()); });
  return {normalized(reply.program.layout()), reply.text};
}

SceneLayout normalized(SceneLayout layout) {
  std::sort(layout.entries.begin(), layout.entries.end(),
            [](const LayoutEntry& a, const LayoutEntry& b) { return a.object_id < b.object_id; });
  return layout;
}

CorrectingLayoutProposer::CorrectingLayoutProposer(SceneLayout reference, SceneLayout initial)
    : reference_(normalized(std::move(reference))), initial_(normalized(std::move(initial))) {}

LayoutProposal CorrectingLayoutProposer::propose(std::span<const Phase2Attempt> history, Rng&) {
  if (history.empty()) return {initial_, {}};
  const Phase2Attempt& last = history.back();
  const std::set<Color> wrong(last.misplaced.begin(), last.misplaced.end());
  SceneLayout next;
  for (const auto& e : last.layout.entries) {
    if (!wrong.count(e.color)) next.entries.push_back(e);
  }
  for (const auto& r : reference_.entries) {
    if (wrong.count(r.color)) next.entries.push_back(r);
  }
  // Keep object ids unique when a kept entry shares an id with a re-inserted one.
  std::set<int> used;
  int next_id = 1;
  for (const auto& e : next.entries) next_id = std::max(next_id, e.object_id + 1);
  for (auto& e : next.entries) {
    if (!used.insert(e.object_id).second) {
      e.object_id = next_id++;
      used.insert(e.object_id);
    }
  }
  return {normalized(std::move(next)), {}};
}

ScriptedLayoutProposer::ScriptedLayoutProposer(std::vector<SceneLayout> script) : script_(std::move(script)) {
  if (script_.empty()) throw StructuralError("scripted layout proposer needs at least one entry");
}

LayoutProposal ScriptedLayoutProposer::propose(std::span<const Phase2Attempt> history, Rng&) {
  return {script_[std::min(history.size(), script_.size() - 1)], {}};
}

}  // namespace traylab
