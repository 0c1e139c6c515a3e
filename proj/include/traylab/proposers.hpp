#pragma once

// Model-driven proposers for both phases and the layout proposers used by
// Phase 2. A reply without a usable program is retried with a corrective
// message; when the retries run out the step fails with OptimizerStepError.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "traylab/llm_client.hpp"
#include "traylab/optimizers.hpp"
#include "traylab/prompts.hpp"
#include "traylab/scene_dsl.hpp"

namespace traylab {

struct ParsedReply {
  SceneProgram program;
  std::string text;
  std::vector<std::string> warnings;
};

/// Sends `messages`, parses the reply, and checks it with `accept` (which
/// throws ParseError or StructuralError to reject). Makes 1 + max_retries calls at most.
ParsedReply complete_program(LlmClient& client, std::vector<Message> messages, int max_retries,
                             const std::function<void(const SceneProgram&)>& accept);

struct LlmProposerSettings {
  FeedbackMode mode = FeedbackMode::full_trace;
  int max_retries = 2;
};

/// Phase-1 proposer: the reply's per-class parameters, rounded to one decimal
/// and kept inside the ranges.
class LlmProposer final : public Optimizer {
 public:
  LlmProposer(ParamSpace space, std::shared_ptr<LlmClient> client, Phase1Context context,
              LlmProposerSettings settings = {});
  std::string name() const override { return "llm"; }
  std::vector<Proposal> propose(const OptTrace& feedback, Rng& rng) override;

 private:
  ParamSpace space_;
  std::shared_ptr<LlmClient> client_;
  Phase1Context context_;
  LlmProposerSettings settings_;
};

struct LayoutProposal {
  SceneLayout layout;
  std::string program_text;
};

class LayoutProposer {
 public:
  virtual ~LayoutProposer() = default;
  virtual std::string name() const = 0;
  /// May throw OptimizerStepError.
  virtual LayoutProposal propose(std::span<const Phase2Attempt> history, Rng& rng) = 0;
};

class LlmLayoutProposer final : public LayoutProposer {
 public:
  LlmLayoutProposer(std::shared_ptr<LlmClient> client, Phase2Context context, int max_retries = 2);
  std::string name() const override { return "llm"; }
  LayoutProposal propose(std::span<const Phase2Attempt> history, Rng& rng) override;

 private:
  std::shared_ptr<LlmClient> client_;
  Phase2Context context_;
  int max_retries_;
};

/// Starts from `initial`; each later round takes the previous attempt, drops
/// the reported colors and re-inserts them as they appear in `reference`.
class CorrectingLayoutProposer final : public LayoutProposer {
 public:
  CorrectingLayoutProposer(SceneLayout reference, SceneLayout initial);
  std::string name() const override { return "corrector"; }
  LayoutProposal propose(std::span<const Phase2Attempt> history, Rng& rng) override;

 private:
  SceneLayout reference_;
  SceneLayout initial_;
};

/// Entry i for a history of length i, the last entry once exhausted.
class ScriptedLayoutProposer final : public LayoutProposer {
 public:
  explicit ScriptedLayoutProposer(std::vector<SceneLayout> script);
  std::string name() const override { return "scripted"; }
  LayoutProposal propose(std::span<const Phase2Attempt> history, Rng& rng) override;

 private:
  std::vector<SceneLayout> script_;
};

/// Sorts entries by object id.
SceneLayout normalized(SceneLayout layout);

}  // namespace traylab
