#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "deskmate/actions.hpp"
#include "deskmate/llm.hpp"
#include "deskmate/memory.hpp"
#include "deskmate/sim.hpp"
#include "deskmate/trace.hpp"

namespace deskmate::agents {

// Prompt texts embedded from resources/prompts, keyed by file stem.
const std::map<std::string, std::string_view, std::less<>>& prompts();
std::string_view prompt(std::string_view name);
// Role prompt followed by the action grammar.
std::string system_prompt(std::string_view name);

// --- output parsing ---------------------------------------------------------

class MalformedOutput : public Error {
 public:
  using Error::Error;
};

// Each parser throws MalformedOutput on a reply that breaks the format.
PerceptionPackage parse_perception(std::string_view reply);
Plan parse_plan(std::string_view reply);

struct Decision {
  std::string thought;  // non-action lines, joined
  std::vector<actions::Action> actions;
  std::vector<std::string> notes;
};
// At least one action line; lines beyond `max_actions` are dropped with a note.
// max_actions <= 0 keeps everything.
Decision parse_decision(std::string_view reply, int max_actions);

struct ReflectionOutput {
  ReflectionResult result;
  std::vector<std::string> unavailable;  // names from UNAVAILABLE: lines
};
// First token must be Y or N and a rationale must follow.
ReflectionOutput parse_reflection(std::string_view reply);

// Moves in `batch` toward a person who was neither informed nor asked earlier
// (in `contacted`) or earlier in the batch. Returns the offending names.
std::vector<std::string> lint_moves(const std::vector<actions::Action>& batch,
                                    const std::set<memory::EntityId>& contacted,
                                    const memory::TopoGraph& graph);

// --- episodes -----------------------------------------------------------------

struct AgentConfig {
  Strategy strategy = Strategy::ppdr;
  AblationFlags flags;
  int max_steps = 30;
  int max_actions_per_step = 3;
  int max_consecutive_malformed = 3;
  std::uint64_t seed = 0;
  memory::RenderOptions render;
};

// Receives the events of a running episode in trace order.
class EpisodeObserver {
 public:
  virtual ~EpisodeObserver() = default;
  virtual void on_header(const TraceHeader&) {}
  virtual void on_perception(int /*step*/, const PerceptionPackage&) {}
  virtual void on_plan(int /*step*/, const Plan&) {}
  virtual void on_action(int /*step*/, const StepAction&, const std::vector<sim::SimEvent>&) {}
  virtual void on_reflection(int /*step*/, const ReflectionResult&) {}
  virtual void on_step(const StepRecord&) {}
  virtual void on_footer(const EpisodeTrace&) {}
  // Checked before every step; true ends the episode as exhausted.
  virtual bool cancelled() const { return false; }
};

struct EpisodeInput {
  std::string entry_id;
  std::string instruction;
};

// Runs one instruction to a verdict. `memory` keeps its long-term graph
// across calls; short-term stores are reset at the start.
EpisodeTrace run_episode(const EpisodeInput& input, sim::World& world, memory::Memory& memory,
                         llm::ChatBackend& backend, const AgentConfig& config,
                         EpisodeObserver* observer = nullptr);

}  // namespace deskmate::agents
