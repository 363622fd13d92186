#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "deskmate/actions.hpp"
#include "deskmate/memory.hpp"

namespace deskmate::agents {

inline constexpr int kTraceSchemaVersion = 1;

enum class Strategy { ppdr, direct, cot, react, reflexion };
std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

struct AblationFlags {
  bool perception = true;
  bool planning = true;
  bool reflection = true;

  bool operator==(const AblationFlags&) const = default;
};
std::string to_string(const AblationFlags& flags);  // "P+Pl+D+R" style

enum class Verdict { achieved, unachievable, exhausted };
std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view text);

struct PerceptionPackage {
  std::string observation;
  std::string task_entities;
  std::string active_chat;

  std::string text() const;
  bool operator==(const PerceptionPackage&) const = default;
};

struct Plan {
  std::string completed;
  std::vector<std::string> roadmap;
  bool done = false;  // "ROADMAP: done"

  std::string text() const;
  bool operator==(const Plan&) const = default;
};

enum class Judgment { Y, N };

struct ReflectionResult {
  Judgment judgment = Judgment::Y;
  std::string rationale;
  // Memory updates applied because of this judgment ("h_mao unavailable").
  std::vector<std::string> updates;

  bool operator==(const ReflectionResult&) const = default;
};

struct StepAction {
  actions::Action action;
  bool executed = true;
  std::string error;  // validation failure, when not executed
  actions::ExecOutcome outcome = actions::ExecOutcome::done;

  bool operator==(const StepAction&) const = default;
};

struct StepRecord {
  int step = 0;
  std::optional<PerceptionPackage> perception;
  std::optional<Plan> plan;
  std::string thought;
  std::vector<StepAction> actions;
  memory::IncrementalInfo delta;
  std::optional<ReflectionResult> reflection;
  // Free-text critique appended to context by the reflexion baseline.
  std::optional<std::string> critique;
  std::vector<std::string> notes;
  bool malformed = false;

  bool operator==(const StepRecord&) const = default;
};

struct TraceHeader {
  std::string entry_id;
  Strategy strategy = Strategy::ppdr;
  AblationFlags flags;
  std::uint64_t seed = 0;
  std::string instruction;
  std::string backend;

  bool operator==(const TraceHeader&) const = default;
};

struct EpisodeTrace {
  TraceHeader header;
  std::vector<StepRecord> steps;
  Verdict verdict = Verdict::exhausted;
  std::string error;

  int action_count() const;
  int rejected_count() const;
  bool operator==(const EpisodeTrace&) const = default;
};

nlohmann::json header_to_json(const TraceHeader& h);
nlohmann::json step_to_json(const StepRecord& s);
nlohmann::json footer_to_json(const EpisodeTrace& t);

// One JSON object per line: header, steps, footer.
std::string serialize(const EpisodeTrace& trace);
EpisodeTrace parse_trace(std::string_view jsonl);
EpisodeTrace load_trace(const std::filesystem::path& path);
void save_trace(const std::filesystem::path& path, const EpisodeTrace& trace);

// Human-readable dump used by `deskmate trace`.
std::string render_trace(const EpisodeTrace& trace, std::optional<int> only_step = std::nullopt);

}  // namespace deskmate::agents
