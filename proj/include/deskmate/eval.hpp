#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "deskmate/agents.hpp"
#include "deskmate/dataset.hpp"
#include "deskmate/sim.hpp"

namespace deskmate::eval {

// --- matching -----------------------------------------------------------------

struct TemplateShape {
  int order = 0;  // 0 = any position
  bool required = true;
};

struct MatchCount {
  int required = 0;
  int optional = 0;
  auto operator<=>(const MatchCount&) const = default;
};

// Largest (required, optional) pair over injective assignments of actions to
// templates, where can_match[a][t] says action a fits template t and the
// ordered templates used must appear in non-decreasing order along the actions.
MatchCount best_match(const std::vector<std::vector<bool>>& can_match, const std::vector<TemplateShape>& shapes);

// --- per-episode scoring --------------------------------------------------------

struct SetScore {
  std::size_t index = 0;
  int required_total = 0;
  MatchCount matched;
  int redundant = 0;

  double completion() const { return required_total ? static_cast<double>(matched.required) / required_total : 0.0; }
};

struct EpisodeScore {
  std::string entry_id;
  dataset::Level level = dataset::Level::L1;
  bool achievable = true;
  agents::Verdict verdict = agents::Verdict::exhausted;
  bool success = false;
  SetScore best;
  int cyber_total = 0;
  int cyber_correct = 0;
  int real_total = 0;
  int real_correct = 0;
  bool backend_failure = false;

  double cr() const { return best.completion(); }
  double rr() const { return best.required_total ? static_cast<double>(best.redundant) / best.required_total : 0.0; }
};

// Scores against every admissible set and keeps the best one: highest
// completion, then fewest redundant, then most templates, then lowest index.
EpisodeScore score_episode(const dataset::TaskEntry& entry, const std::vector<dataset::AdmissibleSet>& sets,
                           const agents::EpisodeTrace& trace, const memory::Scenario& scenario);

// --- aggregation ------------------------------------------------------------------

struct Metrics {
  int episodes = 0;
  double sr = 0;
  double cr = 0;
  double rr = 0;
  std::optional<double> cta;  // empty when no action of the class was attempted
  std::optional<double> rta;
};

// Rows "L1", "L2", "L3", "Overall"; levels without episodes are omitted.
using LevelMetrics = std::map<std::string, Metrics>;

LevelMetrics aggregate(const std::vector<EpisodeScore>& scores);
// Mean of per-run metrics. Throws when runs cover different entry sets.
LevelMetrics average_runs(const std::vector<std::vector<EpisodeScore>>& runs);

// --- benchmark --------------------------------------------------------------------

using BackendFactory = std::function<std::shared_ptr<llm::ChatBackend>(const dataset::TaskEntry&, int run)>;

struct BenchmarkOptions {
  agents::AgentConfig agent;
  int runs = 1;
  int workers = 1;
  sim::SimOptions sim;
  // Every trace is written to <trace_dir>/run<N>/<entry>.jsonl when set.
  std::optional<std::filesystem::path> trace_dir;
  std::function<void(const std::string& entry_id, int run, const EpisodeScore&)> progress;
};

struct EpisodeResult {
  int run = 0;
  agents::EpisodeTrace trace;
  EpisodeScore score;
};

struct BenchmarkReport {
  agents::Strategy strategy = agents::Strategy::ppdr;
  agents::AblationFlags flags;
  int runs = 0;
  int entries = 0;
  LevelMetrics metrics;
  // Episodes that ended on a backend error; the report is incomplete if any.
  std::vector<std::string> backend_failures;

  bool complete() const { return backend_failures.empty(); }
};

struct BenchmarkResult {
  std::vector<std::vector<EpisodeResult>> runs;  // [run][entry]
  BenchmarkReport report;
};

// Each episode gets a fresh world and memory built from the scenario and the
// entry's availability map.
BenchmarkResult run_benchmark(const std::vector<dataset::TaskEntry>& entries, const memory::Scenario& scenario,
                              const BackendFactory& backends, const BenchmarkOptions& options);

std::string render_report(const BenchmarkReport& report);
nlohmann::json report_to_json(const BenchmarkReport& report);

}  // namespace deskmate::eval
