#include <atomic>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "deskmate/eval.hpp"

namespace deskmate::eval {

namespace {

EpisodeResult run_one(const dataset::TaskEntry& entry, const std::vector<dataset::AdmissibleSet>& sets,
                      const memory::Scenario& scenario, const BackendFactory& backends,
                      const BenchmarkOptions& options, int run) {
  EpisodeResult result;
  result.run = run;
  auto config = options.agent;
  config.seed = options.agent.seed + static_cast<std::uint64_t>(run);

  sim::World world(scenario, entry.availability, options.sim);
  auto memory = world.initial_memory();
  std::shared_ptr<llm::ChatBackend> backend;
  try {
    backend = backends(entry, run);
  } catch (const Error& e) {
    result.trace.header = {entry.id, config.strategy, config.flags, config.seed, entry.instruction, ""};
    result.trace.error = fmt::format("backend unavailable: {}", e.what());
  }
  if (backend) result.trace = agents::run_episode({entry.id, entry.instruction}, world, memory, *backend, config);
  result.score = score_episode(entry, sets, result.trace, scenario);

  if (options.trace_dir) {
    agents::save_trace(*options.trace_dir / fmt::format("run{}", run + 1) / (entry.id + ".jsonl"), result.trace);
  }
  return result;
}

}  // namespace

BenchmarkResult run_benchmark(const std::vector<dataset::TaskEntry>& entries, const memory::Scenario& scenario,
                              const BackendFactory& backends, const BenchmarkOptions& options) {
  std::vector<std::vector<dataset::AdmissibleSet>> gold;
  gold.reserve(entries.size());
  for (const auto& e : entries) gold.push_back(dataset::resolve_gold(e, scenario));

  BenchmarkResult out;
  std::mutex progress_mu;
  for (int run = 0; run < options.runs; ++run) {
    std::vector<EpisodeResult> results(entries.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
      for (std::size_t i = next++; i < entries.size(); i = next++) {
        try {
          results[i] = run_one(entries[i], gold[i], scenario, backends, options, run);
          if (options.progress) {
            std::lock_guard lock(progress_mu);
            options.progress(entries[i].id, run, results[i].score);
          }
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    const int n = std::max(1, std::min<int>(options.workers, static_cast<int>(entries.size())));
    if (n == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int w = 0; w < n; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    out.runs.push_back(std::move(results));
  }

  auto& report = out.report;
  report.strategy = options.agent.strategy;
  report.flags = options.agent.flags;
  report.runs = options.runs;
  report.entries = static_cast<int>(entries.size());
  std::vector<std::vector<EpisodeScore>> scores;
  for (const auto& run : out.runs) {
    auto& s = scores.emplace_back();
    for (const auto& r : run) {
      s.push_back(r.score);
      if (r.score.backend_failure || r.trace.error.starts_with("backend")) {
        report.backend_failures.push_back(fmt::format("run {} {}: {}", r.run + 1, r.score.entry_id, r.trace.error));
      }
    }
  }
  report.metrics = average_runs(scores);
  return out;
}

namespace {

std::string pct(double v) { return fmt::format("{:7.1f}", v * 100.0); }
std::string pct(const std::optional<double>& v) { return v ? pct(*v) : fmt::format("{:>7}", "-"); }

}  // namespace

std::string render_report(const BenchmarkReport& report) {
  std::string out = fmt::format("Strategy {} ({}), {} run{}, {} entries\n", agents::to_string(report.strategy),
                                agents::to_string(report.flags), report.runs, report.runs == 1 ? "" : "s",
                                report.entries);
  out += "Level      N    SR↑    CR↑    RR↓   CTA↑   RTA↑\n";
  for (const char* row : {"L1", "L2", "L3", "Overall"}) {
    auto it = report.metrics.find(row);
    if (it == report.metrics.end()) continue;
    const auto& m = it->second;
    out += fmt::format("{:<8}{:>4}{}{}{}{}{}\n", row, m.episodes, pct(m.sr), pct(m.cr), pct(m.rr), pct(m.cta),
                       pct(m.rta));
  }
  out += "Values are percentages averaged over runs.\n";
  if (!report.complete()) {
    out += fmt::format("INCOMPLETE: {} episode(s) ended on a backend error\n", report.backend_failures.size());
    for (const auto& f : report.backend_failures) out += "  " + f + "\n";
  }
  return out;
}

nlohmann::json report_to_json(const BenchmarkReport& report) {
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [row, m] : report.metrics) {
    rows[row] = {{"episodes", m.episodes},
                 {"sr", m.sr},
                 {"cr", m.cr},
                 {"rr", m.rr},
                 {"cta", m.cta ? nlohmann::json(*m.cta) : nlohmann::json()},
                 {"rta", m.rta ? nlohmann::json(*m.rta) : nlohmann::json()}};
  }
  return {{"strategy", agents::to_string(report.strategy)},
          {"modules", agents::to_string(report.flags)},
          {"runs", report.runs},
          {"entries", report.entries},
          {"complete", report.complete()},
          {"backend_failures", report.backend_failures},
          {"metrics", rows}};
}

}  // namespace deskmate::eval
