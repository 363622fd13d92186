#include <csignal>
#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "deskmate/agents.hpp"
#include "deskmate/dataset.hpp"
#include "deskmate/eval.hpp"
#include "deskmate/gateway.hpp"
#include "deskmate/text.hpp"

namespace {

using namespace deskmate;

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;
constexpr int kIncomplete = 3;

const std::string kDataDir = DESKMATE_DATA_DIR;

struct CommonOptions {
  std::string scenario = kDataDir + "/scenarios/office.json";
  std::string dataset = kDataDir + "/datasets/office210.json";
};

struct AgentOptions {
  std::string strategy = "ppdr";
  bool no_perception = false;
  bool no_planning = false;
  bool no_reflection = false;
  int max_steps = 30;
  std::uint64_t seed = 0;

  agents::AgentConfig config() const {
    agents::AgentConfig c;
    c.strategy = agents::parse_strategy(strategy);
    c.flags = {!no_perception, !no_planning, !no_reflection};
    c.max_steps = max_steps;
    c.seed = seed;
    return c;
  }
};

struct BackendOptions {
  std::string backend = "replay";
  std::string replay;
  std::string model;
  std::string base_url;
  std::string persona;  // empty: scripted, or human for serve
};

void add_agent_options(CLI::App* app, AgentOptions& o) {
  app->add_option("--strategy", o.strategy, "ppdr, direct, cot, react or reflexion")->capture_default_str();
  app->add_flag("--no-perception", o.no_perception, "Skip the perception module");
  app->add_flag("--no-planning", o.no_planning, "Skip the planning module");
  app->add_flag("--no-reflection", o.no_reflection, "Skip the reflection module");
  app->add_option("--max-steps", o.max_steps, "Step budget per episode")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "Seed recorded in traces")->capture_default_str();
}

void add_backend_options(CLI::App* app, BackendOptions& o, const char* replay_help) {
  app->add_option("--backend", o.backend, "replay or remote")->capture_default_str()->check(CLI::IsMember({"replay", "remote"}));
  app->add_option("--replay", o.replay, replay_help);
  app->add_option("--model", o.model, "Model name for the remote backend (else DESKMATE_LLM_MODEL)");
  app->add_option("--base-url", o.base_url, "Chat-completions base URL (else DESKMATE_LLM_BASE_URL)");
  app->add_option("--persona", o.persona, "Persona replies: scripted, llm or human (serve defaults to human)")
      ->check(CLI::IsMember({"scripted", "llm", "human"}));
}

std::shared_ptr<llm::ChatBackend> remote_backend(const BackendOptions& o) {
  auto config = llm::RemoteConfig::from_env();
  if (!o.model.empty()) config.model = o.model;
  if (!o.base_url.empty()) config.base_url = o.base_url;
  return std::make_shared<llm::RemoteBackend>(config);
}

std::shared_ptr<llm::ChatBackend> replay_backend(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw Error("no fixture file " + file.string());
  return std::make_shared<llm::ReplayBackend>(llm::load_fixture(file));
}

const dataset::TaskEntry& find_entry(const std::vector<dataset::TaskEntry>& entries, const std::string& id) {
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  throw Error(fmt::format("no entry '{}' in the dataset", id));
}

// --- run ------------------------------------------------------------------------

struct RunOptions {
  std::string entry;
  std::string instruction;
  std::string out;
  bool quiet = false;
};

int cmd_run(const CommonOptions& common, const AgentOptions& agent, const BackendOptions& bo, const RunOptions& ro) {
  const auto scenario = memory::load_scenario_file(common.scenario);
  std::optional<dataset::TaskEntry> entry;
  std::string instruction = ro.instruction;
  std::map<memory::EntityId, bool> availability;
  if (!ro.entry.empty()) {
    const auto entries = dataset::load(common.dataset, scenario);
    entry = find_entry(entries, ro.entry);
    instruction = entry->instruction;
    availability = entry->availability;
  }
  if (instruction.empty()) throw CLI::ValidationError("run", "give --entry or --instruction");

  std::shared_ptr<llm::ChatBackend> backend;
  if (bo.backend == "remote") {
    backend = remote_backend(bo);
  } else {
    if (bo.replay.empty()) throw CLI::ValidationError("--replay", "the replay backend needs a fixture file");
    backend = replay_backend(bo.replay);
  }

  sim::SimOptions sim;
  sim.persona_mode = llm::parse_persona_mode(bo.persona);
  sim.persona_backend = backend.get();
  sim::World world(scenario, availability, sim);
  auto memory = world.initial_memory();
  const auto trace = agents::run_episode({entry ? entry->id : "adhoc", instruction}, world, memory, *backend,
                                         agent.config());
  if (!ro.out.empty()) agents::save_trace(ro.out, trace);
  if (!ro.quiet) std::cout << agents::render_trace(trace);
  if (entry) {
    const auto score = eval::score_episode(*entry, dataset::resolve_gold(*entry, scenario), trace, scenario);
    std::cout << fmt::format("score: success={} completion={}/{} redundant={} cyber={}/{} real={}/{}\n",
                             score.success ? "yes" : "no", score.best.matched.required, score.best.required_total,
                             score.best.redundant, score.cyber_correct, score.cyber_total, score.real_correct,
                             score.real_total);
  }
  return trace.error.starts_with("backend") ? kIncomplete : kOk;
}

// --- bench ----------------------------------------------------------------------

struct BenchOptions {
  std::vector<std::string> filter;
  std::vector<std::string> entries;
  int runs = 5;
  int workers = 1;
  std::string traces;
  std::string json;
};

bool selected(const dataset::TaskEntry& e, const BenchOptions& o) {
  if (!o.entries.empty() && std::find(o.entries.begin(), o.entries.end(), e.id) == o.entries.end()) return false;
  if (o.filter.empty()) return true;
  const auto cat = std::string(dataset::to_string(e.category()));
  const auto level = std::string(dataset::to_string(e.level));
  return std::any_of(o.filter.begin(), o.filter.end(),
                     [&](const std::string& f) { return text::iequals(f, cat) || text::iequals(f, level); });
}

int cmd_bench(const CommonOptions& common, const AgentOptions& agent, const BackendOptions& bo,
              const BenchOptions& bench) {
  const auto scenario = memory::load_scenario_file(common.scenario);
  std::vector<dataset::TaskEntry> entries;
  for (auto& e : dataset::load(common.dataset, scenario)) {
    if (selected(e, bench)) entries.push_back(std::move(e));
  }
  if (entries.empty()) throw Error("no dataset entries match the selection");

  eval::BackendFactory factory;
  std::shared_ptr<llm::ChatBackend> shared;
  if (bo.backend == "remote") {
    shared = remote_backend(bo);
    factory = [shared](const dataset::TaskEntry&, int) { return shared; };
  } else {
    if (bo.replay.empty()) throw CLI::ValidationError("--replay", "the replay backend needs a fixture directory");
    const std::filesystem::path dir = bo.replay;
    factory = [dir](const dataset::TaskEntry& e, int) { return replay_backend(dir / (e.id + ".jsonl")); };
  }

  eval::BenchmarkOptions options;
  options.agent = agent.config();
  options.runs = bench.runs;
  options.workers = bench.workers;
  options.sim.persona_mode = llm::parse_persona_mode(bo.persona);
  if (options.sim.persona_mode == llm::PersonaMode::human) throw Error("bench cannot use human personas");
  options.sim.persona_backend = shared.get();
  if (!bench.traces.empty()) options.trace_dir = bench.traces;
  options.progress = [](const std::string& id, int run, const eval::EpisodeScore& s) {
    std::cerr << fmt::format("run {} {:<8} {}\n", run + 1, id, s.success ? "success" : "fail");
  };

  const auto result = eval::run_benchmark(entries, scenario, factory, options);
  std::cout << eval::render_report(result.report);
  if (!bench.json.empty()) {
    std::ofstream(bench.json) << eval::report_to_json(result.report).dump(2) << "\n";
  }
  return result.report.complete() ? kOk : kIncomplete;
}

// --- serve ----------------------------------------------------------------------

gateway::Server* g_server = nullptr;

int cmd_serve(const CommonOptions& common, const AgentOptions& agent, const BackendOptions& bo,
              const std::string& host, int port, int human_timeout_ms) {
  gateway::GatewayOptions options;
  options.scenario = memory::load_scenario_file(common.scenario);
  options.agent = agent.config();
  options.persona_mode = llm::parse_persona_mode(bo.persona);
  options.human_timeout = std::chrono::milliseconds(human_timeout_ms);
  if (bo.backend == "remote") {
    auto shared = remote_backend(bo);
    options.backend_factory = [shared] { return shared; };
  } else {
    if (bo.replay.empty()) throw CLI::ValidationError("--replay", "the replay backend needs a fixture file");
    const std::filesystem::path file = bo.replay;
    options.backend_factory = [file] { return replay_backend(file); };
  }
  gateway::SessionManager manager(std::move(options));
  gateway::Server server(manager);
  const int bound = server.bind(host, port);
  std::cerr << fmt::format("listening on http://{}:{}\n", host, bound);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  server.listen();
  g_server = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Office assistant agent: episodes, benchmarks and the session gateway"};
  app.require_subcommand(1);
  CommonOptions common;
  AgentOptions agent;
  BackendOptions backend;

  auto* run = app.add_subcommand("run", "Run one instruction and print its trace");
  RunOptions ro;
  run->add_option("--entry", ro.entry, "Dataset entry id (uses its availability map)");
  run->add_option("--instruction", ro.instruction, "Free-form instruction");
  run->add_option("--out", ro.out, "Write the trace (JSON lines) here");
  run->add_flag("--quiet", ro.quiet, "Print only the score line");
  run->add_option("--scenario", common.scenario)->capture_default_str();
  run->add_option("--dataset", common.dataset)->capture_default_str();
  add_agent_options(run, agent);
  add_backend_options(run, backend, "Fixture file (JSON lines)");

  auto* bench = app.add_subcommand("bench", "Score a strategy over the dataset");
  BenchOptions bo;
  bench->add_option("--filter", bo.filter, "Keep categories/levels: L1, L2, L3, L3a, L3u")->delimiter(',');
  bench->add_option("--entries", bo.entries, "Keep only these entry ids")->delimiter(',');
  bench->add_option("--runs", bo.runs, "Repetitions to average")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--workers", bo.workers, "Episodes run in parallel")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--traces", bo.traces, "Directory for per-episode traces");
  bench->add_option("--json", bo.json, "Also write the report as JSON");
  bench->add_option("--scenario", common.scenario)->capture_default_str();
  bench->add_option("--dataset", common.dataset)->capture_default_str();
  add_agent_options(bench, agent);
  add_backend_options(bench, backend, "Fixture directory with one <entry>.jsonl per entry");

  auto* stats = app.add_subcommand("stats", "Print the dataset composition");
  stats->add_option("--scenario", common.scenario)->capture_default_str();
  stats->add_option("--dataset", common.dataset)->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Serve the session gateway over HTTP");
  std::string host = "127.0.0.1";
  int port = 8080;
  int human_timeout_ms = 120'000;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "0 picks a free port")->capture_default_str();
  serve->add_option("--human-timeout-ms", human_timeout_ms, "How long an Inquire waits for a human persona")
      ->capture_default_str();
  serve->add_option("--scenario", common.scenario)->capture_default_str();
  add_agent_options(serve, agent);
  add_backend_options(serve, backend, "Fixture file served to every session");

  auto* trace = app.add_subcommand("trace", "Pretty-print a trace file");
  std::string trace_file;
  std::optional<int> trace_step;
  trace->add_option("file", trace_file)->required()->check(CLI::ExistingFile);
  trace->add_option("--step", trace_step, "Show a single step");

  auto* gen = app.add_subcommand("gen-dataset", "Regenerate the bundled benchmark dataset");
  std::string gen_out = common.dataset;
  gen->add_option("--scenario", common.scenario)->capture_default_str();
  gen->add_option("--out", gen_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (backend.persona.empty()) backend.persona = serve->parsed() ? "human" : "scripted";

  try {
    if (run->parsed()) return cmd_run(common, agent, backend, ro);
    if (bench->parsed()) return cmd_bench(common, agent, backend, bo);
    if (stats->parsed()) {
      const auto scenario = memory::load_scenario_file(common.scenario);
      std::cout << dataset::render_stats(dataset::stats(dataset::load(common.dataset, scenario, true)));
      return kOk;
    }
    if (serve->parsed()) return cmd_serve(common, agent, backend, host, port, human_timeout_ms);
    if (trace->parsed()) {
      std::cout << agents::render_trace(agents::load_trace(trace_file), trace_step);
      return kOk;
    }
    if (gen->parsed()) {
      const auto scenario = memory::load_scenario_file(common.scenario);
      const auto entries = dataset::generate(dataset::default_bases(), scenario);
      dataset::save(gen_out, entries, scenario.name);
      std::cout << dataset::render_stats(dataset::stats(entries));
      std::cout << "wrote " << gen_out << "\n";
      return kOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
