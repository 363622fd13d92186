// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when a gating criterion fails. Criterion 10 needs a live chat
// backend (DESKMATE_LLM_BASE_URL and DESKMATE_LLM_MODEL) and never gates.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "deskmate/eval.hpp"

using namespace deskmate;
using actions::Action;
using actions::ActionKind;
using memory::EntityId;
using memory::NodeKind;

namespace {

const std::string kData = DESKMATE_DATA_DIR;
const std::string kCli = DESKMATE_CLI;
const std::vector<std::string> kSuite{"b01", "b27", "b09-v1", "b04-v5", "b09-v6"};

struct Result {
  bool pass = false;
  std::string detail;
};

// Failed expectation inside a criterion.
struct Fail {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Fail{what};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const memory::Scenario& office() {
  static const auto s = memory::load_scenario_file(kData + "/scenarios/office.json");
  return s;
}

const std::vector<dataset::TaskEntry>& entries() {
  static const auto e = dataset::load(kData + "/datasets/office210.json", office(), true);
  return e;
}

const dataset::TaskEntry& entry(const std::string& id) {
  for (const auto& e : entries()) {
    if (e.id == id) return e;
  }
  throw Fail{"no dataset entry " + id};
}

std::string fixture_path(const std::string& config, const std::string& id) {
  return kData + "/fixtures/suite/" + config + "/" + id + ".jsonl";
}

struct Replayed {
  agents::EpisodeTrace trace;
  memory::Memory memory;
  std::map<llm::RoleTag, int> calls;
};

Replayed replay(const std::string& config, const std::string& id, const agents::AgentConfig& agent) {
  const auto& e = entry(id);
  sim::World world(office(), e.availability);
  auto memory = world.initial_memory();
  llm::ReplayBackend backend(llm::load_fixture(fixture_path(config, id)));
  auto trace = agents::run_episode({e.id, e.instruction}, world, memory, backend, agent);
  std::map<llm::RoleTag, int> calls;
  for (auto role : {llm::RoleTag::perception, llm::RoleTag::planning, llm::RoleTag::decision,
                    llm::RoleTag::reflection}) {
    calls[role] = backend.calls(role);
  }
  return {std::move(trace), std::move(memory), std::move(calls)};
}

eval::EpisodeScore score(const dataset::TaskEntry& e, const agents::EpisodeTrace& t) {
  return eval::score_episode(e, dataset::resolve_gold(e, office()), t, office());
}

// --- 1 ------------------------------------------------------------------------------

Result dataset_structure() {
  const auto t0 = std::chrono::steady_clock::now();
  FILE* pipe = popen((kCli + " stats 2>&1").c_str(), "r");
  expect(pipe != nullptr, "cannot start the CLI");
  std::string out;
  char buf[4096];
  while (auto n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  const double secs = seconds_since(t0);
  expect(WIFEXITED(status) && WEXITSTATUS(status) == 0, "stats exited with an error");

  for (const char* row : {"L1     yes             90    43%", "L2     yes             73    35%",
                          "L3     yes             25    12%", "L3     no              22    10%",
                          "Total                 210   100%"}) {
    expect(out.find(row) != std::string::npos, fmt::format("stats output lacks '{}'", row));
  }

  // Independent count straight from the JSON file.
  std::ifstream in(kData + "/datasets/office210.json");
  const auto doc = nlohmann::json::parse(in);
  std::map<std::pair<std::string, bool>, int> counts;
  for (const auto& e : doc.at("entries")) counts[{e.at("level").get<std::string>(), e.at("achievable").get<bool>()}]++;
  expect(doc.at("entries").size() == 210, "file does not hold 210 entries");
  expect(counts[{"L1", true}] == 90 && counts[{"L2", true}] == 73 && counts[{"L3", true}] == 25 &&
             counts[{"L3", false}] == 22,
         "file counts differ from 90/73/25/22");
  expect(counts.size() == 4, "unexpected level/achievability combination in the file");
  expect(secs < 1.0, fmt::format("stats took {:.2f} s", secs));
  return {true, fmt::format("90/73/25/22 of 210 (43/35/12/10%) in {:.2f} s", secs)};
}

// --- 2 ------------------------------------------------------------------------------

Result deterministic_episode() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& e = entry("b01");
  expect(e.level == dataset::Level::L1 && e.achievable, "b01 is not an achievable L1 entry");
  std::string first;
  int steps = 0;
  for (int i = 0; i < 5; ++i) {
    auto r = replay("full", "b01", {});
    expect(r.trace.verdict == agents::Verdict::achieved, "verdict is " + std::string(agents::to_string(r.trace.verdict)));
    steps = static_cast<int>(r.trace.steps.size());
    expect(steps <= 6, fmt::format("{} steps", steps));
    const auto text = agents::serialize(r.trace);
    if (i == 0) first = text;
    expect(text == first, fmt::format("run {} serialized differently", i + 1));
  }
  const double secs = seconds_since(t0);
  expect(secs < 1.0, fmt::format("5 runs took {:.2f} s", secs));
  return {true, fmt::format("b01 achieved in {} steps, 5 identical traces ({} bytes), {:.2f} s", steps, first.size(),
                            secs)};
}

// --- 3 ------------------------------------------------------------------------------

// Oracle side: its own reading of templates against actions.
struct Oracle {
  std::map<std::string, EntityId> person_by_name;
  std::map<EntityId, EntityId> location_of;

  Oracle() {
    const auto& g = office().truth;
    for (const auto& id : g.ids_of_kind(NodeKind::human)) {
      person_by_name[g.at(id).display_name] = id;
      for (const auto& edge : g.edges()) {
        if (edge.relation == memory::Relation::located_at && edge.from == id) location_of[id] = edge.to;
      }
    }
  }

  static std::optional<std::string> value(const Action& a, const std::string& key) {
    if (key == "text") {
      if (auto c = a.param("content")) return c;
      return a.param("question");
    }
    return a.param(key);
  }

  static std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  }

  bool fits(const dataset::ConcreteTemplate& t, const Action& a) const {
    if (std::find(t.kinds.begin(), t.kinds.end(), a.kind()) == t.kinds.end()) return false;
    for (const auto& [key, slot] : t.slots) {
      const auto v = value(a, key);
      if (!v) return false;
      using Type = dataset::Slot::Type;
      if (slot.type == Type::person) {
        auto it = person_by_name.find(*v);
        if (it == person_by_name.end() || it->second.str() != slot.ref) return false;
      } else if (slot.type == Type::place) {
        auto it = person_by_name.find(*v);
        if (it == person_by_name.end() || location_of.at(it->second).str() != slot.ref) return false;
      } else if (slot.type == Type::contains) {
        bool any = false;
        for (const auto& w : slot.words) any |= lower(*v).find(lower(w)) != std::string::npos;
        if (!any) return false;
      } else if (slot.type == Type::equals) {
        if (lower(*v) != lower(slot.ref)) return false;
      }
    }
    return true;
  }

  struct Assignment {
    eval::MatchCount count;
    int non_stop = 0;  // matched templates that consumed an interaction
  };

  // Exhaustive search over injective, order-respecting assignments.
  Assignment best(const std::vector<Action>& seq, const std::vector<dataset::ConcreteTemplate>& ts) const {
    Assignment best;
    std::vector<bool> used(ts.size());
    std::function<void(std::size_t, int, Assignment)> go = [&](std::size_t i, int last, Assignment cur) {
      if (i == seq.size()) {
        if (best.count < cur.count) best = cur;
        return;
      }
      go(i + 1, last, cur);
      for (std::size_t t = 0; t < ts.size(); ++t) {
        if (used[t] || !fits(ts[t], seq[i])) continue;
        if (ts[t].order > 0 && ts[t].order < last) continue;
        used[t] = true;
        auto next = cur;
        (ts[t].required ? next.count.required : next.count.optional)++;
        next.non_stop += seq[i].kind() != ActionKind::Stop;
        go(i + 1, ts[t].order > 0 ? ts[t].order : last, next);
        used[t] = false;
      }
    };
    go(0, 0, {});
    return best;
  }

  eval::EpisodeScore score(const dataset::TaskEntry& e, const std::vector<dataset::AdmissibleSet>& sets,
                           const agents::EpisodeTrace& trace) const {
    eval::EpisodeScore s;
    s.entry_id = e.id;
    s.level = e.level;
    s.achievable = e.achievable;
    s.verdict = trace.verdict;
    s.backend_failure = trace.error.rfind("backend", 0) == 0;
    std::vector<Action> seq;
    int interactions = 0;
    for (const auto& step : trace.steps) {
      for (const auto& a : step.actions) {
        if (!a.executed || a.action.kind() == ActionKind::Wait) continue;
        if (a.action.kind() == ActionKind::Stop && e.achievable) continue;
        if (a.action.kind() != ActionKind::Stop) ++interactions;
        seq.push_back(a.action);
      }
    }
    bool have = false;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      eval::SetScore c;
      c.index = i;
      c.required_total = sets[i].required_count();
      const auto a = best(seq, sets[i].templates);
      c.matched = a.count;
      c.redundant = interactions - a.non_stop;
      auto key = [](const eval::SetScore& x) {
        return std::make_tuple(-x.completion(), x.redundant, -x.required_total, x.index);
      };
      if (!have || key(c) < key(s.best)) s.best = c, have = true;
    }
    s.success = e.achievable ? have && s.best.matched.required == s.best.required_total &&
                                   trace.verdict == agents::Verdict::achieved
                             : trace.verdict == agents::Verdict::unachievable;
    for (const auto& step : trace.steps) {
      for (const auto& a : step.actions) {
        const auto k = a.action.kind();
        if (k == ActionKind::Stop) continue;
        bool ok = a.executed && k == ActionKind::Wait;
        for (const auto& set : sets) {
          for (const auto& t : set.templates) ok |= a.executed && fits(t, a.action);
        }
        const bool real = k == ActionKind::Move || k == ActionKind::WaitInPlace;
        (real ? s.real_total : s.cyber_total)++;
        (real ? s.real_correct : s.cyber_correct) += ok;
      }
    }
    return s;
  }
};

struct RandomCase {
  std::mt19937 rng;
  std::vector<std::string> names{"Wu", "Lee", "Zhang", "Chen"};
  std::vector<std::string> words{"pen", "report", "umbrella"};

  explicit RandomCase(unsigned seed) : rng(seed) {}

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[rng() % v.size()];
  }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng); }

  Action action() {
    const auto& who = pick(names);
    const auto text = "about the " + pick(words);
    switch (rng() % 8) {
      case 0: return actions::Inform{who, text};
      case 1: return actions::Inquire{who, text};
      case 2: return actions::SendQRCode{who};
      case 3: return actions::Move{who};
      case 4: return actions::WaitInPlace{who};
      case 5: return actions::Wait{"reply"};
      case 6: return actions::Stop{actions::StopOutcome::unachievable};
      default: return actions::Stop{actions::StopOutcome::achieved};
    }
  }

  dataset::ConcreteTemplate templ(const Oracle& oracle, bool allow_stop) {
    using dataset::Slot;
    dataset::ConcreteTemplate t;
    std::vector<ActionKind> pool{ActionKind::Inform, ActionKind::Inquire, ActionKind::SendQRCode, ActionKind::Move,
                                 ActionKind::WaitInPlace};
    if (allow_stop) pool.push_back(ActionKind::Stop);
    t.kinds.push_back(pick(pool));
    if (coin(0.3)) t.kinds.push_back(pick(pool));
    const auto person = oracle.person_by_name.at(pick(names));
    switch (t.kinds.front()) {
      case ActionKind::Inform:
      case ActionKind::Inquire:
        if (coin(0.8)) t.slots["contact"] = {Slot::Type::person, person.str(), {}};
        if (coin(0.5)) t.slots["text"] = {Slot::Type::contains, "", {pick(words)}};
        break;
      case ActionKind::SendQRCode: t.slots["contact"] = {Slot::Type::person, person.str(), {}}; break;
      case ActionKind::Move: t.slots["target_name"] = {Slot::Type::place, oracle.location_of.at(person).str(), {}}; break;
      case ActionKind::WaitInPlace: t.slots["user"] = {Slot::Type::person, person.str(), {}}; break;
      default:
        if (coin(0.7)) t.slots["outcome"] = {Slot::Type::equals, coin(0.5) ? "achieved" : "unachievable", {}};
        break;
    }
    t.order = static_cast<int>(rng() % 4);
    t.required = coin(0.75);
    t.label = "random";
    return t;
  }
};

Result metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const Oracle oracle;
  RandomCase rc(1234);
  int matched_any = 0;
  for (int trial = 0; trial < 200; ++trial) {
    dataset::TaskEntry e;
    e.id = fmt::format("r{}", trial);
    e.level = static_cast<dataset::Level>(rc.rng() % 3);
    e.achievable = rc.coin(0.7);
    // Unachievable gold has one required Stop(unachievable) plus optional
    // contact templates, as resolve_gold builds it.
    std::vector<dataset::AdmissibleSet> sets(e.achievable ? 1 + rc.rng() % 3 : 1);
    for (auto& set : sets) {
      if (!e.achievable) {
        set.templates.push_back({{ActionKind::Stop}, {{"outcome", {dataset::Slot::Type::equals, "unachievable", {}}}},
                                 0, true, "stop"});
      }
      const int n = e.achievable ? 1 + static_cast<int>(rc.rng() % 4) : static_cast<int>(rc.rng() % 4);
      for (int i = 0; i < n; ++i) {
        auto t = rc.templ(oracle, e.achievable);
        if (!e.achievable) t.required = false;
        set.templates.push_back(std::move(t));
      }
    }
    agents::EpisodeTrace trace;
    trace.verdict = static_cast<agents::Verdict>(rc.rng() % 3);
    if (rc.coin(0.1)) trace.error = "backend Timeout: slow";
    const int n_actions = static_cast<int>(rc.rng() % 7);
    for (int i = 0; i < n_actions; ++i) {
      agents::StepRecord step;
      step.step = i + 1;
      const bool executed = rc.coin(0.85);
      step.actions.push_back({rc.action(), executed, executed ? "" : "rejected", actions::ExecOutcome::done});
      trace.steps.push_back(std::move(step));
    }

    const auto got = eval::score_episode(e, sets, trace, office());
    const auto want = oracle.score(e, sets, trace);
    const auto same = got.success == want.success && got.best.index == want.best.index &&
                      got.best.required_total == want.best.required_total && got.best.matched == want.best.matched &&
                      got.best.redundant == want.best.redundant && got.cyber_total == want.cyber_total &&
                      got.cyber_correct == want.cyber_correct && got.real_total == want.real_total &&
                      got.real_correct == want.real_correct && got.verdict == want.verdict &&
                      got.backend_failure == want.backend_failure && got.cr() == want.cr() && got.rr() == want.rr();
    expect(same, fmt::format("trial {}: scorer ({}/{} red {} set {}) vs oracle ({}/{} red {} set {})", trial,
                             got.best.matched.required, got.best.required_total, got.best.redundant, got.best.index,
                             want.best.matched.required, want.best.required_total, want.best.redundant,
                             want.best.index));
    matched_any += want.best.matched.required + want.best.matched.optional > 0;
  }
  const double secs = seconds_since(t0);
  expect(matched_any > 50, fmt::format("only {} instances had any match; the generator is too sparse", matched_any));
  expect(secs < 10.0, fmt::format("took {:.2f} s", secs));
  return {true, fmt::format("200 instances equal to the exhaustive matcher ({} with matches), {:.2f} s", matched_any,
                            secs)};
}

// --- 4 ------------------------------------------------------------------------------

agents::EpisodeTrace hand_trace(const std::vector<std::string>& lines, agents::Verdict verdict) {
  agents::EpisodeTrace t;
  t.verdict = verdict;
  int n = 0;
  for (auto line : lines) {
    agents::StepRecord rec;
    rec.step = ++n;
    const bool rejected = line.rfind("x ", 0) == 0;
    if (rejected) line = line.substr(2);
    rec.actions.push_back({actions::parse_action(line), !rejected, rejected ? "rejected" : "", actions::ExecOutcome::done});
    t.steps.push_back(std::move(rec));
  }
  return t;
}

const std::vector<std::string> kGoldRun = {"ACTION Inquire | contact=Wu | question=Could Lee borrow your pen?",
                                           "ACTION Move | target_name=Wu",
                                           "ACTION SendQRCode | contact=Wu",
                                           "ACTION WaitInPlace | user=Wu",
                                           "ACTION Inform | contact=Lee | content=Your pen is on the way.",
                                           "ACTION Move | target_name=Lee",
                                           "ACTION SendQRCode | contact=Lee",
                                           "ACTION WaitInPlace | user=Lee"};

Result table_formulas() {
  const auto& e = entry("b01");
  const int n = 8;
  expect(dataset::resolve_gold(e, office()).at(0).required_count() == n, "b01 gold does not have 8 templates");

  auto perfect = kGoldRun;
  perfect.push_back("ACTION Stop | outcome=achieved");
  const auto ps = score(e, hand_trace(perfect, agents::Verdict::achieved));
  const auto pm = eval::aggregate({ps});
  expect(ps.success && pm.at("Overall").sr == 1.0, "perfect trace is not SR=1");
  expect(pm.at("Overall").cr == 1.0 && pm.at("Overall").rr == 0.0, "perfect trace is not CR=1, RR=0");

  for (int k = 0; k <= n; ++k) {
    std::vector<std::string> prefix(kGoldRun.begin(), kGoldRun.begin() + k);
    const auto s = score(e, hand_trace(prefix, agents::Verdict::exhausted));
    expect(s.cr() == static_cast<double>(k) / n, fmt::format("CR for {} of {} is {}", k, n, s.cr()));
    expect(!s.success, "a partial run counted as success");
  }
  for (int r = 0; r <= 4; ++r) {
    auto lines = perfect;
    for (int i = 0; i < r; ++i) lines.insert(lines.begin() + 1, "ACTION Inform | contact=Zhang | content=hello");
    const auto s = score(e, hand_trace(lines, agents::Verdict::achieved));
    expect(s.rr() == static_cast<double>(r) / n, fmt::format("RR for {} redundant is {}", r, s.rr()));
    expect(s.success, "redundant actions broke success");
  }

  // Hand counts: cyber 2 of 4 correct, real 2 of 3.
  const auto& truth = office().truth;
  expect(truth.query_location(EntityId{"h_zhang"}) != truth.query_location(EntityId{"h_wu"}),
         "Zhang and Wu share a desk; the hand count below assumes otherwise");
  const auto mixed = score(e, hand_trace({"ACTION Inquire | contact=Wu | question=Could Lee borrow your pen?",
                                          "ACTION Inform | contact=Zhang | content=hello", "ACTION Wait | content=reply",
                                          "x ACTION SendQRCode | contact=Wu", "ACTION Move | target_name=Wu",
                                          "ACTION Move | target_name=Zhang", "ACTION WaitInPlace | user=Wu"},
                                         agents::Verdict::exhausted));
  expect(mixed.cyber_total == 4 && mixed.cyber_correct == 2, fmt::format("cyber {}/{}", mixed.cyber_correct, mixed.cyber_total));
  expect(mixed.real_total == 3 && mixed.real_correct == 2, fmt::format("real {}/{}", mixed.real_correct, mixed.real_total));
  const auto mm = eval::aggregate({mixed}).at("Overall");
  expect(*mm.cta == 0.5 && *mm.rta == 2.0 / 3.0, "aggregated CTA/RTA differ from the hand counts");

  // Ranges over randomized scores on real entries.
  RandomCase rc(99);
  std::vector<eval::EpisodeScore> scores;
  for (int i = 0; i < 1000; ++i) {
    const auto& entry = entries()[rc.rng() % entries().size()];
    agents::EpisodeTrace t;
    t.verdict = static_cast<agents::Verdict>(rc.rng() % 3);
    const int len = static_cast<int>(rc.rng() % 12);
    for (int s = 0; s < len; ++s) {
      agents::StepRecord rec;
      rec.step = s + 1;
      const bool executed = rc.coin(0.9);
      rec.actions.push_back({rc.action(), executed, executed ? "" : "rejected", actions::ExecOutcome::done});
      t.steps.push_back(std::move(rec));
    }
    auto s = score(entry, t);
    auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    expect(in01(s.cr()), fmt::format("CR {} out of range", s.cr()));
    expect(s.best.redundant >= 0 && s.rr() >= 0.0, "negative redundancy");
    expect(s.cyber_correct <= s.cyber_total && s.real_correct <= s.real_total, "more correct actions than actions");
    scores.push_back(std::move(s));
  }
  for (const auto& [row, m] : eval::aggregate(scores)) {
    auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    expect(in01(m.sr) && in01(m.cr) && (!m.cta || in01(*m.cta)) && (!m.rta || in01(*m.rta)),
           "aggregated metric out of [0,1] in row " + row);
  }
  return {true, "SR=1 perfect, CR=k/8 for k=0..8, RR=r/8 for r=0..4, CTA 2/4 RTA 2/3, 1000 random scores in range"};
}

// --- 5 ------------------------------------------------------------------------------

Result reflection_loop() {
  auto r = replay("full", "b09-v1", {});
  const auto& t = r.trace;
  const EntityId mao{"h_mao"};
  expect(!t.steps.empty() && t.steps[0].reflection, "first step has no reflection");
  const auto& first = t.steps[0];
  bool declined = false;
  for (const auto& m : first.delta.new_messages) declined |= m.sender == mao.str();
  expect(declined, "Mao did not answer in step 1");
  expect(first.reflection->judgment == agents::Judgment::N, "step 1 judgment is not N");
  expect(!r.memory.graph().is_available(mao), "memory still marks Mao available");

  // A later step turns to someone else who owns a printer.
  std::set<EntityId> owners;
  for (const auto& o : office().truth.query_owners("printer")) {
    if (o != mao) owners.insert(o);
  }
  std::string alternative;
  for (std::size_t i = 1; i < t.steps.size() && alternative.empty(); ++i) {
    for (const auto& a : t.steps[i].actions) {
      for (const char* key : {"contact", "target", "user", "target_name"}) {
        const auto v = a.action.param(key);
        if (!a.executed || !v) continue;
        if (auto id = office().truth.resolve_name(*v); id && owners.contains(*id)) alternative = *v;
      }
    }
  }
  expect(!alternative.empty(), "no later step targets another printer owner");
  expect(score(entry("b09-v1"), t).success, "the episode is not scored a success");
  return {true, fmt::format("Mao declined, N judgment, h_mao unavailable in memory, switched to {}", alternative)};
}

// --- 6 ------------------------------------------------------------------------------

Result unachievability() {
  const auto& e = entry("b09-v6");
  expect(!e.achievable && e.category() == dataset::Category::l3_unachievable, "b09-v6 is not an unachievable entry");
  for (const auto& o : office().truth.query_owners("printer")) {
    expect(!e.availability.at(o), o.str() + " owns a printer and is available");
  }
  auto r = replay("full", "b09-v6", {});
  const auto& t = r.trace;
  expect(t.verdict == agents::Verdict::unachievable, "verdict is " + std::string(agents::to_string(t.verdict)));
  const auto& last = t.steps.back().actions.back();
  expect(last.action.kind() == ActionKind::Stop, "last action is not Stop");
  bool group_asked = false;
  bool group_answered = false;
  for (const auto& s : t.steps) {
    for (const auto& a : s.actions) {
      expect(a.action.kind() != ActionKind::Move, "the robot moved although nobody could help");
      if (a.action.param("contact") == std::optional<std::string>("Office Group")) group_asked = true;
    }
    for (const auto& m : s.delta.new_messages) {
      group_answered |= m.channel == memory::Channel::group && m.sender != memory::kAssistant;
    }
  }
  expect(!group_answered, "someone answered in the group chat");
  const auto s = score(e, t);
  expect(s.success, "Stop(unachievable) is not scored a success");
  return {true, fmt::format("Stop(unachievable) after {} steps{}, no Move, success=true", t.steps.size(),
                            group_asked ? " and an unanswered group request" : "")};
}

// --- 7 ------------------------------------------------------------------------------

Result ablation_wiring() {
  struct Config {
    std::string name;
    agents::AblationFlags flags;
  };
  const std::vector<Config> configs{{"full", {true, true, true}},
                                    {"noperc", {false, true, true}},
                                    {"noplan", {true, false, true}},
                                    {"norefl", {true, true, false}}};
  std::map<std::string, int> successes;
  for (const auto& c : configs) {
    agents::AgentConfig agent;
    agent.flags = c.flags;
    for (const auto& id : kSuite) {
      auto r = replay(c.name, id, agent);
      const auto where = fmt::format("{} {}", c.name, id);
      expect(r.trace.header.flags == c.flags, where + ": header flags differ");
      expect((r.calls[llm::RoleTag::perception] > 0) == c.flags.perception, where + ": perception calls");
      expect((r.calls[llm::RoleTag::planning] > 0) == c.flags.planning, where + ": planning calls");
      expect((r.calls[llm::RoleTag::reflection] > 0) == c.flags.reflection, where + ": reflection calls");
      for (const auto& s : r.trace.steps) {
        expect(!s.malformed, where + ": malformed step");
        expect(s.perception.has_value() == c.flags.perception, where + fmt::format(": step {} perception", s.step));
        expect(s.plan.has_value() == c.flags.planning, where + fmt::format(": step {} plan", s.step));
        const bool stopped = !s.actions.empty() && s.actions.back().action.kind() == ActionKind::Stop;
        expect(s.reflection.has_value() == (c.flags.reflection && !stopped),
               where + fmt::format(": step {} reflection", s.step));
        expect(!s.critique, where + ": critique in a pipeline trace");
      }
      successes[c.name] += score(entry(id), r.trace).success;
    }
  }
  expect(successes["noplan"] < successes["full"],
         fmt::format("planning-off SR {}/5 is not below full {}/5", successes["noplan"], successes["full"]));
  return {true, fmt::format("stages match flags in 20 traces; SR full {}/5, no-perception {}/5, no-planning {}/5, "
                            "no-reflection {}/5",
                            successes["full"], successes["noperc"], successes["noplan"], successes["norefl"])};
}

// --- 8 ------------------------------------------------------------------------------

Result qr_locker() {
  const auto& truth = office().truth;
  std::vector<std::string> people;
  for (const auto& id : truth.ids_of_kind(NodeKind::human)) people.push_back(truth.at(id).display_name);
  const auto items = truth.ids_of_kind(NodeKind::item);
  std::mt19937 rng(8);
  auto pick = [&](const auto& v) -> const auto& { return v[rng() % v.size()]; };
  int opened = 0;
  int refused = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    std::map<EntityId, bool> availability;
    for (const auto& id : truth.ids_of_kind(NodeKind::human)) availability[id] = rng() % 4 != 0;
    sim::World w(office(), availability);
    std::set<std::string> spent;
    const int length = 5 + static_cast<int>(rng() % 25);
    for (int i = 0; i < length; ++i) {
      Action a = actions::Wait{"x"};
      switch (rng() % 6) {
        case 0: a = actions::Inquire{pick(people), "Could you lend me your " + std::string(pick(std::vector<std::string>{"pen", "umbrella", "stapler"})) + "?"}; break;
        case 1: a = actions::SendQRCode{pick(people)}; break;
        case 2: a = actions::Move{pick(people)}; break;
        default: a = actions::WaitInPlace{pick(people)}; break;
      }
      const auto r = w.execute(a);
      bool open = false;
      for (const auto& ev : r.events) {
        if (const auto* c = std::get_if<memory::StateChange>(&ev); c && c->field == "locker" && c->new_value == "open") {
          open = true;
        }
      }
      // Whichever token opened the locker must not have been spent before.
      int newly_spent = 0;
      for (const auto& tok : w.tokens()) {
        if (tok.used && !spent.contains(tok.token)) {
          ++newly_spent;
          spent.insert(tok.token);
        }
      }
      expect(newly_spent <= 1, "two tokens spent by one action");
      expect(open == (newly_spent == 1), fmt::format("sequence {} step {}: locker open without a fresh token", seq, i));
      opened += open;
      refused += a.kind() == ActionKind::WaitInPlace && !open;

      // Every item has exactly one holder, and the locker holds what the robot says.
      expect(w.item_holders().size() == items.size(), "an item lost its holder");
      std::set<EntityId> in_locker;
      for (const auto& [item, holder] : w.item_holders()) {
        expect(holder == sim::kLocker || truth.find(holder) != nullptr, "item held by an unknown entity");
        if (holder == sim::kLocker) in_locker.insert(item);
      }
      const auto& contents = w.robot().locker_contents;
      expect(std::set<EntityId>(contents.begin(), contents.end()) == in_locker &&
                 contents.size() == in_locker.size(),
             "locker contents disagree with the holder table");
    }
  }
  expect(opened > 100 && refused > 100, "the random walk rarely exercised the locker");
  return {true, fmt::format("1000 sequences: {} openings all with fresh tokens, {} refused scans, holders conserved",
                            opened, refused)};
}

// --- 9 ------------------------------------------------------------------------------

Result graph_invariants() {
  const auto base = office().truth;
  const auto humans = base.ids_of_kind(NodeKind::human);
  const auto places = base.ids_of_kind(NodeKind::location);
  const auto items = base.ids_of_kind(NodeKind::item);
  std::mt19937 rng(9);
  auto pick = [&](const auto& v) -> const auto& { return v[rng() % v.size()]; };
  using memory::Relation;
  int ops = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto g = base;
    for (int op = 0; op < 40; ++op, ++ops) {
      try {
        switch (rng() % 7) {
          case 0: g.add_edge({Relation::located_at, pick(humans), pick(places)}); break;
          case 1: g.add_edge({Relation::located_at, pick(places), pick(humans)}); break;
          case 2: g.add_edge({Relation::owns, pick(items), pick(humans)}); break;
          case 3: g.add_edge({Relation::owns, pick(humans), pick(items)}); break;
          case 4: g.remove_edge({Relation::owns, pick(items), pick(humans)}); break;
          case 5: g.remove_edge({Relation::located_at, pick(humans), pick(places)}); break;
          default: g.set_availability(pick(humans), rng() % 2 == 0); break;
        }
      } catch (const memory::GraphError&) {
        // Rejected mutations must leave the graph valid as well.
      }
      std::map<EntityId, int> located;
      std::map<EntityId, int> owners;
      for (const auto& e : g.edges()) {
        if (e.relation == Relation::located_at) located[e.from]++;
        if (e.relation == Relation::owns) owners[e.from]++;
      }
      for (const auto& h : humans) {
        expect(located[h] == 1, fmt::format("trial {} op {}: {} has {} locations", trial, op, h.str(), located[h]));
      }
      for (const auto& i : items) {
        expect(owners[i] <= 1, fmt::format("trial {} op {}: {} has {} owners", trial, op, i.str(), owners[i]));
      }
    }
  }
  return {true, fmt::format("{} random mutations, every human one location, no item two owners", ops)};
}

// --- 10 -----------------------------------------------------------------------------

std::optional<Result> live_smoke() {
  const char* url = std::getenv("DESKMATE_LLM_BASE_URL");
  const char* model = std::getenv("DESKMATE_LLM_MODEL");
  if (!url || !model || !*url || !*model) return std::nullopt;
  auto backend = std::make_shared<llm::RemoteBackend>(llm::RemoteConfig::from_env());
  std::vector<dataset::TaskEntry> l1;
  for (const auto& e : entries()) {
    if (e.category() == dataset::Category::l1 && l1.size() < 10) l1.push_back(e);
  }
  eval::BenchmarkOptions options;
  options.sim.persona_mode = llm::PersonaMode::scripted;
  options.workers = 2;
  const auto result =
      eval::run_benchmark(l1, office(), [backend](const dataset::TaskEntry&, int) { return backend; }, options);
  const double sr = result.report.metrics.at("Overall").sr;
  const bool ok = result.report.complete() && sr >= 0.5;
  return Result{ok, fmt::format("{} on 10 L1 entries: SR {:.2f}{}", backend->id(), sr,
                                result.report.complete() ? "" : " (incomplete: backend errors)")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"dataset structure", dataset_structure},
      {"deterministic episode", deterministic_episode},
      {"metric oracle equivalence", metric_oracle},
      {"metric formulas", table_formulas},
      {"reflection loop", reflection_loop},
      {"unachievability", unachievability},
      {"ablation wiring", ablation_wiring},
      {"QR and locker", qr_locker},
      {"graph invariants", graph_invariants},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    try {
      r = criteria[i].second();
    } catch (const Fail& f) {
      r = {false, f.what};
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += !r.pass;
    std::cout << fmt::format("criterion {}: {} {}: {}\n", i + 1, r.pass ? "PASS" : "FAIL", criteria[i].first,
                             r.detail);
  }

  try {
    if (auto r = live_smoke()) {
      std::cout << fmt::format("criterion 10: {} live smoke (non-gating): {}\n", r->pass ? "PASS" : "FAIL", r->detail);
    } else {
      std::cout << "criterion 10: SKIP live smoke (non-gating): set DESKMATE_LLM_BASE_URL and DESKMATE_LLM_MODEL\n";
    }
  } catch (const std::exception& e) {
    std::cout << fmt::format("criterion 10: FAIL live smoke (non-gating): {}\n", e.what());
  }
  return failed == 0 ? 0 : 1;
}
