#include <filesystem>
#include <functional>
#include <random>

#include "doctest.h"

#include "deskmate/eval.hpp"

using namespace deskmate;
using namespace deskmate::eval;
using agents::Verdict;
using memory::EntityId;

namespace {

const memory::Scenario& office() {
  static const auto s = memory::load_scenario_file(DESKMATE_DATA_DIR "/scenarios/office.json");
  return s;
}

const std::vector<dataset::TaskEntry>& entries() {
  static const auto e = dataset::load(DESKMATE_DATA_DIR "/datasets/office210.json", office());
  return e;
}

const dataset::TaskEntry& entry(std::string_view id) {
  for (const auto& e : entries()) {
    if (e.id == id) return e;
  }
  throw Error("no entry " + std::string(id));
}

// Tries every injective partial assignment of actions to templates.
MatchCount brute_force(const std::vector<std::vector<bool>>& can, const std::vector<TemplateShape>& shapes) {
  MatchCount best;
  std::vector<bool> used(shapes.size());
  std::function<void(std::size_t, int, MatchCount)> go = [&](std::size_t a, int last_order, MatchCount cur) {
    if (a == can.size()) {
      best = std::max(best, cur);
      return;
    }
    go(a + 1, last_order, cur);
    for (std::size_t t = 0; t < shapes.size(); ++t) {
      if (used[t] || !can[a][t]) continue;
      const int order = shapes[t].order;
      if (order > 0 && order < last_order) continue;
      used[t] = true;
      auto next = cur;
      (shapes[t].required ? next.required : next.optional) += 1;
      go(a + 1, order > 0 ? order : last_order, next);
      used[t] = false;
    }
  };
  go(0, 0, {});
  return best;
}

// Every line is an executed action unless prefixed with "x ".
agents::EpisodeTrace make_trace(std::initializer_list<std::string_view> lines, Verdict verdict,
                                std::string error = "") {
  agents::EpisodeTrace t;
  t.verdict = verdict;
  t.error = std::move(error);
  int n = 0;
  for (auto line : lines) {
    agents::StepRecord rec;
    rec.step = ++n;
    const bool rejected = line.starts_with("x ");
    if (rejected) line.remove_prefix(2);
    rec.actions.push_back({actions::parse_action(line), !rejected, rejected ? "unknown_entity: test" : "",
                           actions::ExecOutcome::done});
    t.steps.push_back(std::move(rec));
  }
  return t;
}

EpisodeScore score(const dataset::TaskEntry& e, const agents::EpisodeTrace& t) {
  return score_episode(e, dataset::resolve_gold(e, office()), t, office());
}

const std::initializer_list<std::string_view> kBorrowFromWu = {
    "ACTION Inquire | contact=Wu | question=Could Lee borrow your pen?",
    "ACTION Move | target_name=Wu",
    "ACTION SendQRCode | contact=Wu",
    "ACTION WaitInPlace | user=Wu",
    "ACTION Inform | contact=Lee | content=Your pen is on the way.",
    "ACTION Move | target_name=Lee",
    "ACTION SendQRCode | contact=Lee",
    "ACTION WaitInPlace | user=Lee",
    "ACTION Stop | outcome=achieved"};

}  // namespace

TEST_CASE("best_match agrees with brute force") {
  std::mt19937 rng(20261016);
  for (int trial = 0; trial < 3000; ++trial) {
    const int n_actions = std::uniform_int_distribution(0, 6)(rng);
    const int n_templates = std::uniform_int_distribution(0, 4)(rng);
    std::vector<TemplateShape> shapes;
    for (int t = 0; t < n_templates; ++t) {
      shapes.push_back({std::uniform_int_distribution(0, 3)(rng), std::bernoulli_distribution(0.7)(rng)});
    }
    std::vector<std::vector<bool>> can(n_actions, std::vector<bool>(n_templates));
    for (auto& row : can) {
      for (std::size_t t = 0; t < row.size(); ++t) row[t] = std::bernoulli_distribution(0.4)(rng);
    }
    const auto got = best_match(can, shapes);
    const auto want = brute_force(can, shapes);
    REQUIRE_MESSAGE(got == want, "trial " << trial);
    // Matches never exceed either side.
    CHECK(got.required + got.optional <= std::min(n_actions, n_templates));
  }
}

TEST_CASE("best_match respects order") {
  const std::vector<TemplateShape> shapes{{1, true}, {2, true}};
  // Action 0 fits only the later template, action 1 only the earlier one.
  CHECK(best_match({{false, true}, {true, false}}, shapes) == MatchCount{1, 0});
  CHECK(best_match({{true, false}, {false, true}}, shapes) == MatchCount{2, 0});
  // Same order group: any arrangement.
  CHECK(best_match({{false, true}, {true, false}}, {{1, true}, {1, true}}) == MatchCount{2, 0});
  // Unordered templates go anywhere.
  CHECK(best_match({{false, true}, {true, false}}, {{2, true}, {0, true}}) == MatchCount{2, 0});
  // Required beats optional.
  CHECK(best_match({{true, true}}, {{0, false}, {0, true}}) == MatchCount{1, 0});
  CHECK(best_match({}, shapes) == MatchCount{});
}

TEST_CASE("an exact run scores full completion") {
  const auto& e = entry("b01");
  auto s = score(e, make_trace(kBorrowFromWu, Verdict::achieved));
  CHECK(s.success);
  CHECK(s.best.required_total == 8);
  CHECK(s.best.matched.required == 8);
  CHECK(s.cr() == doctest::Approx(1.0));
  CHECK(s.best.redundant == 0);
  CHECK(s.rr() == doctest::Approx(0.0));
  CHECK(s.cyber_total == 4);
  CHECK(s.cyber_correct == 4);
  CHECK(s.real_total == 4);
  CHECK(s.real_correct == 4);
  CHECK_FALSE(s.backend_failure);
}

TEST_CASE("success needs the achieved verdict") {
  const auto& e = entry("b01");
  auto s = score(e, make_trace(kBorrowFromWu, Verdict::exhausted, "no Stop within 30 steps"));
  CHECK_FALSE(s.success);
  CHECK(s.cr() == doctest::Approx(1.0));
  auto u = score(e, make_trace(kBorrowFromWu, Verdict::unachievable));
  CHECK_FALSE(u.success);
}

TEST_CASE("extra interactions are redundant; Wait and rejected actions are not") {
  const auto& e = entry("b01");
  auto t = make_trace(kBorrowFromWu, Verdict::achieved);
  auto extra = make_trace({"ACTION Inform | contact=Zhang | content=Hello",
                           "ACTION Wait | content=Wu's answer",
                           "x ACTION Inform | contact=Nobody | content=hi"},
                          Verdict::achieved);
  t.steps.insert(t.steps.begin() + 1, extra.steps.begin(), extra.steps.end());
  auto s = score(e, t);
  CHECK(s.success);
  CHECK(s.best.redundant == 1);
  CHECK(s.rr() == doctest::Approx(1.0 / 8.0));
  // Wait counts as correct, the Inform to Zhang and the rejected one do not.
  CHECK(s.cyber_total == 7);
  CHECK(s.cyber_correct == 5);
}

TEST_CASE("repeating a matched action is redundant") {
  const auto& e = entry("b01");
  auto t = make_trace(kBorrowFromWu, Verdict::achieved);
  auto again = make_trace({"ACTION Inquire | contact=Wu | question=Could Lee borrow your pen?"}, Verdict::achieved);
  t.steps.insert(t.steps.begin() + 1, again.steps.front());
  auto s = score(e, t);
  CHECK(s.best.redundant == 1);
  // Still a template match, so still a correct action.
  CHECK(s.cyber_correct == s.cyber_total);
}

TEST_CASE("out-of-order steps lose completion") {
  const auto& e = entry("b01");
  // Handover at Wu before asking: the ordered Inquire can no longer match first.
  auto s = score(e, make_trace({"ACTION Move | target_name=Wu", "ACTION SendQRCode | contact=Wu",
                                "ACTION WaitInPlace | user=Wu",
                                "ACTION Inquire | contact=Wu | question=Could Lee borrow your pen?",
                                "ACTION Inform | contact=Lee | content=coming", "ACTION Move | target_name=Lee",
                                "ACTION SendQRCode | contact=Lee", "ACTION WaitInPlace | user=Lee",
                                "ACTION Stop | outcome=achieved"},
                               Verdict::achieved));
  CHECK(s.best.matched.required == 7);
  CHECK_FALSE(s.success);
  CHECK(s.best.redundant == 1);
}

TEST_CASE("another capable owner selects another admissible set") {
  // Wu is away, so any available pen owner will do.
  const dataset::TaskEntry* found = nullptr;
  for (const auto& x : entries()) {
    if (x.base_id == "b01" && x.achievable && !x.availability.at(EntityId{"h_wu"}) &&
        x.availability.at(EntityId{"h_chen"})) {
      found = &x;
      break;
    }
  }
  REQUIRE(found != nullptr);
  const auto& e = *found;
  const auto sets = dataset::resolve_gold(e, office());
  REQUIRE(sets.size() > 1);
  // Asking Wu first is part of every set; Wu just never answers.
  auto s = score(e, make_trace({"ACTION Inquire | contact=Wu | question=Could Lee borrow your pen?",
                                "ACTION Inquire | contact=Chen | question=Could Lee borrow your pen?",
                                "ACTION Move | target_name=Chen", "ACTION SendQRCode | contact=Chen",
                                "ACTION WaitInPlace | user=Chen", "ACTION Inform | contact=Lee | content=coming",
                                "ACTION Move | target_name=Lee", "ACTION SendQRCode | contact=Lee",
                                "ACTION WaitInPlace | user=Lee", "ACTION Stop | outcome=achieved"},
                               Verdict::achieved));
  CHECK(s.success);
  CHECK(sets[s.best.index].binding.at("owner") == EntityId{"h_chen"});
  CHECK(s.best.required_total == 9);
  CHECK(s.best.redundant == 0);
}

TEST_CASE("unachievable entries score the Stop") {
  const dataset::TaskEntry* e = nullptr;
  for (const auto& x : entries()) {
    if (!x.achievable) {
      e = &x;
      break;
    }
  }
  REQUIRE(e != nullptr);
  const auto sets = dataset::resolve_gold(*e, office());
  REQUIRE(sets.size() == 1);
  CHECK(sets[0].required_count() == 1);

  auto bare = score(*e, make_trace({"ACTION Stop | outcome=unachievable"}, Verdict::unachievable));
  CHECK(bare.success);
  CHECK(bare.cr() == doctest::Approx(1.0));
  CHECK(bare.best.redundant == 0);

  auto probing = score(*e, make_trace({"ACTION Inquire | contact=Zhang | question=Any chance?",
                                       "ACTION Stop | outcome=unachievable"},
                                      Verdict::unachievable));
  CHECK(probing.success);
  CHECK(probing.best.redundant == 1);

  auto wrong = score(*e, make_trace({"ACTION Stop | outcome=achieved"}, Verdict::achieved));
  CHECK_FALSE(wrong.success);
  CHECK(wrong.cr() == doctest::Approx(0.0));
}

TEST_CASE("backend errors are flagged") {
  auto s = score(entry("b01"), make_trace({}, Verdict::exhausted, "backend Timeout: slow"));
  CHECK(s.backend_failure);
  CHECK_FALSE(s.success);
}

namespace {

EpisodeScore fake(std::string id, dataset::Level level, bool success, int req, int matched, int redundant, int cyber,
                  int cyber_ok, int real, int real_ok) {
  EpisodeScore s;
  s.entry_id = std::move(id);
  s.level = level;
  s.success = success;
  s.best.required_total = req;
  s.best.matched.required = matched;
  s.best.redundant = redundant;
  s.cyber_total = cyber;
  s.cyber_correct = cyber_ok;
  s.real_total = real;
  s.real_correct = real_ok;
  return s;
}

}  // namespace

TEST_CASE("aggregation by level") {
  using dataset::Level;
  const std::vector<EpisodeScore> run{fake("a", Level::L1, true, 4, 4, 0, 2, 2, 2, 2),
                                      fake("b", Level::L1, false, 4, 2, 2, 4, 1, 0, 0),
                                      fake("c", Level::L3, true, 1, 1, 3, 0, 0, 0, 0)};
  const auto m = aggregate(run);
  CHECK_FALSE(m.contains("L2"));
  const auto& l1 = m.at("L1");
  CHECK(l1.episodes == 2);
  CHECK(l1.sr == doctest::Approx(0.5));
  CHECK(l1.cr == doctest::Approx((1.0 + 0.5) / 2));
  CHECK(l1.rr == doctest::Approx((0.0 + 0.5) / 2));
  // Action accuracy pools actions, not episodes.
  CHECK(*l1.cta == doctest::Approx(3.0 / 6.0));
  CHECK(*l1.rta == doctest::Approx(1.0));
  const auto& l3 = m.at("L3");
  CHECK(l3.rr == doctest::Approx(3.0));
  CHECK_FALSE(l3.cta.has_value());
  CHECK_FALSE(l3.rta.has_value());
  const auto& all = m.at("Overall");
  CHECK(all.episodes == 3);
  CHECK(all.sr == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("run averaging") {
  using dataset::Level;
  const std::vector<EpisodeScore> r1{fake("a", Level::L1, true, 2, 2, 0, 1, 1, 0, 0),
                                     fake("b", Level::L1, true, 2, 2, 0, 1, 1, 0, 0)};
  const std::vector<EpisodeScore> r2{fake("b", Level::L1, false, 2, 1, 1, 1, 0, 0, 0),
                                     fake("a", Level::L1, true, 2, 2, 0, 1, 1, 0, 0)};
  const auto m = average_runs({r1, r2});
  CHECK(m.at("L1").sr == doctest::Approx((1.0 + 0.5) / 2));
  CHECK(m.at("L1").cr == doctest::Approx((1.0 + 0.75) / 2));
  CHECK(*m.at("L1").cta == doctest::Approx((1.0 + 0.5) / 2));
  CHECK_FALSE(m.at("L1").rta.has_value());

  const std::vector<EpisodeScore> partial{fake("a", Level::L1, true, 2, 2, 0, 1, 1, 0, 0)};
  CHECK_THROWS_AS(average_runs({r1, partial}), Error);
  CHECK(average_runs({}).empty());
}

TEST_CASE("report rendering") {
  BenchmarkReport r;
  r.runs = 2;
  r.entries = 3;
  r.metrics["L1"] = {2, 0.5, 0.75, 0.25, 0.5, 1.0};
  r.metrics["L3"] = {1, 1.0, 1.0, 3.0, std::nullopt, std::nullopt};
  r.metrics["Overall"] = {3, 2.0 / 3, 5.0 / 6, 1.0, 0.5, 1.0};
  const std::string want =
      "Strategy ppdr (P+Pl+D+R), 2 runs, 3 entries\n"
      "Level      N    SR↑    CR↑    RR↓   CTA↑   RTA↑\n"
      "L1         2   50.0   75.0   25.0   50.0  100.0\n"
      "L3         1  100.0  100.0  300.0      -      -\n"
      "Overall    3   66.7   83.3  100.0   50.0  100.0\n"
      "Values are percentages averaged over runs.\n";
  CHECK(render_report(r) == want);

  r.backend_failures = {"run 1 b01: backend Timeout: slow"};
  CHECK_FALSE(r.complete());
  CHECK(render_report(r).find("INCOMPLETE") != std::string::npos);

  const auto j = report_to_json(r);
  CHECK(j.at("complete") == false);
  CHECK(j.at("metrics").at("L3").at("cta").is_null());
}

namespace {

const std::vector<std::string> kSuite{"b01", "b27", "b09-v1", "b04-v5", "b09-v6"};

std::vector<dataset::TaskEntry> suite_entries() {
  std::vector<dataset::TaskEntry> out;
  for (const auto& id : kSuite) out.push_back(entry(id));
  return out;
}

BackendFactory suite_backend(const std::string& config) {
  return [config](const dataset::TaskEntry& e, int) {
    return std::make_shared<llm::ReplayBackend>(
        llm::load_fixture(std::string(DESKMATE_DATA_DIR) + "/fixtures/suite/" + config + "/" + e.id + ".jsonl"));
  };
}

}  // namespace

TEST_CASE("benchmark over replay fixtures") {
  const auto dir = std::filesystem::temp_directory_path() / "deskmate_eval_test";
  std::filesystem::remove_all(dir);
  BenchmarkOptions opt;
  opt.runs = 2;
  opt.workers = 2;
  opt.trace_dir = dir;
  int progress = 0;
  opt.progress = [&](const std::string&, int, const EpisodeScore&) { ++progress; };
  auto result = run_benchmark(suite_entries(), office(), suite_backend("full"), opt);
  CHECK(progress == 10);
  REQUIRE(result.runs.size() == 2);
  CHECK(result.report.complete());
  CHECK(result.report.entries == 5);
  CHECK(result.report.metrics.at("Overall").sr == doctest::Approx(1.0));
  CHECK(result.report.metrics.at("Overall").rr == doctest::Approx(0.0));
  for (const auto& id : kSuite) {
    CHECK(std::filesystem::exists(dir / "run1" / (id + ".jsonl")));
    CHECK(std::filesystem::exists(dir / "run2" / (id + ".jsonl")));
  }
  // Replays are deterministic, so both runs write identical traces.
  auto first = agents::load_trace(dir / "run1" / "b01.jsonl");
  auto second = agents::load_trace(dir / "run2" / "b01.jsonl");
  CHECK(second.header.seed == first.header.seed + 1);
  second.header.seed = first.header.seed;
  CHECK(first == second);
  std::filesystem::remove_all(dir);
}

TEST_CASE("benchmark reports backend failures as incomplete") {
  BenchmarkOptions opt;
  auto factory = [](const dataset::TaskEntry&, int) { return std::make_shared<llm::ReplayBackend>(std::vector<llm::FixtureRecord>{}); };
  auto result = run_benchmark({entry("b01")}, office(), factory, opt);
  CHECK_FALSE(result.report.complete());
  REQUIRE(result.report.backend_failures.size() == 1);
  CHECK(result.report.backend_failures[0].find("b01") != std::string::npos);
}
