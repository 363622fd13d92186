#include <random>

#include "doctest.h"

#include "deskmate/memory.hpp"
#include "deskmate/scenario.hpp"
#include "deskmate/text.hpp"

using namespace deskmate::memory;

namespace {

EntityId id(const char* s) { return EntityId{s}; }

Node human(const char* i, const char* name, bool available = true) {
  return {id(i), NodeKind::human, name, available};
}
Node place(const char* i, const char* name) { return {id(i), NodeKind::location, name, std::nullopt}; }
Node item(const char* i, const char* kind) { return {id(i), NodeKind::item, kind, std::nullopt}; }
Node facility(const char* i, const char* name) { return {id(i), NodeKind::facility, name, std::nullopt}; }

// Five people, three pens with owners, one ownerless pen, a printer.
TopoGraph office() {
  TopoGraph g;
  g.upsert_node(place("l1", "Desk 1"));
  g.upsert_node(place("l2", "Desk 2"));
  g.upsert_node(place("l3", "Desk 3"));
  g.upsert_node(place("l7", "Printer Room"));
  g.upsert_node(human("h_lee", "Lee"));
  g.upsert_node(human("h_mao", "Mao"));
  g.upsert_node(human("h_wu", "Wu"));
  g.upsert_node(human("h_zhang", "Zhang"));
  g.add_edge({Relation::located_at, id("h_lee"), id("l1")});
  g.add_edge({Relation::located_at, id("h_mao"), id("l2")});
  g.add_edge({Relation::located_at, id("h_wu"), id("l3")});
  g.add_edge({Relation::located_at, id("h_zhang"), id("l3")});
  g.upsert_node(facility("f_printer", "printer"));
  g.add_edge({Relation::located_at, id("f_printer"), id("l7")});
  g.upsert_node(item("i_pen_wu", "pen"));
  g.upsert_node(item("i_pen_mao", "pen"));
  g.upsert_node(item("i_pen_zhang", "Pen"));
  g.add_edge({Relation::owns, id("i_pen_wu"), id("h_wu")});
  g.add_edge({Relation::owns, id("i_pen_mao"), id("h_mao")});
  g.add_edge({Relation::owns, id("i_pen_zhang"), id("h_zhang")});
  return g;
}

Memory office_memory() {
  EmbodiedState e;
  e.robot_location = id("l1");
  return Memory(office(), {{"g_office", "Office Group", {id("h_lee"), id("h_mao")}}}, e);
}

DialogueMessage msg(std::string from, std::string to, std::string content) {
  return {0, Channel::direct, std::move(from), std::move(to), std::move(content)};
}

}  // namespace

TEST_CASE("upsert_node") {
  TopoGraph g;
  g.upsert_node(human("h1", "H One", true));
  CHECK(g.nodes().size() == 1);

  g.upsert_node(human("h1", "H One", false));
  CHECK(g.nodes().size() == 1);
  CHECK_FALSE(g.is_available(id("h1")));

  Node bad = item("i1", "pen");
  bad.availability = true;
  CHECK_THROWS_AS(g.upsert_node(bad), GraphError);
  CHECK_THROWS_AS(g.upsert_node(place("l1", "")), GraphError);
}

TEST_CASE("set_availability") {
  auto g = office();
  const auto before = g;

  g.set_availability(id("h_mao"), false);
  CHECK_FALSE(g.is_available(id("h_mao")));
  for (const auto& [nid, node] : g.nodes()) {
    if (nid != id("h_mao")) CHECK(node == before.at(nid));
  }
  CHECK(g.edges() == before.edges());

  CHECK_THROWS_AS(g.set_availability(id("f_printer"), false), GraphError);
  CHECK_THROWS_AS(g.set_availability(id("h_ghost"), false), GraphError);

  SUBCASE("true, false, true restores the original graph") {
    auto h = office();
    h.set_availability(id("h_wu"), true);
    h.set_availability(id("h_wu"), false);
    h.set_availability(id("h_wu"), true);
    CHECK(h == office());
  }
}

TEST_CASE("query_location") {
  auto g = office();
  CHECK(g.query_location(id("h_wu")) == id("l3"));
  CHECK(g.query_location(id("f_printer")) == id("l7"));

  g.upsert_node(human("h_new", "New"));
  try {
    g.query_location(id("h_new"));
    FAIL("expected unlocated");
  } catch (const GraphError& e) {
    CHECK(e.code() == GraphError::Code::unlocated);
    CHECK(std::string(e.what()).find("unlocated") != std::string::npos);
  }
  CHECK_THROWS_AS(g.query_location(id("i_pen_wu")), GraphError);
  CHECK_THROWS_AS(g.query_location(id("l1")), GraphError);
}

TEST_CASE("edges are undirected for queries") {
  auto g = office();
  g.add_edge({Relation::located_at, id("l1"), id("h_wu")});
  CHECK(g.query_location(id("h_wu")) == id("l1"));
  g.add_edge({Relation::owns, id("h_lee"), id("i_pen_wu")});
  CHECK(g.owner_of(id("i_pen_wu")) == id("h_lee"));
  CHECK(g.invariant_violations().empty());
  CHECK_THROWS_AS(g.add_edge({Relation::owns, id("h_lee"), id("l1")}), GraphError);
}

TEST_CASE("mutations that would unlocate a node are rejected") {
  auto g = office();
  const auto before = g;
  try {
    g.remove_edge({Relation::located_at, id("h_wu"), id("l3")});
    FAIL("expected unlocated");
  } catch (const GraphError& e) {
    CHECK(e.code() == GraphError::Code::unlocated);
  }
  CHECK_FALSE(g.remove_edge({Relation::located_at, id("h_wu"), id("l1")}));
  CHECK(g.remove_edge({Relation::owns, id("i_pen_wu"), id("h_wu")}));
  CHECK_FALSE(g.owner_of(id("i_pen_wu")));

  // l3 houses Wu; turning it into an item would leave Wu unlocated.
  CHECK_THROWS_AS(g.upsert_node(item("l3", "pen")), GraphError);
  g.upsert_node(human("h_loose", "Loose"));
  g.upsert_node(item("h_loose", "pen"));
  CHECK(g.at(id("h_loose")).kind == NodeKind::item);
  CHECK(g.query_location(id("h_wu")) == before.query_location(id("h_wu")));
}

TEST_CASE("query_owners") {
  auto g = office();
  CHECK(g.query_owners("pen") == std::vector{id("h_mao"), id("h_wu"), id("h_zhang")});
  CHECK(g.query_owners("PEN") == g.query_owners("pen"));
  CHECK(g.query_owners("laser").empty());

  SUBCASE("ownerless items contribute nothing") {
    // 5-node fixture: 2 humans, 1 location... owned pen + ownerless pen.
    TopoGraph small;
    small.upsert_node(place("l1", "Desk"));
    small.upsert_node(human("h_a", "A"));
    small.upsert_node(human("h_b", "B"));
    small.upsert_node(item("i_1", "pen"));
    small.upsert_node(item("i_2", "pen"));
    small.add_edge({Relation::located_at, id("h_a"), id("l1")});
    small.add_edge({Relation::located_at, id("h_b"), id("l1")});
    small.add_edge({Relation::owns, id("i_1"), id("h_b")});
    // Hand enumeration of owns edges: only (i_1, h_b).
    CHECK(small.query_owners("pen") == std::vector{id("h_b")});
  }
}

TEST_CASE("snapshot and render_text") {
  auto m = office_memory();
  m.set_instruction("Bring me a pen");

  auto p0 = m.snapshot(0);
  CHECK(p0.dialogue.empty());
  CHECK(p0.trace.empty());
  const auto text0 = render_text(p0);
  for (const auto& [nid, node] : m.graph().nodes()) {
    CHECK(text0.find(node.display_name) != std::string::npos);
  }
  CHECK(render_text(m.snapshot(0)) == text0);

  // Section order is fixed.
  const char* sections[] = {"## Instruction", "## Environment", "## Availability",
                            "## Dialogue", "## Embodied State", "## Trace"};
  std::size_t last = 0;
  for (const char* s : sections) {
    const auto pos = text0.find(s);
    REQUIRE(pos != std::string::npos);
    CHECK(pos >= last);
    last = pos;
  }

  m.record_message(msg("assistant", "h_wu", "Do you have a pen?"));
  m.record_message(msg("h_wu", "assistant", "Yes, I have a pen."));
  m.record_message(msg("assistant", "h_lee", "On my way."));
  const auto text3 = render_text(m.snapshot(1));
  int lines = 0;
  long prev = 0;
  for (const auto& line : deskmate::text::split_lines(text3)) {
    if (!line.empty() && line.front() == '[') {
      const long seq = std::stol(line.substr(1));
      CHECK(seq > prev);
      prev = seq;
      ++lines;
    }
  }
  CHECK(lines == 3);
}

TEST_CASE("dialogue tail is bounded") {
  auto m = office_memory();
  for (int i = 0; i < 25; ++i) m.record_message(msg("assistant", "h_wu", "ping " + std::to_string(i)));
  const auto text = render_text(m.snapshot(0));
  CHECK(text.find("last 20 of 25") != std::string::npos);
  CHECK(text.find("ping 4\n") == std::string::npos);
  CHECK(text.find("ping 5\n") != std::string::npos);
  CHECK(m.dialogue().size() == 25);
}

TEST_CASE("reset_short_term") {
  auto m = office_memory();
  m.set_instruction("x");
  m.record_message(msg("assistant", "h_wu", "hi"));
  m.record_state_change({"robot_location", "l1", "l3"});
  m.append_trace({0, "t", {"ACTION Move | target_name=Wu"}, "Y"});
  m.graph().set_availability(id("h_mao"), false);
  const auto nodes_before = m.graph().nodes().size();
  const auto edges_before = m.graph().edges();

  m.reset_short_term();
  CHECK(m.dialogue().empty());
  CHECK(m.trace().empty());
  CHECK(m.instruction().empty());
  CHECK(m.graph().nodes().size() == nodes_before);
  CHECK(m.graph().edges() == edges_before);
  CHECK_FALSE(m.graph().is_available(id("h_mao")));
  CHECK(m.embodied().robot_location == id("l3"));

  const auto once = render_text(m.snapshot(0));
  m.reset_short_term();
  CHECK(render_text(m.snapshot(0)) == once);
}

TEST_CASE("delta_since") {
  auto m = office_memory();
  auto p = m.snapshot(0);
  CHECK(m.delta_since(p).empty());

  m.record_message(msg("h_wu", "assistant", "Sure."));
  CHECK(m.delta_since(p).new_messages.size() == 1);

  auto p1 = m.snapshot(1);
  m.record_state_change({"robot_location", "l1", "l3"});
  m.record_message(msg("h_wu", "assistant", "I see you."));
  const auto d = m.delta_since(p1);
  CHECK(d.state_changes == std::vector<StateChange>{{"robot_location", "l1", "l3"}});
  REQUIRE(d.new_messages.size() == 1);
  CHECK(d.new_messages[0].seq > p1.last_seq);

  auto other = office_memory();
  CHECK_THROWS_AS(other.delta_since(p1), ForeignPackageError);
  m.reset_short_term();
  CHECK_THROWS_AS(m.delta_since(p1), ForeignPackageError);
}

TEST_CASE("randomized mutations keep cardinality invariants") {
  std::mt19937 rng(7);
  const auto base = office();
  const auto humans = base.ids_of_kind(NodeKind::human);
  const auto places = base.ids_of_kind(NodeKind::location);
  const auto items = base.ids_of_kind(NodeKind::item);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = base;
    for (int op = 0; op < 30; ++op) {
      const auto pick = [&](const auto& v) { return v[rng() % v.size()]; };
      try {
        switch (rng() % 8) {
          case 0: g.add_edge({Relation::located_at, pick(humans), pick(places)}); break;
          case 1: g.add_edge({Relation::owns, pick(items), pick(humans)}); break;
          case 2: g.add_edge({Relation::owns, pick(humans), pick(items)}); break;
          case 3: g.set_availability(pick(humans), rng() % 2 == 0); break;
          case 4: g.remove_edge({Relation::owns, pick(items), pick(humans)}); break;
          case 5: g.remove_edge({Relation::located_at, pick(humans), pick(places)}); break;
          case 6: g.add_edge({Relation::located_at, pick(items), pick(places)}); break;
          case 7: g.upsert_node(item(pick(places).str().c_str(), "pen")); break;
        }
      } catch (const GraphError&) {
        // Rejected mutations must leave the graph valid too.
      }
      REQUIRE(g.invariant_violations().empty());
    }
    const auto owners = g.query_owners("pen");
    CHECK(std::is_sorted(owners.begin(), owners.end()));
    CHECK(std::adjacent_find(owners.begin(), owners.end()) == owners.end());
    CHECK(g.query_owners("pen") == owners);
  }
}

TEST_CASE("scenario parsing reports the offending path") {
  nlohmann::json doc = {
      {"version", 1},
      {"name", "tiny"},
      {"locations", {{{"id", "l1"}, {"name", "Desk"}}}},
      {"facilities", nlohmann::json::array()},
      {"people", {{{"id", "h1"}, {"name", "A"}, {"location", "l1"}}, {{"id", "h2"}, {"name", "B"}}}},
      {"robot", {{"home", "l1"}}},
  };
  try {
    parse_scenario(doc);
    FAIL("expected error");
  } catch (const ScenarioError& e) {
    CHECK(e.path() == "/people/1/location");
  }
  doc["people"][1]["location"] = "l1";
  doc["items"] = {{{"id", "i1"}, {"kind", "pen"}, {"owner", "h1"}, {"known", false}}};
  const auto s = parse_scenario(doc);
  CHECK(s.truth.owner_of(id("i1")) == id("h1"));
  CHECK_FALSE(s.known.contains(id("i1")));
  doc["version"] = 2;
  CHECK_THROWS_AS(parse_scenario(doc), ScenarioError);
}
