#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "deskmate/dataset.hpp"
#include "deskmate/text.hpp"

namespace deskmate::dataset {

using actions::ActionKind;
using memory::NodeKind;

std::string_view to_string(Level level) {
  switch (level) {
    case Level::L1: return "L1";
    case Level::L2: return "L2";
    case Level::L3: return "L3";
  }
  return "?";
}

Level parse_level(std::string_view text) {
  for (Level l : {Level::L1, Level::L2, Level::L3}) {
    if (text::iequals(text, to_string(l))) return l;
  }
  throw Error(fmt::format("unknown level '{}'", text));
}

std::string_view to_string(Category category) {
  switch (category) {
    case Category::l1: return "L1";
    case Category::l2: return "L2";
    case Category::l3_achievable: return "L3a";
    case Category::l3_unachievable: return "L3u";
  }
  return "?";
}

Level level_of(Category category) {
  switch (category) {
    case Category::l1: return Level::L1;
    case Category::l2: return Level::L2;
    default: return Level::L3;
  }
}

bool achievable(Category category) { return category != Category::l3_unachievable; }

std::string_view to_string(Slot::Type type) {
  switch (type) {
    case Slot::Type::any: return "any";
    case Slot::Type::person: return "person";
    case Slot::Type::place: return "place";
    case Slot::Type::group: return "group";
    case Slot::Type::contains: return "contains";
    case Slot::Type::equals: return "equals";
  }
  return "?";
}

const Role* GoldSpec::find_role(std::string_view name) const {
  for (const auto& r : roles) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

Category TaskEntry::category() const {
  if (!achievable) return Category::l3_unachievable;
  switch (level) {
    case Level::L1: return Category::l1;
    case Level::L2: return Category::l2;
    case Level::L3: return Category::l3_achievable;
  }
  return Category::l1;
}

int AdmissibleSet::required_count() const {
  return static_cast<int>(std::count_if(templates.begin(), templates.end(), [](const auto& t) { return t.required; }));
}

namespace {

bool is_available(const std::map<EntityId, bool>& availability, const EntityId& person) {
  auto it = availability.find(person);
  return it == availability.end() || it->second;
}

std::set<EntityId> fixed_people(const GoldSpec& gold, const EntityId& requester) {
  std::set<EntityId> out{requester};
  for (const auto& r : gold.roles) {
    if (r.person) out.insert(*r.person);
  }
  return out;
}

std::vector<EntityId> owners(const memory::TopoGraph& graph, const Role& role, const std::set<EntityId>& excluded) {
  std::vector<EntityId> out;
  for (const auto& id : graph.query_owners(*role.kind)) {
    if (!excluded.contains(id)) out.push_back(id);
  }
  return out;
}

struct RoleAnalysis {
  std::vector<EntityId> truth;      // every owner except fixed participants
  std::vector<EntityId> known;      // the subset the initial memory knows
  std::vector<EntityId> available;  // truth owners available right now
};

RoleAnalysis analyse(const Role& role, const std::set<EntityId>& excluded, const std::map<EntityId, bool>& availability,
                     const memory::Scenario& scenario) {
  RoleAnalysis a;
  a.truth = owners(scenario.truth, role, excluded);
  const auto known = owners(scenario.known, role, excluded);
  for (const auto& id : a.truth) {
    if (std::find(known.begin(), known.end(), id) != known.end()) a.known.push_back(id);
    if (is_available(availability, id)) a.available.push_back(id);
  }
  return a;
}

bool contains(const std::vector<EntityId>& v, const EntityId& id) { return std::find(v.begin(), v.end(), id) != v.end(); }

const memory::ChatGroup* group_of(const memory::Scenario& scenario, const EntityId& person) {
  for (const auto& g : scenario.groups) {
    if (std::find(g.members.begin(), g.members.end(), person) != g.members.end()) return &g;
  }
  return nullptr;
}

ConcreteTemplate contact_template(const EntityId& person, std::vector<std::string> words, bool required,
                                  std::string label) {
  ConcreteTemplate t{{ActionKind::Inquire, ActionKind::Inform}, {{"contact", {Slot::Type::person, person.str(), {}}}},
                     0, required, std::move(label)};
  if (!words.empty()) t.slots["text"] = {Slot::Type::contains, "", std::move(words)};
  return t;
}

ConcreteTemplate group_template(const memory::ChatGroup& group, std::vector<std::string> words, bool required) {
  ConcreteTemplate t{{ActionKind::Inquire, ActionKind::Inform}, {{"contact", {Slot::Type::group, group.id, {}}}},
                     0, required, fmt::format("ask group {}", group.id)};
  if (!words.empty()) t.slots["text"] = {Slot::Type::contains, "", std::move(words)};
  return t;
}

EntityId place_of(const memory::TopoGraph& truth, const EntityId& id) {
  const auto& node = truth.at(id);
  return node.kind == NodeKind::location ? id : truth.query_location(id);
}

std::string describe(const ConcreteTemplate& t) {
  std::vector<std::string> kinds;
  for (auto k : t.kinds) kinds.emplace_back(actions::to_string(k));
  std::vector<std::string> slots;
  for (const auto& [k, s] : t.slots) {
    if (s.type == Slot::Type::contains) {
      slots.push_back(fmt::format("{}~{}", k, fmt::join(s.words, "/")));
    } else if (s.type != Slot::Type::any) {
      slots.push_back(fmt::format("{}={}", k, s.ref));
    }
  }
  return fmt::format("{} {}", fmt::join(kinds, "|"), fmt::join(slots, " "));
}

}  // namespace

Category classify(const GoldSpec& gold, const EntityId& requester, const std::map<EntityId, bool>& availability,
                  const memory::Scenario& scenario) {
  const auto excluded = fixed_people(gold, requester);
  Category worst = Category::l1;
  for (const auto& role : gold.roles) {
    if (!role.capability()) {
      if (role.person && role.needs_presence && !is_available(availability, *role.person)) {
        return Category::l3_unachievable;
      }
      continue;
    }
    const auto a = analyse(role, excluded, availability, scenario);
    if (a.available.empty()) return Category::l3_unachievable;
    Category c = Category::l3_achievable;
    if (role.preferred && is_available(availability, *role.preferred)) {
      c = Category::l1;
    } else if (std::any_of(a.known.begin(), a.known.end(), [&](const auto& id) { return is_available(availability, id); })) {
      c = Category::l2;
    }
    worst = std::max(worst, c);
  }
  return worst;
}

std::vector<AdmissibleSet> resolve_gold(const TaskEntry& entry, const memory::Scenario& scenario) {
  const auto& gold = entry.gold;
  const auto& truth = scenario.truth;
  const auto excluded = fixed_people(gold, entry.requester);

  auto words_for = [&](const Role& role) { return scenario.keywords_for(*role.kind); };

  for (const auto& t : gold.templates) {
    for (const auto& [key, slot] : t.slots) {
      if (!slot.ref.starts_with('@')) continue;
      if (slot.ref != "@requester" && !gold.find_role(slot.ref.substr(1))) throw GoldError(fmt::format("template references unknown role '{}'", slot.ref));
    }
  }
  for (const auto& role : gold.roles) {
    if (role.capability() && !scenario.item_kinds.contains(*role.kind) && truth.query_owners(*role.kind).empty()) {
      throw GoldError(fmt::format("role '{}' references unknown kind '{}'", role.name, *role.kind));
    }
  }

  const auto category = classify(gold, entry.requester, entry.availability, scenario);
  if (category == Category::l3_unachievable) {
    AdmissibleSet set;
    set.templates.push_back({{ActionKind::Stop}, {{"outcome", {Slot::Type::equals, "unachievable", {}}}}, 0, true,
                             "Stop outcome=unachievable"});
    // Looking for help before giving up is never redundant.
    std::set<std::string> seen;
    auto add = [&](ConcreteTemplate t) {
      if (seen.insert(t.label).second) set.templates.push_back(std::move(t));
    };
    for (const auto& role : gold.roles) {
      if (!role.capability()) {
        if (role.person && role.needs_presence && !is_available(entry.availability, *role.person)) {
          add(contact_template(*role.person, {}, false, "contact " + role.person->str()));
        }
        continue;
      }
      const auto a = analyse(role, excluded, entry.availability, scenario);
      if (role.preferred) add(contact_template(*role.preferred, {}, false, "contact " + role.preferred->str()));
      for (const auto& id : a.known) add(contact_template(id, {}, false, "contact " + id.str()));
      for (const auto& g : scenario.groups) add(group_template(g, words_for(role), false));
    }
    return {set};
  }

  // Candidate people per role.
  std::vector<std::pair<std::string, std::vector<EntityId>>> choices;
  std::map<std::string, RoleAnalysis> analyses;
  for (const auto& role : gold.roles) {
    if (!role.capability()) {
      choices.push_back({role.name, {*role.person}});
      continue;
    }
    auto a = analyse(role, excluded, entry.availability, scenario);
    if (role.preferred && is_available(entry.availability, *role.preferred)) {
      choices.push_back({role.name, {*role.preferred}});
    } else {
      choices.push_back({role.name, a.available});
    }
    analyses.emplace(role.name, std::move(a));
  }
  choices.push_back({"requester", {entry.requester}});

  std::vector<std::map<std::string, EntityId>> bindings{{}};
  for (const auto& [name, people] : choices) {
    std::vector<std::map<std::string, EntityId>> next;
    for (const auto& b : bindings) {
      for (const auto& p : people) {
        auto nb = b;
        nb[name] = p;
        next.push_back(std::move(nb));
      }
    }
    bindings = std::move(next);
  }

  std::vector<AdmissibleSet> out;
  for (const auto& binding : bindings) {
    AdmissibleSet set;
    set.binding = binding;
    auto deref = [&](const std::string& ref) {
      return ref.starts_with('@') ? binding.at(ref.substr(1)) : EntityId{ref};
    };
    for (const auto& t : gold.templates) {
      ConcreteTemplate c{t.kinds, {}, t.order, t.required, ""};
      for (const auto& [key, slot] : t.slots) {
        Slot s = slot;
        if (slot.type == Slot::Type::person) s.ref = deref(slot.ref).str();
        if (slot.type == Slot::Type::place) s.ref = place_of(truth, deref(slot.ref)).str();
        c.slots[key] = std::move(s);
      }
      c.label = describe(c);
      set.templates.push_back(std::move(c));
    }
    for (const auto& role : gold.roles) {
      if (!role.capability()) continue;
      const auto& bound = binding.at(role.name);
      const auto& a = analyses.at(role.name);
      if (role.preferred && bound == *role.preferred) continue;
      std::set<EntityId> contacted{bound};
      if (role.preferred) {
        set.templates.push_back(contact_template(*role.preferred, {}, true, "contact preferred " + role.preferred->str()));
        contacted.insert(*role.preferred);
      }
      const memory::ChatGroup* required_group = nullptr;
      if (!contains(a.known, bound)) {
        required_group = group_of(scenario, bound);
        if (required_group) set.templates.push_back(group_template(*required_group, words_for(role), true));
      }
      for (const auto& id : a.known) {
        if (contacted.insert(id).second) set.templates.push_back(contact_template(id, {}, false, "contact " + id.str()));
      }
      for (const auto& g : scenario.groups) {
        if (&g != required_group) set.templates.push_back(group_template(g, words_for(role), false));
      }
    }
    out.push_back(std::move(set));
  }
  return out;
}

namespace {

std::optional<std::string> slot_value(const actions::Action& action, const std::string& key) {
  if (key == "text") {
    if (auto v = action.param("content")) return v;
    return action.param("question");
  }
  return action.param(key);
}

}  // namespace

bool matches(const ConcreteTemplate& tmpl, const actions::Action& action, const memory::Scenario& scenario) {
  if (std::find(tmpl.kinds.begin(), tmpl.kinds.end(), action.kind()) == tmpl.kinds.end()) return false;
  const auto& truth = scenario.truth;
  for (const auto& [key, slot] : tmpl.slots) {
    const auto value = slot_value(action, key);
    if (!value) return false;
    switch (slot.type) {
      case Slot::Type::any: break;
      case Slot::Type::person: {
        auto id = truth.resolve_name(*value);
        if (!id || id->str() != slot.ref || truth.at(*id).kind != NodeKind::human) return false;
        break;
      }
      case Slot::Type::place: {
        auto id = truth.resolve_name(*value);
        if (!id || truth.at(*id).kind == NodeKind::item) return false;
        if (place_of(truth, *id).str() != slot.ref) return false;
        break;
      }
      case Slot::Type::group: {
        const auto* g = scenario.find_group(*value);
        if (!g || g->id != slot.ref) return false;
        break;
      }
      case Slot::Type::contains:
        if (std::none_of(slot.words.begin(), slot.words.end(), [&](const auto& w) { return text::icontains(*value, w); })) {
          return false;
        }
        break;
      case Slot::Type::equals:
        if (!text::iequals(*value, slot.ref)) return false;
        break;
    }
  }
  return true;
}

}  // namespace deskmate::dataset
