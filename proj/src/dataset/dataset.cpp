#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "deskmate/dataset.hpp"
#include "deskmate/text.hpp"

namespace deskmate::dataset {

using nlohmann::json;
using memory::NodeKind;

namespace {

using People = std::set<EntityId>;

struct VariantPlanner {
  std::vector<People> l1, l2, l3a, l3u;
  std::vector<EntityId> irrelevant;
};

VariantPlanner plan_for(const BaseSpec& base, const memory::Scenario& scenario) {
  VariantPlanner p;
  People excluded{base.requester};
  for (const auto& r : base.gold.roles) {
    if (r.person) excluded.insert(*r.person);
  }
  People relevant = excluded;
  p.l1 = {{}};
  for (const auto& r : base.gold.roles) {
    if (!r.capability()) {
      if (r.needs_presence) p.l3u.push_back({*r.person});
      else relevant.erase(*r.person);
      continue;
    }
    std::vector<EntityId> known;
    std::vector<EntityId> hidden;
    const auto known_owners = scenario.known.query_owners(*r.kind);
    for (const auto& id : scenario.truth.query_owners(*r.kind)) {
      if (excluded.contains(id)) continue;
      relevant.insert(id);
      if (id == *r.preferred) continue;
      if (std::find(known_owners.begin(), known_owners.end(), id) != known_owners.end()) {
        known.push_back(id);
      } else {
        hidden.push_back(id);
      }
    }
    // Only the first capability role drives the category.
    if (!p.l2.empty()) continue;
    p.l2.push_back({*r.preferred});
    if (known.size() >= 2) {
      for (const auto& k : known) p.l2.push_back({*r.preferred, k});
    }
    People all_known(known.begin(), known.end());
    all_known.insert(*r.preferred);
    p.l3a.push_back(all_known);
    if (hidden.size() >= 2) {
      for (const auto& h : hidden) {
        auto s = all_known;
        s.insert(h);
        p.l3a.push_back(s);
      }
    }
    auto everyone = all_known;
    everyone.insert(hidden.begin(), hidden.end());
    p.l3u.insert(p.l3u.begin(), everyone);
  }
  for (const auto& id : scenario.truth.ids_of_kind(NodeKind::human)) {
    if (!relevant.contains(id)) p.irrelevant.push_back(id);
  }
  return p;
}

}  // namespace

std::vector<TaskEntry> generate(const std::vector<BaseSpec>& bases, const memory::Scenario& scenario) {
  const auto humans = scenario.truth.ids_of_kind(NodeKind::human);
  std::vector<TaskEntry> out;
  for (std::size_t bi = 0; bi < bases.size(); ++bi) {
    const auto& base = bases[bi];
    const auto planner = plan_for(base, scenario);

    auto make = [&](std::string id, const People& unavailable) {
      TaskEntry e{std::move(id), base.id, base.family, base.instruction, base.requester, {}, Level::L1, true, base.gold};
      for (const auto& h : humans) e.availability[h] = !unavailable.contains(h);
      const auto c = classify(base.gold, base.requester, e.availability, scenario);
      e.level = level_of(c);
      e.achievable = achievable(c);
      return e;
    };

    auto base_entry = make(base.id, {});
    if (base_entry.category() != Category::l1) throw GoldError(fmt::format("base {} is not resolvable as L1", base.id));
    out.push_back(std::move(base_entry));

    std::set<People> seen{{}};
    std::map<Category, int> used;
    for (std::size_t vi = 0; vi < base.plan.size(); ++vi) {
      const Category c = base.plan[vi];
      const std::vector<People>* cores = nullptr;
      switch (c) {
        case Category::l1: cores = &planner.l1; break;
        case Category::l2: cores = &planner.l2; break;
        case Category::l3_achievable: cores = &planner.l3a; break;
        case Category::l3_unachievable: cores = &planner.l3u; break;
      }
      if (cores->empty()) throw GoldError(fmt::format("base {} cannot produce a {} variant", base.id, to_string(c)));
      const int k = used[c]++;
      People unavailable = (*cores)[k % cores->size()];
      // Variants beyond the distinct cores also mark an uninvolved person unavailable.
      const std::size_t extra = k / cores->size() + (c == Category::l1 ? 1 : 0);
      if (extra > 0) {
        const auto& irr = planner.irrelevant;
        if (irr.empty()) throw GoldError(fmt::format("base {} has no uninvolved people", base.id));
        unavailable.insert(irr[(bi * 3 + extra - 1) % irr.size()]);
      }
      if (!seen.insert(unavailable).second) {
        throw GoldError(fmt::format("base {} produced a duplicate availability map", base.id));
      }
      auto entry = make(fmt::format("{}-v{}", base.id, vi + 1), unavailable);
      if (entry.category() != c) {
        throw GoldError(fmt::format("variant {} classified as {}, planned {}", entry.id, to_string(entry.category()),
                                    to_string(c)));
      }
      out.push_back(std::move(entry));
    }
  }
  return out;
}

// --- JSON ------------------------------------------------------------------------

namespace {

json slot_to_json(const Slot& s) {
  json j = {{"type", std::string(to_string(s.type))}};
  if (!s.ref.empty()) j["ref"] = s.ref;
  if (!s.words.empty()) j["words"] = s.words;
  return j;
}

Slot slot_from_json(const json& j) {
  Slot s;
  const auto type = j.at("type").get<std::string>();
  bool found = false;
  for (auto t : {Slot::Type::any, Slot::Type::person, Slot::Type::place, Slot::Type::group, Slot::Type::contains,
                 Slot::Type::equals}) {
    if (type == to_string(t)) {
      s.type = t;
      found = true;
    }
  }
  if (!found) throw GoldError(fmt::format("unknown slot type '{}'", type));
  s.ref = j.value("ref", "");
  if (j.contains("words")) s.words = j.at("words").get<std::vector<std::string>>();
  return s;
}

json gold_to_json(const GoldSpec& g) {
  json roles = json::array();
  for (const auto& r : g.roles) {
    json jr = {{"name", r.name}, {"needs_presence", r.needs_presence}};
    if (r.person) jr["person"] = r.person->str();
    if (r.kind) jr["kind"] = *r.kind;
    if (r.preferred) jr["preferred"] = r.preferred->str();
    roles.push_back(std::move(jr));
  }
  json templates = json::array();
  for (const auto& t : g.templates) {
    json kinds = json::array();
    for (auto k : t.kinds) kinds.push_back(std::string(actions::to_string(k)));
    json slots = json::object();
    for (const auto& [k, s] : t.slots) slots[k] = slot_to_json(s);
    templates.push_back({{"kinds", kinds}, {"slots", slots}, {"order", t.order}, {"required", t.required}});
  }
  return {{"roles", roles}, {"templates", templates}};
}

GoldSpec gold_from_json(const json& j) {
  GoldSpec g;
  for (const auto& jr : j.at("roles")) {
    Role r;
    r.name = jr.at("name").get<std::string>();
    r.needs_presence = jr.value("needs_presence", true);
    if (jr.contains("person")) r.person = EntityId{jr.at("person").get<std::string>()};
    if (jr.contains("kind")) r.kind = jr.at("kind").get<std::string>();
    if (jr.contains("preferred")) r.preferred = EntityId{jr.at("preferred").get<std::string>()};
    g.roles.push_back(std::move(r));
  }
  for (const auto& jt : j.at("templates")) {
    Template t;
    for (const auto& k : jt.at("kinds")) {
      auto kind = actions::parse_kind(k.get<std::string>());
      if (!kind) throw GoldError(fmt::format("unknown action kind '{}'", k.get<std::string>()));
      t.kinds.push_back(*kind);
    }
    for (const auto& [k, s] : jt.at("slots").items()) t.slots[k] = slot_from_json(s);
    t.order = jt.value("order", 0);
    t.required = jt.value("required", true);
    g.templates.push_back(std::move(t));
  }
  return g;
}

}  // namespace

json to_json(const std::vector<TaskEntry>& entries, std::string_view scenario_name) {
  json list = json::array();
  for (const auto& e : entries) {
    json avail = json::object();
    for (const auto& [id, v] : e.availability) avail[id.str()] = v;
    list.push_back({{"id", e.id},
                    {"base_id", e.base_id},
                    {"family", e.family},
                    {"instruction", e.instruction},
                    {"requester", e.requester.str()},
                    {"availability", avail},
                    {"level", std::string(to_string(e.level))},
                    {"achievable", e.achievable},
                    {"gold", gold_to_json(e.gold)}});
  }
  return {{"version", kDatasetSchemaVersion}, {"scenario", std::string(scenario_name)}, {"entries", list}};
}

std::vector<TaskEntry> from_json(const json& doc, const memory::Scenario& scenario) {
  if (doc.value("version", 0) != kDatasetSchemaVersion) {
    throw Error(fmt::format("unsupported dataset version, expected {}", kDatasetSchemaVersion));
  }
  std::vector<TaskEntry> out;
  std::set<std::string> ids;
  const auto& list = doc.at("entries");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& j = list[i];
    try {
      TaskEntry e;
      e.id = j.at("id").get<std::string>();
      if (!ids.insert(e.id).second) throw Error("duplicate id " + e.id);
      e.base_id = j.at("base_id").get<std::string>();
      e.family = j.value("family", "");
      e.instruction = j.at("instruction").get<std::string>();
      e.requester = EntityId{j.at("requester").get<std::string>()};
      for (const auto& [id, v] : j.at("availability").items()) {
        const auto* n = scenario.truth.find(EntityId{id});
        if (!n || n->kind != NodeKind::human) throw Error(fmt::format("availability names unknown person '{}'", id));
        e.availability[EntityId{id}] = v.get<bool>();
      }
      e.level = parse_level(j.at("level").get<std::string>());
      e.achievable = j.at("achievable").get<bool>();
      e.gold = gold_from_json(j.at("gold"));
      out.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw Error(fmt::format("dataset entry {}: {}", i, ex.what()));
    }
  }
  return out;
}

std::vector<TaskEntry> load(const std::filesystem::path& path, const memory::Scenario& scenario, bool strict) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open dataset '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  const auto content = ss.str();
  if (text::trim(content).empty()) {
    if (strict) throw Error(fmt::format("dataset '{}' is empty", path.string()));
    return {};
  }
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("invalid JSON in '{}': {}", path.string(), e.what()));
  }
  auto entries = from_json(doc, scenario);
  if (strict) {
    for (const auto& e : entries) {
      const auto c = classify(e.gold, e.requester, e.availability, scenario);
      if (c != e.category()) {
        throw Error(fmt::format("entry {} stored as {} but classifies as {}", e.id, to_string(e.category()), to_string(c)));
      }
    }
  }
  return entries;
}

void save(const std::filesystem::path& path, const std::vector<TaskEntry>& entries, std::string_view scenario_name) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write dataset '{}'", path.string()));
  out << to_json(entries, scenario_name).dump(1) << "\n";
}

// --- stats -----------------------------------------------------------------------

int DatasetStats::percent(Category c) const {
  if (total == 0) return 0;
  auto it = counts.find(c);
  const int n = it == counts.end() ? 0 : it->second;
  return static_cast<int>(std::lround(100.0 * n / total));
}

DatasetStats stats(const std::vector<TaskEntry>& entries) {
  DatasetStats s;
  for (auto c : {Category::l1, Category::l2, Category::l3_achievable, Category::l3_unachievable}) s.counts[c] = 0;
  for (const auto& e : entries) {
    ++s.counts[e.category()];
    ++s.total;
    if (e.id == e.base_id) ++s.bases;
  }
  return s;
}

std::string render_stats(const DatasetStats& s) {
  std::string out = fmt::format("{:<6} {:<11} {:>6} {:>6}\n", "Level", "Achievable", "Count", "Share");
  for (auto c : {Category::l1, Category::l2, Category::l3_achievable, Category::l3_unachievable}) {
    out += fmt::format("{:<6} {:<11} {:>6} {:>5}%\n", to_string(level_of(c)), achievable(c) ? "yes" : "no",
                       s.counts.at(c), s.percent(c));
  }
  out += fmt::format("{:<6} {:<11} {:>6} {:>5}%\n", "Total", "", s.total, s.total ? 100 : 0);
  out += fmt::format("Base instructions: {}, variants: {}\n", s.bases, s.total - s.bases);
  return out;
}

}  // namespace deskmate::dataset
