#include "deskmate/scenario.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "deskmate/text.hpp"

namespace deskmate::memory {

namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ScenarioError(path + "/" + key, "missing field");
  return obj.at(key);
}

std::string require_string(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string() || v.get<std::string>().empty()) {
    throw ScenarioError(path + "/" + key, "expected a non-empty string");
  }
  return v.get<std::string>();
}

const json& require_array(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) throw ScenarioError(path + "/" + key, "expected an array");
  return v;
}

// Wraps graph mutations so failures carry the JSON path of the record.
template <typename F>
void at_path(const std::string& path, F&& f) {
  try {
    f();
  } catch (const GraphError& e) {
    throw ScenarioError(path, e.what());
  }
}

}  // namespace

std::vector<std::string> Scenario::keywords_for(const std::string& kind) const {
  std::vector<std::string> words{kind};
  if (auto it = item_kinds.find(kind); it != item_kinds.end()) {
    words.insert(words.end(), it->second.keywords.begin(), it->second.keywords.end());
  }
  return words;
}

const ChatGroup* Scenario::find_group(std::string_view id_or_name) const {
  for (const auto& g : groups) {
    if (g.id == id_or_name || text::iequals(g.name, id_or_name)) return &g;
  }
  return nullptr;
}

namespace {

Scenario parse_impl(const json& doc) {
  if (!doc.is_object()) throw ScenarioError("", "scenario must be a JSON object");
  const json& version = require(doc, "version", "");
  if (!version.is_number_integer() || version.get<int>() != kScenarioSchemaVersion) {
    throw ScenarioError("/version", fmt::format("unsupported version, expected {}", kScenarioSchemaVersion));
  }

  Scenario s;
  s.name = require_string(doc, "name", "");

  const json& locations = require_array(doc, "locations", "");
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto path = fmt::format("/locations/{}", i);
    const auto id = EntityId{require_string(locations[i], "id", path)};
    Node n{id, NodeKind::location, require_string(locations[i], "name", path), std::nullopt};
    s.location_types[id] = locations[i].value("type", "other");
    at_path(path, [&] {
      if (s.truth.contains(id)) throw GraphError(GraphError::Code::invalid_node, "duplicate id " + id.str());
      s.truth.upsert_node(n);
      s.known.upsert_node(n);
    });
  }

  const json& facilities = require_array(doc, "facilities", "");
  for (std::size_t i = 0; i < facilities.size(); ++i) {
    const auto path = fmt::format("/facilities/{}", i);
    const auto id = EntityId{require_string(facilities[i], "id", path)};
    Node n{id, NodeKind::facility, require_string(facilities[i], "name", path), std::nullopt};
    const auto loc = EntityId{require_string(facilities[i], "location", path)};
    at_path(path, [&] {
      if (s.truth.contains(id)) throw GraphError(GraphError::Code::invalid_node, "duplicate id " + id.str());
      for (auto* g : {&s.truth, &s.known}) {
        g->upsert_node(n);
        g->add_edge({Relation::located_at, id, loc});
      }
    });
  }

  const json& people = require_array(doc, "people", "");
  for (std::size_t i = 0; i < people.size(); ++i) {
    const auto path = fmt::format("/people/{}", i);
    const auto id = EntityId{require_string(people[i], "id", path)};
    const bool available = people[i].value("available", true);
    Node n{id, NodeKind::human, require_string(people[i], "name", path), available};
    if (!people[i].contains("location")) throw ScenarioError(path + "/location", "human lacks a location edge");
    const auto loc = EntityId{require_string(people[i], "location", path)};
    at_path(path, [&] {
      if (s.truth.contains(id)) throw GraphError(GraphError::Code::invalid_node, "duplicate id " + id.str());
      for (auto* g : {&s.truth, &s.known}) {
        g->upsert_node(n);
        g->add_edge({Relation::located_at, id, loc});
      }
    });
  }

  if (doc.contains("items")) {
    const json& items = require_array(doc, "items", "");
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto path = fmt::format("/items/{}", i);
      const auto id = EntityId{require_string(items[i], "id", path)};
      Node n{id, NodeKind::item, require_string(items[i], "kind", path), std::nullopt};
      const bool known = items[i].value("known", true);
      at_path(path, [&] {
        if (s.truth.contains(id)) throw GraphError(GraphError::Code::invalid_node, "duplicate id " + id.str());
        s.truth.upsert_node(n);
        if (items[i].contains("owner")) {
          s.truth.add_edge({Relation::owns, id, EntityId{require_string(items[i], "owner", path)}});
        }
        if (known) {
          s.known.upsert_node(n);
          if (items[i].contains("owner")) {
            s.known.add_edge({Relation::owns, id, EntityId{items[i].at("owner").get<std::string>()}});
          }
        }
      });
    }
  }

  if (doc.contains("item_kinds")) {
    const json& kinds = require(doc, "item_kinds", "");
    if (!kinds.is_object()) throw ScenarioError("/item_kinds", "expected an object");
    for (const auto& [kind, info] : kinds.items()) {
      ItemKindInfo k;
      if (info.contains("keywords")) k.keywords = info.at("keywords").get<std::vector<std::string>>();
      k.portable = info.value("portable", true);
      s.item_kinds[kind] = std::move(k);
    }
  }

  if (doc.contains("groups")) {
    const json& groups = require_array(doc, "groups", "");
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const auto path = fmt::format("/groups/{}", i);
      ChatGroup g{require_string(groups[i], "id", path), require_string(groups[i], "name", path), {}};
      const json& members = require_array(groups[i], "members", path);
      for (std::size_t j = 0; j < members.size(); ++j) {
        EntityId m{members[j].get<std::string>()};
        const Node* n = s.truth.find(m);
        if (!n || n->kind != NodeKind::human) {
          throw ScenarioError(fmt::format("{}/members/{}", path, j), "group member is not a human");
        }
        g.members.push_back(std::move(m));
      }
      std::sort(g.members.begin(), g.members.end());
      s.groups.push_back(std::move(g));
    }
  }

  if (doc.contains("files")) {
    const json& files = require_array(doc, "files", "");
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto path = fmt::format("/files/{}", i);
      FileSpec f{require_string(files[i], "id", path), EntityId{require_string(files[i], "holder", path)}};
      const Node* n = s.truth.find(f.holder);
      if (!n || n->kind != NodeKind::human) throw ScenarioError(path + "/holder", "file holder is not a human");
      s.files.push_back(std::move(f));
    }
  }

  const json& robot = require(doc, "robot", "");
  s.robot_home = EntityId{require_string(robot, "home", "/robot")};
  const Node* home = s.truth.find(s.robot_home);
  if (!home || home->kind != NodeKind::location) throw ScenarioError("/robot/home", "not a location");

  if (auto v = s.truth.invariant_violations(); !v.empty()) throw ScenarioError("", v.front());
  return s;
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  try {
    return parse_impl(doc);
  } catch (const json::exception& e) {
    throw ScenarioError("", fmt::format("malformed scenario: {}", e.what()));
  }
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("", fmt::format("cannot open scenario file '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("", fmt::format("invalid JSON in '{}': {}", path.string(), e.what()));
  }
  return parse_scenario(doc);
}

}  // namespace deskmate::memory
