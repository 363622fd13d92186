#include <algorithm>

#include <fmt/format.h>

#include "deskmate/memory.hpp"
#include "deskmate/text.hpp"

namespace deskmate::memory {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::human: return "human";
    case NodeKind::facility: return "facility";
    case NodeKind::item: return "item";
    case NodeKind::location: return "location";
  }
  return "?";
}

std::string_view to_string(Relation relation) {
  return relation == Relation::located_at ? "located_at" : "owns";
}

NodeKind parse_node_kind(std::string_view text) {
  if (text == "human") return NodeKind::human;
  if (text == "facility") return NodeKind::facility;
  if (text == "item") return NodeKind::item;
  if (text == "location") return NodeKind::location;
  throw GraphError(GraphError::Code::invalid_node, fmt::format("unknown node kind '{}'", text));
}

void TopoGraph::upsert_node(Node node) {
  if (node.id.empty()) throw GraphError(GraphError::Code::invalid_node, "node id is empty");
  if (node.display_name.empty()) {
    throw GraphError(GraphError::Code::invalid_node,
                     fmt::format("node '{}' has an empty display name", node.id.str()));
  }
  if (node.kind == NodeKind::human) {
    if (!node.availability) node.availability = true;
  } else if (node.availability) {
    throw GraphError(GraphError::Code::invalid_node,
                     fmt::format("availability set on non-human node '{}'", node.id.str()));
  }

  // A kind change would orphan located_at or owns edges on either side.
  auto it = nodes_.find(node.id);
  if (it != nodes_.end() && it->second.kind != node.kind &&
      std::any_of(edges_.begin(), edges_.end(), [&](const Edge& e) { return e.from == node.id || e.to == node.id; })) {
    throw GraphError(GraphError::Code::invalid_node,
                     fmt::format("cannot change the kind of '{}' while it has edges", node.id.str()));
  }
  nodes_.insert_or_assign(node.id, std::move(node));
}

Edge TopoGraph::canonical(Edge edge) const {
  const Node* a = find(edge.from);
  const Node* b = find(edge.to);
  if (!a || !b) {
    throw GraphError(GraphError::Code::unknown_entity,
                     fmt::format("edge {} -> {} references a missing node", edge.from.str(), edge.to.str()));
  }
  auto bad = [&] {
    return GraphError(GraphError::Code::invalid_edge,
                      fmt::format("{} cannot connect {} '{}' and {} '{}'", to_string(edge.relation),
                                  to_string(a->kind), a->id.str(), to_string(b->kind), b->id.str()));
  };
  auto placeable = [](NodeKind k) { return k == NodeKind::human || k == NodeKind::facility; };

  if (edge.relation == Relation::located_at) {
    if (placeable(a->kind) && b->kind == NodeKind::location) return edge;
    if (placeable(b->kind) && a->kind == NodeKind::location) return {edge.relation, edge.to, edge.from};
    throw bad();
  }
  if (a->kind == NodeKind::item && b->kind == NodeKind::human) return edge;
  if (b->kind == NodeKind::item && a->kind == NodeKind::human) return {edge.relation, edge.to, edge.from};
  throw bad();
}

void TopoGraph::add_edge(Edge edge) {
  edge = canonical(std::move(edge));
  std::erase_if(edges_, [&](const Edge& e) { return e.relation == edge.relation && e.from == edge.from; });
  edges_.insert(std::move(edge));
}

bool TopoGraph::remove_edge(const Edge& edge) {
  if (!contains(edge.from) || !contains(edge.to)) return false;
  const Edge e = canonical(edge);
  if (e.relation == Relation::located_at && edges_.contains(e)) {
    throw GraphError(GraphError::Code::unlocated,
                     fmt::format("'{}' would be left without a location; move it with add_edge", e.from.str()));
  }
  return edges_.erase(e) > 0;
}

void TopoGraph::set_availability(const EntityId& person, bool value) {
  auto it = nodes_.find(person);
  if (it == nodes_.end()) {
    throw GraphError(GraphError::Code::unknown_entity, fmt::format("unknown entity '{}'", person.str()));
  }
  if (it->second.kind != NodeKind::human) {
    throw GraphError(GraphError::Code::wrong_kind,
                     fmt::format("'{}' is a {}, not a human", person.str(), to_string(it->second.kind)));
  }
  it->second.availability = value;
}

EntityId TopoGraph::query_location(const EntityId& entity) const {
  const Node& node = at(entity);
  if (node.kind != NodeKind::human && node.kind != NodeKind::facility) {
    throw GraphError(GraphError::Code::wrong_kind,
                     fmt::format("'{}' is a {} and has no location", entity.str(), to_string(node.kind)));
  }
  for (const auto& e : edges_) {
    if (e.relation == Relation::located_at && e.from == entity) return e.to;
  }
  throw GraphError(GraphError::Code::unlocated, fmt::format("'{}' is unlocated", entity.str()));
}

std::vector<EntityId> TopoGraph::query_owners(std::string_view item_kind) const {
  std::set<EntityId> owners;
  for (const auto& e : edges_) {
    if (e.relation != Relation::owns) continue;
    if (text::iequals(at(e.from).display_name, item_kind)) owners.insert(e.to);
  }
  return {owners.begin(), owners.end()};
}

std::optional<EntityId> TopoGraph::owner_of(const EntityId& item) const {
  for (const auto& e : edges_) {
    if (e.relation == Relation::owns && e.from == item) return e.to;
  }
  return std::nullopt;
}

std::vector<EntityId> TopoGraph::items_of(const EntityId& person) const {
  std::vector<EntityId> items;
  for (const auto& e : edges_) {
    if (e.relation == Relation::owns && e.to == person) items.push_back(e.from);
  }
  std::sort(items.begin(), items.end());
  return items;
}

const Node* TopoGraph::find(const EntityId& id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

const Node& TopoGraph::at(const EntityId& id) const {
  if (const Node* n = find(id)) return *n;
  throw GraphError(GraphError::Code::unknown_entity, fmt::format("unknown entity '{}'", id.str()));
}

bool TopoGraph::is_available(const EntityId& person) const {
  const Node& n = at(person);
  return n.availability.value_or(false);
}

std::optional<EntityId> TopoGraph::resolve_name(std::string_view name) const {
  name = text::trim(name);
  if (name.empty()) return std::nullopt;
  EntityId direct{std::string(name)};
  if (contains(direct)) return direct;
  for (const auto& [id, node] : nodes_) {
    if (text::iequals(node.display_name, name)) return id;
  }
  return std::nullopt;
}

std::vector<EntityId> TopoGraph::ids_of_kind(NodeKind kind) const {
  std::vector<EntityId> ids;
  for (const auto& [id, node] : nodes_) {
    if (node.kind == kind) ids.push_back(id);
  }
  return ids;
}

std::vector<std::string> TopoGraph::invariant_violations() const {
  std::vector<std::string> out;
  std::map<EntityId, int> located;
  std::map<EntityId, int> owned;
  for (const auto& e : edges_) {
    if (!contains(e.from) || !contains(e.to)) {
      out.push_back(fmt::format("dangling edge {} -> {}", e.from.str(), e.to.str()));
      continue;
    }
    (e.relation == Relation::located_at ? located : owned)[e.from]++;
  }
  for (const auto& [id, node] : nodes_) {
    if (node.availability.has_value() != (node.kind == NodeKind::human)) {
      out.push_back(fmt::format("availability presence wrong on '{}'", id.str()));
    }
    const int loc = located.contains(id) ? located.at(id) : 0;
    if ((node.kind == NodeKind::human || node.kind == NodeKind::facility) && loc != 1) {
      out.push_back(fmt::format("'{}' has {} located_at edges", id.str(), loc));
    }
    const int own = owned.contains(id) ? owned.at(id) : 0;
    if (node.kind == NodeKind::item && own > 1) {
      out.push_back(fmt::format("item '{}' has {} owners", id.str(), own));
    }
  }
  return out;
}

}  // namespace deskmate::memory
