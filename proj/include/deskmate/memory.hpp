#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "deskmate/error.hpp"

namespace deskmate::memory {

// Opaque identifier of a graph entity ("h_lee", "l_ws01", ...).
class EntityId {
 public:
  EntityId() = default;
  explicit EntityId(std::string value) : value_(std::move(value)) {}

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  auto operator<=>(const EntityId&) const = default;

 private:
  std::string value_;
};

enum class NodeKind { human, facility, item, location };
enum class Relation { located_at, owns };

std::string_view to_string(NodeKind kind);
std::string_view to_string(Relation relation);
NodeKind parse_node_kind(std::string_view text);

struct Node {
  EntityId id;
  NodeKind kind = NodeKind::location;
  std::string display_name;
  // Present exactly when kind == human.
  std::optional<bool> availability;

  bool operator==(const Node&) const = default;
};

// Stored in canonical direction: located_at is human|facility -> location,
// owns is item -> human. add_edge accepts either direction.
struct Edge {
  Relation relation = Relation::located_at;
  EntityId from;
  EntityId to;

  auto operator<=>(const Edge&) const = default;
};

class GraphError : public Error {
 public:
  enum class Code { invalid_node, unknown_entity, wrong_kind, unlocated, invalid_edge };

  GraphError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Long-term memory: an undirected topological graph of humans, facilities,
// items and locations. Iteration order is by id.
class TopoGraph {
 public:
  // Inserts or replaces. Changing the kind of a node that has edges throws.
  void upsert_node(Node node);
  // Replaces the previous located_at of the entity / previous owner of the item.
  void add_edge(Edge edge);
  // Only owns edges can be removed; a located_at edge is replaced, never dropped.
  bool remove_edge(const Edge& edge);
  void set_availability(const EntityId& person, bool value);

  EntityId query_location(const EntityId& entity) const;
  // Owners of any item whose display_name equals item_kind (case-insensitive).
  std::vector<EntityId> query_owners(std::string_view item_kind) const;
  std::optional<EntityId> owner_of(const EntityId& item) const;
  std::vector<EntityId> items_of(const EntityId& person) const;

  const Node* find(const EntityId& id) const;
  const Node& at(const EntityId& id) const;
  bool contains(const EntityId& id) const { return nodes_.contains(id); }
  bool is_available(const EntityId& person) const;

  // Exact id match first, then case-insensitive display name.
  std::optional<EntityId> resolve_name(std::string_view name) const;
  std::vector<EntityId> ids_of_kind(NodeKind kind) const;

  const std::map<EntityId, Node>& nodes() const { return nodes_; }
  const std::set<Edge>& edges() const { return edges_; }

  // Empty when every cardinality invariant holds.
  std::vector<std::string> invariant_violations() const;

  bool operator==(const TopoGraph&) const = default;

 private:
  Edge canonical(Edge edge) const;

  std::map<EntityId, Node> nodes_;
  std::set<Edge> edges_;
};

enum class Channel { direct, group };
std::string_view to_string(Channel channel);

inline constexpr std::string_view kAssistant = "assistant";

struct DialogueMessage {
  std::int64_t seq = 0;
  Channel channel = Channel::direct;
  std::string sender;
  std::string recipient;
  std::string content;

  bool operator==(const DialogueMessage&) const = default;
};

struct ChatGroup {
  std::string id;
  std::string name;
  std::vector<EntityId> members;

  bool operator==(const ChatGroup&) const = default;
};

enum class LockerState { closed, open };
std::string_view to_string(LockerState state);

struct EmbodiedState {
  EntityId robot_location;
  LockerState locker = LockerState::closed;
  std::vector<EntityId> locker_contents;
  std::optional<std::string> active_qr;

  bool operator==(const EmbodiedState&) const = default;
};

struct StateChange {
  std::string field;
  std::string old_value;
  std::string new_value;

  bool operator==(const StateChange&) const = default;
};

struct IncrementalInfo {
  std::vector<DialogueMessage> new_messages;
  std::vector<StateChange> state_changes;

  bool empty() const { return new_messages.empty() && state_changes.empty(); }
  bool operator==(const IncrementalInfo&) const = default;
};

// One completed step as the agents see it in later prompts.
struct StepSummary {
  int step = 0;
  std::string thought;
  std::vector<std::string> actions;
  std::string reflection;

  bool operator==(const StepSummary&) const = default;
};

struct MemoryPackage {
  std::uint64_t memory_id = 0;
  std::uint64_t epoch = 0;
  int step = 0;
  std::string instruction;
  TopoGraph graph;
  std::vector<ChatGroup> groups;
  std::vector<DialogueMessage> dialogue;
  EmbodiedState embodied;
  std::vector<StepSummary> trace;
  std::int64_t last_seq = 0;
  std::size_t change_cursor = 0;
};

struct RenderOptions {
  std::size_t dialogue_tail = 20;
  std::size_t trace_tail = 10;
};

// Sections in fixed order: instruction, environment, availability,
// dialogue tail, embodied state, trace tail.
std::string render_text(const MemoryPackage& package, const RenderOptions& options = {});

// Display name of an entity, group or "assistant"; falls back to the raw id.
std::string display_name_of(const TopoGraph& graph, const std::vector<ChatGroup>& groups,
                            std::string_view id);

class ForeignPackageError : public Error {
 public:
  using Error::Error;
};

// The Memory Unit: long-term graph plus per-instruction short-term stores.
class Memory {
 public:
  Memory(TopoGraph long_term, std::vector<ChatGroup> groups, EmbodiedState embodied);

  TopoGraph& graph() { return graph_; }
  const TopoGraph& graph() const { return graph_; }
  const std::vector<ChatGroup>& groups() const { return groups_; }

  void set_instruction(std::string text) { instruction_ = std::move(text); }
  const std::string& instruction() const { return instruction_; }

  // Assigns the next seq and returns it.
  std::int64_t record_message(DialogueMessage message);
  // Known embodied fields (robot_location, locker, locker_contents, active_qr)
  // are applied; every change is logged for delta_since.
  void record_state_change(StateChange change);
  void append_trace(StepSummary summary);

  const std::vector<DialogueMessage>& dialogue() const { return dialogue_; }
  const EmbodiedState& embodied() const { return embodied_; }
  const std::vector<StepSummary>& trace() const { return trace_; }

  MemoryPackage snapshot(int step) const;
  void reset_short_term();
  IncrementalInfo delta_since(const MemoryPackage& package) const;

 private:
  std::uint64_t id_;
  std::uint64_t epoch_ = 0;
  TopoGraph graph_;
  std::vector<ChatGroup> groups_;
  std::string instruction_;
  std::vector<DialogueMessage> dialogue_;
  EmbodiedState embodied_;
  std::vector<StepSummary> trace_;
  std::vector<StateChange> changes_;
  std::int64_t next_seq_ = 1;
};

}  // namespace deskmate::memory
