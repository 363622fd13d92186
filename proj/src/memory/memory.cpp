#include <atomic>
#include <sstream>

#include <fmt/format.h>

#include "deskmate/memory.hpp"

namespace deskmate::memory {

namespace {

std::atomic<std::uint64_t> next_memory_id{1};

std::string join_ids(const std::vector<EntityId>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ",";
    out += id.str();
  }
  return out;
}

std::vector<EntityId> split_ids(const std::string& joined) {
  std::vector<EntityId> ids;
  std::size_t start = 0;
  while (start < joined.size()) {
    auto end = joined.find(',', start);
    if (end == std::string::npos) end = joined.size();
    if (end > start) ids.emplace_back(joined.substr(start, end - start));
    start = end + 1;
  }
  return ids;
}

}  // namespace

std::string_view to_string(Channel channel) { return channel == Channel::direct ? "direct" : "group"; }

std::string_view to_string(LockerState state) { return state == LockerState::open ? "open" : "closed"; }

std::string display_name_of(const TopoGraph& graph, const std::vector<ChatGroup>& groups,
                            std::string_view id) {
  if (id == kAssistant) return "assistant";
  if (const Node* n = graph.find(EntityId{std::string(id)})) return n->display_name;
  for (const auto& g : groups) {
    if (g.id == id) return g.name;
  }
  return std::string(id);
}

Memory::Memory(TopoGraph long_term, std::vector<ChatGroup> groups, EmbodiedState embodied)
    : id_(next_memory_id.fetch_add(1)),
      graph_(std::move(long_term)),
      groups_(std::move(groups)),
      embodied_(std::move(embodied)) {}

std::int64_t Memory::record_message(DialogueMessage message) {
  message.seq = next_seq_++;
  dialogue_.push_back(std::move(message));
  return dialogue_.back().seq;
}

void Memory::record_state_change(StateChange change) {
  if (change.field == "robot_location") {
    embodied_.robot_location = EntityId{change.new_value};
  } else if (change.field == "locker") {
    embodied_.locker = change.new_value == "open" ? LockerState::open : LockerState::closed;
  } else if (change.field == "locker_contents") {
    embodied_.locker_contents = split_ids(change.new_value);
  } else if (change.field == "active_qr") {
    embodied_.active_qr = change.new_value.empty() ? std::nullopt : std::optional(change.new_value);
  }
  changes_.push_back(std::move(change));
}

void Memory::append_trace(StepSummary summary) { trace_.push_back(std::move(summary)); }

MemoryPackage Memory::snapshot(int step) const {
  MemoryPackage p;
  p.memory_id = id_;
  p.epoch = epoch_;
  p.step = step;
  p.instruction = instruction_;
  p.graph = graph_;
  p.groups = groups_;
  p.dialogue = dialogue_;
  p.embodied = embodied_;
  p.trace = trace_;
  p.last_seq = next_seq_ - 1;
  p.change_cursor = changes_.size();
  return p;
}

void Memory::reset_short_term() {
  instruction_.clear();
  dialogue_.clear();
  trace_.clear();
  changes_.clear();
  next_seq_ = 1;
  ++epoch_;
}

IncrementalInfo Memory::delta_since(const MemoryPackage& package) const {
  if (package.memory_id != id_ || package.epoch != epoch_) {
    throw ForeignPackageError("memory package does not belong to this memory instance");
  }
  IncrementalInfo delta;
  for (const auto& m : dialogue_) {
    if (m.seq > package.last_seq) delta.new_messages.push_back(m);
  }
  for (std::size_t i = package.change_cursor; i < changes_.size(); ++i) {
    delta.state_changes.push_back(changes_[i]);
  }
  return delta;
}

std::string render_text(const MemoryPackage& p, const RenderOptions& options) {
  const auto& g = p.graph;
  auto name = [&](std::string_view id) { return display_name_of(g, p.groups, id); };
  std::ostringstream out;

  out << "## Instruction\n" << (p.instruction.empty() ? "(none)" : p.instruction) << "\n\n";

  out << "## Environment\n";
  out << "Locations:\n";
  for (const auto& id : g.ids_of_kind(NodeKind::location)) {
    out << fmt::format("- {} [{}]\n", g.at(id).display_name, id.str());
  }
  out << "People:\n";
  for (const auto& id : g.ids_of_kind(NodeKind::human)) {
    std::string where = "unknown location";
    try {
      where = g.at(g.query_location(id)).display_name;
    } catch (const GraphError&) {
    }
    out << fmt::format("- {} [{}] at {}\n", g.at(id).display_name, id.str(), where);
  }
  out << "Facilities:\n";
  for (const auto& id : g.ids_of_kind(NodeKind::facility)) {
    std::string where = "unknown location";
    try {
      where = g.at(g.query_location(id)).display_name;
    } catch (const GraphError&) {
    }
    out << fmt::format("- {} [{}] at {}\n", g.at(id).display_name, id.str(), where);
  }
  out << "Items:\n";
  for (const auto& id : g.ids_of_kind(NodeKind::item)) {
    auto owner = g.owner_of(id);
    out << fmt::format("- {} [{}] owned by {}\n", g.at(id).display_name, id.str(),
                       owner ? g.at(*owner).display_name : std::string("unknown"));
  }
  out << "Chat groups:\n";
  for (const auto& grp : p.groups) {
    out << fmt::format("- {} [{}] with {} members\n", grp.name, grp.id, grp.members.size());
  }
  out << "\n";

  out << "## Availability\n";
  for (const auto& id : g.ids_of_kind(NodeKind::human)) {
    out << fmt::format("- {}: {}\n", g.at(id).display_name,
                       g.is_available(id) ? "available" : "unavailable");
  }
  out << "\n";

  const auto& d = p.dialogue;
  const std::size_t dfirst = d.size() > options.dialogue_tail ? d.size() - options.dialogue_tail : 0;
  out << fmt::format("## Dialogue (last {} of {})\n", d.size() - dfirst, d.size());
  for (std::size_t i = dfirst; i < d.size(); ++i) {
    const auto& m = d[i];
    out << fmt::format("[{}] {} -> {}{}: {}\n", m.seq, name(m.sender), name(m.recipient),
                       m.channel == Channel::group ? " (group)" : "", m.content);
  }
  out << "\n";

  const auto& e = p.embodied;
  out << "## Embodied State\n";
  out << fmt::format("Robot location: {}\n", e.robot_location.empty() ? "unknown" : name(e.robot_location.str()));
  out << fmt::format("Locker: {}\n", to_string(e.locker));
  out << fmt::format("Locker contents: {}\n", e.locker_contents.empty() ? "empty" : join_ids(e.locker_contents));
  out << fmt::format("Active QR code: {}\n", e.active_qr.value_or("none"));
  out << "\n";

  const auto& t = p.trace;
  const std::size_t tfirst = t.size() > options.trace_tail ? t.size() - options.trace_tail : 0;
  out << fmt::format("## Trace (last {} of {})\n", t.size() - tfirst, t.size());
  for (std::size_t i = tfirst; i < t.size(); ++i) {
    const auto& s = t[i];
    out << fmt::format("Step {}:\n", s.step);
    if (!s.thought.empty()) out << "  thought: " << s.thought << "\n";
    for (const auto& a : s.actions) out << "  executed: " << a << "\n";
    if (!s.reflection.empty()) out << "  reflection: " << s.reflection << "\n";
  }
  return out.str();
}

}  // namespace deskmate::memory
