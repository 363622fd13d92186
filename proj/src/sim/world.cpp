#include "deskmate/sim.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "deskmate/text.hpp"

namespace deskmate::sim {

using actions::ExecOutcome;
using memory::Channel;
using memory::NodeKind;

void Inbox::push(DialogueMessage message) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(message));
  }
  cv_.notify_all();
}

std::vector<DialogueMessage> Inbox::drain() {
  std::lock_guard lock(mu_);
  std::vector<DialogueMessage> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

bool Inbox::wait_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || interrupted_ || closed_; });
  interrupted_ = false;
  return !queue_.empty();
}

void Inbox::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

void Inbox::interrupt() {
  {
    std::lock_guard lock(mu_);
    interrupted_ = true;
  }
  cv_.notify_all();
}

namespace {

std::uint64_t seed_of(std::string_view id) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Heuristic for free-text replies (llm and human personas).
bool sounds_affirmative(std::string_view reply) {
  if (text::trim(reply).empty()) return false;
  for (std::string_view neg : {"no", "not", "sorry", "unavailable", "can't", "cannot", "don't", "busy"}) {
    if (llm::mentions(reply, neg)) return false;
  }
  return true;
}

}  // namespace

World::World(memory::Scenario scenario, const std::map<EntityId, bool>& availability, SimOptions options)
    : scenario_(std::move(scenario)), truth_(scenario_.truth), options_(std::move(options)) {
  for (const auto& id : truth_.ids_of_kind(NodeKind::human)) availability_[id] = truth_.is_available(id);
  for (const auto& [person, value] : availability) {
    const auto* n = truth_.find(person);
    if (!n || n->kind != NodeKind::human) throw Error(fmt::format("availability for unknown person '{}'", person.str()));
    availability_[person] = value;
    truth_.set_availability(person, value);
  }
  robot_.robot_location = scenario_.robot_home;
  for (const auto& f : scenario_.files) files_[f.id] = f.holder;
  for (const auto& item : truth_.ids_of_kind(NodeKind::item)) {
    if (auto owner = truth_.owner_of(item)) item_holders_[item] = *owner;
  }
}

bool World::available(const EntityId& person) const {
  auto it = availability_.find(person);
  return it != availability_.end() && it->second;
}

void World::set_availability(const EntityId& person, bool value) {
  if (!availability_.contains(person)) throw Error(fmt::format("unknown person '{}'", person.str()));
  availability_[person] = value;
  truth_.set_availability(person, value);
}

void World::interactive_inject(DialogueMessage message) {
  const EntityId sender{message.sender};
  if (message.sender != kOperator && !availability_.contains(sender)) {
    throw Error(fmt::format("unknown sender '{}'", message.sender));
  }
  if (message.recipient.empty()) message.recipient = std::string(memory::kAssistant);
  inbox_->push(std::move(message));
}

memory::Memory World::initial_memory() const {
  auto graph = scenario_.known;
  for (const auto& id : graph.ids_of_kind(NodeKind::human)) graph.set_availability(id, true);
  memory::EmbodiedState embodied = robot_;
  return memory::Memory(std::move(graph), scenario_.groups, std::move(embodied));
}

std::vector<llm::KindVocabulary> World::vocabulary() const {
  std::set<std::string> kinds;
  for (const auto& [k, info] : scenario_.item_kinds) kinds.insert(k);
  for (const auto& id : truth_.ids_of_kind(NodeKind::item)) kinds.insert(truth_.at(id).display_name);
  std::vector<llm::KindVocabulary> out;
  for (const auto& k : kinds) {
    auto words = scenario_.keywords_for(k);
    words.erase(words.begin());
    out.push_back({k, std::move(words)});
  }
  return out;
}

llm::PersonaState World::persona(const EntityId& person) const {
  const auto& node = truth_.at(person);
  llm::PersonaState s{person, node.display_name, available(person), {}, seed_of(person.str())};
  std::set<std::string> kinds;
  for (const auto& item : truth_.items_of(person)) kinds.insert(truth_.at(item).display_name);
  for (const auto& k : kinds) s.knowledge.push_back({"owns", k});
  s.knowledge.push_back({"located_at", truth_.at(truth_.query_location(person)).display_name});
  return s;
}

World::Target World::resolve_contact(const std::string& name) const {
  if (auto id = truth_.resolve_name(name); id && truth_.at(*id).kind == NodeKind::human) return {{*id}, std::nullopt};
  if (const auto* g = scenario_.find_group(name)) return {g->members, g->id};
  throw Error(fmt::format("unknown contact '{}'", name));
}

EntityId World::resolve_person(const std::string& name) const {
  auto t = resolve_contact(name);
  if (t.group) throw Error(fmt::format("'{}' is a group, not a person", name));
  return t.people.front();
}

void World::change(ExecResult& out, std::string field, std::string old_value, std::string new_value) {
  out.events.emplace_back(StateChange{std::move(field), std::move(old_value), std::move(new_value)});
}

std::string World::locker_listing() const {
  std::vector<std::string> ids;
  for (const auto& [item, holder] : item_holders_) {
    if (holder == kLocker) ids.push_back(item.str());
  }
  return fmt::format("{}", fmt::join(ids, ","));
}

bool World::absorb_inbox(ExecResult& out) {
  auto messages = inbox_->drain();
  for (auto& m : messages) {
    if (auto it = last_request_.find(EntityId{m.sender}); it != last_request_.end()) {
      note_reply(EntityId{m.sender}, it->second, m.content);
    }
    out.events.emplace_back(std::move(m));
  }
  return !messages.empty();
}

void World::note_reply(const EntityId& person, const std::string& incoming, const std::string& reply) {
  if (!available(person) || !sounds_affirmative(reply)) return;
  for (const auto& item : truth_.items_of(person)) {
    const auto& kind = truth_.at(item).display_name;
    auto info = scenario_.item_kinds.find(kind);
    if (info != scenario_.item_kinds.end() && !info->second.portable) continue;
    const bool asked = std::ranges::any_of(scenario_.keywords_for(kind), [&](const auto& w) { return llm::mentions(incoming, w); });
    if (asked && item_holders_[item] == person) pending_handover_[person].insert(item);
  }
}

void World::deliver(ExecResult& out, const Target& to, const std::string& content, bool expect_reply) {
  const auto vocab = vocabulary();
  const auto assistant = std::string(memory::kAssistant);
  if (to.group) {
    DialogueMessage msg{0, Channel::group, assistant, *to.group, content};
    out.events.emplace_back(msg);
    // Fan-out: the first member (by id) with a non-empty reply answers.
    for (const auto& member : to.people) {
      last_request_[member] = content;
      auto reply = llm::persona_reply(persona(member), msg, options_.persona_mode, vocab, options_.persona_backend);
      if (reply.empty()) continue;
      note_reply(member, content, reply);
      out.events.emplace_back(DialogueMessage{0, Channel::group, member.str(), *to.group, std::move(reply)});
      break;
    }
  } else {
    const auto& person = to.people.front();
    DialogueMessage msg{0, Channel::direct, assistant, person.str(), content};
    out.events.emplace_back(msg);
    last_request_[person] = content;
    auto reply = llm::persona_reply(persona(person), msg, options_.persona_mode, vocab, options_.persona_backend);
    if (!reply.empty()) {
      note_reply(person, content, reply);
      out.events.emplace_back(DialogueMessage{0, Channel::direct, person.str(), assistant, std::move(reply)});
    }
  }
  if (options_.persona_mode == llm::PersonaMode::human && expect_reply) {
    if (inbox_->wait_for(options_.human_timeout) && absorb_inbox(out)) return;
    change(out, "reply_timeout", "", to.group ? *to.group : to.people.front().str());
  }
}

ExecResult World::run_wait() {
  ExecResult out;
  out.status = ExecOutcome::waiting;
  if (options_.persona_mode == llm::PersonaMode::human) {
    if (inbox_->wait_for(options_.human_timeout) && absorb_inbox(out)) {
      out.status = ExecOutcome::done;
      return out;
    }
    change(out, "wait", "", "timeout");
    return out;
  }
  tick_ += options_.wait_ticks - 1;
  change(out, "wait", "", fmt::format("no reply after {} ticks", options_.wait_ticks));
  return out;
}

ExecResult World::run_wait_in_place(const EntityId& user) {
  ExecResult out;
  if (!available(user)) {
    out.status = ExecOutcome::waiting;
    change(out, "qr_scan", "", "no_show");
    return out;
  }
  QrToken* live = nullptr;
  for (auto& t : tokens_) {
    if (t.issued_to == user && !t.used && !t.revoked) live = &t;
  }
  if (!live) {
    change(out, "qr_scan", "", "expired");
    return out;
  }
  live->used = true;
  change(out, "qr_scan", live->token, "used");
  change(out, "locker", "closed", "open");
  const auto before = locker_listing();
  auto& promised = pending_handover_[user];
  if (!promised.empty()) {
    for (const auto& item : promised) {
      item_holders_[item] = kLocker;
      change(out, "holder:" + item.str(), user.str(), kLocker.str());
    }
    promised.clear();
  } else {
    for (auto& [item, holder] : item_holders_) {
      if (holder != kLocker) continue;
      holder = user;
      change(out, "holder:" + item.str(), kLocker.str(), user.str());
    }
  }
  robot_.locker_contents.clear();
  for (const auto& [item, holder] : item_holders_) {
    if (holder == kLocker) robot_.locker_contents.push_back(item);
  }
  if (auto after = locker_listing(); after != before) change(out, "locker_contents", before, after);
  change(out, "locker", "open", "closed");
  if (robot_.active_qr == live->token) {
    robot_.active_qr.reset();
    change(out, "active_qr", live->token, "");
  }
  return out;
}

ExecResult World::execute(const actions::Action& action) {
  ExecResult out;
  ++tick_;
  const bool had_injected = absorb_inbox(out);

  if (options_.fault_hook) {
    if (auto reason = options_.fault_hook(action)) {
      change(out, "fault", std::string(actions::to_string(action.kind())), *reason);
      return out;
    }
  }

  auto append = [&](ExecResult r) {
    out.status = r.status;
    std::move(r.events.begin(), r.events.end(), std::back_inserter(out.events));
  };

  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, actions::Inform>) {
          deliver(out, resolve_contact(a.contact), a.content, false);
        } else if constexpr (std::is_same_v<T, actions::Inquire>) {
          deliver(out, resolve_contact(a.contact), a.question, true);
        } else if constexpr (std::is_same_v<T, actions::Forward>) {
          const auto from = resolve_person(a.source);
          const auto to = resolve_person(a.target);
          std::optional<std::string> moved;
          for (auto& [fid, holder] : files_) {
            if (holder == from) {
              holder = to;
              moved = fid;
              break;
            }
          }
          if (moved) change(out, "file:" + *moved, from.str(), to.str());
          const auto& source_name = truth_.at(from).display_name;
          out.events.emplace_back(DialogueMessage{
              0, Channel::direct, std::string(memory::kAssistant), to.str(),
              moved ? fmt::format("Forwarded {} from {}.", *moved, source_name)
                    : fmt::format("Forwarded a message from {}.", source_name)});
        } else if constexpr (std::is_same_v<T, actions::SendQRCode>) {
          const auto to = resolve_person(a.contact);
          for (auto& t : tokens_) {
            if (t.issued_to == to && !t.used) t.revoked = true;
          }
          QrToken token{fmt::format("qr-{}", next_token_++), to, false, false};
          change(out, "active_qr", robot_.active_qr.value_or(""), token.token);
          robot_.active_qr = token.token;
          out.events.emplace_back(DialogueMessage{0, Channel::direct, std::string(memory::kAssistant), to.str(),
                                                  fmt::format("Your single-use locker QR code: {}", token.token)});
          tokens_.push_back(std::move(token));
        } else if constexpr (std::is_same_v<T, actions::Wait>) {
          if (!had_injected) append(run_wait());
        } else if constexpr (std::is_same_v<T, actions::Move>) {
          const auto id = truth_.resolve_name(a.target_name);
          if (!id) throw Error(fmt::format("unknown place '{}'", a.target_name));
          const auto& node = truth_.at(*id);
          EntityId dest;
          if (node.kind == NodeKind::location) {
            dest = *id;
          } else if (node.kind == NodeKind::item) {
            throw Error(fmt::format("cannot move to item '{}'", a.target_name));
          } else {
            dest = truth_.query_location(*id);
          }
          change(out, "robot_location", robot_.robot_location.str(), dest.str());
          robot_.robot_location = dest;
        } else if constexpr (std::is_same_v<T, actions::WaitInPlace>) {
          append(run_wait_in_place(resolve_person(a.user)));
        } else if constexpr (std::is_same_v<T, actions::Stop>) {
          out.status = ExecOutcome::terminated;
        }
      },
      action.payload());
  return out;
}

std::vector<std::string> World::invariant_violations() const {
  std::vector<std::string> v;
  for (const auto& item : truth_.ids_of_kind(NodeKind::item)) {
    if (!truth_.owner_of(item)) continue;
    auto it = item_holders_.find(item);
    if (it == item_holders_.end()) {
      v.push_back(fmt::format("item {} has no holder", item.str()));
      continue;
    }
    const auto* n = truth_.find(it->second);
    if (it->second != kLocker && (!n || n->kind != NodeKind::human)) {
      v.push_back(fmt::format("item {} held by non-person {}", item.str(), it->second.str()));
    }
  }
  for (const auto& [fid, holder] : files_) {
    const auto* n = truth_.find(holder);
    if (!n || n->kind != NodeKind::human) v.push_back(fmt::format("file {} held by non-person {}", fid, holder.str()));
  }
  std::map<EntityId, int> live;
  for (const auto& t : tokens_) {
    if (!t.used && !t.revoked) ++live[t.issued_to];
    if (t.used && t.revoked) v.push_back(fmt::format("token {} both used and revoked", t.token));
  }
  for (const auto& [person, n] : live) {
    if (n > 1) v.push_back(fmt::format("{} holds {} unused tokens", person.str(), n));
  }
  return v;
}

}  // namespace deskmate::sim
