#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "deskmate/actions.hpp"
#include "deskmate/llm.hpp"
#include "deskmate/memory.hpp"
#include "deskmate/scenario.hpp"

namespace deskmate::sim {

using memory::DialogueMessage;
using memory::EntityId;
using memory::StateChange;

// Holder id used for anything sitting in the robot's locker.
inline const EntityId kLocker{"locker"};
inline constexpr std::string_view kOperator = "operator";

using SimEvent = std::variant<DialogueMessage, StateChange>;

struct ExecResult {
  actions::ExecOutcome status = actions::ExecOutcome::done;
  std::vector<SimEvent> events;
};

struct QrToken {
  std::string token;
  EntityId issued_to;
  bool used = false;
  bool revoked = false;

  bool operator==(const QrToken&) const = default;
};

// Messages pushed from outside the episode (humans playing personas).
// Thread-safe; everything else in World is owned by one episode stream.
class Inbox {
 public:
  void push(DialogueMessage message);
  std::vector<DialogueMessage> drain();
  // Blocks until a message is queued or the timeout elapses.
  bool wait_for(std::chrono::milliseconds timeout);
  // Wakes a blocked wait_for without delivering anything.
  void interrupt();
  // Makes every later wait_for return at once.
  void close();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<DialogueMessage> queue_;
  bool interrupted_ = false;
  bool closed_ = false;
};

struct SimOptions {
  llm::PersonaMode persona_mode = llm::PersonaMode::scripted;
  llm::ChatBackend* persona_backend = nullptr;
  // Human persona mode: how long Inquire and Wait block for a reply.
  std::chrono::milliseconds human_timeout{120'000};
  int wait_ticks = 3;
  // Returning a reason makes the action fail with a "fault" state change.
  std::function<std::optional<std::string>(const actions::Action&)> fault_hook;
};

// Ground truth of the simulated office plus the robot.
class World {
 public:
  World(memory::Scenario scenario, const std::map<EntityId, bool>& availability = {}, SimOptions options = {});
  World(const World&) = delete;
  World& operator=(const World&) = delete;
  World(World&&) = default;
  World& operator=(World&&) = default;

  // Never throws for validated actions; the only failure event is an
  // expired or missing QR token at WaitInPlace.
  ExecResult execute(const actions::Action& action);

  // Queues a message from a persona or the operator; it surfaces at the
  // start of the next execute, in arrival order. Throws on unknown sender.
  void interactive_inject(DialogueMessage message);
  void set_availability(const EntityId& person, bool available);

  const memory::Scenario& scenario() const { return scenario_; }
  const memory::TopoGraph& truth() const { return truth_; }
  bool available(const EntityId& person) const;
  const std::map<EntityId, bool>& availability() const { return availability_; }
  const memory::EmbodiedState& robot() const { return robot_; }
  const std::map<std::string, EntityId>& files() const { return files_; }
  // item -> person or kLocker
  const std::map<EntityId, EntityId>& item_holders() const { return item_holders_; }
  const std::vector<QrToken>& tokens() const { return tokens_; }
  int tick() const { return tick_; }
  const SimOptions& options() const { return options_; }
  SimOptions& options() { return options_; }
  const std::shared_ptr<Inbox>& inbox() const { return inbox_; }

  // Initial long-term memory for an episode: the known graph, everyone
  // assumed available, robot at home.
  memory::Memory initial_memory() const;
  std::vector<llm::KindVocabulary> vocabulary() const;
  llm::PersonaState persona(const EntityId& person) const;

  // Conservation and token-table checks; empty when consistent.
  std::vector<std::string> invariant_violations() const;

 private:
  struct Target {
    std::vector<EntityId> people;  // one for a person, members for a group
    std::optional<std::string> group;
  };
  Target resolve_contact(const std::string& name) const;
  EntityId resolve_person(const std::string& name) const;

  void deliver(ExecResult& out, const Target& to, const std::string& content, bool expect_reply);
  void note_reply(const EntityId& person, const std::string& incoming, const std::string& reply);
  void change(ExecResult& out, std::string field, std::string old_value, std::string new_value);
  std::string locker_listing() const;
  // Moves queued injected messages into `out`; true if there were any.
  bool absorb_inbox(ExecResult& out);

  ExecResult run_wait_in_place(const EntityId& user);
  ExecResult run_wait();

  memory::Scenario scenario_;
  memory::TopoGraph truth_;
  std::map<EntityId, bool> availability_;
  memory::EmbodiedState robot_;
  std::map<std::string, EntityId> files_;
  std::map<EntityId, EntityId> item_holders_;
  std::vector<QrToken> tokens_;
  // person -> items they promised to hand over at the next scan
  std::map<EntityId, std::set<EntityId>> pending_handover_;
  // person -> content of the assistant's latest message to them
  std::map<EntityId, std::string> last_request_;
  std::shared_ptr<Inbox> inbox_ = std::make_shared<Inbox>();
  SimOptions options_;
  int tick_ = 0;
  int next_token_ = 1;
};

}  // namespace deskmate::sim
