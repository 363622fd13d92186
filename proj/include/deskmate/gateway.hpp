#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "deskmate/agents.hpp"
#include "deskmate/sim.hpp"

namespace deskmate::gateway {

// HTTP-facing failures carry the status code they map to.
class ApiError : public Error {
 public:
  ApiError(int status, const std::string& message) : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct Event {
  std::int64_t seq = 0;
  std::string type;
  nlohmann::json data;
};

struct SessionSettings {
  std::map<memory::EntityId, bool> availability;
  llm::PersonaMode persona_mode = llm::PersonaMode::human;
  std::chrono::milliseconds human_timeout{120'000};
  agents::AgentConfig agent;
};

// One world, one memory and at most one running instruction.
class Session {
 public:
  Session(std::string id, const memory::Scenario& scenario, SessionSettings settings,
          std::shared_ptr<llm::ChatBackend> backend);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }

  // Starts an episode on a worker thread. Returns its number (1-based).
  // 409 while another instruction runs, 410 once closed.
  int submit(const std::string& instruction, const std::string& entry_id = "");
  // Message from a persona (or the operator) to the assistant.
  void persona_message(const std::string& person, const std::string& content);
  // Ground-truth availability; applied between steps while an episode runs.
  void set_availability(const std::string& person, bool available);
  void close();

  nlohmann::json snapshot() const;
  // Events with seq > from. Blocks up to `wait` when none are ready.
  std::vector<Event> events_after(std::int64_t from, std::chrono::milliseconds wait) const;
  std::int64_t last_seq() const;
  bool busy() const;
  bool closed() const;
  // Blocks until the running episode (if any) ends.
  void join();

 private:
  class Observer;
  friend class Observer;

  void emit(std::string type, nlohmann::json data);
  void emit_locked(std::string type, nlohmann::json data);
  void apply_pending_availability();
  void apply_pending_locked();
  memory::EntityId person_id(const std::string& name) const;

  std::string id_;
  SessionSettings settings_;
  std::shared_ptr<llm::ChatBackend> backend_;
  sim::World world_;
  memory::Memory memory_;
  std::shared_ptr<sim::Inbox> inbox_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<Event> events_;
  std::int64_t next_seq_ = 1;
  bool busy_ = false;
  bool closed_ = false;
  int episodes_ = 0;
  std::string instruction_;
  std::optional<agents::Verdict> last_verdict_;
  std::vector<std::pair<memory::EntityId, bool>> pending_availability_;
  std::thread worker_;
};

struct GatewayOptions {
  memory::Scenario scenario;
  std::function<std::shared_ptr<llm::ChatBackend>()> backend_factory;
  agents::AgentConfig agent;
  llm::PersonaMode persona_mode = llm::PersonaMode::human;
  std::chrono::milliseconds human_timeout{120'000};
};

class SessionManager {
 public:
  explicit SessionManager(GatewayOptions options);
  ~SessionManager();

  // Body fields (all optional): availability {person: bool}, persona_mode,
  // strategy, modules {perception, planning, reflection}, human_timeout_ms.
  std::shared_ptr<Session> create(const nlohmann::json& body);
  // 404 for unknown ids, 410 for closed sessions unless allow_closed.
  std::shared_ptr<Session> get(const std::string& id, bool allow_closed = false) const;
  void remove(const std::string& id);
  std::vector<std::string> ids() const;

  const GatewayOptions& options() const { return options_; }

 private:
  GatewayOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
};

// Binds the REST + SSE routes of the manager to an HTTP server.
class Server {
 public:
  explicit Server(SessionManager& manager);
  ~Server();

  // Returns the bound port (an ephemeral one when port == 0).
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace deskmate::gateway
