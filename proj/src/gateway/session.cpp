#include <fmt/format.h>

#include "deskmate/gateway.hpp"

namespace deskmate::gateway {

using nlohmann::json;

namespace {

json message_json(const memory::DialogueMessage& m) {
  return {{"seq", m.seq},
          {"channel", memory::to_string(m.channel)},
          {"sender", m.sender},
          {"recipient", m.recipient},
          {"content", m.content}};
}

}  // namespace

class Session::Observer : public agents::EpisodeObserver {
 public:
  explicit Observer(Session& s) : s_(s) {}

  void on_header(const agents::TraceHeader& h) override { s_.emit("header", agents::header_to_json(h)); }
  void on_perception(int step, const agents::PerceptionPackage& p) override {
    s_.emit("perception", {{"step", step},
                           {"observation", p.observation},
                           {"task_entities", p.task_entities},
                           {"active_chat", p.active_chat}});
  }
  void on_plan(int step, const agents::Plan& p) override {
    s_.emit("plan", {{"step", step}, {"completed", p.completed}, {"roadmap", p.roadmap}, {"done", p.done}});
  }
  void on_action(int step, const agents::StepAction& a, const std::vector<sim::SimEvent>& events) override {
    json j = {{"step", step},
              {"action", actions::render_action(a.action)},
              {"kind", actions::to_string(a.action.kind())},
              {"executed", a.executed},
              {"outcome", actions::to_string(a.outcome)}};
    if (!a.error.empty()) j["error"] = a.error;
    s_.emit("action", std::move(j));
    for (const auto& ev : events) {
      if (const auto* m = std::get_if<memory::DialogueMessage>(&ev)) {
        auto mj = message_json(*m);
        mj.erase("seq");
        s_.emit("message", std::move(mj));
      } else {
        const auto& c = std::get<memory::StateChange>(ev);
        s_.emit("state_change", {{"field", c.field}, {"old", c.old_value}, {"new", c.new_value}});
      }
    }
  }
  void on_reflection(int step, const agents::ReflectionResult& r) override {
    s_.emit("reflection", {{"step", step},
                           {"judgment", r.judgment == agents::Judgment::Y ? "Y" : "N"},
                           {"rationale", r.rationale},
                           {"updates", r.updates}});
  }
  void on_step(const agents::StepRecord& rec) override {
    s_.emit("step", agents::step_to_json(rec));
    s_.apply_pending_availability();
  }
  void on_footer(const agents::EpisodeTrace& t) override { s_.emit("footer", agents::footer_to_json(t)); }
  bool cancelled() const override { return s_.closed(); }

 private:
  Session& s_;
};

Session::Session(std::string id, const memory::Scenario& scenario, SessionSettings settings,
                 std::shared_ptr<llm::ChatBackend> backend)
    : id_(std::move(id)),
      settings_(std::move(settings)),
      backend_(std::move(backend)),
      world_(scenario, settings_.availability,
             sim::SimOptions{settings_.persona_mode, backend_.get(), settings_.human_timeout, 3, {}}),
      memory_(world_.initial_memory()),
      inbox_(world_.inbox()) {
  if (!backend_) throw Error("session needs a chat backend");
}

Session::~Session() {
  close();
  join();
}

void Session::emit(std::string type, json data) {
  std::lock_guard lock(mu_);
  emit_locked(std::move(type), std::move(data));
}

void Session::emit_locked(std::string type, json data) {
  if (data.is_object() && !data.contains("type")) data["type"] = type;
  events_.push_back({next_seq_++, std::move(type), std::move(data)});
  cv_.notify_all();
}

memory::EntityId Session::person_id(const std::string& name) const {
  const auto& truth = world_.scenario().truth;
  auto id = truth.resolve_name(name);
  if (!id || truth.at(*id).kind != memory::NodeKind::human) throw ApiError(404, fmt::format("unknown persona '{}'", name));
  return *id;
}

int Session::submit(const std::string& instruction, const std::string& entry_id) {
  if (instruction.empty()) throw ApiError(400, "instruction text is empty");
  int n = 0;
  {
    std::lock_guard lock(mu_);
    if (closed_) throw ApiError(410, "session is closed");
    if (busy_) throw ApiError(409, "an instruction is already running");
    if (worker_.joinable()) worker_.join();
    busy_ = true;
    n = ++episodes_;
    instruction_ = instruction;
  }
  emit("episode_started", {{"episode", n}, {"instruction", instruction}});
  const std::string eid = entry_id.empty() ? fmt::format("{}-{}", id_, n) : entry_id;
  worker_ = std::thread([this, instruction, eid, n] {
    Observer observer(*this);
    std::optional<agents::Verdict> verdict;
    std::string error;
    try {
      auto trace = agents::run_episode({eid, instruction}, world_, memory_, *backend_, settings_.agent, &observer);
      verdict = trace.verdict;
      error = trace.error;
    } catch (const std::exception& e) {
      error = e.what();
      emit("episode_error", {{"episode", n}, {"error", error}});
    }
    apply_pending_availability();
    json done = {{"episode", n}, {"verdict", verdict ? json(agents::to_string(*verdict)) : json()}};
    if (!error.empty()) done["error"] = error;
    emit("episode_finished", std::move(done));
    std::lock_guard lock(mu_);
    last_verdict_ = verdict;
    busy_ = false;
    cv_.notify_all();
  });
  return n;
}

void Session::persona_message(const std::string& person, const std::string& content) {
  if (closed()) throw ApiError(410, "session is closed");
  if (content.empty()) throw ApiError(400, "message content is empty");
  const std::string sender = person == sim::kOperator ? std::string(sim::kOperator) : person_id(person).str();
  world_.interactive_inject({0, memory::Channel::direct, sender, std::string(memory::kAssistant), content});
  emit("persona_message", {{"sender", sender}, {"content", content}});
}

void Session::set_availability(const std::string& person, bool available) {
  const auto id = person_id(person);
  std::lock_guard lock(mu_);
  if (closed_) throw ApiError(410, "session is closed");
  pending_availability_.emplace_back(id, available);
  // While an episode runs the worker applies it after the current step.
  if (!busy_) apply_pending_locked();
}

void Session::apply_pending_availability() {
  std::lock_guard lock(mu_);
  apply_pending_locked();
}

void Session::apply_pending_locked() {
  for (const auto& [id, value] : pending_availability_) {
    world_.set_availability(id, value);
    emit_locked("availability", {{"person", id.str()}, {"available", value}});
  }
  pending_availability_.clear();
}

void Session::close() {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    closed_ = true;
  }
  inbox_->close();
  emit("session_closed", json::object());
}

void Session::join() {
  if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

bool Session::busy() const {
  std::lock_guard lock(mu_);
  return busy_;
}

bool Session::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::int64_t Session::last_seq() const {
  std::lock_guard lock(mu_);
  return next_seq_ - 1;
}

std::vector<Event> Session::events_after(std::int64_t from, std::chrono::milliseconds wait) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, wait, [&] { return next_seq_ - 1 > from || closed_; });
  std::vector<Event> out;
  for (const auto& e : events_) {
    if (e.seq > from) out.push_back(e);
  }
  return out;
}

json Session::snapshot() const {
  std::lock_guard lock(mu_);
  json j = {{"id", id_},
            {"busy", busy_},
            {"closed", closed_},
            {"episodes", episodes_},
            {"instruction", instruction_},
            {"last_seq", next_seq_ - 1},
            {"persona_mode", llm::to_string(settings_.persona_mode)},
            {"strategy", agents::to_string(settings_.agent.strategy)},
            {"modules", agents::to_string(settings_.agent.flags)},
            {"last_verdict", last_verdict_ ? json(agents::to_string(*last_verdict_)) : json()}};
  // World and memory belong to the worker while an episode runs.
  if (!busy_) {
    const auto& robot = world_.robot();
    json contents = json::array();
    for (const auto& id : robot.locker_contents) contents.push_back(id.str());
    j["robot"] = {{"location", robot.robot_location.str()},
                  {"locker", memory::to_string(robot.locker)},
                  {"locker_contents", contents},
                  {"active_qr", robot.active_qr ? json(*robot.active_qr) : json()}};
    json truth = json::object();
    for (const auto& [id, v] : world_.availability()) truth[id.str()] = v;
    j["availability"] = truth;
    json believed = json::object();
    for (const auto& id : memory_.graph().ids_of_kind(memory::NodeKind::human)) {
      believed[id.str()] = memory_.graph().is_available(id);
    }
    j["memory_availability"] = believed;
    json dialogue = json::array();
    for (const auto& m : memory_.dialogue()) dialogue.push_back(message_json(m));
    j["dialogue"] = dialogue;
  }
  return j;
}

// --- manager ----------------------------------------------------------------------

SessionManager::SessionManager(GatewayOptions options) : options_(std::move(options)) {
  if (!options_.backend_factory) throw Error("gateway needs a backend factory");
}

SessionManager::~SessionManager() {
  std::map<std::string, std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mu_);
    sessions.swap(sessions_);
  }
  for (auto& [id, s] : sessions) s->close();
}

std::shared_ptr<Session> SessionManager::create(const json& body) {
  SessionSettings settings;
  settings.persona_mode = options_.persona_mode;
  settings.human_timeout = options_.human_timeout;
  settings.agent = options_.agent;
  try {
    if (body.contains("availability")) {
      for (const auto& [person, value] : body.at("availability").items()) {
        const auto& truth = options_.scenario.truth;
        auto id = truth.resolve_name(person);
        if (!id || truth.at(*id).kind != memory::NodeKind::human) {
          throw ApiError(404, fmt::format("unknown persona '{}'", person));
        }
        settings.availability[*id] = value.get<bool>();
      }
    }
    if (body.contains("persona_mode")) {
      settings.persona_mode = llm::parse_persona_mode(body.at("persona_mode").get<std::string>());
    }
    if (body.contains("strategy")) settings.agent.strategy = agents::parse_strategy(body.at("strategy").get<std::string>());
    if (body.contains("modules")) {
      const auto& m = body.at("modules");
      settings.agent.flags.perception = m.value("perception", true);
      settings.agent.flags.planning = m.value("planning", true);
      settings.agent.flags.reflection = m.value("reflection", true);
    }
    if (body.contains("human_timeout_ms")) {
      settings.human_timeout = std::chrono::milliseconds(body.at("human_timeout_ms").get<int>());
    }
  } catch (const json::exception& e) {
    throw ApiError(400, e.what());
  } catch (const ApiError&) {
    throw;
  } catch (const Error& e) {
    throw ApiError(400, e.what());
  }

  std::lock_guard lock(mu_);
  auto id = fmt::format("s{}", next_id_++);
  auto session = std::make_shared<Session>(id, options_.scenario, std::move(settings), options_.backend_factory());
  sessions_[id] = session;
  return session;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id, bool allow_closed) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, fmt::format("no session '{}'", id));
  if (!allow_closed && it->second->closed()) throw ApiError(410, "session is closed");
  return it->second;
}

void SessionManager::remove(const std::string& id) {
  // Closed sessions stay as tombstones so later calls get 410 rather than 404.
  get(id, true)->close();
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

}  // namespace deskmate::gateway
