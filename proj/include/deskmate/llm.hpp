#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "deskmate/error.hpp"
#include "deskmate/memory.hpp"

namespace deskmate::llm {

enum class RoleTag { perception, planning, decision, reflection, persona };
std::string_view to_string(RoleTag role);
RoleTag parse_role_tag(std::string_view text);

struct ChatTurn {
  std::string speaker;  // "user" or "assistant"
  std::string text;
  bool operator==(const ChatTurn&) const = default;
};

struct ChatRequest {
  RoleTag role = RoleTag::decision;
  std::string system_prompt;
  std::vector<ChatTurn> context;

  // Stable 64-bit FNV-1a digest over every field.
  std::uint64_t hash() const;
};

std::string hash_hex(std::uint64_t hash);

struct ChatResponse {
  std::string text;
  std::string backend_id;
  std::chrono::milliseconds latency{0};
};

class BackendError : public Error {
 public:
  enum class Code { timeout, rate_limited, fixture_miss, transport, bad_response, prompt_mismatch };
  BackendError(Code code, const std::string& message) : Error(message), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};
std::string_view to_string(BackendError::Code code);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

// --- replay ---------------------------------------------------------------

struct FixtureRecord {
  RoleTag role = RoleTag::decision;
  int index = 0;
  std::string response;
  std::optional<std::uint64_t> prompt_hash;
};

// JSON lines: {"role": "decision", "index": 0, "response": "..."}; lines
// starting with '#' and blank lines are skipped.
std::vector<FixtureRecord> parse_fixture(std::string_view text);
std::vector<FixtureRecord> load_fixture(const std::filesystem::path& path);

struct ReplayExchange {
  ChatRequest request;
  std::string response;
};

// Serves responses keyed by (role, per-role call index). Confined to one episode.
class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(std::vector<FixtureRecord> records, bool strict_hashes = false);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "replay"; }

  const std::vector<ReplayExchange>& transcript() const { return transcript_; }
  int calls(RoleTag role) const;

 private:
  std::map<std::pair<RoleTag, int>, FixtureRecord> records_;
  std::map<RoleTag, int> counters_;
  std::vector<ReplayExchange> transcript_;
  bool strict_;
};

// --- remote ---------------------------------------------------------------

struct RemoteConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{500};
  int max_in_flight = 4;
  double temperature = 0.0;

  // DESKMATE_LLM_BASE_URL, DESKMATE_LLM_MODEL, DESKMATE_LLM_API_KEY,
  // DESKMATE_LLM_TIMEOUT_MS, DESKMATE_LLM_MAX_IN_FLIGHT.
  static RemoteConfig from_env();
};

// OpenAI-style chat-completions client. Shareable across episodes.
class RemoteBackend : public ChatBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  ~RemoteBackend() override;

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "remote:" + config_.model; }

 private:
  std::string attempt(const ChatRequest& request);

  RemoteConfig config_;
  std::string host_;
  std::string path_prefix_;
  std::counting_semaphore<1024> in_flight_;
};

// --- personas ---------------------------------------------------------------

enum class PersonaMode { scripted, llm, human };
std::string_view to_string(PersonaMode mode);
PersonaMode parse_persona_mode(std::string_view text);

struct PersonaFact {
  std::string relation;  // "owns" or "located_at"
  std::string value;
  bool operator==(const PersonaFact&) const = default;
};

struct PersonaState {
  memory::EntityId person;
  std::string display_name;
  bool available = true;
  std::vector<PersonaFact> knowledge;
  std::uint64_t style_seed = 0;
};

// An item kind and the words a request may use for it.
struct KindVocabulary {
  std::string kind;
  std::vector<std::string> keywords;
};

enum class ReplyKind { affirm, decline, deny, ack, silence };

struct PersonaReply {
  ReplyKind kind = ReplyKind::silence;
  std::string text;
  std::optional<std::string> matched_kind;
};

// Deterministic templates. Pure in (state, incoming, state.style_seed).
PersonaReply scripted_reply(const PersonaState& state, const memory::DialogueMessage& incoming,
                            std::span<const KindVocabulary> vocabulary);

std::string persona_system_prompt(const PersonaState& state);

// Returns the reply text, or an empty string for silence. `backend` is only
// used in llm mode. Human mode always returns silence.
std::string persona_reply(const PersonaState& state, const memory::DialogueMessage& incoming,
                          PersonaMode mode, std::span<const KindVocabulary> vocabulary,
                          ChatBackend* backend = nullptr);

// Whole-word, case-insensitive; a trailing plural "s" also matches.
bool mentions(std::string_view content, std::string_view word);

}  // namespace deskmate::llm
