#include <cstdlib>
#include <thread>

#include <fmt/format.h>

#include "httplib.h"
#include "json.hpp"

#include "deskmate/llm.hpp"

namespace deskmate::llm {

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

bool retryable(BackendError::Code c) {
  return c == BackendError::Code::timeout || c == BackendError::Code::rate_limited ||
         c == BackendError::Code::transport;
}

}  // namespace

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig c;
  c.base_url = env_or("DESKMATE_LLM_BASE_URL", "");
  c.model = env_or("DESKMATE_LLM_MODEL", "");
  c.api_key = env_or("DESKMATE_LLM_API_KEY", "");
  if (auto t = env_or("DESKMATE_LLM_TIMEOUT_MS", ""); !t.empty()) c.timeout = std::chrono::milliseconds{std::stol(t)};
  if (auto n = env_or("DESKMATE_LLM_MAX_IN_FLIGHT", ""); !n.empty()) c.max_in_flight = std::stoi(n);
  return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
  if (config_.base_url.empty()) throw Error("remote backend needs a base URL");
  if (config_.model.empty()) throw Error("remote backend needs a model name");
  // Split "scheme://host[:port]/prefix" into the client address and path prefix.
  const auto scheme_end = config_.base_url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = config_.base_url.find('/', host_start);
  host_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::attempt(const ChatRequest& request) {
  httplib::Client client(host_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  for (const auto& turn : request.context) {
    messages.push_back({{"role", turn.speaker == "assistant" ? "assistant" : "user"}, {"content", turn.text}});
  }
  const nlohmann::json body = {
      {"model", config_.model}, {"messages", messages}, {"temperature", config_.temperature}};

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw BackendError(BackendError::Code::timeout, fmt::format("request timed out ({})", httplib::to_string(err)));
    }
    throw BackendError(BackendError::Code::transport, fmt::format("transport error: {}", httplib::to_string(err)));
  }
  if (res->status == 429) throw BackendError(BackendError::Code::rate_limited, "rate limited (429)");
  if (res->status >= 500) throw BackendError(BackendError::Code::transport, fmt::format("server error {}", res->status));
  if (res->status != 200) {
    throw BackendError(BackendError::Code::bad_response, fmt::format("unexpected status {}", res->status));
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    auto text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (text.empty()) throw BackendError(BackendError::Code::bad_response, "empty completion");
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendError::Code::bad_response, fmt::format("malformed completion body: {}", e.what()));
  }
}

ChatResponse RemoteBackend::complete(const ChatRequest& request) {
  SlotGuard slot(in_flight_);
  auto backoff = config_.initial_backoff;
  const auto start = std::chrono::steady_clock::now();
  for (int tries = 0;; ++tries) {
    try {
      auto text = attempt(request);
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      return {std::move(text), id(), elapsed};
    } catch (const BackendError& e) {
      if (!retryable(e.code()) || tries >= config_.max_retries) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace deskmate::llm
