#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "deskmate/llm.hpp"
#include "deskmate/text.hpp"

namespace deskmate::llm {

std::string_view to_string(RoleTag role) {
  switch (role) {
    case RoleTag::perception: return "perception";
    case RoleTag::planning: return "planning";
    case RoleTag::decision: return "decision";
    case RoleTag::reflection: return "reflection";
    case RoleTag::persona: return "persona";
  }
  return "?";
}

RoleTag parse_role_tag(std::string_view text) {
  for (RoleTag r : {RoleTag::perception, RoleTag::planning, RoleTag::decision, RoleTag::reflection,
                    RoleTag::persona}) {
    if (text::iequals(text, to_string(r))) return r;
  }
  throw Error(fmt::format("unknown role tag '{}'", text));
}

std::string_view to_string(BackendError::Code code) {
  switch (code) {
    case BackendError::Code::timeout: return "Timeout";
    case BackendError::Code::rate_limited: return "RateLimited";
    case BackendError::Code::fixture_miss: return "FixtureMiss";
    case BackendError::Code::transport: return "Transport";
    case BackendError::Code::bad_response: return "BadResponse";
    case BackendError::Code::prompt_mismatch: return "PromptMismatch";
  }
  return "?";
}

std::uint64_t ChatRequest::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    // Field separator outside the byte range of UTF-8 text.
    h ^= 0x1FF;
    h *= 1099511628211ULL;
  };
  feed(to_string(role));
  feed(system_prompt);
  for (const auto& t : context) {
    feed(t.speaker);
    feed(t.text);
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) { return fmt::format("{:016x}", hash); }

std::vector<FixtureRecord> parse_fixture(std::string_view text) {
  std::vector<FixtureRecord> out;
  int lineno = 0;
  for (const auto& raw : text::split_lines(text)) {
    ++lineno;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FixtureRecord r;
      r.role = parse_role_tag(j.at("role").get<std::string>());
      r.index = j.at("index").get<int>();
      r.response = j.at("response").get<std::string>();
      if (j.contains("prompt_hash")) r.prompt_hash = std::stoull(j.at("prompt_hash").get<std::string>(), nullptr, 16);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error(fmt::format("fixture line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

std::vector<FixtureRecord> load_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open fixture '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_fixture(ss.str());
}

ReplayBackend::ReplayBackend(std::vector<FixtureRecord> records, bool strict_hashes) : strict_(strict_hashes) {
  for (auto& r : records) {
    const auto key = std::pair{r.role, r.index};
    if (!records_.emplace(key, std::move(r)).second) {
      throw Error(fmt::format("duplicate fixture entry ({}, {})", to_string(key.first), key.second));
    }
  }
}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
  const int index = counters_[request.role]++;
  auto it = records_.find({request.role, index});
  if (it == records_.end()) {
    throw BackendError(BackendError::Code::fixture_miss,
                       fmt::format("no fixture response for {} #{}", to_string(request.role), index));
  }
  if (strict_ && it->second.prompt_hash && *it->second.prompt_hash != request.hash()) {
    throw BackendError(BackendError::Code::prompt_mismatch,
                       fmt::format("prompt hash mismatch for {} #{}: fixture {}, request {}",
                                   to_string(request.role), index, hash_hex(*it->second.prompt_hash),
                                   hash_hex(request.hash())));
  }
  transcript_.push_back({request, it->second.response});
  return {it->second.response, id(), std::chrono::milliseconds{0}};
}

int ReplayBackend::calls(RoleTag role) const {
  auto it = counters_.find(role);
  return it == counters_.end() ? 0 : it->second;
}

}  // namespace deskmate::llm
