#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "deskmate/llm.hpp"
#include "deskmate/text.hpp"

namespace deskmate::llm {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool owns(const PersonaState& state, std::string_view kind) {
  return std::any_of(state.knowledge.begin(), state.knowledge.end(), [&](const PersonaFact& f) {
    return f.relation == "owns" && text::iequals(f.value, kind);
  });
}

std::optional<std::string> fact(const PersonaState& state, std::string_view relation) {
  for (const auto& f : state.knowledge) {
    if (f.relation == relation) return f.value;
  }
  return std::nullopt;
}

bool mentions_kind(std::string_view content, const KindVocabulary& v) {
  if (mentions(content, v.kind)) return true;
  return std::any_of(v.keywords.begin(), v.keywords.end(), [&](const std::string& k) { return mentions(content, k); });
}

const char* pick(std::uint64_t seed, const char* a, const char* b) { return seed % 2 == 0 ? a : b; }

std::string with_article(const std::string& noun) {
  const bool vowel = !noun.empty() && std::string_view("aeiou").find(noun.front()) != std::string_view::npos;
  return (vowel ? "an " : "a ") + noun;
}

}  // namespace

std::string_view to_string(PersonaMode mode) {
  switch (mode) {
    case PersonaMode::scripted: return "scripted";
    case PersonaMode::llm: return "llm";
    case PersonaMode::human: return "human";
  }
  return "?";
}

PersonaMode parse_persona_mode(std::string_view text) {
  for (PersonaMode m : {PersonaMode::scripted, PersonaMode::llm, PersonaMode::human}) {
    if (text::iequals(text, to_string(m))) return m;
  }
  throw Error(fmt::format("unknown persona mode '{}'", text));
}

bool mentions(std::string_view content, std::string_view word) {
  if (word.empty()) return false;
  const auto hay = text::to_lower(content);
  const auto needle = text::to_lower(word);
  for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    if (pos > 0 && is_word_char(hay[pos - 1])) continue;
    auto end = pos + needle.size();
    if (end < hay.size() && hay[end] == 's') ++end;
    if (end < hay.size() && is_word_char(hay[end])) continue;
    return true;
  }
  return false;
}

PersonaReply scripted_reply(const PersonaState& state, const memory::DialogueMessage& incoming,
                            std::span<const KindVocabulary> vocabulary) {
  const bool group = incoming.channel == memory::Channel::group;
  const auto seed = state.style_seed;

  // The first mentioned kind the persona owns, else the first mentioned kind.
  std::optional<std::string> owned_hit;
  std::optional<std::string> any_hit;
  for (const auto& v : vocabulary) {
    if (!mentions_kind(incoming.content, v)) continue;
    if (!any_hit) any_hit = v.kind;
    if (!owned_hit && owns(state, v.kind)) owned_hit = v.kind;
  }

  if (!state.available) {
    if (group) return {};
    return {ReplyKind::decline, pick(seed, "Sorry, I'm unavailable right now.", "Sorry, I am unavailable at the moment."),
            std::nullopt};
  }
  if (owned_hit) {
    return {ReplyKind::affirm,
            fmt::format(fmt::runtime(pick(seed, "Yes, I have {}. Happy to help.", "Sure, my {} is available. Come by.")),
                        seed % 2 == 0 ? with_article(*owned_hit) : *owned_hit),
            owned_hit};
  }
  if (group) return {};
  // Only a question about a kind they lack gets a denial; statements are acknowledged.
  if (any_hit && incoming.content.find('?') != std::string::npos) {
    return {ReplyKind::deny,
            fmt::format(fmt::runtime(pick(seed, "Sorry, I don't have {}.", "No, I don't own {}.")), with_article(*any_hit)),
            any_hit};
  }
  return {ReplyKind::ack, pick(seed, "OK, got it.", "Sure, no problem."), std::nullopt};
}

std::string persona_system_prompt(const PersonaState& state) {
  std::vector<std::string> items;
  for (const auto& f : state.knowledge) {
    if (f.relation == "owns") items.push_back(f.value);
  }
  const auto location = fact(state, "located_at");
  std::string prompt = fmt::format("You are {}, an office worker chatting with an office assistant robot.\n", state.display_name);
  prompt += state.available ? "You are available right now and willing to help.\n"
                            : "You are unavailable right now: you cannot help, lend anything, or meet anyone. Say so.\n";
  prompt += location ? fmt::format("Your desk is at {}.\n", *location) : std::string("Your desk location is unknown.\n");
  prompt += items.empty() ? std::string("You own no personal items worth mentioning.\n")
                          : fmt::format("You own: {}.\n", fmt::join(items, ", "));
  prompt +=
      "Reply with exactly one short chat message. Only claim items you own. "
      "In a group chat, if you cannot help, reply with the single word SILENT.";
  return prompt;
}

std::string persona_reply(const PersonaState& state, const memory::DialogueMessage& incoming, PersonaMode mode,
                          std::span<const KindVocabulary> vocabulary, ChatBackend* backend) {
  switch (mode) {
    case PersonaMode::human: return {};
    case PersonaMode::scripted: return scripted_reply(state, incoming, vocabulary).text;
    case PersonaMode::llm: {
      if (!backend) throw Error("llm persona mode needs a backend");
      ChatRequest req;
      req.role = RoleTag::persona;
      req.system_prompt = persona_system_prompt(state);
      const auto where = incoming.channel == memory::Channel::group ? "in the group chat" : "directly";
      req.context.push_back({"user", fmt::format("The assistant writes {}: {}", where, incoming.content)});
      const auto response = backend->complete(req);
      const auto reply = text::trim(response.text);
      if (text::iequals(reply, "SILENT")) return {};
      return std::string(reply);
    }
  }
  return {};
}

}  // namespace deskmate::llm
