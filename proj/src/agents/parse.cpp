#include <cctype>
#include <optional>

#include <fmt/format.h>

#include "deskmate/agents.hpp"
#include "deskmate/text.hpp"

namespace deskmate::agents {

std::string_view prompt(std::string_view name) {
  const auto& table = prompts();
  auto it = table.find(name);
  if (it == table.end()) throw Error(fmt::format("no prompt named '{}'", name));
  return it->second;
}

std::string system_prompt(std::string_view name) {
  return std::string(text::trim(prompt(name))) + "\n\n" + std::string(text::trim(prompt("action_grammar"))) + "\n";
}

namespace {

// "HEADER: rest" -> rest, when the line opens with the header.
std::optional<std::string> header_rest(std::string_view line, std::string_view header) {
  auto t = text::trim(line);
  // Tolerate markdown emphasis around headers ("**PLAN:**").
  while (!t.empty() && (t.front() == '*' || t.front() == '#')) t.remove_prefix(1);
  t = text::trim(t);
  if (!text::starts_with_icase(t, header)) return std::nullopt;
  t.remove_prefix(header.size());
  while (!t.empty() && t.front() == '*') t.remove_prefix(1);
  if (t.empty() || t.front() != ':') return std::nullopt;
  t.remove_prefix(1);
  while (!t.empty() && t.front() == '*') t.remove_prefix(1);
  return std::string(text::trim(t));
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += "\n";
    out += l;
  }
  return out;
}

// Splits a reply into the named sections; text before the first header is dropped.
std::map<std::string, std::vector<std::string>> sections(std::string_view reply,
                                                          const std::vector<std::string>& headers) {
  std::map<std::string, std::vector<std::string>> out;
  std::string current;
  for (const auto& line : text::split_lines(reply)) {
    bool opened = false;
    for (const auto& h : headers) {
      if (auto rest = header_rest(line, h)) {
        current = h;
        if (out.contains(h)) throw MalformedOutput("section " + h + " appears twice");
        out[h];
        if (!rest->empty()) out[h].push_back(*rest);
        opened = true;
        break;
      }
    }
    if (opened || current.empty()) continue;
    auto t = text::trim(line);
    if (!t.empty()) out[current].emplace_back(t);
  }
  return out;
}

std::string section_text(const std::map<std::string, std::vector<std::string>>& s, const std::string& h) {
  auto it = s.find(h);
  if (it == s.end()) throw MalformedOutput("missing section " + h);
  auto body = join(it->second);
  return body.empty() ? "none" : body;
}

// "1. text", "2) text" or "- text" -> text.
std::optional<std::string> list_item(std::string_view line) {
  auto t = text::trim(line);
  std::size_t i = 0;
  while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
  if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) {
    return std::string(text::trim(t.substr(i + 1)));
  }
  if (!t.empty() && (t.front() == '-' || t.front() == '*')) return std::string(text::trim(t.substr(1)));
  return std::nullopt;
}

}  // namespace

PerceptionPackage parse_perception(std::string_view reply) {
  const auto s = sections(reply, {"OBSERVATION", "TASK ENTITIES", "ACTIVE CHAT"});
  return {section_text(s, "OBSERVATION"), section_text(s, "TASK ENTITIES"), section_text(s, "ACTIVE CHAT")};
}

Plan parse_plan(std::string_view reply) {
  const auto s = sections(reply, {"COMPLETED", "ROADMAP"});
  Plan plan;
  plan.completed = s.contains("COMPLETED") ? section_text(s, "COMPLETED") : "none";
  auto it = s.find("ROADMAP");
  if (it == s.end()) throw MalformedOutput("missing section ROADMAP");
  for (const auto& line : it->second) {
    if (plan.roadmap.empty() && (text::iequals(line, "done") || text::iequals(line, "done."))) {
      plan.done = true;
      continue;
    }
    if (auto item = list_item(line)) {
      if (!item->empty()) plan.roadmap.push_back(*item);
    } else if (!plan.roadmap.empty()) {
      plan.roadmap.back() += " " + line;
    } else {
      throw MalformedOutput("roadmap line is not a numbered item: '" + line + "'");
    }
  }
  if (plan.done && !plan.roadmap.empty()) throw MalformedOutput("roadmap is both done and non-empty");
  if (!plan.done && plan.roadmap.empty()) throw MalformedOutput("empty roadmap");
  return plan;
}

Decision parse_decision(std::string_view reply, int max_actions) {
  Decision d;
  std::vector<std::string> thought;
  int dropped = 0;
  for (const auto& line : text::split_lines(reply)) {
    auto t = text::trim(line);
    // Models sometimes wrap action lines in code fences or list markers.
    if (t.starts_with("```")) continue;
    if (t.starts_with("- ")) t = text::trim(t.substr(2));
    if (text::starts_with_icase(t, "ACTION ") || text::iequals(t, "ACTION")) {
      try {
        auto action = actions::parse_action(t);
        if (max_actions > 0 && static_cast<int>(d.actions.size()) >= max_actions) {
          ++dropped;
        } else {
          d.actions.push_back(std::move(action));
        }
      } catch (const actions::ParseError& e) {
        throw MalformedOutput(e.what());
      }
      continue;
    }
    if (auto rest = header_rest(t, "THOUGHT")) {
      if (!rest->empty()) thought.push_back(*rest);
    } else if (!t.empty()) {
      thought.emplace_back(t);
    }
  }
  if (d.actions.empty()) throw MalformedOutput("no ACTION line");
  if (dropped > 0) d.notes.push_back(fmt::format("dropped {} action(s) beyond the per-step cap", dropped));
  d.thought = join(thought);
  return d;
}

ReflectionOutput parse_reflection(std::string_view reply) {
  ReflectionOutput out;
  std::vector<std::string> rationale;
  bool judged = false;
  for (const auto& line : text::split_lines(reply)) {
    auto t = text::trim(line);
    if (t.empty()) continue;
    if (!judged) {
      std::size_t end = 0;
      while (end < t.size() && std::isalpha(static_cast<unsigned char>(t[end]))) ++end;
      const auto token = t.substr(0, end);
      if (token == "Y" || token == "y") {
        out.result.judgment = Judgment::Y;
      } else if (token == "N" || token == "n") {
        out.result.judgment = Judgment::N;
      } else {
        throw MalformedOutput(fmt::format("reflection must start with Y or N, got '{}'", t.substr(0, 20)));
      }
      judged = true;
      t = t.substr(end);
      while (!t.empty() && (t.front() == '.' || t.front() == ':' || t.front() == ',' || t.front() == '-' ||
                            std::isspace(static_cast<unsigned char>(t.front())))) {
        t.remove_prefix(1);
      }
      if (t.empty()) continue;
    }
    if (auto name = header_rest(t, "UNAVAILABLE")) {
      if (!name->empty()) out.unavailable.push_back(*name);
      continue;
    }
    rationale.emplace_back(t);
  }
  if (!judged) throw MalformedOutput("empty reflection");
  out.result.rationale = join(rationale);
  if (out.result.rationale.empty()) throw MalformedOutput("reflection has no rationale");
  return out;
}

std::vector<std::string> lint_moves(const std::vector<actions::Action>& batch,
                                    const std::set<memory::EntityId>& contacted, const memory::TopoGraph& graph) {
  auto human = [&](const std::string& name) -> std::optional<memory::EntityId> {
    auto id = graph.resolve_name(name);
    if (!id) return std::nullopt;
    const auto* node = graph.find(*id);
    if (!node || node->kind != memory::NodeKind::human) return std::nullopt;
    return id;
  };
  std::set<memory::EntityId> seen = contacted;
  std::vector<std::string> offending;
  for (const auto& a : batch) {
    if (a.kind() == actions::ActionKind::Inform || a.kind() == actions::ActionKind::Inquire) {
      if (auto id = human(*a.param("contact"))) seen.insert(*id);
    } else if (const auto* m = a.get_if<actions::Move>()) {
      if (auto id = human(m->target_name); id && !seen.contains(*id)) offending.push_back(m->target_name);
    }
  }
  return offending;
}

}  // namespace deskmate::agents
