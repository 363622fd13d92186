#include "deskmate/actions.hpp"

#include <array>
#include <map>

#include <fmt/format.h>

#include "deskmate/text.hpp"

namespace deskmate::actions {

namespace {

using namespace std::string_view_literals;

constexpr std::array kInformParams{"contact"sv, "content"sv};
constexpr std::array kInquireParams{"contact"sv, "question"sv};
constexpr std::array kForwardParams{"source"sv, "target"sv};
constexpr std::array kContactParam{"contact"sv};
constexpr std::array kWaitParams{"content"sv};
constexpr std::array kMoveParams{"target_name"sv};
constexpr std::array kUserParam{"user"sv};
constexpr std::array kStopParams{"outcome"sv};

template <typename... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string escape(std::string_view value) {
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '|': out += "\\|"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

// Splits on unescaped pipes; escapes are resolved in the returned fields.
std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields(1);
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && i + 1 < line.size()) {
      const char n = line[++i];
      fields.back() += n == 'n' ? '\n' : n;
    } else if (c == '|') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::optional<StopOutcome> parse_outcome(std::string_view text) {
  if (text::iequals(text, "achieved")) return StopOutcome::achieved;
  if (text::iequals(text, "unachievable")) return StopOutcome::unachievable;
  return std::nullopt;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> Action::params() const {
  using P = std::vector<std::pair<std::string, std::string>>;
  return std::visit(overloaded{
                        [](const Inform& a) { return P{{"contact", a.contact}, {"content", a.content}}; },
                        [](const Inquire& a) { return P{{"contact", a.contact}, {"question", a.question}}; },
                        [](const Forward& a) { return P{{"source", a.source}, {"target", a.target}}; },
                        [](const SendQRCode& a) { return P{{"contact", a.contact}}; },
                        [](const Wait& a) { return P{{"content", a.content}}; },
                        [](const Move& a) { return P{{"target_name", a.target_name}}; },
                        [](const WaitInPlace& a) { return P{{"user", a.user}}; },
                        [](const Stop& a) { return P{{"outcome", std::string(to_string(a.outcome))}}; },
                    },
                    payload_);
}

std::optional<std::string> Action::param(std::string_view name) const {
  for (auto& [k, v] : params()) {
    if (k == name) return v;
  }
  return std::nullopt;
}

ActionClass class_of(ActionKind kind) {
  switch (kind) {
    case ActionKind::Inform:
    case ActionKind::Inquire:
    case ActionKind::Forward:
    case ActionKind::SendQRCode:
    case ActionKind::Wait: return ActionClass::cyber;
    case ActionKind::Move:
    case ActionKind::WaitInPlace: return ActionClass::real;
    case ActionKind::Stop: return ActionClass::generic;
  }
  return ActionClass::generic;
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Inform: return "Inform";
    case ActionKind::Inquire: return "Inquire";
    case ActionKind::Forward: return "Forward";
    case ActionKind::SendQRCode: return "SendQRCode";
    case ActionKind::Wait: return "Wait";
    case ActionKind::Move: return "Move";
    case ActionKind::WaitInPlace: return "WaitInPlace";
    case ActionKind::Stop: return "Stop";
  }
  return "?";
}

std::string_view to_string(ActionClass cls) {
  switch (cls) {
    case ActionClass::cyber: return "cyber";
    case ActionClass::real: return "real";
    case ActionClass::generic: return "generic";
  }
  return "?";
}

std::string_view to_string(StopOutcome outcome) {
  return outcome == StopOutcome::achieved ? "achieved" : "unachievable";
}

std::optional<ActionKind> parse_kind(std::string_view text) {
  std::string squashed;
  for (char c : text) {
    if (c != ' ' && c != '_' && c != '-') squashed += c;
  }
  for (ActionKind k : kAllKinds) {
    if (text::iequals(squashed, to_string(k))) return k;
  }
  return std::nullopt;
}

std::span<const std::string_view> param_names(ActionKind kind) {
  switch (kind) {
    case ActionKind::Inform: return kInformParams;
    case ActionKind::Inquire: return kInquireParams;
    case ActionKind::Forward: return kForwardParams;
    case ActionKind::SendQRCode: return kContactParam;
    case ActionKind::Wait: return kWaitParams;
    case ActionKind::Move: return kMoveParams;
    case ActionKind::WaitInPlace: return kUserParam;
    case ActionKind::Stop: return kStopParams;
  }
  return {};
}

Action parse_action(std::string_view line) {
  const std::string_view trimmed = text::trim(line);
  const auto fields = split_fields(trimmed);

  const std::string_view head = text::trim(fields.front());
  if (!text::starts_with_icase(head, "ACTION") ||
      (head.size() > 6 && head[6] != ' ' && head[6] != '\t')) {
    throw ParseError("line does not start with ACTION", std::string(head));
  }
  const std::string_view kind_text = text::trim(head.substr(6));
  if (kind_text.empty()) throw ParseError("missing action kind", std::string(head));
  const auto kind = parse_kind(kind_text);
  if (!kind) throw ParseError("unknown kind", std::string(kind_text));

  std::map<std::string, std::string> values;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const std::string& f = fields[i];
    const auto eq = f.find('=');
    if (eq == std::string::npos) throw ParseError("parameter without '='", f);
    std::string name = text::to_lower(text::trim(std::string_view(f).substr(0, eq)));
    std::string value{text::trim(std::string_view(f).substr(eq + 1))};
    const auto names = param_names(*kind);
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw ParseError(fmt::format("unexpected parameter for {}", to_string(*kind)), name);
    }
    if (value.empty()) throw ParseError("empty parameter value", name);
    if (!values.emplace(name, std::move(value)).second) throw ParseError("duplicate parameter", name);
  }
  for (auto name : param_names(*kind)) {
    if (!values.contains(std::string(name))) {
      throw ParseError(fmt::format("missing parameter for {}", to_string(*kind)), std::string(name));
    }
  }

  auto v = [&](std::string_view name) { return values.at(std::string(name)); };
  switch (*kind) {
    case ActionKind::Inform: return Inform{v("contact"), v("content")};
    case ActionKind::Inquire: return Inquire{v("contact"), v("question")};
    case ActionKind::Forward: return Forward{v("source"), v("target")};
    case ActionKind::SendQRCode: return SendQRCode{v("contact")};
    case ActionKind::Wait: return Wait{v("content")};
    case ActionKind::Move: return Move{v("target_name")};
    case ActionKind::WaitInPlace: return WaitInPlace{v("user")};
    case ActionKind::Stop: {
      auto outcome = parse_outcome(v("outcome"));
      if (!outcome) throw ParseError("outcome must be achieved or unachievable", v("outcome"));
      return Stop{*outcome};
    }
  }
  throw ParseError("unknown kind", std::string(kind_text));
}

std::string render_action(const Action& action) {
  std::string line = fmt::format("ACTION {}", to_string(action.kind()));
  for (const auto& [name, value] : action.params()) {
    line += fmt::format(" | {}={}", name, escape(value));
  }
  return line;
}

std::string_view to_string(ValidationError::Code code) {
  switch (code) {
    case ValidationError::Code::unknown_contact: return "UnknownContact";
    case ValidationError::Code::unknown_place: return "UnknownPlace";
    case ValidationError::Code::self_forward: return "SelfForward";
  }
  return "?";
}

void validate(const Action& action, const memory::TopoGraph& graph, std::span<const memory::ChatGroup> groups) {
  using memory::NodeKind;
  auto human = [&](const std::string& name) -> memory::EntityId {
    auto id = graph.resolve_name(name);
    if (!id || graph.at(*id).kind != NodeKind::human) {
      throw ValidationError(ValidationError::Code::unknown_contact, fmt::format("unknown contact '{}'", name));
    }
    return *id;
  };
  auto contact_or_group = [&](const std::string& name) {
    for (const auto& g : groups) {
      if (g.id == name || text::iequals(g.name, name)) return;
    }
    human(name);
  };

  std::visit(overloaded{
                 [&](const Inform& a) { contact_or_group(a.contact); },
                 [&](const Inquire& a) { contact_or_group(a.contact); },
                 [&](const Forward& a) {
                   if (human(a.source) == human(a.target)) {
                     throw ValidationError(ValidationError::Code::self_forward,
                                           fmt::format("cannot forward from '{}' to itself", a.source));
                   }
                 },
                 [&](const SendQRCode& a) { human(a.contact); },
                 [&](const Wait&) {},
                 [&](const Move& a) {
                   auto id = graph.resolve_name(a.target_name);
                   if (!id || graph.at(*id).kind == NodeKind::item) {
                     throw ValidationError(ValidationError::Code::unknown_place,
                                           fmt::format("unknown place '{}'", a.target_name));
                   }
                 },
                 [&](const WaitInPlace& a) { human(a.user); },
                 [&](const Stop&) {},
             },
             action.payload());
}

std::string_view to_string(ExecOutcome outcome) {
  switch (outcome) {
    case ExecOutcome::done: return "done";
    case ExecOutcome::waiting: return "waiting";
    case ExecOutcome::terminated: return "terminated";
  }
  return "?";
}

ExecOutcome parse_exec_outcome(std::string_view text) {
  if (text == "waiting") return ExecOutcome::waiting;
  if (text == "terminated") return ExecOutcome::terminated;
  return ExecOutcome::done;
}

}  // namespace deskmate::actions
