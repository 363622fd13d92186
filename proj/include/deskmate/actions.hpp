#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "deskmate/error.hpp"
#include "deskmate/memory.hpp"

namespace deskmate::actions {

enum class ActionKind { Inform, Inquire, Forward, SendQRCode, Wait, Move, WaitInPlace, Stop };
enum class ActionClass { cyber, real, generic };
enum class StopOutcome { achieved, unachievable };

inline constexpr ActionKind kAllKinds[] = {ActionKind::Inform, ActionKind::Inquire,     ActionKind::Forward,
                                           ActionKind::SendQRCode, ActionKind::Wait,    ActionKind::Move,
                                           ActionKind::WaitInPlace, ActionKind::Stop};

struct Inform {
  std::string contact;
  std::string content;
  bool operator==(const Inform&) const = default;
};
struct Inquire {
  std::string contact;
  std::string question;
  bool operator==(const Inquire&) const = default;
};
struct Forward {
  std::string source;
  std::string target;
  bool operator==(const Forward&) const = default;
};
struct SendQRCode {
  std::string contact;
  bool operator==(const SendQRCode&) const = default;
};
struct Wait {
  std::string content;
  bool operator==(const Wait&) const = default;
};
struct Move {
  std::string target_name;
  bool operator==(const Move&) const = default;
};
struct WaitInPlace {
  std::string user;
  bool operator==(const WaitInPlace&) const = default;
};
struct Stop {
  StopOutcome outcome = StopOutcome::achieved;
  bool operator==(const Stop&) const = default;
};

// One entry of the action vocabulary with its parameters.
class Action {
 public:
  using Payload = std::variant<Inform, Inquire, Forward, SendQRCode, Wait, Move, WaitInPlace, Stop>;

  template <typename T>
    requires std::is_constructible_v<Payload, T&&> && (!std::is_same_v<std::remove_cvref_t<T>, Action>)
  Action(T&& value) : payload_(std::forward<T>(value)) {}  // NOLINT(google-explicit-constructor)

  ActionKind kind() const { return static_cast<ActionKind>(payload_.index()); }
  const Payload& payload() const { return payload_; }

  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(&payload_);
  }

  // (name, value) pairs in canonical order.
  std::vector<std::pair<std::string, std::string>> params() const;
  std::optional<std::string> param(std::string_view name) const;

  bool operator==(const Action&) const = default;

 private:
  Payload payload_;
};

ActionClass class_of(ActionKind kind);
inline ActionClass class_of(const Action& a) { return class_of(a.kind()); }

std::string_view to_string(ActionKind kind);
std::string_view to_string(ActionClass cls);
std::string_view to_string(StopOutcome outcome);
// Case-insensitive; spaces and underscores are ignored ("send qr code").
std::optional<ActionKind> parse_kind(std::string_view text);
// Parameter names for a kind, in canonical order.
std::span<const std::string_view> param_names(ActionKind kind);

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::string fragment)
      : Error(message + ": '" + fragment + "'"), fragment_(std::move(fragment)) {}
  const std::string& fragment() const { return fragment_; }

 private:
  std::string fragment_;
};

// Parses `ACTION <Kind> | <param>=<value> | ...`. In values, `\|`, `\\` and
// `\n` are escapes for a pipe, a backslash and a newline.
Action parse_action(std::string_view line);
std::string render_action(const Action& action);

class ValidationError : public Error {
 public:
  enum class Code { unknown_contact, unknown_place, self_forward };
  ValidationError(Code code, const std::string& message) : Error(message), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};
std::string_view to_string(ValidationError::Code code);

// Checks names against the graph (and chat groups for Inform/Inquire).
// Never mutates the graph. Throws ValidationError.
void validate(const Action& action, const memory::TopoGraph& graph,
              std::span<const memory::ChatGroup> groups = {});

enum class ExecOutcome { done, waiting, terminated };
std::string_view to_string(ExecOutcome outcome);
ExecOutcome parse_exec_outcome(std::string_view text);

struct ActionRecord {
  int step = 0;
  Action action;
  ExecOutcome exec_outcome = ExecOutcome::done;
  int emitted_events = 0;

  bool operator==(const ActionRecord&) const = default;
};

}  // namespace deskmate::actions
