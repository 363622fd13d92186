#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "deskmate/text.hpp"
#include "deskmate/trace.hpp"

namespace deskmate::agents {

using nlohmann::json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::ppdr: return "ppdr";
    case Strategy::direct: return "direct";
    case Strategy::cot: return "cot";
    case Strategy::react: return "react";
    case Strategy::reflexion: return "reflexion";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  for (auto s : {Strategy::ppdr, Strategy::direct, Strategy::cot, Strategy::react, Strategy::reflexion}) {
    if (text::iequals(text, to_string(s))) return s;
  }
  throw Error(fmt::format("unknown strategy '{}' (ppdr, direct, cot, react, reflexion)", text));
}

std::string to_string(const AblationFlags& flags) {
  std::string out;
  if (flags.perception) out += "P+";
  if (flags.planning) out += "Pl+";
  out += "D";
  if (flags.reflection) out += "+R";
  return out;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::achieved: return "achieved";
    case Verdict::unachievable: return "unachievable";
    case Verdict::exhausted: return "exhausted";
  }
  return "?";
}

Verdict parse_verdict(std::string_view text) {
  for (auto v : {Verdict::achieved, Verdict::unachievable, Verdict::exhausted}) {
    if (text == to_string(v)) return v;
  }
  throw Error(fmt::format("unknown verdict '{}'", text));
}

std::string PerceptionPackage::text() const {
  return fmt::format("OBSERVATION:\n{}\nTASK ENTITIES:\n{}\nACTIVE CHAT:\n{}\n", observation, task_entities,
                     active_chat);
}

std::string Plan::text() const {
  std::string out = fmt::format("COMPLETED:\n{}\nROADMAP:", completed);
  if (done) return out + " done\n";
  out += "\n";
  for (std::size_t i = 0; i < roadmap.size(); ++i) out += fmt::format("{}. {}\n", i + 1, roadmap[i]);
  return out;
}

int EpisodeTrace::action_count() const {
  int n = 0;
  for (const auto& s : steps) n += static_cast<int>(s.actions.size());
  return n;
}

int EpisodeTrace::rejected_count() const {
  int n = 0;
  for (const auto& s : steps) {
    for (const auto& a : s.actions) n += a.executed ? 0 : 1;
  }
  return n;
}

namespace {

json message_json(const memory::DialogueMessage& m) {
  return {{"seq", m.seq},
          {"channel", memory::to_string(m.channel)},
          {"sender", m.sender},
          {"recipient", m.recipient},
          {"content", m.content}};
}

memory::DialogueMessage message_from(const json& j) {
  return {j.at("seq").get<std::int64_t>(),
          j.at("channel").get<std::string>() == "group" ? memory::Channel::group : memory::Channel::direct,
          j.at("sender").get<std::string>(), j.at("recipient").get<std::string>(),
          j.at("content").get<std::string>()};
}

json flags_json(const AblationFlags& f) {
  return {{"perception", f.perception}, {"planning", f.planning}, {"reflection", f.reflection}};
}

StepRecord step_from(const json& j) {
  StepRecord s;
  s.step = j.at("step").get<int>();
  if (j.contains("perception")) {
    const auto& p = j["perception"];
    s.perception = PerceptionPackage{p.at("observation").get<std::string>(), p.at("task_entities").get<std::string>(),
                                     p.at("active_chat").get<std::string>()};
  }
  if (j.contains("plan")) {
    const auto& p = j["plan"];
    s.plan = Plan{p.at("completed").get<std::string>(), p.at("roadmap").get<std::vector<std::string>>(),
                  p.at("done").get<bool>()};
  }
  s.thought = j.value("thought", "");
  for (const auto& a : j.at("actions")) {
    StepAction sa{actions::parse_action(a.at("action").get<std::string>()), true, "", actions::ExecOutcome::done};
    sa.executed = a.at("executed").get<bool>();
    sa.error = a.value("error", "");
    sa.outcome = actions::parse_exec_outcome(a.at("outcome").get<std::string>());
    s.actions.push_back(std::move(sa));
  }
  for (const auto& m : j.at("delta").at("messages")) s.delta.new_messages.push_back(message_from(m));
  for (const auto& c : j.at("delta").at("changes")) {
    s.delta.state_changes.push_back(
        {c.at("field").get<std::string>(), c.at("old").get<std::string>(), c.at("new").get<std::string>()});
  }
  if (j.contains("reflection")) {
    const auto& r = j["reflection"];
    s.reflection = ReflectionResult{r.at("judgment").get<std::string>() == "N" ? Judgment::N : Judgment::Y,
                                    r.at("rationale").get<std::string>(),
                                    r.at("updates").get<std::vector<std::string>>()};
  }
  if (j.contains("critique")) s.critique = j["critique"].get<std::string>();
  s.notes = j.value("notes", std::vector<std::string>{});
  s.malformed = j.value("malformed", false);
  return s;
}

}  // namespace

json header_to_json(const TraceHeader& h) {
  return {{"type", "header"},
          {"schema", kTraceSchemaVersion},
          {"entry_id", h.entry_id},
          {"strategy", to_string(h.strategy)},
          {"flags", flags_json(h.flags)},
          {"seed", h.seed},
          {"instruction", h.instruction},
          {"backend", h.backend}};
}

json step_to_json(const StepRecord& s) {
  json j = {{"type", "step"}, {"step", s.step}};
  if (s.perception) {
    j["perception"] = {{"observation", s.perception->observation},
                       {"task_entities", s.perception->task_entities},
                       {"active_chat", s.perception->active_chat}};
  }
  if (s.plan) j["plan"] = {{"completed", s.plan->completed}, {"roadmap", s.plan->roadmap}, {"done", s.plan->done}};
  if (!s.thought.empty()) j["thought"] = s.thought;
  j["actions"] = json::array();
  for (const auto& a : s.actions) {
    json aj = {{"action", actions::render_action(a.action)},
               {"kind", actions::to_string(a.action.kind())},
               {"executed", a.executed},
               {"outcome", actions::to_string(a.outcome)}};
    if (!a.error.empty()) aj["error"] = a.error;
    j["actions"].push_back(std::move(aj));
  }
  json delta = {{"messages", json::array()}, {"changes", json::array()}};
  for (const auto& m : s.delta.new_messages) delta["messages"].push_back(message_json(m));
  for (const auto& c : s.delta.state_changes) {
    delta["changes"].push_back({{"field", c.field}, {"old", c.old_value}, {"new", c.new_value}});
  }
  j["delta"] = std::move(delta);
  if (s.reflection) {
    j["reflection"] = {{"judgment", s.reflection->judgment == Judgment::Y ? "Y" : "N"},
                       {"rationale", s.reflection->rationale},
                       {"updates", s.reflection->updates}};
  }
  if (s.critique) j["critique"] = *s.critique;
  if (!s.notes.empty()) j["notes"] = s.notes;
  if (s.malformed) j["malformed"] = true;
  return j;
}

json footer_to_json(const EpisodeTrace& t) {
  json j = {{"type", "footer"},
            {"verdict", to_string(t.verdict)},
            {"steps", t.steps.size()},
            {"actions", t.action_count()},
            {"rejected", t.rejected_count()}};
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

std::string serialize(const EpisodeTrace& trace) {
  std::string out = header_to_json(trace.header).dump() + "\n";
  for (const auto& s : trace.steps) out += step_to_json(s).dump() + "\n";
  out += footer_to_json(trace).dump() + "\n";
  return out;
}

EpisodeTrace parse_trace(std::string_view jsonl) {
  EpisodeTrace t;
  bool header = false, footer = false;
  int line_no = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (j.at("schema").get<int>() != kTraceSchemaVersion) throw Error("unsupported trace schema");
        t.header.entry_id = j.at("entry_id").get<std::string>();
        t.header.strategy = parse_strategy(j.at("strategy").get<std::string>());
        const auto& f = j.at("flags");
        t.header.flags = {f.at("perception").get<bool>(), f.at("planning").get<bool>(),
                          f.at("reflection").get<bool>()};
        t.header.seed = j.at("seed").get<std::uint64_t>();
        t.header.instruction = j.at("instruction").get<std::string>();
        t.header.backend = j.value("backend", "");
        header = true;
      } else if (type == "step") {
        t.steps.push_back(step_from(j));
      } else if (type == "footer") {
        t.verdict = parse_verdict(j.at("verdict").get<std::string>());
        t.error = j.value("error", "");
        footer = true;
      }
      // Other event types (the live stream's finer-grained events) are ignored.
    } catch (const json::exception& e) {
      throw Error(fmt::format("trace line {}: {}", line_no, e.what()));
    } catch (const Error& e) {
      throw Error(fmt::format("trace line {}: {}", line_no, e.what()));
    }
  }
  if (!header) throw Error("trace has no header line");
  if (!footer) throw Error("trace has no footer line");
  return t;
}

EpisodeTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str());
}

void save_trace(const std::filesystem::path& path, const EpisodeTrace& trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace " + path.string());
  out << serialize(trace);
}

namespace {

void indent(std::string& out, std::string_view body) {
  for (const auto& line : text::split_lines(body)) out += "    " + line + "\n";
}

}  // namespace

std::string render_trace(const EpisodeTrace& trace, std::optional<int> only_step) {
  const auto& h = trace.header;
  std::string out = fmt::format("entry {}  strategy {}  modules {}  backend {}\ninstruction: {}\n", h.entry_id,
                                to_string(h.strategy), to_string(h.flags), h.backend.empty() ? "-" : h.backend,
                                h.instruction);
  for (const auto& s : trace.steps) {
    if (only_step && s.step != *only_step) continue;
    out += fmt::format("\n== step {}{}\n", s.step, s.malformed ? " (malformed)" : "");
    if (s.perception) {
      out += "  perception:\n";
      indent(out, s.perception->text());
    }
    if (s.plan) {
      out += "  plan:\n";
      indent(out, s.plan->text());
    }
    if (!s.thought.empty()) {
      out += "  thought:\n";
      indent(out, s.thought);
    }
    for (const auto& a : s.actions) {
      out += fmt::format("  {} {}", a.executed ? ">" : "x", actions::render_action(a.action));
      out += a.executed ? fmt::format("  [{}]\n", actions::to_string(a.outcome)) : fmt::format("  [rejected: {}]\n", a.error);
    }
    for (const auto& m : s.delta.new_messages) {
      out += fmt::format("  < {} -> {} ({}): {}\n", m.sender, m.recipient, memory::to_string(m.channel), m.content);
    }
    for (const auto& c : s.delta.state_changes) {
      out += fmt::format("  ~ {}: {} -> {}\n", c.field, c.old_value.empty() ? "-" : c.old_value,
                         c.new_value.empty() ? "-" : c.new_value);
    }
    if (s.reflection) {
      out += fmt::format("  reflection: {} {}\n", s.reflection->judgment == Judgment::Y ? "Y" : "N",
                         s.reflection->rationale);
      for (const auto& u : s.reflection->updates) out += "    update: " + u + "\n";
    }
    if (s.critique) out += "  critique: " + *s.critique + "\n";
    for (const auto& n : s.notes) out += "  note: " + n + "\n";
  }
  out += fmt::format("\nverdict: {}{}\n", to_string(trace.verdict), trace.error.empty() ? "" : " (" + trace.error + ")");
  return out;
}

}  // namespace deskmate::agents
