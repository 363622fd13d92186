#include <fmt/format.h>
#include <fmt/ranges.h>

#include "deskmate/agents.hpp"
#include "deskmate/text.hpp"

namespace deskmate::agents {

namespace {

using actions::Action;
using llm::ChatTurn;
using llm::RoleTag;

std::string render_delta(const memory::IncrementalInfo& delta, const memory::TopoGraph& graph,
                         const std::vector<memory::ChatGroup>& groups) {
  if (delta.empty()) return "nothing new\n";
  std::string out;
  for (const auto& m : delta.new_messages) {
    out += fmt::format("{} -> {}{}: {}\n", memory::display_name_of(graph, groups, m.sender),
                       memory::display_name_of(graph, groups, m.recipient),
                       m.channel == memory::Channel::group ? " (group)" : "", m.content);
  }
  for (const auto& c : delta.state_changes) {
    out += fmt::format("{}: {} -> {}\n", c.field, c.old_value.empty() ? "-" : c.old_value,
                       c.new_value.empty() ? "-" : c.new_value);
  }
  return out;
}

std::string render_actions(const std::vector<StepAction>& actions) {
  if (actions.empty()) return "none\n";
  std::string out;
  for (const auto& a : actions) {
    out += actions::render_action(a.action);
    out += a.executed ? fmt::format("  [{}]\n", actions::to_string(a.outcome)) : "  [rejected: " + a.error + "]\n";
  }
  return out;
}

class Episode {
 public:
  Episode(const EpisodeInput& input, sim::World& world, memory::Memory& memory, llm::ChatBackend& backend,
          const AgentConfig& config, EpisodeObserver* observer)
      : world_(world), memory_(memory), backend_(backend), config_(config), observer_(observer) {
    trace_.header = {input.entry_id, config.strategy, config.flags, config.seed, input.instruction, backend.id()};
    memory_.reset_short_term();
    memory_.set_instruction(input.instruction);
  }

  EpisodeTrace run() {
    if (observer_) observer_->on_header(trace_.header);
    try {
      switch (config_.strategy) {
        case Strategy::ppdr: run_ppdr(); break;
        case Strategy::direct:
        case Strategy::cot: run_upfront(); break;
        case Strategy::react:
        case Strategy::reflexion: run_stepwise(); break;
      }
    } catch (const llm::BackendError& e) {
      trace_.error = fmt::format("backend {}: {}", llm::to_string(e.code()), e.what());
      // The step in flight is kept so the trace shows what was executed.
      if (pending_) finish_step(*pending_);
    }
    if (stop_) {
      trace_.verdict = *stop_ == actions::StopOutcome::achieved ? Verdict::achieved : Verdict::unachievable;
    } else {
      trace_.verdict = Verdict::exhausted;
      if (trace_.error.empty()) {
        trace_.error = malformed_run_ >= config_.max_consecutive_malformed
                           ? fmt::format("{} consecutive malformed steps", malformed_run_)
                       : static_cast<int>(trace_.steps.size()) >= config_.max_steps
                           ? fmt::format("no Stop within {} steps", config_.max_steps)
                           : std::string("action list ended without Stop");
      }
    }
    if (observer_) observer_->on_footer(trace_);
    return std::move(trace_);
  }

 private:
  bool out_of_budget() {
    if (!stop_ && observer_ && observer_->cancelled()) {
      if (trace_.error.empty()) trace_.error = "cancelled";
      return true;
    }
    return stop_ || malformed_run_ >= config_.max_consecutive_malformed ||
           static_cast<int>(trace_.steps.size()) >= config_.max_steps;
  }

  StepRecord& begin_step() {
    pending_ = StepRecord{};
    pending_->step = static_cast<int>(trace_.steps.size()) + 1;
    return *pending_;
  }

  void finish_step(StepRecord& rec) {
    malformed_run_ = rec.malformed ? malformed_run_ + 1 : 0;
    memory::StepSummary summary{rec.step, "", {}, ""};
    summary.thought = rec.plan && !rec.plan->roadmap.empty() ? rec.plan->roadmap.front() : rec.thought;
    for (const auto& a : rec.actions) {
      summary.actions.push_back((a.executed ? "" : "rejected: ") + actions::render_action(a.action));
    }
    if (rec.reflection) {
      summary.reflection = (rec.reflection->judgment == Judgment::Y ? "Y: " : "N: ") + rec.reflection->rationale;
    } else if (rec.critique) {
      summary.reflection = *rec.critique;
    }
    if (rec.malformed) summary.thought = "(malformed output, nothing executed)";
    memory_.append_trace(std::move(summary));
    trace_.steps.push_back(std::move(rec));
    pending_.reset();
    if (observer_) observer_->on_step(trace_.steps.back());
  }

  // One call plus one corrective retry. Returns nullopt when both replies are malformed.
  template <typename Parse>
  auto ask(RoleTag role, const std::string& system, std::vector<ChatTurn> context, Parse parse, StepRecord& rec,
           std::string* raw = nullptr) -> std::optional<decltype(parse(std::string_view{}))> {
    for (int attempt = 0; attempt < 2; ++attempt) {
      auto response = backend_.complete({role, system, context});
      try {
        auto parsed = parse(response.text);
        if (raw) *raw = response.text;
        return parsed;
      } catch (const MalformedOutput& e) {
        rec.notes.push_back(fmt::format("{} output malformed: {}", llm::to_string(role), e.what()));
        context.push_back({"assistant", response.text});
        context.push_back(
            {"user", fmt::format("Your reply could not be parsed ({}). Reply again in the required format.", e.what())});
      }
    }
    return std::nullopt;
  }

  std::string memory_text(int step) const { return memory::render_text(memory_.snapshot(step), config_.render); }

  void execute(StepRecord& rec, const std::vector<Action>& batch) {
    int skipped = 0;
    for (const auto& action : batch) {
      if (stop_) {
        ++skipped;
        continue;
      }
      StepAction sa{action, true, "", actions::ExecOutcome::done};
      std::vector<sim::SimEvent> events;
      try {
        actions::validate(action, memory_.graph(), memory_.groups());
        auto result = world_.execute(action);
        sa.outcome = result.status;
        events = std::move(result.events);
      } catch (const actions::ValidationError& e) {
        sa.executed = false;
        sa.error = fmt::format("{}: {}", actions::to_string(e.code()), e.what());
      } catch (const Error& e) {
        sa.executed = false;
        sa.error = fmt::format("sim: {}", e.what());
      }
      for (const auto& ev : events) {
        if (const auto* m = std::get_if<memory::DialogueMessage>(&ev)) {
          memory_.record_message(*m);
        } else {
          memory_.record_state_change(std::get<memory::StateChange>(ev));
        }
      }
      if (sa.executed) {
        if (action.kind() == actions::ActionKind::Inform || action.kind() == actions::ActionKind::Inquire) {
          if (auto id = memory_.graph().resolve_name(*action.param("contact"))) contacted_.insert(*id);
        }
        if (const auto* stop = action.get_if<actions::Stop>(); stop && sa.outcome == actions::ExecOutcome::terminated) {
          stop_ = stop->outcome;
        }
      }
      if (observer_) observer_->on_action(rec.step, sa, events);
      rec.actions.push_back(std::move(sa));
    }
    if (skipped > 0) rec.notes.push_back(fmt::format("ignored {} action(s) after Stop", skipped));
  }

  void apply_reflection(ReflectionOutput& r, StepRecord& rec) {
    if (r.result.judgment == Judgment::Y) {
      if (!r.unavailable.empty()) rec.notes.push_back("UNAVAILABLE lines ignored on a Y judgment");
      return;
    }
    for (const auto& name : r.unavailable) {
      auto id = memory_.graph().resolve_name(name);
      const auto* node = id ? memory_.graph().find(*id) : nullptr;
      if (!node || node->kind != memory::NodeKind::human) {
        rec.notes.push_back("reflection names unknown person '" + name + "'");
        continue;
      }
      if (memory_.graph().is_available(*id)) {
        memory_.graph().set_availability(*id, false);
        r.result.updates.push_back(id->str() + " unavailable");
      }
    }
  }

  // Perceive, plan, decide, execute, reflect.
  void run_ppdr() {
    const auto& f = config_.flags;
    while (!out_of_budget()) {
      auto& rec = begin_step();
      const auto before = memory_.snapshot(rec.step);
      const auto mem = memory::render_text(before, config_.render);

      if (f.perception) {
        rec.perception = ask(RoleTag::perception, system_prompt("perception"), {{"user", mem}}, parse_perception, rec);
        if (!rec.perception) {
          rec.malformed = true;
          finish_step(rec);
          continue;
        }
        if (observer_) observer_->on_perception(rec.step, *rec.perception);
      }
      std::string focus = mem;
      if (rec.perception) focus += "\n## Perception\n" + rec.perception->text();

      if (f.planning) {
        rec.plan = ask(RoleTag::planning, system_prompt("planning"), {{"user", focus}}, parse_plan, rec);
        if (!rec.plan) {
          rec.malformed = true;
          finish_step(rec);
          continue;
        }
        if (observer_) observer_->on_plan(rec.step, *rec.plan);
        focus += "\n## Plan\n" + rec.plan->text();
      }

      const int cap = config_.max_actions_per_step;
      auto parse = [cap](std::string_view r) { return parse_decision(r, cap); };
      std::string raw;
      auto decision = ask(RoleTag::decision, system_prompt("decision"), {{"user", focus}}, parse, rec, &raw);
      if (!decision) {
        rec.malformed = true;
        finish_step(rec);
        continue;
      }
      if (auto off = lint_moves(decision->actions, contacted_, memory_.graph()); !off.empty()) {
        const auto who = fmt::format("{}", fmt::join(off, ", "));
        rec.notes.push_back("lint: Move toward " + who + " without telling them first; re-prompting");
        std::vector<ChatTurn> context{
            {"user", focus},
            {"assistant", raw},
            {"user", fmt::format("Constraint violated: Inform or Inquire {} before moving the robot to them. "
                                 "Write the corrected actions.",
                                 who)}};
        if (auto fixed = ask(RoleTag::decision, system_prompt("decision"), context, parse, rec)) {
          if (!lint_moves(fixed->actions, contacted_, memory_.graph()).empty()) {
            rec.notes.push_back("lint: corrected decision still moves without notice; executing it");
          }
          decision = std::move(fixed);
        } else {
          rec.notes.push_back("lint: corrective reply malformed; executing the first decision");
        }
      }
      rec.thought = decision->thought;
      rec.notes.insert(rec.notes.end(), decision->notes.begin(), decision->notes.end());

      execute(rec, decision->actions);
      rec.delta = memory_.delta_since(before);

      const bool any_executed =
          std::any_of(rec.actions.begin(), rec.actions.end(), [](const StepAction& a) { return a.executed; });
      if (f.reflection && any_executed && !stop_) {
        std::string context = memory_text(rec.step);
        if (rec.plan) context += "\n## Plan\n" + rec.plan->text();
        context += "\n## Executed this step\n" + render_actions(rec.actions);
        context += "\n## New information\n" + render_delta(rec.delta, memory_.graph(), memory_.groups());
        auto reflection = ask(RoleTag::reflection, system_prompt("reflection"), {{"user", context}}, parse_reflection, rec);
        if (!reflection) {
          rec.malformed = true;
        } else {
          apply_reflection(*reflection, rec);
          rec.reflection = reflection->result;
          if (observer_) observer_->on_reflection(rec.step, *rec.reflection);
        }
      }
      finish_step(rec);
    }
  }

  // Direct and chain-of-thought: one reply with the whole action list, then
  // one action per step.
  void run_upfront() {
    const auto system = system_prompt(config_.strategy == Strategy::cot ? "cot" : "direct");
    std::optional<Decision> decision;
    while (!decision && !out_of_budget()) {
      auto& rec = begin_step();
      decision = ask(RoleTag::decision, system, {{"user", memory_text(rec.step)}},
                     [](std::string_view r) { return parse_decision(r, 0); }, rec);
      if (!decision) {
        rec.malformed = true;
        finish_step(rec);
      }
    }
    if (!decision) return;
    bool first = true;
    for (const auto& action : decision->actions) {
      if (stop_) break;
      if (!first && out_of_budget()) {
        trace_.steps.back().notes.push_back("action list longer than the step budget");
        break;
      }
      auto& rec = first ? *pending_ : begin_step();
      if (first) {
        rec.thought = decision->thought;
        rec.notes.insert(rec.notes.end(), decision->notes.begin(), decision->notes.end());
      }
      first = false;
      const auto before = memory_.snapshot(rec.step);
      execute(rec, {action});
      rec.delta = memory_.delta_since(before);
      finish_step(rec);
    }
  }

  // ReAct, optionally with a reflexion critique after every step.
  void run_stepwise() {
    const bool critique = config_.strategy == Strategy::reflexion;
    const int cap = config_.max_actions_per_step;
    std::string observation = "none\n";
    std::vector<std::string> lessons;
    while (!out_of_budget()) {
      auto& rec = begin_step();
      const auto before = memory_.snapshot(rec.step);
      std::string context = memory::render_text(before, config_.render) + "\n## Last observation\n" + observation;
      if (!lessons.empty()) {
        context += "\n## Lessons so far\n";
        for (const auto& l : lessons) context += "- " + l + "\n";
      }
      auto decision = ask(RoleTag::decision, system_prompt("react"), {{"user", context}},
                          [cap](std::string_view r) { return parse_decision(r, cap); }, rec);
      if (!decision) {
        rec.malformed = true;
        finish_step(rec);
        continue;
      }
      rec.thought = decision->thought;
      rec.notes.insert(rec.notes.end(), decision->notes.begin(), decision->notes.end());
      execute(rec, decision->actions);
      rec.delta = memory_.delta_since(before);
      observation = render_actions(rec.actions) + render_delta(rec.delta, memory_.graph(), memory_.groups());

      if (critique && !stop_) {
        std::string review = memory_text(rec.step) + "\n## Executed this step\n" + observation;
        auto text = ask(RoleTag::reflection, std::string(text::trim(prompt("reflexion"))), {{"user", review}},
                        [](std::string_view r) {
                          auto t = text::trim(r);
                          if (t.empty()) throw MalformedOutput("empty critique");
                          return std::string(t);
                        },
                        rec);
        if (text) {
          rec.critique = *text;
          lessons.push_back(*text);
        } else {
          rec.malformed = true;
        }
      }
      finish_step(rec);
    }
  }

  sim::World& world_;
  memory::Memory& memory_;
  llm::ChatBackend& backend_;
  const AgentConfig& config_;
  EpisodeObserver* observer_;
  EpisodeTrace trace_;
  std::optional<StepRecord> pending_;
  std::set<memory::EntityId> contacted_;
  std::optional<actions::StopOutcome> stop_;
  int malformed_run_ = 0;
};

}  // namespace

EpisodeTrace run_episode(const EpisodeInput& input, sim::World& world, memory::Memory& memory,
                         llm::ChatBackend& backend, const AgentConfig& config, EpisodeObserver* observer) {
  return Episode(input, world, memory, backend, config, observer).run();
}

}  // namespace deskmate::agents
