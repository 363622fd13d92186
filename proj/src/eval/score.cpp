#include <algorithm>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "deskmate/eval.hpp"

namespace deskmate::eval {

MatchCount best_match(const std::vector<std::vector<bool>>& can_match, const std::vector<TemplateShape>& shapes) {
  const std::size_t n = shapes.size();
  std::vector<int> orders;
  for (const auto& s : shapes) {
    if (s.order > 0) orders.push_back(s.order);
  }
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());

  // Per template: its group (-1 for unordered) and its bit within the group's mask.
  std::vector<int> group(n);
  std::vector<int> bit(n);
  std::map<int, int> next_bit;
  for (std::size_t t = 0; t < n; ++t) {
    group[t] = shapes[t].order > 0
                   ? static_cast<int>(std::lower_bound(orders.begin(), orders.end(), shapes[t].order) - orders.begin())
                   : -1;
    bit[t] = next_bit[group[t]]++;
    if (bit[t] >= 64) throw Error("too many templates in one order group");
  }

  // (current group, used mask in that group, used unordered mask)
  using State = std::tuple<int, std::uint64_t, std::uint64_t>;
  std::map<State, MatchCount> layer{{State{-1, 0, 0}, {}}};
  for (const auto& row : can_match) {
    auto next = layer;
    auto offer = [&](const State& s, MatchCount v) {
      auto [it, fresh] = next.emplace(s, v);
      if (!fresh && it->second < v) it->second = v;
    };
    for (const auto& [state, value] : layer) {
      const auto [g, gmask, umask] = state;
      for (std::size_t t = 0; t < n; ++t) {
        if (!row[t]) continue;
        MatchCount v = value;
        (shapes[t].required ? v.required : v.optional) += 1;
        const std::uint64_t b = std::uint64_t{1} << bit[t];
        if (group[t] < 0) {
          if (!(umask & b)) offer({g, gmask, umask | b}, v);
        } else if (group[t] == g) {
          if (!(gmask & b)) offer({g, gmask | b, umask}, v);
        } else if (group[t] > g) {
          offer({group[t], b, umask}, v);
        }
      }
    }
    layer = std::move(next);
  }
  MatchCount best;
  for (const auto& [state, value] : layer) best = std::max(best, value);
  return best;
}

EpisodeScore score_episode(const dataset::TaskEntry& entry, const std::vector<dataset::AdmissibleSet>& sets,
                           const agents::EpisodeTrace& trace, const memory::Scenario& scenario) {
  using actions::ActionKind;
  EpisodeScore score;
  score.entry_id = entry.id;
  score.level = entry.level;
  score.achievable = entry.achievable;
  score.verdict = trace.verdict;
  score.backend_failure = trace.error.starts_with("backend");

  std::vector<actions::Action> seq;
  int interactions = 0;
  for (const auto& step : trace.steps) {
    for (const auto& a : step.actions) {
      if (!a.executed || a.action.kind() == ActionKind::Wait) continue;
      if (a.action.kind() == ActionKind::Stop) {
        if (entry.achievable) continue;
      } else {
        ++interactions;
      }
      seq.push_back(a.action);
    }
  }

  bool have_best = false;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& templates = sets[i].templates;
    std::vector<TemplateShape> shapes;
    for (const auto& t : templates) shapes.push_back({t.order, t.required});
    std::vector<std::vector<bool>> can(seq.size(), std::vector<bool>(templates.size()));
    for (std::size_t a = 0; a < seq.size(); ++a) {
      for (std::size_t t = 0; t < templates.size(); ++t) can[a][t] = dataset::matches(templates[t], seq[a], scenario);
    }
    SetScore s;
    s.index = i;
    s.required_total = sets[i].required_count();
    s.matched = best_match(can, shapes);
    // In an unachievable set the only required template is the Stop.
    const int stop_matched = entry.achievable ? 0 : s.matched.required;
    s.redundant = interactions - (s.matched.required + s.matched.optional - stop_matched);

    auto key = [](const SetScore& x) {
      return std::make_tuple(-x.completion(), x.redundant, -x.required_total, x.index);
    };
    if (!have_best || key(s) < key(score.best)) {
      score.best = s;
      have_best = true;
    }
  }

  if (entry.achievable) {
    score.success = have_best && score.best.matched.required == score.best.required_total &&
                    trace.verdict == agents::Verdict::achieved;
  } else {
    score.success = trace.verdict == agents::Verdict::unachievable;
  }

  for (const auto& step : trace.steps) {
    for (const auto& a : step.actions) {
      const auto cls = actions::class_of(a.action);
      if (cls == actions::ActionClass::generic) continue;
      bool correct = a.executed && a.action.kind() == ActionKind::Wait;
      if (a.executed && !correct) {
        for (const auto& set : sets) {
          correct = std::any_of(set.templates.begin(), set.templates.end(),
                                [&](const auto& t) { return dataset::matches(t, a.action, scenario); });
          if (correct) break;
        }
      }
      if (cls == actions::ActionClass::cyber) {
        ++score.cyber_total;
        score.cyber_correct += correct;
      } else {
        ++score.real_total;
        score.real_correct += correct;
      }
    }
  }
  return score;
}

namespace {

std::string row_of(dataset::Level level) { return std::string(dataset::to_string(level)); }

}  // namespace

LevelMetrics aggregate(const std::vector<EpisodeScore>& scores) {
  struct Acc {
    int n = 0;
    double sr = 0, cr = 0, rr = 0;
    long cyber = 0, cyber_ok = 0, real = 0, real_ok = 0;
    void add(const EpisodeScore& s) {
      ++n;
      sr += s.success;
      cr += s.cr();
      rr += s.rr();
      cyber += s.cyber_total;
      cyber_ok += s.cyber_correct;
      real += s.real_total;
      real_ok += s.real_correct;
    }
  };
  std::map<std::string, Acc> acc;
  for (const auto& s : scores) {
    acc[row_of(s.level)].add(s);
    acc["Overall"].add(s);
  }
  LevelMetrics out;
  for (const auto& [row, a] : acc) {
    Metrics m;
    m.episodes = a.n;
    m.sr = a.sr / a.n;
    m.cr = a.cr / a.n;
    m.rr = a.rr / a.n;
    if (a.cyber) m.cta = static_cast<double>(a.cyber_ok) / a.cyber;
    if (a.real) m.rta = static_cast<double>(a.real_ok) / a.real;
    out[row] = m;
  }
  return out;
}

LevelMetrics average_runs(const std::vector<std::vector<EpisodeScore>>& runs) {
  if (runs.empty()) return {};
  auto ids = [](const std::vector<EpisodeScore>& run) {
    std::vector<std::string> v;
    for (const auto& s : run) v.push_back(s.entry_id);
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto first = ids(runs.front());
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (ids(runs[r]) != first) throw Error(fmt::format("run {} covers a different set of entries than run 1", r + 1));
  }

  std::vector<LevelMetrics> per_run;
  for (const auto& run : runs) per_run.push_back(aggregate(run));
  LevelMetrics out;
  for (const auto& [row, m0] : per_run.front()) {
    Metrics m;
    m.episodes = m0.episodes;
    double cta = 0, rta = 0;
    int cta_n = 0, rta_n = 0;
    for (const auto& lm : per_run) {
      const auto& x = lm.at(row);
      m.sr += x.sr / per_run.size();
      m.cr += x.cr / per_run.size();
      m.rr += x.rr / per_run.size();
      if (x.cta) cta += *x.cta, ++cta_n;
      if (x.rta) rta += *x.rta, ++rta_n;
    }
    if (cta_n) m.cta = cta / cta_n;
    if (rta_n) m.rta = rta / rta_n;
    out[row] = m;
  }
  return out;
}

}  // namespace deskmate::eval
