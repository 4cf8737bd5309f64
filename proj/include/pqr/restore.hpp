#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pqr/csv.hpp"
#include "pqr/error.hpp"
#include "pqr/event_log.hpp"
#include "pqr/pqr_model.hpp"
#include "pqr/time.hpp"

namespace pqr {

// A partial case completed to a source-to-sink path of the process skeleton.
struct CompletedCase {
  std::string pid;
  std::vector<std::size_t> transitions;
  // Index into the partial log for observed steps.
  std::vector<std::optional<std::size_t>> observed;
};

struct Completion {
  std::vector<CompletedCase> cases;
  std::vector<std::string> warnings;
};

namespace detail {

struct CaseCompletion {
  CompletedCase result;
  std::optional<std::string> warning;
};

// Shortest path through the product of skeleton transitions and the number of matched
// observed events; ties go to the smallest label sequence, then the smallest transition ids.
inline CaseCompletion complete_case(const PQRSystem& s, const MultiEntityLog& log, const std::string& pid,
                                    const std::vector<std::size_t>& idx) {
  const auto& ev = log.events();
  std::size_t k = idx.size();
  std::size_t n = s.transition_count();
  for (auto i : idx)
    if (!s.has_label(ev[i].act))
      throw RestoreError("event " + ev[i].id + ": label " + ev[i].act + " is not in the model");

  auto is_source = [&](std::size_t t) { return s.pre_places(t).empty(); };
  auto is_sink = [&](std::size_t t) { return s.post_places(t).empty(); };
  bool source_label = false, sink_label = false;
  for (auto t : s.transitions_with_label(ev[idx.front()].act)) source_label |= is_source(t);
  for (auto t : s.transitions_with_label(ev[idx.back()].act)) sink_label |= is_sink(t);
  if (!source_label)
    throw RestoreError("case " + pid + ": first observed event " + ev[idx.front()].id + " (" + ev[idx.front()].act +
                       ") is not an entry event");
  if (!sink_label)
    throw RestoreError("case " + pid + ": last observed event " + ev[idx.back()].id + " (" + ev[idx.back()].act +
                       ") is not an exit event");

  // State (t, j): path ends at t with j observed events matched; the j-th was matched at or before t.
  auto id = [&](std::size_t t, std::size_t j) { return t * (k + 1) + j; };
  std::size_t states = n * (k + 1);
  auto next_states = [&](std::size_t t, std::size_t j) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (j == k) return out;
    for (auto t2 : s.successors(t)) {
      if (s.transition(t2).label == ev[idx[j]].act) out.emplace_back(t2, j + 1);
      out.emplace_back(t2, j);
    }
    return out;
  };
  auto goal = [&](std::size_t t, std::size_t j) { return j == k && is_sink(t); };

  // Distance to a goal, by reverse relaxation over the acyclic product.
  constexpr std::size_t inf = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(states, inf);
  std::vector<int> count(states, 0);
  std::vector<std::vector<std::size_t>> preds(states);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j <= k; ++j)
      for (auto [t2, j2] : next_states(t, j)) preds[id(t2, j2)].push_back(id(t, j));
  std::vector<std::size_t> frontier;
  for (std::size_t t = 0; t < n; ++t)
    if (goal(t, k)) {
      dist[id(t, k)] = 0;
      count[id(t, k)] = 1;
      frontier.push_back(id(t, k));
    }
  for (std::size_t d = 0; !frontier.empty(); ++d) {
    std::vector<std::size_t> next;
    for (auto v : frontier)
      for (auto u : preds[v])
        if (dist[u] == inf) {
          dist[u] = d + 1;
          next.push_back(u);
        }
    frontier = std::move(next);
  }

  std::size_t best = inf;
  std::vector<std::size_t> starts;
  for (std::size_t t = 0; t < n; ++t)
    if (is_source(t) && s.transition(t).label == ev[idx.front()].act) {
      auto v = id(t, 1);
      if (dist[v] == inf) continue;
      if (dist[v] < best) {
        best = dist[v];
        starts.clear();
      }
      if (dist[v] == best) starts.push_back(v);
    }
  if (starts.empty())
    throw RestoreError("case " + pid + ": no path through the model connects the observed events");

  // Count shortest completions (saturating) to flag ambiguity.
  std::vector<int> ways(states, -1);
  std::function<int(std::size_t)> ways_from = [&](std::size_t v) -> int {
    if (ways[v] >= 0) return ways[v];
    if (dist[v] == 0) return ways[v] = 1;
    int c = 0;
    for (auto [t2, j2] : next_states(v / (k + 1), v % (k + 1))) {
      auto w = id(t2, j2);
      if (dist[w] != inf && dist[w] + 1 == dist[v]) c = std::min(2, c + ways_from(w));
    }
    return ways[v] = c;
  };
  int total = 0;
  for (auto v : starts) total = std::min(2, total + ways_from(v));

  // Greedy on labels over the shortest-path layers, keeping the smallest id path per state.
  std::map<std::size_t, std::vector<std::size_t>> layer;
  {
    std::string lbl;
    for (auto v : starts) {
      const auto& l = s.transition(v / (k + 1)).label;
      if (lbl.empty() || l < lbl) lbl = l;
    }
    for (auto v : starts)
      if (s.transition(v / (k + 1)).label == lbl) layer[v] = {v};
  }
  while (dist[layer.begin()->first] != 0) {
    std::optional<std::string> lbl;
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> cand;
    for (const auto& [v, path] : layer)
      for (auto [t2, j2] : next_states(v / (k + 1), v % (k + 1))) {
        auto w = id(t2, j2);
        if (dist[w] == inf || dist[w] + 1 != dist[v]) continue;
        const auto& l = s.transition(t2).label;
        if (!lbl || l < *lbl) lbl = l;
        auto p = path;
        p.push_back(w);
        cand.emplace_back(w, std::move(p));
      }
    std::map<std::size_t, std::vector<std::size_t>> next;
    for (auto& [w, p] : cand) {
      if (s.transition(w / (k + 1)).label != *lbl) continue;
      auto it = next.find(w);
      if (it == next.end() || p < it->second) next[w] = std::move(p);
    }
    layer = std::move(next);
  }
  // All surviving states are goals; pick the smallest transition sequence.
  const std::vector<std::size_t>* chosen = nullptr;
  std::vector<std::vector<std::size_t>> as_transitions;
  for (const auto& [v, path] : layer) {
    std::vector<std::size_t> ts;
    for (auto x : path) ts.push_back(x / (k + 1));
    as_transitions.push_back(std::move(ts));
  }
  std::size_t pick = 0;
  for (std::size_t i = 1; i < as_transitions.size(); ++i)
    if (as_transitions[i] < as_transitions[pick]) pick = i;
  chosen = &std::next(layer.begin(), static_cast<std::ptrdiff_t>(pick))->second;

  CaseCompletion out;
  out.result.pid = pid;
  std::size_t prev_j = 0;
  for (auto v : *chosen) {
    std::size_t t = v / (k + 1), j = v % (k + 1);
    out.result.transitions.push_back(t);
    if (j != prev_j) out.result.observed.push_back(idx[j - 1]);
    else out.result.observed.push_back(std::nullopt);
    prev_j = j;
  }
  if (total > 1) {
    std::string labels;
    for (auto t : out.result.transitions) labels += (labels.empty() ? "" : ",") + s.transition(t).id;
    out.warning = "case " + pid + ": several minimal completions, chose " + labels;
  }
  return out;
}

}  // namespace detail

// Completes every partial process trace. jobs > 1 completes cases on worker threads.
inline Completion oracle_o1(const MultiEntityLog& partial, const PQRSystem& system, unsigned jobs = 1) {
  if (!system.acyclic()) throw RestoreError("process proclet is cyclic");
  if (!partial.entity_types().count(EntityType::pid)) throw RestoreError("partial log has no pid column");
  auto corr = correlate(partial, EntityType::pid);
  if (!corr.untimed.empty())
    throw RestoreError("observed event " + partial.events()[corr.untimed.begin()->second.front()].id +
                       " has no timestamp");
  for (const auto& e : partial.events())
    if (!e.pid) throw RestoreError("observed event " + e.id + " has no pid");
  for (const auto& [pid, idx] : corr.timed)
    for (std::size_t i = 1; i < idx.size(); ++i)
      if (partial.events()[idx[i]].time == partial.events()[idx[i - 1]].time)
        throw RestoreError("case " + pid + ": events " + partial.events()[idx[i - 1]].id + " and " +
                           partial.events()[idx[i]].id + " share a timestamp");

  std::vector<std::pair<std::string, std::vector<std::size_t>>> work(corr.timed.begin(), corr.timed.end());
  std::vector<std::optional<detail::CaseCompletion>> results(work.size());
  std::vector<std::optional<std::string>> errors(work.size());
  auto run_range = [&](std::size_t from, std::size_t step) {
    for (std::size_t i = from; i < work.size(); i += step) {
      try {
        results[i] = detail::complete_case(system, partial, work[i].first, work[i].second);
      } catch (const RestoreError& e) {
        errors[i] = e.what();
      }
    }
  };
  unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(work.size())));
  if (n == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(run_range, w, n);
    for (auto& th : pool) th.join();
  }
  Completion out;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (errors[i]) throw RestoreError(*errors[i]);
    if (results[i]->warning) out.warnings.push_back(*results[i]->warning);
    out.cases.push_back(std::move(results[i]->result));
  }
  return out;
}

struct RunEvent {
  std::string id;
  std::string act;
  std::string pid;
  std::optional<Millis> time;
  std::optional<std::size_t> source;  // index in the partial log
  StepBinding binding;
  std::size_t case_index = 0;
  std::size_t position = 0;
  std::map<std::string, std::string> extra;

  bool observed() const { return source.has_value(); }
  // Queue the event takes part in: incoming for start and sink events, outgoing otherwise.
  std::optional<std::string> qid() const {
    if (binding.kind == TransitionKind::start || binding.kind == TransitionKind::sink) return binding.qid_in;
    return binding.qid_out;
  }
};

struct OrderEdge {
  std::size_t from;
  std::size_t to;
  EntityType et;
  std::string id;
};

struct IntermediateRun {
  std::vector<RunEvent> events;
  std::vector<std::vector<std::size_t>> cases;
  std::vector<OrderEdge> order;
  std::vector<std::string> warnings;
};

inline IntermediateRun oracle_o2(const Completion& completion, const MultiEntityLog& partial,
                                 const PQRSystem& system) {
  IntermediateRun run;
  run.warnings = completion.warnings;
  for (std::size_t c = 0; c < completion.cases.size(); ++c) {
    const auto& cc = completion.cases[c];
    std::vector<std::size_t> trace;
    for (std::size_t i = 0; i < cc.transitions.size(); ++i) {
      RunEvent e;
      e.binding = system.binding(cc.transitions[i]);
      e.act = e.binding.label;
      e.pid = cc.pid;
      e.case_index = c;
      e.position = i;
      if (cc.observed[i]) {
        const auto& src = partial.events()[*cc.observed[i]];
        e.id = src.id;
        e.time = src.time;
        e.source = cc.observed[i];
        e.extra = src.extra;
      } else {
        e.id = "u:" + cc.pid + ":" + std::to_string(i);
      }
      if (i) run.order.push_back({run.events.size() - 1, run.events.size(), EntityType::pid, cc.pid});
      trace.push_back(run.events.size());
      run.events.push_back(std::move(e));
    }
    run.cases.push_back(std::move(trace));
  }
  for (auto et : {EntityType::rid, EntityType::qid}) {
    std::map<std::string, std::vector<std::size_t>> by_id;
    for (std::size_t i = 0; i < run.events.size(); ++i) {
      const auto& e = run.events[i];
      if (!e.observed()) continue;
      auto id = et == EntityType::rid ? e.binding.rid : e.qid();
      if (id) by_id[*id].push_back(i);
    }
    for (auto& [id, idx] : by_id) {
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return *run.events[a].time < *run.events[b].time; });
      for (std::size_t k = 1; k < idx.size(); ++k) run.order.push_back({idx[k - 1], idx[k], et, id});
    }
  }
  return run;
}

inline IntermediateRun restore(const MultiEntityLog& partial, const PQRSystem& system, unsigned jobs = 1) {
  return oracle_o2(oracle_o1(partial, system, jobs), partial, system);
}

inline bool order_is_acyclic(const IntermediateRun& run) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& e : run.order) edges.emplace_back(e.from, e.to);
  return is_acyclic(run.events.size(), edges);
}

// Start events and atomic events of one case, in trace order.
inline std::vector<std::size_t> start_subtrace(const IntermediateRun& run, std::size_t c) {
  std::vector<std::size_t> theta;
  const auto& trace = run.cases.at(c);
  std::optional<std::string> open;
  for (auto i : trace) {
    const auto& b = run.events[i].binding;
    switch (b.role) {
      case Role::start:
        if (open) throw RestoreError("event " + run.events[i].id + " starts " + b.stage + " while " + *open + " is open");
        open = b.stage;
        theta.push_back(i);
        break;
      case Role::complete:
        if (open != b.stage) throw RestoreError("event " + run.events[i].id + " completes " + b.stage + " without a start");
        open.reset();
        break;
      case Role::atomic:
        if (open) throw RestoreError("event " + run.events[i].id + " occurs while " + *open + " is open");
        theta.push_back(i);
        break;
    }
  }
  if (open) throw RestoreError("case " + run.events[trace.front()].pid + " ends while " + *open + " is open");
  return theta;
}

inline void write_intermediate(std::ostream& out, const IntermediateRun& run) {
  csv::write_row(out, {"event_id", "pid", "activity", "time", "rid", "qid", "role", "transition", "tsr", "twr", "twq"});
  for (const auto& trace : run.cases)
    for (auto i : trace) {
      const auto& e = run.events[i];
      csv::write_row(out, {e.id, e.pid, e.act, e.time ? format_time(*e.time) : "", e.binding.rid.value_or(""),
                           e.qid().value_or(""), std::string(to_string(e.binding.role)), e.binding.transition,
                           std::to_string(e.binding.tsr), std::to_string(e.binding.twr),
                           std::to_string(e.binding.twq_in)});
    }
}

}  // namespace pqr
