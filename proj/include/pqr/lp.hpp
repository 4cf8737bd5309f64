#pragma once

#include <algorithm>
#include <cctype>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "pqr/error.hpp"
#include "pqr/event_log.hpp"
#include "pqr/restore.hpp"
#include "pqr/time.hpp"

namespace pqr {

enum class Bound { tmin, tmax };

inline std::string_view to_string(Bound b) { return b == Bound::tmin ? "tmin" : "tmax"; }

struct VarRef {
  std::size_t slot;
  Bound which;
  auto operator<=>(const VarRef&) const = default;
};

enum class Origin { case_chain, fifo, interval };

inline std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::case_chain: return "case_chain";
    case Origin::fifo: return "fifo";
    case Origin::interval: return "interval";
  }
  return "?";
}

// lhs <= rhs + offset
struct Constraint {
  VarRef lhs;
  VarRef rhs;
  Millis offset = 0;
  Origin origin = Origin::case_chain;
  bool operator==(const Constraint&) const = default;
};

// One slot per start or atomic event; complete events are start + tsr.
struct Slot {
  std::size_t event;
  std::string event_id;
  std::optional<std::size_t> complete;
};

struct ConstraintSet {
  std::vector<Slot> slots;
  std::map<VarRef, Millis> fixed;
  std::vector<Constraint> constraints;

  std::size_t variable_count() const { return slots.size() * 2; }
};

struct Solution {
  bool feasible = false;
  std::vector<std::pair<Millis, Millis>> bounds;
  Millis objective = 0;
  std::vector<Constraint> culprits;
  std::string message;
};

namespace detail {

struct Stage {
  std::size_t slot;
  std::size_t position;
};

}  // namespace detail

inline ConstraintSet generate_constraints(const IntermediateRun& run, const PQRSystem& system) {
  if (!system.acyclic()) throw ConstraintError("process proclet is cyclic");
  ConstraintSet cs;
  std::vector<std::vector<std::size_t>> theta(run.cases.size());
  std::vector<std::map<std::string, detail::Stage>> stages(run.cases.size());

  for (std::size_t c = 0; c < run.cases.size(); ++c) {
    std::vector<std::size_t> th;
    try {
      th = start_subtrace(run, c);
    } catch (const RestoreError& e) {
      throw ConstraintError(e.what());
    }
    for (std::size_t k = 0; k < th.size(); ++k) {
      const auto& e = run.events[th[k]];
      if (e.binding.transition.empty()) throw ConstraintError("event " + e.id + " has no annotation");
      Slot s{th[k], e.id, std::nullopt};
      if (e.binding.role == Role::start) {
        const auto& trace = run.cases[c];
        auto pos = static_cast<std::size_t>(std::find(trace.begin(), trace.end(), th[k]) - trace.begin());
        s.complete = trace.at(pos + 1);
      }
      std::size_t slot = cs.slots.size();
      theta[c].push_back(slot);
      stages[c][e.binding.stage] = {slot, k};
      cs.slots.push_back(s);

      std::optional<Millis> anchor;
      if (e.time) anchor = *e.time;
      if (s.complete) {
        const auto& ce = run.events[*s.complete];
        if (ce.time) {
          Millis from_complete = *ce.time - e.binding.tsr;
          if (anchor && *anchor > from_complete)
            throw ConstraintError("event " + ce.id + " completes " + std::to_string(*anchor - from_complete) +
                                  " ms faster than the minimum service time");
          if (!anchor) anchor = from_complete;
        }
      }
      if (anchor) {
        cs.fixed[{slot, Bound::tmin}] = *anchor;
        cs.fixed[{slot, Bound::tmax}] = *anchor;
      }
    }
    for (std::size_t k = 1; k < th.size(); ++k) {
      const auto& prev = run.events[th[k - 1]].binding;
      const auto& cur = run.events[th[k]].binding;
      Millis d = prev.tsr + cur.twq_in;
      std::size_t a = theta[c][k - 1], b = theta[c][k];
      cs.constraints.push_back({{a, Bound::tmin}, {b, Bound::tmin}, -d, Origin::case_chain});
      cs.constraints.push_back({{a, Bound::tmax}, {b, Bound::tmax}, -d, Origin::case_chain});
    }
  }

  // Case order at an observed stage carries over to every stage joined to it by a unique path,
  // provided both cases take the same route between the two stages.
  std::map<std::string, std::vector<std::size_t>> observed_at;
  for (std::size_t c = 0; c < run.cases.size(); ++c)
    for (const auto& [stage, st] : stages[c])
      if (cs.fixed.count({st.slot, Bound::tmin})) observed_at[stage].push_back(c);

  std::set<std::tuple<std::size_t, std::size_t, Millis>> seen;
  for (const auto& [x, cases] : observed_at) {
    std::map<std::tuple<std::string, bool, std::string>, std::vector<std::size_t>> groups;
    for (auto c : cases) {
      const auto& sx = stages[c].at(x);
      const auto& bx = run.events[cs.slots[sx.slot].event].binding;
      for (const auto& [y, sy] : stages[c]) {
        const auto& by = run.events[cs.slots[sy.slot].event].binding;
        bool y_later = sy.position > sx.position;
        const auto& early = y_later ? bx : by;
        const auto& late = y_later ? by : bx;
        if (x != y && !system.fifo(system.require_transition(early.transition), system.require_transition(late.transition)))
          continue;
        groups[{y, y_later, x == y ? std::string() : late.transition}].push_back(c);
      }
    }
    for (auto& [key, members] : groups) {
      const auto& y = std::get<0>(key);
      auto x_time = [&](std::size_t c) { return cs.fixed.at({stages[c].at(x).slot, Bound::tmin}); };
      std::stable_sort(members.begin(), members.end(),
                       [&](std::size_t a, std::size_t b) { return x_time(a) < x_time(b); });
      // Cases tied at x are unordered; each is linked to every case of the next tie block.
      std::size_t prev = 0, cur = 0;
      while (cur < members.size()) {
        std::size_t next = cur;
        while (next < members.size() && x_time(members[next]) == x_time(members[cur])) ++next;
        for (std::size_t i = prev; i < cur; ++i)
          for (std::size_t j = cur; j < next; ++j) {
            std::size_t p1 = stages[members[i]].at(y).slot, p2 = stages[members[j]].at(y).slot;
            const auto& f = run.events[cs.slots[p1].event].binding;
            Millis d = f.tsr + f.twr;
            if (!seen.insert({p1, p2, d}).second) continue;
            cs.constraints.push_back({{p1, Bound::tmin}, {p2, Bound::tmin}, -d, Origin::fifo});
            cs.constraints.push_back({{p1, Bound::tmax}, {p2, Bound::tmax}, -d, Origin::fifo});
          }
        prev = cur;
        cur = next;
      }
    }
  }

  for (std::size_t s = 0; s < cs.slots.size(); ++s)
    cs.constraints.push_back({{s, Bound::tmin}, {s, Bound::tmax}, 0, Origin::interval});
  return cs;
}

namespace detail {

inline std::string describe(const ConstraintSet& cs, const Constraint& c) {
  auto v = [&](VarRef r) { return cs.slots[r.slot].event_id + "." + std::string(to_string(r.which)); };
  std::string s = v(c.lhs) + " <= " + v(c.rhs);
  if (c.offset > 0) s += " + " + std::to_string(c.offset);
  if (c.offset < 0) s += " - " + std::to_string(-c.offset);
  return s + " (" + std::string(to_string(c.origin)) + ")";
}

// Propagation over one role. tmin: least values (longest paths forward); tmax: greatest values
// (shortest paths backward). Returns the index of a violated fixed variable on failure.
struct Propagation {
  std::vector<std::optional<Millis>> value;
  std::vector<std::optional<std::size_t>> reason;  // constraint index
  std::optional<std::size_t> violated;
  std::optional<std::size_t> cycle_at;
};

inline Propagation propagate(const ConstraintSet& cs, Bound which) {
  std::size_t n = cs.slots.size();
  Propagation p;
  p.value.assign(n, std::nullopt);
  p.reason.assign(n, std::nullopt);
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < cs.constraints.size(); ++i) {
    const auto& c = cs.constraints[i];
    if (c.lhs.which != which || c.rhs.which != which) continue;
    out[which == Bound::tmin ? c.lhs.slot : c.rhs.slot].push_back(i);
  }
  std::vector<bool> fixed(n, false);
  std::deque<std::size_t> queue;
  std::vector<bool> queued(n, false);
  std::vector<std::size_t> updates(n, 0);
  for (const auto& [v, t] : cs.fixed)
    if (v.which == which) {
      fixed[v.slot] = true;
      p.value[v.slot] = t;
      queue.push_back(v.slot);
      queued[v.slot] = true;
    }
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    queued[u] = false;
    for (auto ci : out[u]) {
      const auto& c = cs.constraints[ci];
      std::size_t w = which == Bound::tmin ? c.rhs.slot : c.lhs.slot;
      Millis cand = which == Bound::tmin ? *p.value[u] - c.offset : *p.value[u] + c.offset;
      bool better = !p.value[w] || (which == Bound::tmin ? cand > *p.value[w] : cand < *p.value[w]);
      if (!better) continue;
      if (fixed[w]) {
        p.reason[w] = ci;
        p.violated = w;
        return p;
      }
      p.value[w] = cand;
      p.reason[w] = ci;
      if (++updates[w] > n) {
        p.cycle_at = w;
        return p;
      }
      if (!queued[w]) {
        queued[w] = true;
        queue.push_back(w);
      }
    }
  }
  return p;
}

inline std::vector<Constraint> chain_to(const ConstraintSet& cs, const Propagation& p, std::size_t v, Bound which) {
  std::vector<Constraint> chain;
  std::set<std::size_t> visited;
  std::optional<std::size_t> cur = v;
  while (cur && p.reason[*cur] && visited.insert(*cur).second) {
    const auto& c = cs.constraints[*p.reason[*cur]];
    chain.push_back(c);
    cur = which == Bound::tmin ? c.lhs.slot : c.rhs.slot;
  }
  if (which == Bound::tmin) std::reverse(chain.begin(), chain.end());
  return chain;
}

}  // namespace detail

inline Solution solve_propagation(const ConstraintSet& cs) {
  Solution sol;
  auto lo = detail::propagate(cs, Bound::tmin);
  auto fail = [&](const detail::Propagation& p, Bound which, std::size_t v, const std::string& why) {
    sol.feasible = false;
    sol.culprits = detail::chain_to(cs, p, v, which);
    sol.message = why + " at " + cs.slots[v].event_id;
    return sol;
  };
  if (lo.violated) return fail(lo, Bound::tmin, *lo.violated, "lower bound exceeds observed time");
  if (lo.cycle_at) return fail(lo, Bound::tmin, *lo.cycle_at, "positive constraint cycle");
  auto hi = detail::propagate(cs, Bound::tmax);
  if (hi.violated) return fail(hi, Bound::tmax, *hi.violated, "upper bound below observed time");
  if (hi.cycle_at) return fail(hi, Bound::tmax, *hi.cycle_at, "positive constraint cycle");
  for (std::size_t s = 0; s < cs.slots.size(); ++s) {
    if (!lo.value[s] || !hi.value[s]) {
      sol.message = "event " + cs.slots[s].event_id + " is not anchored to an observed event";
      return sol;
    }
    if (*lo.value[s] > *hi.value[s]) {
      sol.culprits = detail::chain_to(cs, lo, s, Bound::tmin);
      auto up = detail::chain_to(cs, hi, s, Bound::tmax);
      sol.culprits.insert(sol.culprits.end(), up.begin(), up.end());
      sol.message = "empty interval at " + cs.slots[s].event_id;
      return sol;
    }
    sol.bounds.emplace_back(*lo.value[s], *hi.value[s]);
    sol.objective += *hi.value[s] - *lo.value[s];
  }
  sol.feasible = true;
  return sol;
}

inline std::string culprit_text(const ConstraintSet& cs, const Solution& sol) {
  std::string s;
  for (const auto& c : sol.culprits) s += (s.empty() ? "" : "; ") + detail::describe(cs, c);
  return s;
}

// Event ids along a culprit chain, in order.
inline std::vector<std::string> culprit_events(const ConstraintSet& cs, const Solution& sol) {
  std::vector<std::string> out;
  for (const auto& c : sol.culprits)
    for (auto r : {c.lhs, c.rhs}) {
      const auto& id = cs.slots[r.slot].event_id;
      if (out.empty() || out.back() != id) out.push_back(id);
    }
  return out;
}

// Text in lp_solve LP format.
inline void write_lp(std::ostream& out, const ConstraintSet& cs) {
  auto name = [&](VarRef r) {
    std::string s = "x_";
    for (char ch : cs.slots[r.slot].event_id)
      s += (std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_');
    return s + "_" + std::string(to_string(r.which));
  };
  out << "max:";
  if (cs.slots.empty()) out << " 0";
  for (std::size_t s = 0; s < cs.slots.size(); ++s)
    out << " +" << name({s, Bound::tmax}) << " -" << name({s, Bound::tmin});
  out << ";\n";
  std::size_t k = 0;
  for (const auto& c : cs.constraints)
    out << "c" << ++k << ": " << name(c.rhs) << " - " << name(c.lhs) << " >= " << -c.offset << ";\n";
  for (const auto& [v, t] : cs.fixed) out << "c" << ++k << ": " << name(v) << " = " << t << ";\n";
  if (!cs.slots.empty()) {
    out << "free";
    for (std::size_t s = 0; s < cs.slots.size(); ++s)
      out << (s ? ", " : " ") << name({s, Bound::tmin}) << ", " << name({s, Bound::tmax});
    out << ";\n";
  }
}

enum class ApplyMode { interval, tmin, tmax };

inline std::optional<ApplyMode> apply_mode_from(std::string_view s) {
  if (s == "interval") return ApplyMode::interval;
  if (s == "tmin") return ApplyMode::tmin;
  if (s == "tmax") return ApplyMode::tmax;
  return std::nullopt;
}

inline MultiEntityLog apply_solution(const IntermediateRun& run, const ConstraintSet& cs, const Solution& sol,
                                     ApplyMode mode) {
  if (!sol.feasible) throw ConstraintError("solution is infeasible: " + sol.message);
  std::vector<std::optional<std::pair<Millis, Millis>>> bounds(run.events.size());
  for (std::size_t s = 0; s < cs.slots.size(); ++s) {
    const auto& slot = cs.slots[s];
    bounds[slot.event] = sol.bounds[s];
    if (slot.complete) {
      Millis tsr = run.events[slot.event].binding.tsr;
      bounds[*slot.complete] = std::pair{sol.bounds[s].first + tsr, sol.bounds[s].second + tsr};
    }
  }
  std::vector<Event> out;
  for (const auto& trace : run.cases)
    for (auto i : trace) {
      const auto& r = run.events[i];
      Event e;
      e.id = r.id;
      e.act = r.act;
      e.pid = r.pid;
      e.rid = r.binding.rid;
      e.qid = r.qid();
      e.extra = r.extra;
      if (r.time) {
        e.time = e.tmin = e.tmax = r.time;
      } else {
        if (!bounds[i]) throw ConstraintError("event " + r.id + " has no bounds");
        e.tmin = bounds[i]->first;
        e.tmax = bounds[i]->second;
        if (mode == ApplyMode::tmin) e.time = e.tmin;
        if (mode == ApplyMode::tmax) e.time = e.tmax;
      }
      out.push_back(std::move(e));
    }
  return MultiEntityLog(std::move(out), {EntityType::pid, EntityType::rid, EntityType::qid});
}

struct Repair {
  IntermediateRun run;
  ConstraintSet constraints;
  Solution solution;
};

inline Repair repair(const MultiEntityLog& partial, const PQRSystem& system, unsigned jobs = 1) {
  Repair r;
  r.run = restore(partial, system, jobs);
  r.constraints = generate_constraints(r.run, system);
  r.solution = solve_propagation(r.constraints);
  return r;
}

}  // namespace pqr
