#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pqr/error.hpp"
#include "pqr/event_log.hpp"
#include "pqr/pqr_model.hpp"
#include "pqr/time.hpp"

namespace pqr {

// Token colour: an identifier, a pair (identifier, value) or a list of identifiers.
class Value {
 public:
  enum class Kind { id, pair, list };

  Value() = default;

  static Value id(std::string s) {
    Value v;
    v.kind_ = Kind::id;
    v.id_ = std::move(s);
    return v;
  }
  static Value list(std::vector<std::string> items = {}) {
    Value v;
    v.kind_ = Kind::list;
    v.list_ = std::move(items);
    return v;
  }
  static Value pair(std::string first, Value second) {
    Value v;
    v.kind_ = Kind::pair;
    v.id_ = std::move(first);
    v.second_ = std::make_shared<const Value>(std::move(second));
    return v;
  }

  Kind kind() const { return kind_; }

  const std::string& as_id() const {
    if (kind_ != Kind::id) throw ArcExprError("type mismatch: expected identifier, got " + str());
    return id_;
  }
  const std::vector<std::string>& as_list() const {
    if (kind_ != Kind::list) throw ArcExprError("type mismatch: expected list, got " + str());
    return list_;
  }
  const std::string& first() const {
    if (kind_ != Kind::pair) throw ArcExprError("type mismatch: expected pair, got " + str());
    return id_;
  }
  const Value& second() const {
    if (kind_ != Kind::pair) throw ArcExprError("type mismatch: expected pair, got " + str());
    return *second_;
  }

  std::string str() const {
    switch (kind_) {
      case Kind::id: return id_;
      case Kind::pair: return "(" + id_ + "," + second_->str() + ")";
      case Kind::list: {
        std::string s = "[";
        for (std::size_t i = 0; i < list_.size(); ++i) s += (i ? "," : "") + list_[i];
        return s + "]";
      }
    }
    return "";
  }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind_ != b.kind_ || a.id_ != b.id_ || a.list_ != b.list_) return false;
    if (a.kind_ == Kind::pair) return *a.second_ == *b.second_;
    return true;
  }
  friend bool operator<(const Value& a, const Value& b) {
    if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
    if (a.id_ != b.id_) return a.id_ < b.id_;
    if (a.list_ != b.list_) return a.list_ < b.list_;
    if (a.kind_ == Kind::pair) return *a.second_ < *b.second_;
    return false;
  }

 private:
  Kind kind_ = Kind::id;
  std::string id_;
  std::vector<std::string> list_;
  std::shared_ptr<const Value> second_;
};

class ArcExpr {
 public:
  enum class Kind { var, fresh, pair, append, cons };

  static ArcExpr var(std::string name) { return ArcExpr(Kind::var, std::move(name), {}); }
  // New identifier never used before.
  static ArcExpr fresh(std::string name) { return ArcExpr(Kind::fresh, std::move(name), {}); }
  static ArcExpr pair(std::string name, ArcExpr second) {
    if (second.kind_ == Kind::pair) throw ArcExprError("pair expressions do not nest");
    ArcExpr e(Kind::pair, std::move(name), {});
    e.second_ = std::make_shared<const ArcExpr>(std::move(second));
    return e;
  }
  // list ++ [name]
  static ArcExpr append(std::string list_var, std::string name) {
    return ArcExpr(Kind::append, std::move(name), std::move(list_var));
  }
  // name :: list
  static ArcExpr cons(std::string name, std::string list_var) {
    return ArcExpr(Kind::cons, std::move(name), std::move(list_var));
  }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::string& list_var() const { return list_var_; }
  const ArcExpr& second() const { return *second_; }

  std::string str() const {
    switch (kind_) {
      case Kind::var: return name_;
      case Kind::fresh: return "new " + name_;
      case Kind::pair: return "(" + name_ + "," + second_->str() + ")";
      case Kind::append: return list_var_ + "^^[" + name_ + "]";
      case Kind::cons: return name_ + "::" + list_var_;
    }
    return "";
  }

 private:
  ArcExpr(Kind k, std::string name, std::string list_var)
      : kind_(k), name_(std::move(name)), list_var_(std::move(list_var)) {}

  Kind kind_;
  std::string name_;
  std::string list_var_;
  std::shared_ptr<const ArcExpr> second_;
};

using Binding = std::map<std::string, Value>;

struct FreshPool {
  std::set<std::string> used;
  std::size_t counter = 0;
};

namespace detail {

inline const Value& lookup(const Binding& b, const std::string& name) {
  auto it = b.find(name);
  if (it == b.end()) throw ArcExprError("unbound variable " + name);
  return it->second;
}

}  // namespace detail

inline Value eval_arc_expr(const ArcExpr& e, const Binding& b, FreshPool& pool) {
  switch (e.kind()) {
    case ArcExpr::Kind::var: return detail::lookup(b, e.name());
    case ArcExpr::Kind::fresh: {
      auto it = b.find(e.name());
      std::string v;
      if (it != b.end()) {
        v = it->second.as_id();
        if (pool.used.count(v)) throw ArcExprError("fresh value " + v + " already used");
      } else {
        do v = "new" + std::to_string(pool.counter++);
        while (pool.used.count(v));
      }
      pool.used.insert(v);
      return Value::id(v);
    }
    case ArcExpr::Kind::pair:
      return Value::pair(detail::lookup(b, e.name()).as_id(), eval_arc_expr(e.second(), b, pool));
    case ArcExpr::Kind::append: {
      auto items = detail::lookup(b, e.list_var()).as_list();
      items.push_back(detail::lookup(b, e.name()).as_id());
      return Value::list(std::move(items));
    }
    case ArcExpr::Kind::cons: {
      const auto& tail = detail::lookup(b, e.list_var()).as_list();
      std::vector<std::string> items{detail::lookup(b, e.name()).as_id()};
      items.insert(items.end(), tail.begin(), tail.end());
      return Value::list(std::move(items));
    }
  }
  throw ArcExprError("unknown expression");
}

// Destructures a token against an input-arc expression, extending the binding.
// Throws on a mismatch; the binding may be partially extended then.
inline void bind_arc_expr(const ArcExpr& e, const Value& token, Binding& b) {
  auto bind_or_compare = [&](const std::string& name, const Value& v) {
    auto [it, inserted] = b.emplace(name, v);
    if (!inserted && !(it->second == v))
      throw ArcExprError("variable " + name + " is " + it->second.str() + ", token has " + v.str());
  };
  switch (e.kind()) {
    case ArcExpr::Kind::var:
      bind_or_compare(e.name(), token);
      return;
    case ArcExpr::Kind::pair:
      bind_or_compare(e.name(), Value::id(token.first()));
      bind_arc_expr(e.second(), token.second(), b);
      return;
    case ArcExpr::Kind::cons: {
      const auto& items = token.as_list();
      if (items.empty()) throw ArcExprError("cons on empty list");
      bind_or_compare(e.name(), Value::id(items.front()));
      bind_or_compare(e.list_var(), Value::list({items.begin() + 1, items.end()}));
      return;
    }
    case ArcExpr::Kind::fresh:
    case ArcExpr::Kind::append:
      throw ArcExprError(e.str() + " cannot be matched on an input arc");
  }
}

inline bool match_arc_expr(const ArcExpr& e, const Value& token, Binding& b) {
  Binding trial = b;
  try {
    bind_arc_expr(e, token, trial);
  } catch (const ArcExprError&) {
    return false;
  }
  b = std::move(trial);
  return true;
}

struct Token {
  Value value;
  Millis available = 0;

  friend bool operator==(const Token& a, const Token& b) { return a.available == b.available && a.value == b.value; }
  friend bool operator<(const Token& a, const Token& b) {
    if (a.available != b.available) return a.available < b.available;
    return a.value < b.value;
  }
};

using Marking = std::map<std::string, std::vector<Token>>;

struct State {
  Marking marking;
  Millis clock = std::numeric_limits<Millis>::min();

  bool operator==(const State&) const = default;
};

struct CpnArc {
  std::string place;
  ArcExpr expr;
  Millis delay = 0;
};

struct CpnTransition {
  std::string id;
  std::string label;
  std::vector<CpnArc> inputs;
  std::vector<CpnArc> outputs;
};

struct Proclet {
  ProcletKind kind = ProcletKind::process;
  std::string name;
  std::vector<std::string> places;
  std::vector<CpnTransition> transitions;
  Marking initial;

  State initial_state() const {
    State s;
    s.marking = initial;
    for (const auto& p : places) s.marking[p];
    return s;
  }
  std::optional<std::size_t> find(const std::string& id) const {
    for (std::size_t i = 0; i < transitions.size(); ++i)
      if (transitions[i].id == id) return i;
    return std::nullopt;
  }
};

inline Proclet process_proclet(const PQRSystem& s) {
  Proclet p;
  p.kind = ProcletKind::process;
  p.name = "process";
  for (const auto& pl : s.process().places) p.places.push_back(pl.id);
  for (std::size_t t = 0; t < s.transition_count(); ++t) {
    CpnTransition ct{s.transition(t).id, s.transition(t).label, {}, {}};
    for (auto pl : s.pre_places(t)) ct.inputs.push_back({s.place(pl).id, ArcExpr::var("pid"), 0});
    for (auto pl : s.post_places(t))
      ct.outputs.push_back({s.place(pl).id, s.pre_places(t).empty() ? ArcExpr::fresh("pid") : ArcExpr::var("pid"), 0});
    p.transitions.push_back(std::move(ct));
  }
  for (const auto& pl : s.process().places)
    for (int k = 0; k < pl.initial_tokens; ++k) p.initial[pl.id].push_back({Value::id("init" + std::to_string(k)), 0});
  return p;
}

inline Proclet resource_proclet(const PQRSystem& s, std::size_t r) {
  const auto& res = s.resources()[r];
  Proclet p;
  p.kind = ProcletKind::resource;
  p.name = res.rid;
  p.places = {"idle", "busy"};
  for (auto t : s.resource_transitions(r)) {
    const auto& tr = s.transition(t);
    CpnTransition ct{resource_transition_id(res.rid, tr.id), tr.label, {}, {}};
    auto busy = ArcExpr::pair("rid", ArcExpr::var("pid"));
    if (tr.kind == TransitionKind::start) {
      ct.inputs.push_back({"idle", ArcExpr::var("rid"), 0});
      ct.outputs.push_back({"busy", busy, res.tsr});
    } else {
      ct.inputs.push_back({"busy", busy, 0});
      ct.outputs.push_back({"idle", ArcExpr::var("rid"), res.twr});
    }
    p.transitions.push_back(std::move(ct));
  }
  p.initial["idle"].push_back({Value::id(res.rid), 0});
  return p;
}

inline Proclet queue_proclet(const PQRSystem& s, std::size_t q) {
  const auto& queue = s.queues()[q];
  Proclet p;
  p.kind = ProcletKind::queue;
  p.name = queue.qid;
  p.places = {"queue", "waiting"};
  CpnTransition enq{enqueue_id(queue.qid), queue.enqueue_label, {}, {}};
  enq.inputs.push_back({"queue", ArcExpr::pair("qid", ArcExpr::var("q")), 0});
  enq.outputs.push_back({"queue", ArcExpr::pair("qid", ArcExpr::append("q", "pid")), 0});
  enq.outputs.push_back({"waiting", ArcExpr::var("pid"), queue.twq});
  CpnTransition deq{dequeue_id(queue.qid), queue.dequeue_label, {}, {}};
  deq.inputs.push_back({"queue", ArcExpr::pair("qid", ArcExpr::cons("pid", "q")), 0});
  deq.inputs.push_back({"waiting", ArcExpr::var("pid"), 0});
  deq.outputs.push_back({"queue", ArcExpr::pair("qid", ArcExpr::var("q")), 0});
  p.transitions = {std::move(enq), std::move(deq)};
  p.initial["queue"].push_back({Value::pair(queue.qid, Value::list()), 0});
  return p;
}

struct Firing {
  std::size_t transition = 0;
  Binding binding;
  std::vector<std::pair<std::string, std::size_t>> consumed;
};

namespace detail {

inline bool match_inputs(const std::vector<CpnArc>& arcs, std::size_t i, const State& st, Millis clock, Binding& b,
                         std::vector<std::pair<std::string, std::size_t>>& consumed) {
  if (i == arcs.size()) return true;
  const auto& arc = arcs[i];
  auto it = st.marking.find(arc.place);
  if (it == st.marking.end()) return false;
  for (std::size_t k = 0; k < it->second.size(); ++k) {
    const auto& tok = it->second[k];
    if (tok.available > clock) continue;
    if (std::find(consumed.begin(), consumed.end(), std::make_pair(arc.place, k)) != consumed.end()) continue;
    Binding trial = b;
    if (!match_arc_expr(arc.expr, tok.value, trial)) continue;
    consumed.emplace_back(arc.place, k);
    if (match_inputs(arcs, i + 1, st, clock, trial, consumed)) {
      b = std::move(trial);
      return true;
    }
    consumed.pop_back();
  }
  return false;
}

}  // namespace detail

inline std::optional<Firing> find_firing(const Proclet& p, const State& st, std::size_t t, const Binding& b,
                                         std::optional<Millis> clock = std::nullopt) {
  Firing f{t, b, {}};
  if (detail::match_inputs(p.transitions[t].inputs, 0, st, clock.value_or(st.clock), f.binding, f.consumed)) return f;
  return std::nullopt;
}

inline bool enabled(const Proclet& p, const State& st, const std::string& label, const Binding& b) {
  for (std::size_t t = 0; t < p.transitions.size(); ++t)
    if (p.transitions[t].label == label && find_firing(p, st, t, b)) return true;
  return false;
}

inline State fire(const Proclet& p, const State& st, const Firing& f, FreshPool& pool) {
  State next = st;
  auto consumed = f.consumed;
  std::sort(consumed.begin(), consumed.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [place, k] : consumed) {
    auto& toks = next.marking[place];
    toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(k));
  }
  for (const auto& arc : p.transitions[f.transition].outputs) {
    auto& toks = next.marking[arc.place];
    Token tok{eval_arc_expr(arc.expr, f.binding, pool), st.clock + arc.delay};
    toks.insert(std::upper_bound(toks.begin(), toks.end(), tok), std::move(tok));
  }
  return next;
}

inline Binding binding_from(const Event& e) {
  Binding b;
  for (auto et : kEntityTypes)
    if (e.entity(et)) b[std::string(to_string(et))] = Value::id(*e.entity(et));
  return b;
}

// Why no transition labelled like the event can fire in state st (clock already advanced).
inline std::string diagnose(const Proclet& p, const State& st, const Event& e) {
  auto b = binding_from(e);
  bool known = false;
  std::optional<Millis> earliest;
  for (std::size_t t = 0; t < p.transitions.size(); ++t) {
    if (p.transitions[t].label != e.act) continue;
    known = true;
    if (auto f = find_firing(p, st, t, b, std::numeric_limits<Millis>::max())) {
      Millis ready = std::numeric_limits<Millis>::min();
      for (const auto& [place, k] : f->consumed) ready = std::max(ready, st.marking.at(place)[k].available);
      if (!earliest || ready < *earliest) earliest = ready;
    }
  }
  if (!known) return "no transition labelled " + e.act;
  if (earliest) return "token not yet available (at " + format_time(*earliest) + ")";
  if (p.kind == ProcletKind::queue) {
    auto it = st.marking.find("queue");
    if (it != st.marking.end())
      for (const auto& tok : it->second) {
        const auto& items = tok.value.second().as_list();
        bool dequeue = e.act == p.transitions[1].label;
        if (dequeue && items.empty()) return "queue is empty";
        if (dequeue && e.pid && items.front() != *e.pid) return "wrong queue head (" + items.front() + ")";
      }
  }
  if (p.kind == ProcletKind::resource) {
    auto idle = st.marking.find("idle");
    if (idle != st.marking.end() && idle->second.empty()) {
      const auto& busy = st.marking.at("busy");
      return "resource busy" + (busy.empty() ? std::string() : " with " + busy.front().value.second().str());
    }
    return "resource not busy with this case";
  }
  return "no enabled transition";
}

struct ReplayFailure {
  std::string event_id;
  std::string reason;
};

struct ReplayResult {
  bool accepted = true;
  std::map<std::string, std::string> fired;
  std::optional<ReplayFailure> failure;
  State final_state;
  std::vector<State> states;  // after each event, when recorded
};

struct ReplayOptions {
  // Preferred transition id per event id, tried first among same-labelled transitions.
  std::map<std::string, std::string> hints;
  bool record_states = false;
  std::size_t search_limit = 200000;
};

namespace detail {

struct ReplaySearch {
  const Proclet& proclet;
  const std::vector<Event>& events;
  const ReplayOptions& opt;
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::optional<ReplayFailure> failure;
  std::size_t failure_depth = 0;
  std::size_t expansions = 0;

  struct Acc {
    State state;
    FreshPool pool;
    std::map<std::string, std::string> fired;
    std::vector<State> states;
    std::vector<bool> done;
    std::size_t group = 0;
    std::size_t depth = 0;
  };

  struct Option {
    std::size_t event;
    State next;
    FreshPool pool;
    std::string transition;
  };

  void note_failure(std::size_t depth, ReplayFailure f) {
    if (!failure || depth > failure_depth) {
      failure = std::move(f);
      failure_depth = depth;
    }
  }

  std::vector<Option> options(const Acc& acc, std::size_t b, std::size_t e) {
    std::vector<Option> out;
    for (std::size_t i = b; i < e; ++i) {
      if (acc.done[i]) continue;
      const Event& ev = events[i];
      State st = acc.state;
      st.clock = std::max(st.clock, *ev.time);
      auto bind = binding_from(ev);
      std::vector<std::size_t> order;
      auto hint = opt.hints.find(ev.id);
      for (std::size_t t = 0; t < proclet.transitions.size(); ++t)
        if (proclet.transitions[t].label == ev.act) {
          if (hint != opt.hints.end() && proclet.transitions[t].id == hint->second)
            order.insert(order.begin(), t);
          else
            order.push_back(t);
        }
      std::size_t before = out.size();
      for (auto t : order) {
        auto f = find_firing(proclet, st, t, bind);
        if (!f) continue;
        FreshPool pool = acc.pool;
        State next;
        try {
          next = fire(proclet, st, *f, pool);
        } catch (const ArcExprError& err) {
          note_failure(acc.depth, {ev.id, err.what()});
          continue;
        }
        bool duplicate = false;
        for (std::size_t k = before; k < out.size(); ++k)
          if (out[k].next == next) duplicate = true;
        if (!duplicate) out.push_back({i, std::move(next), std::move(pool), proclet.transitions[t].id});
      }
      if (out.size() == before) note_failure(acc.depth, {ev.id, diagnose(proclet, st, ev)});
    }
    return out;
  }

  void apply(Acc& acc, Option&& o) {
    acc.state = std::move(o.next);
    acc.pool = std::move(o.pool);
    acc.fired[events[o.event].id] = o.transition;
    if (opt.record_states) acc.states.push_back(acc.state);
    acc.done[o.event] = true;
    ++acc.depth;
  }

  bool run(Acc& acc) {
    for (;;) {
      while (acc.group < groups.size()) {
        auto [b, e] = groups[acc.group];
        bool all = true;
        for (std::size_t i = b; i < e; ++i) all = all && acc.done[i];
        if (!all) break;
        ++acc.group;
      }
      if (acc.group == groups.size()) return true;
      if (++expansions > opt.search_limit) {
        note_failure(acc.depth + 1, {events[groups[acc.group].first].id, "replay search limit exceeded"});
        return false;
      }
      auto [b, e] = groups[acc.group];
      auto opts = options(acc, b, e);
      if (opts.empty()) return false;
      if (opts.size() == 1) {
        apply(acc, std::move(opts.front()));
        continue;
      }
      for (auto& o : opts) {
        Acc branch = acc;
        apply(branch, std::move(o));
        if (run(branch)) {
          acc = std::move(branch);
          return true;
        }
      }
      return false;
    }
  }
};

}  // namespace detail

// Replays time-ordered events; events sharing a timestamp may fire in any order.
inline ReplayResult replay_trace(const Proclet& proclet, const std::vector<Event>& events,
                                 const ReplayOptions& opt = {}) {
  ReplayResult r;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!events[i].time) {
      r.accepted = false;
      r.failure = ReplayFailure{events[i].id, "event has no timestamp"};
      r.final_state = proclet.initial_state();
      return r;
    }
    if (i && *events[i].time < *events[i - 1].time) {
      r.accepted = false;
      r.failure = ReplayFailure{events[i].id, "trace is not time-ordered"};
      r.final_state = proclet.initial_state();
      return r;
    }
  }
  detail::ReplaySearch search{proclet, events, opt, {}, std::nullopt, 0, 0};
  for (std::size_t i = 0; i < events.size();) {
    std::size_t j = i;
    while (j < events.size() && *events[j].time == *events[i].time) ++j;
    search.groups.emplace_back(i, j);
    i = j;
  }
  detail::ReplaySearch::Acc acc;
  acc.state = proclet.initial_state();
  acc.done.assign(events.size(), false);
  if (search.run(acc)) {
    r.accepted = true;
    r.fired = std::move(acc.fired);
    r.final_state = std::move(acc.state);
    r.states = std::move(acc.states);
  } else {
    r.accepted = false;
    r.failure = search.failure;
    r.final_state = std::move(acc.state);
    r.states = std::move(acc.states);
  }
  return r;
}

struct TraceReplay {
  EntityType et;
  std::string id;
  std::string proclet;
  ReplayResult result;
};

struct ReplayDiagnostic {
  std::string event_id;
  std::string proclet;
  std::string reason;
};

inline nlohmann::json to_json(const ReplayDiagnostic& d) {
  return {{"event_id", d.event_id}, {"proclet", d.proclet}, {"reason", d.reason}};
}

struct LogReplay {
  bool accepted = true;
  std::vector<TraceReplay> traces;
  std::vector<ReplayDiagnostic> diagnostics;
};

inline LogReplay replay_log(const PQRSystem& system, const MultiEntityLog& log) {
  LogReplay out;
  const auto& ev = log.events();
  for (const auto& e : ev)
    if (!e.time) out.diagnostics.push_back({e.id, "", "event has no timestamp"});
  if (!out.diagnostics.empty()) {
    out.accepted = false;
    return out;
  }

  auto events_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<Event> v;
    v.reserve(idx.size());
    for (auto i : idx) v.push_back(ev[i]);
    return v;
  };
  // Fired transitions per event across all traces.
  std::vector<std::vector<std::string>> fired(ev.size());
  std::vector<std::optional<std::size_t>> process_transition(ev.size());

  auto record = [&](TraceReplay&& tr, const std::vector<std::size_t>& idx) {
    for (auto i : idx) {
      auto it = tr.result.fired.find(ev[i].id);
      if (it != tr.result.fired.end()) fired[i].push_back(it->second);
    }
    if (!tr.result.accepted) {
      out.accepted = false;
      out.diagnostics.push_back({tr.result.failure ? tr.result.failure->event_id : std::string(),
                                 tr.proclet, tr.result.failure ? tr.result.failure->reason : "rejected"});
    }
    out.traces.push_back(std::move(tr));
  };

  const auto& types = log.entity_types();
  if (types.count(EntityType::pid)) {
    auto proc = process_proclet(system);
    for (const auto& [id, idx] : correlate(log, EntityType::pid).timed) {
      TraceReplay tr{EntityType::pid, id, "process:" + id, replay_trace(proc, events_of(idx))};
      for (auto i : idx) {
        auto it = tr.result.fired.find(ev[i].id);
        if (it != tr.result.fired.end()) process_transition[i] = system.transition_index(it->second);
      }
      record(std::move(tr), idx);
    }
  }
  auto hints_for = [&](const std::vector<std::size_t>& idx, ProcletKind kind, const std::string& name) {
    ReplayOptions opt;
    for (auto i : idx) {
      if (!process_transition[i]) continue;
      for (const auto& m : system.channel_of(*process_transition[i]).members)
        if (m.kind == kind && m.proclet == name) opt.hints[ev[i].id] = m.transition;
    }
    return opt;
  };
  if (types.count(EntityType::rid)) {
    for (const auto& [id, idx] : correlate(log, EntityType::rid).timed) {
      auto r = system.resource_index(id);
      if (!r) {
        out.accepted = false;
        out.diagnostics.push_back({ev[idx.front()].id, "resource:" + id, "no resource proclet with this id"});
        continue;
      }
      auto opt = hints_for(idx, ProcletKind::resource, id);
      record({EntityType::rid, id, "resource:" + id, replay_trace(resource_proclet(system, *r), events_of(idx), opt)},
             idx);
    }
  }
  if (types.count(EntityType::qid)) {
    for (const auto& [id, idx] : correlate(log, EntityType::qid).timed) {
      auto q = system.queue_index(id);
      if (!q) {
        out.accepted = false;
        out.diagnostics.push_back({ev[idx.front()].id, "queue:" + id, "no queue proclet with this id"});
        continue;
      }
      record({EntityType::qid, id, "queue:" + id, replay_trace(queue_proclet(system, *q), events_of(idx))}, idx);
    }
  }

  // Channel check: the transitions fired for one event form a singleton or a full channel.
  std::map<std::string, std::size_t> channel_by_member;
  for (std::size_t t = 0; t < system.channels().size(); ++t)
    for (const auto& m : system.channels()[t].members) channel_by_member[m.transition] = t;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (fired[i].size() <= 1) continue;
    std::set<std::string> got(fired[i].begin(), fired[i].end());
    auto it = channel_by_member.find(*got.begin());
    bool ok = false;
    if (it != channel_by_member.end()) {
      std::set<std::string> want;
      for (const auto& m : system.channels()[it->second].members) want.insert(m.transition);
      ok = want == got && got.size() == fired[i].size();
    }
    if (!ok) {
      out.accepted = false;
      std::string set;
      for (const auto& t : fired[i]) set += (set.empty() ? "" : ",") + t;
      out.diagnostics.push_back({ev[i].id, "channel", "fired transitions {" + set + "} do not form a channel"});
    }
  }
  return out;
}

}  // namespace pqr
