#pragma once

#include <algorithm>
#include <array>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pqr/csv.hpp"
#include "pqr/error.hpp"
#include "pqr/time.hpp"

namespace pqr {

enum class EntityType { pid, rid, qid };

inline constexpr std::array<EntityType, 3> kEntityTypes{EntityType::pid, EntityType::rid, EntityType::qid};

inline std::string_view to_string(EntityType et) {
  switch (et) {
    case EntityType::pid: return "pid";
    case EntityType::rid: return "rid";
    case EntityType::qid: return "qid";
  }
  return "?";
}

inline std::optional<EntityType> entity_type_from(std::string_view s) {
  for (auto et : kEntityTypes)
    if (to_string(et) == s) return et;
  return std::nullopt;
}

struct Event {
  std::string id;
  std::string act;
  std::optional<Millis> time;
  std::optional<std::string> pid;
  std::optional<std::string> rid;
  std::optional<std::string> qid;
  std::optional<Millis> tmin;
  std::optional<Millis> tmax;
  std::map<std::string, std::string> extra;

  const std::optional<std::string>& entity(EntityType et) const {
    switch (et) {
      case EntityType::pid: return pid;
      case EntityType::rid: return rid;
      case EntityType::qid: return qid;
    }
    return pid;
  }
  std::optional<std::string>& entity(EntityType et) {
    return const_cast<std::optional<std::string>&>(std::as_const(*this).entity(et));
  }

  bool operator==(const Event&) const = default;
};

class MultiEntityLog {
 public:
  MultiEntityLog() : types_{EntityType::pid} {}

  MultiEntityLog(std::vector<Event> events, std::set<EntityType> entity_types)
      : events_(std::move(events)), types_(std::move(entity_types)) {
    if (types_.empty()) throw LogError("entity type set must not be empty");
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const Event& e = events_[i];
      if (e.act.empty()) throw LogError("event " + e.id + " has no activity");
      if (e.tmin && e.tmax && *e.tmin > *e.tmax) throw LogError("event " + e.id + " has tmin > tmax");
      if (e.time && e.tmin && *e.tmin > *e.time) throw LogError("event " + e.id + " has tmin > time");
      if (e.time && e.tmax && *e.time > *e.tmax) throw LogError("event " + e.id + " has time > tmax");
      if (!index_.emplace(e.id, i).second) throw LogError("duplicate event_id " + e.id);
    }
  }

  const std::vector<Event>& events() const { return events_; }
  const std::set<EntityType>& entity_types() const { return types_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const Event* find(std::string_view id) const {
    auto i = index_of(id);
    return i ? &events_[*i] : nullptr;
  }

  bool has_intervals() const {
    return std::any_of(events_.begin(), events_.end(), [](const Event& e) { return e.tmin || e.tmax; });
  }

  // Attribute names in use, always including act.
  std::set<std::string> attribute_names() const {
    std::set<std::string> names{"act"};
    for (const auto& e : events_) {
      if (e.time) names.insert("time");
      for (auto et : kEntityTypes)
        if (e.entity(et)) names.insert(std::string(to_string(et)));
      if (e.tmin) names.insert("tmin");
      if (e.tmax) names.insert("tmax");
      for (const auto& [k, v] : e.extra) names.insert(k);
    }
    return names;
  }

  bool operator==(const MultiEntityLog& o) const { return events_ == o.events_ && types_ == o.types_; }

 private:
  std::vector<Event> events_;
  std::set<EntityType> types_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Header names bound to the fixed semantic roles.
struct ColumnMapping {
  std::string event_id = "event_id";
  std::string pid = "pid";
  std::string act = "activity";
  std::string time = "time";
  std::string rid = "rid";
  std::string qid = "qid";
  std::string tmin = "tmin";
  std::string tmax = "tmax";

  const std::string& entity(EntityType et) const {
    switch (et) {
      case EntityType::pid: return pid;
      case EntityType::rid: return rid;
      case EntityType::qid: return qid;
    }
    return pid;
  }
};

namespace detail {

inline bool undefined_cell(const std::string& s) { return s.empty() || s == "⊥"; }

}  // namespace detail

inline MultiEntityLog parse_log(std::istream& in, const ColumnMapping& map = {}) {
  auto records = csv::read(in);
  if (records.empty()) throw ParseError("missing header", 1);
  const auto& header = records.front().fields;
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string name = header[i];
    if (i == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0) name = name.substr(3);
    if (!col.emplace(name, i).second) throw ParseError("duplicate column " + name, 1);
  }
  for (const auto* required : {&map.event_id, &map.act, &map.time})
    if (!col.count(*required)) throw ParseError("missing column " + *required, 1);

  std::set<EntityType> types;
  for (auto et : kEntityTypes)
    if (col.count(map.entity(et))) types.insert(et);
  if (types.empty()) throw ParseError("no entity column among pid/rid/qid", 1);

  std::set<std::string> known{map.event_id, map.act, map.time, map.tmin, map.tmax, map.pid, map.rid, map.qid};
  std::vector<std::pair<std::string, std::size_t>> extras;
  for (const auto& [name, i] : col)
    if (!known.count(name)) extras.emplace_back(name, i);

  std::vector<Event> events;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size())
      throw ParseError("malformed CSV: expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(rec.fields.size()),
                       rec.line);
    auto cell = [&](const std::string& name) -> std::optional<std::string> {
      auto it = col.find(name);
      if (it == col.end()) return std::nullopt;
      const auto& v = rec.fields[it->second];
      if (detail::undefined_cell(v)) return std::nullopt;
      return v;
    };
    auto time_cell = [&](const std::string& name) -> std::optional<Millis> {
      auto v = cell(name);
      if (!v) return std::nullopt;
      auto t = parse_time(*v);
      if (!t) throw ParseError("unparseable timestamp '" + *v + "' in column " + name, rec.line);
      return t;
    };
    Event e;
    auto id = cell(map.event_id);
    if (!id) throw ParseError("missing event_id", rec.line);
    e.id = *id;
    if (!seen.insert(e.id).second) throw ParseError("duplicate event_id " + e.id, rec.line);
    auto act = cell(map.act);
    if (!act) throw ParseError("missing activity", rec.line);
    e.act = *act;
    e.time = time_cell(map.time);
    for (auto et : types) e.entity(et) = cell(map.entity(et));
    e.tmin = time_cell(map.tmin);
    e.tmax = time_cell(map.tmax);
    for (const auto& [name, i] : extras)
      if (!detail::undefined_cell(rec.fields[i])) e.extra[name] = rec.fields[i];
    events.push_back(std::move(e));
  }
  try {
    return MultiEntityLog(std::move(events), std::move(types));
  } catch (const LogError& err) {
    throw ParseError(err.what());
  }
}

// Columns: event_id, pid, activity, time, then rid/qid when in ET, tmin/tmax when any event
// carries them, then extra attributes in name order.
inline void write_log(std::ostream& out, const MultiEntityLog& log, const ColumnMapping& map = {}) {
  const auto& types = log.entity_types();
  bool intervals = log.has_intervals();
  std::set<std::string> extra_names;
  for (const auto& e : log.events())
    for (const auto& [k, v] : e.extra) extra_names.insert(k);

  csv::Row header{map.event_id, map.pid, map.act, map.time};
  if (types.count(EntityType::rid)) header.push_back(map.rid);
  if (types.count(EntityType::qid)) header.push_back(map.qid);
  if (intervals) {
    header.push_back(map.tmin);
    header.push_back(map.tmax);
  }
  header.insert(header.end(), extra_names.begin(), extra_names.end());
  csv::write_row(out, header);

  auto ts = [](const std::optional<Millis>& t) { return t ? format_time(*t) : std::string(); };
  for (const auto& e : log.events()) {
    csv::Row row{e.id, e.pid.value_or(""), e.act, ts(e.time)};
    if (types.count(EntityType::rid)) row.push_back(e.rid.value_or(""));
    if (types.count(EntityType::qid)) row.push_back(e.qid.value_or(""));
    if (intervals) {
      row.push_back(ts(e.tmin));
      row.push_back(ts(e.tmax));
    }
    for (const auto& name : extra_names) {
      auto it = e.extra.find(name);
      row.push_back(it == e.extra.end() ? "" : it->second);
    }
    csv::write_row(out, row);
  }
}

struct TiePair {
  std::string first;
  std::string second;
  EntityType et;
  std::string id;
};

struct Completeness {
  bool time_complete = true;
  bool monotone = true;
  std::vector<std::string> untimed;
  std::vector<TiePair> violations;
};

// Indices of events correlated to each id of et, ordered by time and then input position.
// Untimed events are collected separately.
struct Correlation {
  std::map<std::string, std::vector<std::size_t>> timed;
  std::map<std::string, std::vector<std::size_t>> untimed;
};

inline Correlation correlate(const MultiEntityLog& log, EntityType et) {
  Correlation c;
  const auto& ev = log.events();
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& id = ev[i].entity(et);
    if (!id) continue;
    (ev[i].time ? c.timed : c.untimed)[*id].push_back(i);
  }
  for (auto& [id, idx] : c.timed)
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return *ev[a].time < *ev[b].time; });
  return c;
}

inline Completeness check_completeness(const MultiEntityLog& log) {
  Completeness r;
  const auto& ev = log.events();
  for (const auto& e : ev) {
    bool has_entity = std::any_of(log.entity_types().begin(), log.entity_types().end(),
                                  [&](EntityType et) { return e.entity(et).has_value(); });
    if (!e.time || !has_entity) {
      r.time_complete = false;
      r.untimed.push_back(e.id);
    }
  }
  for (auto et : log.entity_types()) {
    auto c = correlate(log, et);
    for (const auto& [id, idx] : c.timed)
      for (std::size_t k = 1; k < idx.size(); ++k)
        if (*ev[idx[k - 1]].time == *ev[idx[k]].time) {
          r.monotone = false;
          r.violations.push_back({ev[idx[k - 1]].id, ev[idx[k]].id, et, id});
        }
  }
  return r;
}

struct Trace {
  EntityType et = EntityType::pid;
  std::string id;
  std::vector<std::string> events;

  bool operator==(const Trace&) const = default;
};

using SequentialView = std::map<EntityType, std::vector<Trace>>;

namespace detail {

inline std::string describe_ties(const std::vector<TiePair>& ties) {
  std::string msg = "non-monotone log:";
  for (const auto& t : ties)
    msg += " (" + t.first + "," + t.second + " @" + std::string(to_string(t.et)) + "=" + t.id + ")";
  return msg;
}

inline void require_monotone(const MultiEntityLog& log) {
  auto c = check_completeness(log);
  if (!c.monotone) throw LogError(describe_ties(c.violations));
}

}  // namespace detail

inline SequentialView sequential_view(const MultiEntityLog& log) {
  detail::require_monotone(log);
  SequentialView view;
  for (auto et : log.entity_types()) {
    auto c = correlate(log, et);
    if (!c.untimed.empty())
      throw LogError("event " + log.events()[c.untimed.begin()->second.front()].id + " has no timestamp");
    auto& traces = view[et];
    for (const auto& [id, idx] : c.timed) {
      Trace t{et, id, {}};
      for (auto i : idx) t.events.push_back(log.events()[i].id);
      traces.push_back(std::move(t));
    }
  }
  return view;
}

struct RunEdge {
  std::size_t from;
  std::size_t to;
  EntityType et;
  std::string id;

  bool operator==(const RunEdge&) const = default;
  auto operator<=>(const RunEdge&) const = default;
};

// Events plus the typed directly-precedes relation; edge endpoints index into log.events().
struct SystemRun {
  MultiEntityLog log;
  std::vector<RunEdge> edges;
};

// Kahn's algorithm over an index graph.
inline bool is_acyclic(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indeg(n, 0);
  for (auto [a, b] : edges) {
    succ[a].push_back(b);
    ++indeg[b];
  }
  std::queue<std::size_t> q;
  for (std::size_t i = 0; i < n; ++i)
    if (!indeg[i]) q.push(i);
  std::size_t seen = 0;
  while (!q.empty()) {
    auto v = q.front();
    q.pop();
    ++seen;
    for (auto w : succ[v])
      if (!--indeg[w]) q.push(w);
  }
  return seen == n;
}

inline bool is_strict_partial_order(const SystemRun& run) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (const auto& edge : run.edges) e.emplace_back(edge.from, edge.to);
  return is_acyclic(run.log.size(), e);
}

// a < b in the transitive closure of the untyped edges.
inline bool precedes(const SystemRun& run, std::size_t a, std::size_t b) {
  std::vector<std::vector<std::size_t>> succ(run.log.size());
  for (const auto& e : run.edges) succ[e.from].push_back(e.to);
  std::vector<bool> seen(run.log.size(), false);
  std::vector<std::size_t> stack{a};
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (auto w : succ[v]) {
      if (w == b) return true;
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return false;
}

inline SystemRun derive_system_run(const MultiEntityLog& log) {
  detail::require_monotone(log);
  SystemRun run{log, {}};
  for (auto et : log.entity_types()) {
    auto c = correlate(log, et);
    for (const auto& [id, idx] : c.timed)
      for (std::size_t k = 1; k < idx.size(); ++k) run.edges.push_back({idx[k - 1], idx[k], et, id});
  }
  return run;
}

inline SystemRun project_run(const SystemRun& run, EntityType et, const std::optional<std::string>& id = std::nullopt) {
  if (!run.log.entity_types().count(et))
    throw LogError("entity type " + std::string(to_string(et)) + " not in log");
  std::vector<Event> kept;
  std::vector<std::optional<std::size_t>> remap(run.log.size());
  for (std::size_t i = 0; i < run.log.size(); ++i) {
    const auto& v = run.log.events()[i].entity(et);
    if (v && (!id || *v == *id)) {
      remap[i] = kept.size();
      kept.push_back(run.log.events()[i]);
    }
  }
  SystemRun out{MultiEntityLog(std::move(kept), run.log.entity_types()), {}};
  for (const auto& e : run.edges)
    if (e.et == et && (!id || e.id == *id)) out.edges.push_back({*remap[e.from], *remap[e.to], e.et, e.id});
  return out;
}

// Rebuilds per-entity traces by walking each typed chain from its head.
inline SequentialView traces_from_run(const SystemRun& run) {
  SequentialView view;
  std::map<std::pair<EntityType, std::string>, std::map<std::size_t, std::size_t>> next;
  std::map<std::pair<EntityType, std::string>, std::set<std::size_t>> members, has_pred;
  for (const auto& e : run.edges) {
    auto key = std::make_pair(e.et, e.id);
    next[key][e.from] = e.to;
    members[key].insert(e.from);
    members[key].insert(e.to);
    has_pred[key].insert(e.to);
  }
  for (std::size_t i = 0; i < run.log.size(); ++i) {
    const auto& ev = run.log.events()[i];
    if (!ev.time) continue;
    for (auto et : run.log.entity_types())
      if (ev.entity(et)) members[{et, *ev.entity(et)}].insert(i);
  }
  for (auto et : run.log.entity_types()) view[et];
  for (const auto& [key, nodes] : members) {
    Trace t{key.first, key.second, {}};
    auto head = std::find_if(nodes.begin(), nodes.end(), [&](std::size_t v) { return !has_pred[key].count(v); });
    std::optional<std::size_t> cur = head == nodes.end() ? std::nullopt : std::optional(*head);
    while (cur) {
      t.events.push_back(run.log.events()[*cur].id);
      auto it = next[key].find(*cur);
      cur = it == next[key].end() ? std::nullopt : std::optional(it->second);
    }
    view[key.first].push_back(std::move(t));
  }
  return view;
}

}  // namespace pqr
