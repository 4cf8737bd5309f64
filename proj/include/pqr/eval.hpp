#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "pqr/csv.hpp"
#include "pqr/error.hpp"
#include "pqr/event_log.hpp"
#include "pqr/pqr_model.hpp"
#include "pqr/time.hpp"

namespace pqr {

struct EventError {
  std::string pid;
  std::string act;
  std::size_t occurrence = 0;
  std::string id;
  Millis truth = 0;
  Millis tmin = 0;
  Millis tmax = 0;
  Millis error = 0;
  double normalized = 0;
  bool contained = false;
};

struct Metrics {
  std::vector<EventError> events;
  double mae = 0;
  double rmse = 0;
  double mae_ms = 0;
  double rmse_ms = 0;
  double max_normalized = 0;
  double containment = 1;
};

namespace detail {

using OccurrenceKey = std::tuple<std::string, std::string, std::size_t>;

inline std::map<OccurrenceKey, std::size_t> occurrences(const MultiEntityLog& log) {
  std::map<OccurrenceKey, std::size_t> out;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& e = log.events()[i];
    if (!e.pid) throw LogError("event " + e.id + " has no pid");
    auto k = seen[{*e.pid, e.act}]++;
    out[{*e.pid, e.act, k}] = i;
  }
  return out;
}

inline bool is_unobserved(const Event& e) { return !e.time || e.id.rfind("u:", 0) == 0; }

// Minimal service plus queue time over a case's start and atomic events.
inline Millis minimal_duration(const PQRSystem& s, const MultiEntityLog& truth, const std::vector<std::size_t>& idx) {
  Millis total = 0;
  for (auto i : idx) {
    const auto& e = truth.events()[i];
    std::optional<StepBinding> chosen;
    for (auto t : s.transitions_with_label(e.act)) {
      auto b = s.binding(t);
      auto q = (b.kind == TransitionKind::start || b.kind == TransitionKind::sink) ? b.qid_in : b.qid_out;
      if (!chosen || (e.qid && q == e.qid)) chosen = b;
    }
    if (!chosen) throw LogError("label " + e.act + " is not in the model");
    if (chosen->role != Role::complete) total += chosen->tsr + chosen->twq_in;
  }
  return total;
}

}  // namespace detail

// Error per unobserved event: max(|tmax - t|, |tmin - t|), normalized by the case's minimal duration
// under the model, or by the case's true span without a model.
inline Metrics evaluate(const MultiEntityLog& repaired, const MultiEntityLog& truth,
                        const PQRSystem* system = nullptr) {
  auto truth_idx = detail::occurrences(truth);
  auto rep_idx = detail::occurrences(repaired);
  for (const auto& [k, i] : rep_idx)
    if (!truth_idx.count(k))
      throw LogError("event " + repaired.events()[i].id + " has no counterpart in the reference log");
  auto corr = correlate(truth, EntityType::pid);
  std::map<std::string, Millis> norm;
  for (const auto& [pid, idx] : corr.timed) {
    Millis n = system ? detail::minimal_duration(*system, truth, idx)
                      : *truth.events()[idx.back()].time - *truth.events()[idx.front()].time;
    norm[pid] = n;
  }

  Metrics m;
  double sum = 0, sq = 0, sum_ms = 0, sq_ms = 0;
  std::size_t inside = 0;
  for (const auto& [k, i] : rep_idx) {
    const auto& e = repaired.events()[i];
    if (!detail::is_unobserved(e)) continue;
    const auto& t = truth.events()[truth_idx.at(k)];
    if (!t.time) throw LogError("reference event " + t.id + " has no timestamp");
    auto lo = e.tmin ? e.tmin : e.time;
    auto hi = e.tmax ? e.tmax : e.time;
    if (!lo || !hi) throw LogError("event " + e.id + " has neither bounds nor a timestamp");
    EventError x;
    x.pid = std::get<0>(k);
    x.act = std::get<1>(k);
    x.occurrence = std::get<2>(k);
    x.id = e.id;
    x.truth = *t.time;
    x.tmin = *lo;
    x.tmax = *hi;
    x.error = std::max(std::abs(*hi - *t.time), std::abs(*lo - *t.time));
    Millis n = norm.count(x.pid) ? norm.at(x.pid) : 0;
    x.normalized = n > 0 ? static_cast<double>(x.error) / static_cast<double>(n) : (x.error ? 1.0 : 0.0);
    x.contained = *lo <= *t.time && *t.time <= *hi;
    inside += x.contained;
    sum += x.normalized;
    sq += x.normalized * x.normalized;
    sum_ms += static_cast<double>(x.error);
    sq_ms += static_cast<double>(x.error) * static_cast<double>(x.error);
    m.max_normalized = std::max(m.max_normalized, x.normalized);
    m.events.push_back(std::move(x));
  }
  if (!m.events.empty()) {
    auto n = static_cast<double>(m.events.size());
    m.mae = sum / n;
    m.rmse = std::sqrt(sq / n);
    m.mae_ms = sum_ms / n;
    m.rmse_ms = std::sqrt(sq_ms / n);
    m.containment = static_cast<double>(inside) / n;
  }
  return m;
}

inline nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["events"] = m.events.size();
  j["mae"] = m.mae;
  j["rmse"] = m.rmse;
  j["mae_ms"] = m.mae_ms;
  j["rmse_ms"] = m.rmse_ms;
  j["max_normalized_error"] = m.max_normalized;
  j["containment"] = m.containment;
  return j;
}

// Point estimate: the timestamp if present, else the interval midpoint.
inline std::optional<Millis> point_time(const Event& e) {
  if (e.time) return e.time;
  if (e.tmin && e.tmax) return *e.tmin + (*e.tmax - *e.tmin) / 2;
  return std::nullopt;
}

struct Segment {
  std::string from;
  std::string to;
  std::optional<std::string> qid;

  std::string name() const { return qid ? *qid : from + ":" + to; }
};

// "qid" when the log has a queue of that name, otherwise "from_label:to_label".
inline Segment parse_segment(const MultiEntityLog& log, const std::string& text) {
  if (log.entity_types().count(EntityType::qid))
    for (const auto& e : log.events())
      if (e.qid == text) return {"", "", text};
  auto colon = text.find(':');
  if (colon == std::string::npos) throw LogError("segment " + text + " is neither a queue nor a:b");
  Segment s{text.substr(0, colon), text.substr(colon + 1), std::nullopt};
  bool from = false, to = false;
  for (const auto& e : log.events()) {
    from |= e.act == s.from;
    to |= e.act == s.to;
  }
  if (log.size() && (!from || !to)) throw LogError("segment " + text + ": unknown label");
  return s;
}

struct Occurrence {
  std::string pid;
  std::size_t from;
  std::size_t to;
};

inline std::vector<Occurrence> segment_occurrences(const MultiEntityLog& log, const Segment& seg) {
  std::vector<Occurrence> out;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> by_case;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& e = log.events()[i];
    if (!e.pid) continue;
    if (!by_case.count(*e.pid)) order.push_back(*e.pid);
    by_case[*e.pid].push_back(i);
  }
  for (const auto& pid : order) {
    auto idx = by_case[pid];
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      auto ta = point_time(log.events()[a]), tb = point_time(log.events()[b]);
      return ta && tb && *ta < *tb;
    });
    if (seg.qid) {
      std::vector<std::size_t> hits;
      for (auto i : idx)
        if (log.events()[i].qid == seg.qid) hits.push_back(i);
      for (std::size_t k = 0; k + 1 < hits.size(); k += 2) out.push_back({pid, hits[k], hits[k + 1]});
      continue;
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (log.events()[idx[k]].act != seg.from) continue;
      for (std::size_t j = k + 1; j < idx.size(); ++j)
        if (log.events()[idx[j]].act == seg.to) {
          out.push_back({pid, idx[k], idx[j]});
          break;
        }
    }
  }
  return out;
}

struct LoadPoint {
  Millis window_start;
  double items_per_minute;
};

// Cases whose segment occurrence overlaps each window [start, start + window), scaled to one minute.
inline std::vector<LoadPoint> load_series(const MultiEntityLog& log, const Segment& seg, Millis window, Millis from,
                                          Millis to) {
  if (window <= 0) throw LogError("window must be positive");
  std::vector<LoadPoint> out;
  for (Millis w = from; w < to; w += window) out.push_back({w, 0});
  double scale = 60000.0 / static_cast<double>(window);
  for (const auto& o : segment_occurrences(log, seg)) {
    auto a = point_time(log.events()[o.from]), b = point_time(log.events()[o.to]);
    if (!a || !b) continue;
    for (auto& p : out)
      if (*a < p.window_start + window && *b >= p.window_start) p.items_per_minute += scale;
  }
  return out;
}

inline std::pair<Millis, Millis> time_range(const MultiEntityLog& log, Millis window) {
  std::optional<Millis> lo, hi;
  for (const auto& e : log.events())
    if (auto t = point_time(e)) {
      lo = lo ? std::min(*lo, *t) : *t;
      hi = hi ? std::max(*hi, *t) : *t;
    }
  if (!lo) return {0, 0};
  Millis start = *lo - ((*lo % window) + window) % window;
  return {start, *hi + 1};
}

inline std::vector<LoadPoint> load_series(const MultiEntityLog& log, const Segment& seg, Millis window) {
  auto [from, to] = time_range(log, window);
  return load_series(log, seg, window, from, to);
}

struct LoadComparison {
  double mae = 0;
  double max_load = 0;
  double relative = 0;  // mae / max_load
  std::size_t truth_peak = 0;
  std::size_t repaired_peak = 0;
};

inline LoadComparison compare_load(const std::vector<LoadPoint>& truth, const std::vector<LoadPoint>& repaired) {
  if (truth.size() != repaired.size()) throw LogError("load series cover different windows");
  LoadComparison c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    c.mae += std::abs(truth[i].items_per_minute - repaired[i].items_per_minute);
    if (truth[i].items_per_minute > truth[c.truth_peak].items_per_minute) c.truth_peak = i;
    if (repaired[i].items_per_minute > repaired[c.repaired_peak].items_per_minute) c.repaired_peak = i;
    c.max_load = std::max(c.max_load, truth[i].items_per_minute);
  }
  if (!truth.empty()) c.mae /= static_cast<double>(truth.size());
  c.relative = c.max_load > 0 ? c.mae / c.max_load : 0;
  return c;
}

inline void write_load(std::ostream& out, const std::vector<LoadPoint>& series) {
  csv::write_row(out, {"window_start", "items_per_minute"});
  for (const auto& p : series) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", p.items_per_minute);
    csv::write_row(out, {format_time(p.window_start), buf});
  }
}

inline void spectrum_export(std::ostream& out, const MultiEntityLog& log, const std::vector<Segment>& segments) {
  bool intervals = log.has_intervals();
  csv::Row header{"pid", "segment", "t_start", "t_end"};
  if (intervals) header.insert(header.end(), {"tmin_start", "tmax_start", "tmin_end", "tmax_end"});
  csv::write_row(out, header);
  auto fmt = [](const std::optional<Millis>& t) { return t ? format_time(*t) : std::string(); };
  for (const auto& seg : segments)
    for (const auto& o : segment_occurrences(log, seg)) {
      const auto& a = log.events()[o.from];
      const auto& b = log.events()[o.to];
      csv::Row row{o.pid, seg.name(), fmt(point_time(a)), fmt(point_time(b))};
      if (intervals) row.insert(row.end(), {fmt(a.tmin), fmt(a.tmax), fmt(b.tmin), fmt(b.tmax)});
      csv::write_row(out, row);
    }
}

}  // namespace pqr
